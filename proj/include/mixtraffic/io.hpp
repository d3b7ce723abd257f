#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixtraffic/observation.hpp"

namespace mixtraffic {

// Binary PGM: "P5\n<w> <h>\n255\n" followed by w*h bytes, row-major.
std::string encode_pgm(std::span<const std::uint8_t> pixels, int width, int height);
void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, int width = kImageSide,
               int height = kImageSide);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};
GrayImage decode_pgm(std::string_view bytes);
GrayImage read_pgm(const std::filesystem::path& path);

// Raw tensor file: magic "MXTR", then slices, rows, cols as big-endian
// uint32, then the bytes slice-major and row-major.
inline constexpr std::string_view kTensorMagic = "MXTR";
std::string encode_tensor(std::span<const std::uint8_t> data, std::uint32_t slices, std::uint32_t rows,
                          std::uint32_t cols);
struct Tensor {
  std::uint32_t slices = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> data;
};
Tensor decode_tensor(std::string_view bytes);

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Shortest round-trip decimal form.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Minimal CSV writer: fields are numeric or plain identifiers, never quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& cell(double value);
  CsvWriter& cell(long long value);
  CsvWriter& cell(std::string_view text);
  void end_row();
  const std::string& text() const { return out_; }
  void save(const std::filesystem::path& path) const { write_file(path, out_); }

 private:
  void separator();
  std::size_t columns_;
  std::size_t filled_ = 0;
  std::string out_;
};

}  // namespace mixtraffic
