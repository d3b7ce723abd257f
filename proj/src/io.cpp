#include "mixtraffic/io.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

std::string encode_pgm(std::span<const std::uint8_t> pixels, int width, int height) {
  if (width <= 0 || height <= 0 || pixels.size() != static_cast<std::size_t>(width) * height) {
    throw DomainError("pixel count does not match the image dimensions");
  }
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  return out;
}

void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, int width, int height) {
  write_file(path, encode_pgm(pixels, width, height));
}

GrayImage decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (token() != "P5") throw DomainError("not a binary PGM (P5) image");
  GrayImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    if (std::stoi(token()) != 255) throw DomainError("only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw DomainError("malformed PGM header");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (img.width <= 0 || img.height <= 0 || bytes.size() - std::min(pos, bytes.size()) != n) {
    throw DomainError("PGM raster size does not match its header");
  }
  img.pixels.assign(bytes.begin() + pos, bytes.end());
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v = (v << 8) | static_cast<std::uint8_t>(bytes[at + k]);
  return v;
}

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string encode_tensor(std::span<const std::uint8_t> data, std::uint32_t slices, std::uint32_t rows,
                          std::uint32_t cols) {
  if (data.size() != static_cast<std::size_t>(slices) * rows * cols) {
    throw DomainError("tensor size does not match its dimensions");
  }
  std::string out(kTensorMagic);
  put_u32(out, slices);
  put_u32(out, rows);
  put_u32(out, cols);
  out.append(reinterpret_cast<const char*>(data.data()), data.size());
  return out;
}

Tensor decode_tensor(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != kTensorMagic) throw DomainError("not a raw tensor file");
  Tensor t;
  t.slices = get_u32(bytes, 4);
  t.rows = get_u32(bytes, 8);
  t.cols = get_u32(bytes, 12);
  if (bytes.size() - 16 != static_cast<std::size_t>(t.slices) * t.rows * t.cols) {
    throw DomainError("tensor payload does not match its header");
  }
  t.data.assign(bytes.begin() + 16, bytes.end());
  return t;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    for (int shift = 18; shift >= 0; shift -= 6) out.push_back(kAlphabet[(v >> shift) & 63]);
  }
  const std::size_t rest = data.size() - i;
  if (rest > 0) {
    std::uint32_t v = data[i] << 16;
    if (rest == 2) v |= data[i + 1] << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw DomainError("base64 length must be a multiple of 4");
  std::array<int, 256> table;
  table.fill(-1);
  for (std::size_t k = 0; k < kAlphabet.size(); ++k) table[static_cast<unsigned char>(kAlphabet[k])] = static_cast<int>(k);
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      int d = 0;
      if (ch == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
      } else {
        d = table[static_cast<unsigned char>(ch)];
        if (d < 0 || pad > 0) throw DomainError("invalid base64 character");
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  for (const auto& h : header) cell(h);
  end_row();
}

void CsvWriter::separator() {
  if (filled_ >= columns_) throw LayoutError("too many CSV cells in a row");
  if (filled_ > 0) out_.push_back(',');
  ++filled_;
}

CsvWriter& CsvWriter::cell(double value) {
  separator();
  out_ += format_double(value);
  return *this;
}

CsvWriter& CsvWriter::cell(long long value) {
  separator();
  out_ += std::to_string(value);
  return *this;
}

CsvWriter& CsvWriter::cell(std::string_view text) {
  separator();
  out_ += text;
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != columns_) throw LayoutError("CSV row has " + std::to_string(filled_) + " of " +
                                             std::to_string(columns_) + " cells");
  out_.push_back('\n');
  filled_ = 0;
}

}  // namespace mixtraffic
