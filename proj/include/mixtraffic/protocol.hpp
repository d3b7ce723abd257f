#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mixtraffic/env.hpp"

namespace mixtraffic {

// Frames are a 4-byte big-endian body length followed by a UTF-8 JSON body.
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

std::string encode_frame(std::string_view body);

// Blocking frame IO over a file descriptor. read_frame returns nullopt on a
// clean end of stream before any header byte and throws on a truncated frame.
std::optional<std::string> read_frame(int fd);
void write_frame(int fd, std::string_view body);

nlohmann::json observation_to_json(const Observation& obs);
Observation observation_from_json(const nlohmann::json& doc);

// One episode stream: answers reset, step and close requests.
class Session {
 public:
  // Every request gets exactly one response; failures become {"ok": false, "error": ...}.
  nlohmann::json handle(const nlohmann::json& request);
  nlohmann::json handle_text(std::string_view body);
  bool closed() const { return closed_; }

 private:
  nlohmann::json respond(const StepResult& result) const;

  std::unique_ptr<Environment> env_;
  bool closed_ = false;
};

// Serves one client until close or end of stream. Returns the number of
// requests handled.
std::size_t serve_fd(int in_fd, int out_fd);
// Listens on a unix socket path and serves connections one after another
// until a client sends close. The socket file is removed on exit.
void serve_unix(const std::string& path, bool once = true);

class ProtocolClient {
 public:
  ProtocolClient(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  static int connect_unix(const std::string& path);
  nlohmann::json request(const nlohmann::json& body);

 private:
  int read_fd_;
  int write_fd_;
};

}  // namespace mixtraffic
