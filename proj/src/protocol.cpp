#include "mixtraffic/protocol.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "mixtraffic/errors.hpp"
#include "mixtraffic/io.hpp"

namespace mixtraffic {

using nlohmann::json;

std::string encode_frame(std::string_view body) {
  if (body.size() > kMaxFrameBytes) throw DomainError("frame body too large");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
  out.append(body);
  return out;
}

namespace {

// Reads exactly n bytes; returns the count read before end of stream.
std::size_t read_exact(int fd, char* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, buf + got, n - got);
    if (r == 0) break;
    if (r < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("read failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
  return got;
}

void write_all(int fd, const char* buf, std::size_t n) {
  std::size_t put = 0;
  while (put < n) {
    const ssize_t r = ::write(fd, buf + put, n - put);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("write failed: ") + std::strerror(errno));
    }
    put += static_cast<std::size_t>(r);
  }
}

json error_response(const std::string& message) { return {{"ok", false}, {"error", message}}; }

}  // namespace

std::optional<std::string> read_frame(int fd) {
  char head[4];
  const std::size_t got = read_exact(fd, head, 4);
  if (got == 0) return std::nullopt;
  if (got < 4) throw std::runtime_error("truncated frame header");
  std::uint32_t n = 0;
  for (char c : head) n = (n << 8) | static_cast<std::uint8_t>(c);
  if (n > kMaxFrameBytes) throw std::runtime_error("frame length " + std::to_string(n) + " exceeds the limit");
  std::string body(n, '\0');
  if (read_exact(fd, body.data(), n) != n) throw std::runtime_error("truncated frame body");
  return body;
}

void write_frame(int fd, std::string_view body) {
  const std::string frame = encode_frame(body);
  write_all(fd, frame.data(), frame.size());
}

json observation_to_json(const Observation& obs) {
  if (obs.is_image()) {
    return {{"kind", "image"}, {"shape", {obs.stack, kImageSide, kImageSide}}, {"data", base64_encode(obs.image)}};
  }
  return {{"kind", "vector"}, {"shape", {obs.vector.size()}}, {"data", obs.vector}};
}

Observation observation_from_json(const json& doc) {
  Observation obs;
  if (doc.at("kind") == "image") {
    obs.stack = doc.at("shape").at(0).get<int>();
    obs.image = base64_decode(doc.at("data").get<std::string>());
    if (obs.image.size() != static_cast<std::size_t>(obs.stack) * kImagePixels) {
      throw LayoutError("image payload does not match its shape");
    }
  } else {
    obs.vector = doc.at("data").get<std::vector<double>>();
  }
  return obs;
}

json Session::respond(const StepResult& r) const {
  return {{"ok", true},
          {"obs", observation_to_json(r.observation)},
          {"reward", r.reward},
          {"done", r.done},
          {"info", info_to_json(r.info)}};
}

json Session::handle_text(std::string_view body) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::parse_error& e) {
    return error_response(std::string("malformed request: ") + e.what());
  }
  return handle(request);
}

json Session::handle(const json& request) {
  try {
    if (!request.is_object() || !request.contains("cmd") || !request.at("cmd").is_string()) {
      return error_response("request needs a string field 'cmd'");
    }
    const std::string cmd = request.at("cmd").get<std::string>();
    if (cmd == "close") {
      closed_ = true;
      return {{"ok", true}, {"closed", true}};
    }
    if (cmd == "reset") {
      if (request.contains("config")) {
        env_ = std::make_unique<Environment>(config_from_json(request.at("config")));
      } else if (!env_) {
        return error_response("first reset needs a config");
      }
      const std::uint64_t seed =
          request.contains("seed") ? request.at("seed").get<std::uint64_t>() : env_->config().seed;
      StepResult r;
      r.observation = env_->reset(seed);
      r.done = env_->done();
      r.info = env_->current_info();
      json out = respond(r);
      const auto& a = env_->config().action;
      out["action"] = {{"arity", env_->action_arity()},
                       {"kind", a.kind == ActionKind::velocity ? "velocity" : "acceleration"},
                       {"lower", a.lower},
                       {"upper", a.upper}};
      out["config_hash"] = hash_hex(config_hash(env_->config()));
      return out;
    }
    if (cmd == "step") {
      if (!env_) return error_response("step before reset");
      if (!request.contains("actions") || !request.at("actions").is_array()) {
        return error_response("step needs an 'actions' list of " + std::to_string(env_->action_arity()) + " numbers");
      }
      std::vector<double> actions;
      for (const auto& a : request.at("actions")) {
        if (a.is_null()) {
          actions.push_back(std::nan(""));
        } else if (a.is_number()) {
          actions.push_back(a.get<double>());
        } else {
          return error_response("actions must be numbers");
        }
      }
      return respond(env_->step(actions));
    }
    return error_response("unknown cmd '" + cmd + "'");
  } catch (const ConfigError& e) {
    json out = error_response(e.what());
    if (!e.field().empty()) out["field"] = e.field();
    return out;
  } catch (const std::exception& e) {
    return error_response(e.what());
  }
}

std::size_t serve_fd(int in_fd, int out_fd) {
  Session session;
  std::size_t handled = 0;
  while (!session.closed()) {
    std::optional<std::string> body;
    try {
      body = read_frame(in_fd);
    } catch (const std::exception& e) {
      // The stream cannot be resynchronised after a bad header.
      write_frame(out_fd, error_response(e.what()).dump());
      break;
    }
    if (!body) break;
    write_frame(out_fd, session.handle_text(*body).dump());
    ++handled;
  }
  return handled;
}

namespace {

sockaddr_un unix_address(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) throw ConfigError("socket path too long", "endpoint");
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

}  // namespace

void serve_unix(const std::string& path, bool once) {
  const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error(std::string("socket failed: ") + std::strerror(errno));
  const sockaddr_un addr = unix_address(path);
  ::unlink(path.c_str());
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd, 1) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd);
    throw std::runtime_error("cannot listen on " + path + ": " + msg);
  }
  do {
    const int client = ::accept(fd, nullptr, nullptr);
    if (client < 0) {
      if (errno == EINTR) continue;
      break;
    }
    serve_fd(client, client);
    ::close(client);
  } while (!once);
  ::close(fd);
  ::unlink(path.c_str());
}

int ProtocolClient::connect_unix(const std::string& path) {
  const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error(std::string("socket failed: ") + std::strerror(errno));
  const sockaddr_un addr = unix_address(path);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd);
    throw std::runtime_error("cannot connect to " + path + ": " + msg);
  }
  return fd;
}

json ProtocolClient::request(const json& body) {
  write_frame(write_fd_, body.dump());
  const auto reply = read_frame(read_fd_);
  if (!reply) throw std::runtime_error("server closed the connection");
  return json::parse(*reply);
}

}  // namespace mixtraffic
