#include <doctest.h>

#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "mixtraffic/errors.hpp"
#include "mixtraffic/io.hpp"
#include "mixtraffic/protocol.hpp"
#include "support.hpp"

using namespace mixtraffic;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

// Runs the CLI with stderr folded into stdout.
CommandResult run_cli(const std::string& args) {
  const std::string command = std::string(MIXTRAFFIC_CLI) + " " + args + " 2>&1";
  CommandResult r;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mixtraffic_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_short_config(const fs::path& dir, const std::string& env, int warmup, int horizon) {
  const auto path = dir / (env + ".json");
  write_file(path, json{{"env", env}, {"warmup", warmup}, {"horizon", horizon}}.dump());
  return path;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

std::size_t line_count(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

// Server on one end of a socketpair, client on the other.
struct Loopback {
  int fds[2] = {-1, -1};
  std::thread server;
  std::size_t handled = 0;

  Loopback() {
    REQUIRE(socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
    server = std::thread([this] { handled = serve_fd(fds[1], fds[1]); });
  }
  ~Loopback() {
    shutdown(fds[0], SHUT_WR);
    if (server.joinable()) server.join();
    close(fds[0]);
    close(fds[1]);
  }
  ProtocolClient client() const { return ProtocolClient(fds[0], fds[0]); }
};

}  // namespace

TEST_CASE("PGM encoding is bit exact and round-trips") {
  std::vector<std::uint8_t> pixels(kImagePixels);
  for (int p = 0; p < kImagePixels; ++p) pixels[p] = static_cast<std::uint8_t>((p * 85) % 256);
  const std::string bytes = encode_pgm(pixels, kImageSide, kImageSide);
  CHECK(bytes.substr(0, 13) == "P5\n84 84\n255\n");
  CHECK(bytes.size() == 13 + kImagePixels);
  const GrayImage back = decode_pgm(bytes);
  CHECK(back.width == 84);
  CHECK(back.height == 84);
  CHECK(back.pixels == pixels);
  CHECK_THROWS_AS(decode_pgm("P2\n1 1\n255\n0"), DomainError);
  CHECK_THROWS_AS(decode_pgm(bytes.substr(0, bytes.size() - 1)), DomainError);
  CHECK_THROWS_AS(encode_pgm(pixels, 10, 10), DomainError);
}

TEST_CASE("raw tensor layout and round trip") {
  std::vector<std::uint8_t> data(2 * 3 * 4);
  for (std::size_t k = 0; k < data.size(); ++k) data[k] = static_cast<std::uint8_t>(k);
  const std::string bytes = encode_tensor(data, 2, 3, 4);
  const std::string expected_header("MXTR\0\0\0\x02\0\0\0\x03\0\0\0\x04", 16);
  CHECK(bytes.substr(0, 16) == expected_header);
  CHECK(bytes.substr(16) == std::string(data.begin(), data.end()));
  const Tensor t = decode_tensor(bytes);
  CHECK(t.slices == 2);
  CHECK(t.rows == 3);
  CHECK(t.cols == 4);
  CHECK(t.data == data);
  CHECK_THROWS_AS(decode_tensor("MXTX" + bytes.substr(4)), DomainError);
  CHECK_THROWS_AS(decode_tensor(bytes + "x"), DomainError);
}

TEST_CASE("base64 matches the RFC 4648 test vectors") {
  const auto enc = [](std::string_view s) {
    return base64_encode(std::vector<std::uint8_t>(s.begin(), s.end()));
  };
  const auto dec = [](std::string_view s) {
    const auto bytes = base64_decode(s);
    return std::string(bytes.begin(), bytes.end());
  };
  const std::vector<std::pair<std::string, std::string>> vectors{
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="},
      {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, coded] : vectors) {
    CHECK(enc(plain) == coded);
    CHECK(dec(coded) == plain);
  }
  std::vector<std::uint8_t> all(256);
  for (int k = 0; k < 256; ++k) all[k] = static_cast<std::uint8_t>(k);
  CHECK(base64_decode(base64_encode(all)) == all);
  CHECK_THROWS_AS(base64_decode("Zm9"), DomainError);
  CHECK_THROWS_AS(base64_decode("Zm9*"), DomainError);
  CHECK_THROWS_AS(base64_decode("Zg==Zg=="), DomainError);
}

TEST_CASE("doubles print in shortest round-trip form") {
  for (double x : {0.1, 1.0 / 3.0, 1447.2, -5.25, 1e-300, 123456789.125}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("CSV rows must match the header") {
  CsvWriter csv({"a", "b"});
  csv.cell(1LL).cell(2.5);
  csv.end_row();
  CHECK(csv.text() == "a,b\n1,2.5\n");
  csv.cell(1LL);
  CHECK_THROWS_AS(csv.end_row(), LayoutError);
  CsvWriter wide({"only"});
  wide.cell(1LL);
  CHECK_THROWS_AS(wide.cell(2LL), LayoutError);
}

TEST_CASE("frames carry a big-endian length prefix") {
  CHECK(encode_frame("abc") == std::string("\0\0\0\x03" "abc", 7));
  CHECK(encode_frame(std::string(300, 'x')).substr(0, 4) == std::string("\0\0\x01\x2c", 4));
  int p[2];
  REQUIRE(pipe(p) == 0);
  write_frame(p[1], "{\"cmd\":\"close\"}");
  write_frame(p[1], "");
  close(p[1]);
  CHECK(read_frame(p[0]) == std::optional<std::string>("{\"cmd\":\"close\"}"));
  CHECK(read_frame(p[0]) == std::optional<std::string>(""));
  CHECK_FALSE(read_frame(p[0]).has_value());
  close(p[0]);
  REQUIRE(pipe(p) == 0);
  const std::string truncated = encode_frame("hello").substr(0, 7);
  REQUIRE(write(p[1], truncated.data(), truncated.size()) == static_cast<ssize_t>(truncated.size()));
  close(p[1]);
  CHECK_THROWS(read_frame(p[0]));
  close(p[0]);
}

TEST_CASE("session answers reset, step and close") {
  Session session;
  json reply = session.handle({{"cmd", "step"}, {"actions", {0.0}}});
  CHECK(reply["ok"] == false);
  reply = session.handle({{"cmd", "reset"}, {"config", {{"env", "ring"}, {"warmup", 10}, {"horizon", 3}}}});
  REQUIRE(reply["ok"] == true);
  CHECK(reply["obs"]["kind"] == "image");
  CHECK(reply["obs"]["shape"] == json::array({1, 84, 84}));
  CHECK(base64_decode(reply["obs"]["data"].get<std::string>()).size() == 7056);
  CHECK(reply["action"]["arity"] == 1);
  reply = session.handle({{"cmd", "step"}, {"actions", {0.0, 0.0}}});
  CHECK(reply["ok"] == false);
  CHECK(reply["error"].get<std::string>().find("expected 1") != std::string::npos);
  reply = session.handle_text("{\"cmd\": \"step\", \"actions\": [0.0");
  CHECK(reply["ok"] == false);
  reply = session.handle({{"cmd", "step"}, {"actions", {"fast"}}});
  CHECK(reply["ok"] == false);
  reply = session.handle({{"cmd", "dance"}});
  CHECK(reply["ok"] == false);
  reply = session.handle({{"cmd", "reset"}, {"config", {{"env", "ring"}, {"horizn", 3}}}});
  CHECK(reply["ok"] == false);
  CHECK(reply["field"] == "horizn");
  // The session still holds its previous environment.
  for (int k = 0; k < 3; ++k) {
    reply = session.handle({{"cmd", "step"}, {"actions", {0.0}}});
    REQUIRE(reply["ok"] == true);
    CHECK(reply["done"] == (k == 2));
  }
  reply = session.handle({{"cmd", "step"}, {"actions", {0.0}}});
  CHECK(reply["ok"] == false);
  reply = session.handle({{"cmd", "reset"}, {"seed", 4}});
  CHECK(reply["ok"] == true);
  reply = session.handle({{"cmd", "close"}});
  CHECK(reply["ok"] == true);
  CHECK(session.closed());
}

TEST_CASE("precise observations travel as vectors") {
  Session session;
  const json reply = session.handle(
      {{"cmd", "reset"}, {"config", {{"env", "bottleneck"}, {"observation", {{"mode", "precise"}}}}}});
  REQUIRE(reply["ok"] == true);
  CHECK(reply["obs"]["kind"] == "vector");
  CHECK(reply["obs"]["data"].size() == 13);
  const Observation obs = observation_from_json(reply["obs"]);
  CHECK(obs.vector.size() == 13);
}

TEST_CASE("served episodes match in-process episodes and survive malformed frames") {
  Loopback loop;
  ProtocolClient client = loop.client();
  const json config{{"env", "merge"}, {"warmup", 300}, {"horizon", 120}, {"seed", 6}};
  json reply = client.request({{"cmd", "reset"}, {"config", config}});
  REQUIRE(reply["ok"] == true);

  // A frame that is not JSON gets an error reply; the connection stays usable.
  write_frame(loop.fds[0], "not json at all");
  const auto raw = read_frame(loop.fds[0]);
  REQUIRE(raw.has_value());
  CHECK(json::parse(*raw)["ok"] == false);

  Environment env(config_from_json(config));
  Observation local_obs = env.reset();
  CHECK(observation_from_json(reply["obs"]) == local_obs);
  for (int k = 0; k < 120; ++k) {
    std::vector<double> actions(5);
    for (int s = 0; s < 5; ++s) actions[s] = std::cos(0.07 * k + s) * 0.9;
    reply = client.request({{"cmd", "step"}, {"actions", actions}});
    REQUIRE(reply["ok"] == true);
    const StepResult local = env.step(actions);
    CHECK(reply["reward"].get<double>() == local.reward);
    CHECK(reply["done"].get<bool>() == local.done);
    CHECK(observation_from_json(reply["obs"]) == local.observation);
    CHECK(info_from_json(reply["info"]) == local.info);
  }
  reply = client.request({{"cmd", "close"}});
  CHECK(reply["closed"] == true);
  loop.server.join();
  CHECK(loop.handled == 123);
}

TEST_CASE("a half-closed client shuts the server down cleanly") {
  Loopback loop;
  ProtocolClient client = loop.client();
  CHECK(client.request({{"cmd", "reset"}, {"config", {{"env", "ring"}, {"warmup", 0}}}})["ok"] == true);
  shutdown(loop.fds[0], SHUT_WR);
  loop.server.join();
  CHECK(loop.handled == 1);
}

TEST_CASE("CLI: usage errors exit with code 2") {
  const auto dir = scratch_dir("cli_errors");
  auto r = run_cli("run-baseline --config " + (dir / "missing.json").string() + " --seeds 0 --out " + dir.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find((dir / "missing.json").string()) != std::string::npos);
  r = run_cli("run-baseline --env roundabout --out " + dir.string());
  CHECK(r.exit_code == 2);
  r = run_cli("sweep --env roundabout --out " + dir.string());
  CHECK(r.exit_code == 2);
  r = run_cli("run-baseline --no-such-flag");
  CHECK(r.exit_code == 2);
  write_file(dir / "bad.json", R"({"env": "ring", "idm": {"v_0": 3}})");
  r = run_cli("run-baseline --config " + (dir / "bad.json").string() + " --out " + dir.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("idm.v_0") != std::string::npos);
  r = run_cli("render --rollout " + (dir / "none.jsonl").string() + " --out " + dir.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("none.jsonl") != std::string::npos);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("CLI: baselines are deterministic and pin their CSV headers") {
  const auto dir = scratch_dir("cli_baseline");
  const auto config = write_short_config(dir, "intersection", 200, 100);
  for (const char* out : {"a", "b"}) {
    const auto r = run_cli("run-baseline --config " + config.string() + " --seeds 0-2 --out " + (dir / out).string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("avg_velocity") != std::string::npos);
  }
  for (const char* name : {"metrics.csv", "time_space.csv", "summary.csv"}) {
    CAPTURE(name);
    const std::string a = read_file(dir / "a" / name);
    CHECK(a == read_file(dir / "b" / name));
    CHECK(fixture::matches_golden(std::string("header_") + name, first_line(a) + "\n"));
  }
  CHECK(line_count(read_file(dir / "a" / "metrics.csv")) == 4);
  CHECK(line_count(read_file(dir / "a" / "summary.csv")) == 5);
}

TEST_CASE("CLI: rollouts render one PGM per slot with padded slots blank") {
  const auto dir = scratch_dir("cli_render");
  const auto config = write_short_config(dir, "bottleneck", 400, 20);
  auto r = run_cli("run-policy --config " + config.string() + " --policy hv-mimic --seeds 0 --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  const auto rollout = dir / "rollout_seed0.jsonl";
  REQUIRE(fs::exists(rollout));
  const RolloutRecord rec = read_rollout(rollout);
  REQUIRE_FALSE(rec.steps.empty());
  const auto& step = rec.steps.back();
  std::vector<bool> used(15, false);
  for (const auto& v : step.vehicles) {
    if (v.slot >= 0) used[v.slot] = true;
  }
  REQUIRE(std::count(used.begin(), used.end(), false) > 0);
  const std::string range = std::to_string(step.step);
  r = run_cli("render --rollout " + rollout.string() + " --steps " + range + " --out " + (dir / "f1").string());
  REQUIRE(r.exit_code == 0);
  r = run_cli("render --rollout " + rollout.string() + " --steps " + range + " --out " + (dir / "f2").string());
  REQUIRE(r.exit_code == 0);
  int frames = 0;
  for (const auto& entry : fs::directory_iterator(dir / "f1")) {
    ++frames;
    const std::string bytes = read_file(entry.path());
    CHECK(bytes == read_file(dir / "f2" / entry.path().filename()));
    const GrayImage img = decode_pgm(bytes);
    CHECK(img.width == 84);
    CHECK(img.height == 84);
    const std::string name = entry.path().filename().string();
    const int slot = std::stoi(name.substr(name.find("slot") + 4)) - 1;
    if (!used[slot]) {
      CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](std::uint8_t p) { return p == 0; }));
    } else {
      CHECK(std::count(img.pixels.begin(), img.pixels.end(), 255) > 0);
    }
  }
  CHECK(frames == 15);

  const auto ring = write_short_config(dir, "ring", 50, 5);
  REQUIRE(run_cli("run-policy --config " + ring.string() + " --policy zero --seeds 1 --out " + (dir / "ring").string())
              .exit_code == 0);
  const RolloutRecord ring_rec = read_rollout(dir / "ring" / "rollout_seed1.jsonl");
  r = run_cli("render --rollout " + (dir / "ring" / "rollout_seed1.jsonl").string() + " --steps " +
              std::to_string(ring_rec.steps.front().step) + " --out " + (dir / "ring_frames").string());
  REQUIRE(r.exit_code == 0);
  CHECK(std::distance(fs::directory_iterator(dir / "ring_frames"), fs::directory_iterator{}) == 1);
}

TEST_CASE("CLI: sweeps write one row per grid point") {
  const auto dir = scratch_dir("cli_sweep");
  write_file(dir / "merge.json", json{{"config", {{"env", "merge"}, {"warmup", 100}, {"horizon", 50}}},
                                      {"seeds", {0}}}
                                     .dump());
  auto r = run_cli("sweep --sweep " + (dir / "merge.json").string() + " --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  const std::string csv = read_file(dir / "sweep.csv");
  CHECK(line_count(csv) == 1 + 5);
  CHECK(fixture::matches_golden("header_sweep.csv", first_line(csv) + "\n"));
  write_file(dir / "ring.json", json{{"config", {{"env", "ring"}, {"warmup", 100}, {"horizon", 50}}},
                                     {"parameter", "circumference"},
                                     {"values", {210, 250, 290}},
                                     {"seeds", {0, 1}}}
                                    .dump());
  r = run_cli("sweep --sweep " + (dir / "ring.json").string() + " --out " + (dir / "ring").string());
  REQUIRE(r.exit_code == 0);
  CHECK(line_count(read_file(dir / "ring" / "sweep.csv")) == 1 + 3);
}
