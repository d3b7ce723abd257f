#include "mixtraffic/rollout.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

using nlohmann::json;

bool StepInfo::operator==(const StepInfo& o) const {
  const bool same_mean = (std::isnan(mean_velocity) && std::isnan(o.mean_velocity)) || mean_velocity == o.mean_velocity;
  return same_mean && outflow == o.outflow && collision == o.collision && vehicles == o.vehicles &&
         controlled == o.controlled;
}

json vehicle_to_json(const VehicleState& v) {
  return json::array({v.id, to_string(v.cls), to_string(v.role), v.length, v.edge_id, v.lane_index, v.arc_pos,
                      v.velocity, v.last_accel, v.route, v.waiting, v.slot});
}

VehicleState vehicle_from_json(const json& row) {
  if (!row.is_array() || row.size() != 12) throw ConfigError("vehicle rows have 12 columns", "vehicles");
  VehicleState v;
  v.id = row[0].get<VehicleId>();
  v.cls = vehicle_class_from_string(row[1].get<std::string>());
  v.role = row[2].get<std::string>() == "rv" ? Role::rv : Role::hv;
  v.length = row[3].get<double>();
  v.edge_id = row[4].get<int>();
  v.lane_index = row[5].get<int>();
  v.arc_pos = row[6].get<double>();
  v.velocity = row[7].get<double>();
  v.last_accel = row[8].get<double>();
  v.route = row[9].get<int>();
  v.waiting = row[10].get<double>();
  v.slot = row[11].get<int>();
  return v;
}

json info_to_json(const StepInfo& info) {
  return {{"mean_velocity", std::isnan(info.mean_velocity) ? json(nullptr) : json(info.mean_velocity)},
          {"outflow", info.outflow},
          {"collision", info.collision},
          {"vehicles", info.vehicles},
          {"controlled", info.controlled}};
}

StepInfo info_from_json(const json& doc) {
  StepInfo info;
  const auto& mean = doc.at("mean_velocity");
  info.mean_velocity = mean.is_null() ? std::nan("") : mean.get<double>();
  info.outflow = doc.at("outflow").get<double>();
  info.collision = doc.at("collision").get<bool>();
  info.vehicles = doc.at("vehicles").get<int>();
  info.controlled = doc.at("controlled").get<int>();
  return info;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

json vehicles_json(const std::vector<VehicleState>& vehicles) {
  json rows = json::array();
  for (const auto& v : vehicles) rows.push_back(vehicle_to_json(v));
  return rows;
}

std::vector<VehicleState> vehicles_from(const json& rows) {
  std::vector<VehicleState> out;
  for (const auto& row : rows) out.push_back(vehicle_from_json(row));
  return out;
}

}  // namespace

void write_rollout(std::ostream& out, const RolloutRecord& r) {
  const json header = {{"kind", "header"},
                       {"version", r.header.version},
                       {"config_hash", hash_hex(r.header.config_hash)},
                       {"seed", r.header.seed},
                       {"network_scale", r.header.network_scale},
                       {"states", r.header.states},
                       {"warmup", r.header.warmup},
                       {"config", r.header.config},
                       {"initial", vehicles_json(r.initial)}};
  out << header.dump() << '\n';
  for (const auto& s : r.steps) {
    const json line = {{"kind", "step"},        {"step", s.step},     {"time", s.time},
                       {"control", s.control},  {"actions", s.actions}, {"reward", s.reward},
                       {"info", info_to_json(s.info)}, {"vehicles", vehicles_json(s.vehicles)}};
    out << line.dump() << '\n';
  }
  json exits = json::array();
  for (const auto& e : r.exits.entries()) exits.push_back(json::array({e.time, e.id}));
  out << json{{"kind", "exits"}, {"exits", exits}}.dump() << '\n';
}

void write_rollout(const std::filesystem::path& path, const RolloutRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_rollout(out, record);
}

RolloutRecord read_rollout(std::istream& in) {
  RolloutRecord r;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
      const std::string kind = doc.at("kind").get<std::string>();
      if (kind == "header") {
        r.header.version = doc.at("version").get<std::string>();
        r.header.config_hash = std::stoull(doc.at("config_hash").get<std::string>(), nullptr, 16);
        r.header.seed = doc.at("seed").get<std::uint64_t>();
        r.header.network_scale = doc.at("network_scale").get<double>();
        r.header.states = doc.at("states").get<bool>();
        r.header.warmup = doc.at("warmup").get<bool>();
        r.header.config = doc.at("config");
        r.initial = vehicles_from(doc.at("initial"));
        have_header = true;
      } else if (kind == "step") {
        StepRecord s;
        s.step = doc.at("step").get<std::int64_t>();
        s.time = doc.at("time").get<double>();
        s.control = doc.at("control").get<bool>();
        s.actions = doc.at("actions").get<std::vector<double>>();
        s.reward = doc.at("reward").get<double>();
        s.info = info_from_json(doc.at("info"));
        s.vehicles = vehicles_from(doc.at("vehicles"));
        r.steps.push_back(std::move(s));
      } else if (kind == "exits") {
        for (const auto& e : doc.at("exits")) r.exits.record(e.at(0).get<double>(), e.at(1).get<VehicleId>());
      } else {
        throw ConfigError("unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError("malformed rollout line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw ConfigError("rollout has no header line");
  return r;
}

RolloutRecord read_rollout(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open rollout file " + path.string());
  return read_rollout(in);
}

}  // namespace mixtraffic
