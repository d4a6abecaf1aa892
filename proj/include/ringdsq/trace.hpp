#pragma once

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ringdsq/format.hpp"
#include "ringdsq/sim.hpp"

namespace ringdsq::trace {

inline constexpr const char* kHeader = "step,id,kind,position,lane,speed,maneuver";

struct Row {
  long step = 0;
  int id = 0;
  char kind = 'H';  // 'C' or 'H'
  double position = 0;
  int lane = 0;
  double speed = 0;
  bool maneuver = false;
};

/// One CSV row per vehicle for the given step.
inline void write_step(std::ostream& out, long step, const sim::WorldState& w) {
  for (const sim::Vehicle& v : w.vehicles) {
    out << step << ',' << v.id << ','
        << (v.kind == sim::VehicleKind::Cav ? 'C' : 'H') << ','
        << fmt_double(v.position) << ',' << v.lane << ',' << fmt_double(v.speed)
        << ',' << (v.maneuver ? 1 : 0) << '\n';
  }
}

inline std::vector<Row> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    throw std::runtime_error("trace '" + path + "' has an unexpected header");
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    Row r;
    std::getline(ls, field, ',');
    r.step = std::stol(field);
    std::getline(ls, field, ',');
    r.id = std::stoi(field);
    std::getline(ls, field, ',');
    r.kind = field.empty() ? 'H' : field[0];
    std::getline(ls, field, ',');
    r.position = parse_double(field);
    std::getline(ls, field, ',');
    r.lane = std::stoi(field);
    std::getline(ls, field, ',');
    r.speed = parse_double(field);
    std::getline(ls, field, ',');
    r.maneuver = field == "1";
    rows.push_back(r);
  }
  return rows;
}

/// Text rendering of a recorded episode: one ASCII strip per sampled step,
/// lanes stacked top (leftmost) to bottom (rightmost).
inline void render_trace(const std::vector<Row>& rows, std::ostream& out,
                         double track_length, int num_lanes, long stride = 10,
                         int columns = 80) {
  if (rows.empty()) {
    out << "(empty trace)\n";
    return;
  }
  long step = rows.front().step;
  std::vector<Row> frame;
  auto flush = [&](long s) {
    if (s % stride != 0) return;
    std::vector<std::string> lanes(num_lanes, std::string(columns, '.'));
    const Row* cav = nullptr;
    for (const Row& r : frame) {
      const int col = std::clamp(
          static_cast<int>(r.position / track_length * columns), 0, columns - 1);
      if (r.lane < 0 || r.lane >= num_lanes) continue;
      lanes[r.lane][col] = r.kind == 'C' ? 'C' : (r.maneuver ? '+' : 'o');
      if (r.kind == 'C') cav = &r;
    }
    out << "step " << s;
    if (cav)
      out << "  cav: lane " << cav->lane << "  pos " << fmt_double(cav->position)
          << " m  v " << fmt_double(cav->speed) << " m/s";
    out << '\n';
    for (int l = num_lanes - 1; l >= 0; --l)
      out << "  lane " << l << " |" << lanes[l] << "|\n";
  };
  for (const Row& r : rows) {
    if (r.step != step) {
      flush(step);
      frame.clear();
      step = r.step;
    }
    frame.push_back(r);
  }
  flush(step);
}

}  // namespace ringdsq::trace
