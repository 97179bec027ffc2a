#pragma once

// CSV emitters. Values are serialised with 17 significant decimal digits so
// every double survives the round trip and discontinuities reproduce
// exactly; rows are line-feed terminated with a mandatory header.

#include <cstdio>
#include <fstream>
#include <string>

#include "eic/hybridsim.hpp"

namespace eic {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_trajectory_csv(const std::string& path, const HybridTrajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "t";
  for (std::size_t i = 0; i < traj.state_dim; ++i) out << ",x_" << i;
  for (std::size_t i = 0; i < traj.state_dim; ++i) out << ",xc_" << i;
  for (std::size_t i = 0; i < traj.unit_count; ++i) out << ",z_" << i;
  out << "\n";
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    out << fmt17(traj.t[s]);
    for (double v : traj.x_at(s)) out << ',' << fmt17(v);
    for (double v : traj.xc_at(s)) out << ',' << fmt17(v);
    for (double v : traj.z_at(s)) out << ',' << fmt17(v);
    out << "\n";
  }
}

inline void write_events_csv(const std::string& path, const HybridTrajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "seq,t,unit\n";
  for (const auto& ev : traj.events)
    out << ev.seq << ',' << fmt17(ev.t) << ',' << ev.unit << "\n";
}

}  // namespace eic
