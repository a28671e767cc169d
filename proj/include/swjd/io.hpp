#pragma once

#include "swjd/coupling.hpp"
#include "swjd/generator.hpp"
#include "swjd/simulate.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace swjd {

/// Shortest text that round-trips the double ("%.17g" fallback); "inf", "-inf", "nan" otherwise.
std::string format_double(double v);

/// Header t,x1..xd,k; one row per recorded grid point.
std::string path_csv(const PathRecord& path);
/// Header t,x1..xd,xt1..xtd,k,kt,dist.
std::string coupled_csv(const CoupledPathRecord& path);
/// Header x1..xd,k,generator,bracket,margin,error.
std::string drift_csv(const DriftReport& report);

/// Binary event log of one path. Little-endian:
///   "SWJDEVT1", u32 version, u32 dim, u32 mark_dim, u64 seed, u64 n_switch, u64 n_jump,
///   then n_switch records (f64 time, u32 from, u32 to) and
///   n_jump records (f64 time, f64 mark[mark_dim], f64 displacement[dim]).
std::string event_log(const PathRecord& path, int dim, int mark_dim);

struct EventLog {
  std::uint32_t version = 0;
  int dim = 0;
  int mark_dim = 0;
  std::uint64_t seed = 0;
  std::vector<SwitchEvent> switch_events;
  std::vector<JumpEvent> jump_events;
};
/// Throws InvalidInput on a bad magic, an unknown version, or truncated data.
EventLog read_event_log(std::string_view bytes);

}  // namespace swjd
