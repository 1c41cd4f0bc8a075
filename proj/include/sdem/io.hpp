#pragma once

#include "sdem/flow.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace sdem::io {

/// Columnar binary dump:
///   "SDEM" | u32 version | u64 config hash | u32 column count |
///   per column: u32 name length | name bytes | u64 value count | f64 values
/// All integers and doubles little-endian.
inline constexpr std::uint32_t kDumpVersion = 1;

struct Column {
  std::string name;
  std::vector<double> values;
};

struct Dump {
  std::uint32_t version = kDumpVersion;
  std::uint64_t config_hash = 0;
  std::vector<Column> columns;

  [[nodiscard]] const Column& column(const std::string& name) const;
};

void write_dump(std::ostream& os, const Dump& dump);
Dump read_dump(std::istream& is);

/// Columns: path, flagged, sup_v_norm, int_g, xi_T[i], V_T[i,j]; with
/// retained trajectories also xi[i] and V[i,j] laid out path-major
/// (paths x (steps+1)).
Dump ensemble_dump(const Ensemble& ensemble, std::uint64_t config_hash);

/// Shortest round-trip text form of a double ("%.17g", "inf", "nan").
std::string format_double(double v);

nlohmann::json report_json(const EstimatorReport& r);

}  // namespace sdem::io
