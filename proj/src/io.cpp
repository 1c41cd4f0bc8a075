#include "sdem/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace sdem::io {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'D', 'E', 'M'};

template <typename U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw Error("dump: truncated input");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

const Column& Dump::column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw Error("dump: no column '" + name + "'");
}

void write_dump(std::ostream& os, const Dump& dump) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, dump.version);
  put_le<std::uint64_t>(os, dump.config_hash);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(dump.columns.size()));
  for (const auto& c : dump.columns) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.name.size()));
    os.write(c.name.data(), static_cast<std::streamsize>(c.name.size()));
    put_le<std::uint64_t>(os, c.values.size());
    for (double v : c.values) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw Error("dump: write failed");
}

Dump read_dump(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw Error("dump: bad magic bytes");
  Dump dump;
  dump.version = get_le<std::uint32_t>(is);
  if (dump.version != kDumpVersion) throw Error("dump: unsupported version " + std::to_string(dump.version));
  dump.config_hash = get_le<std::uint64_t>(is);
  const auto count = get_le<std::uint32_t>(is);
  dump.columns.resize(count);
  for (auto& c : dump.columns) {
    const auto len = get_le<std::uint32_t>(is);
    c.name.resize(len);
    if (!is.read(c.name.data(), len)) throw Error("dump: truncated column name");
    const auto values = get_le<std::uint64_t>(is);
    c.values.resize(values);
    for (auto& v : c.values) v = std::bit_cast<double>(get_le<std::uint64_t>(is));
  }
  return dump;
}

Dump ensemble_dump(const Ensemble& ensemble, std::uint64_t config_hash) {
  Dump dump;
  dump.config_hash = config_hash;
  const auto& paths = ensemble.paths;
  if (paths.empty()) return dump;
  const auto n = paths.front().x0.size();
  const std::size_t count = paths.size();

  auto add = [&](std::string name, auto&& value_of) {
    Column c{std::move(name), {}};
    c.values.reserve(count);
    for (const auto& p : paths) c.values.push_back(value_of(p));
    dump.columns.push_back(std::move(c));
  };
  add("path", [](const FlowPath& p) { return static_cast<double>(p.path_index); });
  add("flagged", [](const FlowPath& p) { return p.flagged ? 1.0 : 0.0; });
  add("sup_v_norm", [](const FlowPath& p) { return p.sup_v_norm; });
  add("int_g", [](const FlowPath& p) { return p.int_g; });
  for (Eigen::Index i = 0; i < n; ++i) {
    add("xi_T[" + std::to_string(i) + "]", [i](const FlowPath& p) { return p.xi_T[i]; });
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      add("V_T[" + std::to_string(i) + "," + std::to_string(j) + "]",
          [i, j](const FlowPath& p) { return p.V_T(i, j); });
    }
  }
  if (paths.front().retained()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Column c{"xi[" + std::to_string(i) + "]", {}};
      for (const auto& p : paths) {
        for (Eigen::Index k = 0; k < p.xi.cols(); ++k) c.values.push_back(p.xi(i, k));
      }
      dump.columns.push_back(std::move(c));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        Column c{"V[" + std::to_string(i) + "," + std::to_string(j) + "]", {}};
        for (const auto& p : paths) {
          for (Eigen::Index k = 0; k < p.V.cols(); ++k) c.values.push_back(p.V(i + j * n, k));
        }
        dump.columns.push_back(std::move(c));
      }
    }
  }
  return dump;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json report_json(const EstimatorReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v)); };
  return {{"estimate", num(r.estimate)},
          {"se", num(r.se)},
          {"paths", r.paths},
          {"excluded", r.excluded},
          {"config_hash", hex64(r.config_hash)}};
}

}  // namespace sdem::io
