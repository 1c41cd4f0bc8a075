#include "sdem/fields.hpp"

#include "sdem/quadrature.hpp"
#include "sdem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace sdem {

using nlohmann::json;

bool growth_profile_consistent(const GrowthProfile& profile, const std::vector<double>& args) {
  if (!profile.psi1 || !profile.psi2) return false;
  std::vector<double> s = args;
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (profile.psi1(s[i + 1]) < profile.psi1(s[i])) return false;
    if (profile.psi2(s[i + 1]) < profile.psi2(s[i])) return false;
  }
  if (profile.linear) {
    for (double v : s) {
      if (profile.psi2(v) > profile.linear_c2 * (1.0 + v)) return false;
    }
  }
  return true;
}

VectorFieldSet::VectorFieldSet(std::size_t n, std::size_t m, CoeffFn coeffs, JacobianFn jacobians,
                               FieldMeta meta, std::string name, std::vector<double> params)
    : n_(n), m_(m), coeffs_(std::move(coeffs)), jacobians_(std::move(jacobians)),
      meta_(std::move(meta)), name_(std::move(name)), params_(std::move(params)) {
  if (n_ == 0 || m_ == 0) throw Error("vector field set: dimensions n and m must be positive");
  if (!coeffs_) throw Error("vector field set: coefficient evaluator is required");
}

void VectorFieldSet::coefficients(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const {
  coeffs_(x, out);
}

void VectorFieldSet::derivatives(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const {
  if (!jacobians_) throw Error("weak derivative unavailable for field '" + name_ + "'");
  jacobians_(x, out);
}

Matrix VectorFieldSet::coefficients(const Point& x) const {
  Matrix a(n_, m_ + 1);
  coeffs_(x, a);
  return a;
}

Matrix VectorFieldSet::derivatives(const Point& x) const {
  Matrix da(n_, n_ * (m_ + 1));
  derivatives(x, da);
  return da;
}

Matrix VectorFieldSet::diffusion(const Point& x) const {
  return coefficients(x).rightCols(m_);
}

Point VectorFieldSet::component(std::size_t l, const Point& x) const {
  return coefficients(x).col(static_cast<Eigen::Index>(l));
}

Matrix VectorFieldSet::derivative(std::size_t l, const Point& x) const {
  const auto n = static_cast<Eigen::Index>(n_);
  return derivatives(x).middleCols(static_cast<Eigen::Index>(l) * n, n);
}

VectorFieldSet VectorFieldSet::with_meta(FieldMeta meta) const {
  VectorFieldSet copy = *this;
  copy.meta_ = std::move(meta);
  return copy;
}

VectorFieldSet scalar_drift_field(std::function<double(double)> f, std::function<double(double)> df) {
  VectorFieldSet::CoeffFn coeffs = [f](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> a) {
    a(0, 0) = f(x[0]);
    a(0, 1) = 0.0;
  };
  VectorFieldSet::JacobianFn jac;
  if (df) {
    jac = [df](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> da) {
      da(0, 0) = df(x[0]);
      da(0, 1) = 0.0;
    };
  }
  return VectorFieldSet(1, 1, std::move(coeffs), std::move(jac), {}, "scalar_drift");
}

namespace {

// A_1 for the log example: 1 + sign(x) F(|x|), F(u) = int_0^min(u,1) sqrt(beta |log y|) dy.
class LogExampleTable {
 public:
  // Hermite tables in s = sqrt(u) on [0, 1/2] and w = sqrt(1 - u) on [1/2, 1].
  explicit LogExampleTable(double beta, std::size_t cells = 2048)
      : beta_(beta), cells_(cells), h_(std::sqrt(0.5) / static_cast<double>(cells)) {
    const auto dl = [this](double s) { return slope_low(s); };
    const auto dh = [this](double w) { return slope_high(w); };
    low_.assign(cells_ + 1, 0.0);
    high_.assign(cells_ + 1, 0.0);
    for (std::size_t i = 0; i < cells_; ++i) {
      low_[i + 1] = low_[i] + quad::adaptive(dl, node(i), node(i + 1), 1e-13);
      high_[i + 1] = high_[i] + quad::adaptive(dh, node(i), node(i + 1), 1e-13);
    }
    // high_ holds F(1) - F(1 - w^2); both tables meet at u = 1/2
    total_ = low_.back() + high_.back();
    low_slopes_.resize(cells_ + 1);
    high_slopes_.resize(cells_ + 1);
    for (std::size_t i = 0; i <= cells_; ++i) {
      low_slopes_[i] = slope_low(node(i));
      high_slopes_[i] = slope_high(node(i));
    }
  }

  // d/ds F(s^2) = 2 s sqrt(beta |log s^2|)
  [[nodiscard]] double slope_low(double s) const {
    if (s <= 0.0) return 0.0;
    return 2.0 * s * std::sqrt(2.0 * beta_ * std::abs(std::log(s)));
  }

  // d/dw (F(1) - F(1 - w^2)) = 2 w sqrt(beta |log(1 - w^2)|)
  [[nodiscard]] double slope_high(double w) const {
    if (w <= 0.0) return 0.0;
    return 2.0 * w * std::sqrt(beta_ * std::abs(std::log1p(-w * w)));
  }

  [[nodiscard]] double antiderivative(double u) const {
    if (u >= 1.0) return total_;
    if (u <= 0.0) return 0.0;
    if (u <= 0.5) return interpolate(low_, low_slopes_, std::sqrt(u));
    return total_ - interpolate(high_, high_slopes_, std::sqrt(1.0 - u));
  }

  [[nodiscard]] double a1(double x) const {
    return x >= 0.0 ? 1.0 + antiderivative(x) : 1.0 - antiderivative(-x);
  }

  [[nodiscard]] double da1(double x) const {
    const double ax = std::abs(x);
    if (ax == 0.0 || ax > 1.0) return 0.0;
    return std::sqrt(beta_ * std::abs(std::log(ax)));
  }

  [[nodiscard]] double total() const { return total_; }

 private:
  [[nodiscard]] double node(std::size_t i) const {
    return i == cells_ ? std::sqrt(0.5) : h_ * static_cast<double>(i);
  }

  [[nodiscard]] double interpolate(const std::vector<double>& v, const std::vector<double>& d, double x) const {
    const auto i = std::min(cells_ - 1, static_cast<std::size_t>(x / h_));
    const double r = (x - h_ * static_cast<double>(i)) / h_;
    const double r2 = r * r;
    const double r3 = r2 * r;
    const double h00 = 2 * r3 - 3 * r2 + 1;
    const double h10 = r3 - 2 * r2 + r;
    const double h01 = -2 * r3 + 3 * r2;
    const double h11 = r3 - r2;
    return h00 * v[i] + h10 * h_ * d[i] + h01 * v[i + 1] + h11 * h_ * d[i + 1];
  }

  double beta_;
  std::size_t cells_;
  double h_;
  double total_ = 0.0;
  std::vector<double> low_, high_;
  std::vector<double> low_slopes_, high_slopes_;
};

VectorFieldSet make_bm(const std::vector<double>& params) {
  const double nd = params.empty() ? 1.0 : params[0];
  if (params.size() > 1 || nd < 1.0 || nd != std::floor(nd)) {
    throw Error("bm: params must be [n] with n a positive integer");
  }
  const auto n = static_cast<std::size_t>(nd);
  FieldMeta meta;
  meta.theta = 1.0;
  meta.hoelder_K = 0.0;
  meta.hoelder_alpha = 1.0;
  meta.bound_M = 1.0;
  meta.growth = Growth::bounded;
  auto coeffs = [n](const Eigen::Ref<const Point>&, Eigen::Ref<Matrix> a) {
    a.setZero();
    for (std::size_t l = 0; l < n; ++l) a(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l + 1)) = 1.0;
  };
  auto jac = [](const Eigen::Ref<const Point>&, Eigen::Ref<Matrix> da) { da.setZero(); };
  return VectorFieldSet(n, n, coeffs, jac, meta, "bm", {nd});
}

VectorFieldSet make_ou(const std::vector<double>& params) {
  if (params.size() != 1 || !std::isfinite(params[0])) throw Error("ou: params must be [lambda]");
  const double lambda = params[0];
  FieldMeta meta;
  meta.theta = 1.0;
  meta.hoelder_K = std::abs(lambda);
  meta.hoelder_alpha = 1.0;
  meta.growth = Growth::linear;
  auto coeffs = [lambda](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> a) {
    a(0, 0) = -lambda * x[0];
    a(0, 1) = 1.0;
  };
  auto jac = [lambda](const Eigen::Ref<const Point>&, Eigen::Ref<Matrix> da) {
    da(0, 0) = -lambda;
    da(0, 1) = 0.0;
  };
  return VectorFieldSet(1, 1, coeffs, jac, meta, "ou", params);
}

VectorFieldSet make_log_example(const std::vector<double>& params) {
  if (params.size() != 1) throw Error("log_example: params must be [beta]");
  const double beta = params[0];
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("log_example: beta must be positive");
  auto table = std::make_shared<const LogExampleTable>(beta);

  FieldMeta meta;
  // A_1 is nondecreasing and constant outside [-1, 1], so min |A_1| = |1 - F(1)|
  // unless A_1 crosses zero.
  const double low = 1.0 - table->total();
  meta.theta = low > 0.0 ? low * low : 0.0;
  meta.bound_M = 1.0 + table->total();
  meta.growth = Growth::bounded;
  // The largest increment over a window of width d is centred at 0, so the
  // alpha = 1/2 constant is sup_d 2 F(d/2) / sqrt(d), attained for d <= 2.
  meta.hoelder_alpha = 0.5;
  double K = 0.0;
  for (int i = 1; i <= 2000; ++i) {
    const double d = 2.0 * i / 2000.0;
    K = std::max(K, 2.0 * table->antiderivative(0.5 * d) / std::sqrt(d));
  }
  meta.hoelder_K = K;

  auto coeffs = [table](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> a) {
    a(0, 0) = 0.0;
    a(0, 1) = table->a1(x[0]);
  };
  auto jac = [table](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> da) {
    da(0, 0) = 0.0;
    da(0, 1) = table->da1(x[0]);
  };
  return VectorFieldSet(1, 1, coeffs, jac, meta, "log_example", params);
}

VectorFieldSet make_const_shift(const std::vector<double>& params) {
  if (params.empty()) throw Error("const_shift: params must be [n, A (n*n), b (n)]");
  const double nd = params[0];
  if (nd < 1.0 || nd != std::floor(nd)) throw Error("const_shift: n must be a positive integer");
  const auto n = static_cast<std::size_t>(nd);
  if (params.size() != 1 + n * n + n) {
    throw Error("const_shift: expected " + std::to_string(1 + n * n + n) +
                " params for a square " + std::to_string(n) + "x" + std::to_string(n) +
                " matrix, got " + std::to_string(params.size()));
  }
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix A(ni, ni);
  Point b(ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j < ni; ++j) A(i, j) = params[1 + static_cast<std::size_t>(i * ni + j)];
    b[i] = params[1 + n * n + static_cast<std::size_t>(i)];
  }
  if (!A.allFinite() || !b.allFinite()) throw Error("const_shift: non-finite coefficients");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A * A.transpose(), Eigen::EigenvaluesOnly);
  const double theta = eig.eigenvalues().minCoeff();
  if (!(theta > 1e-14 * std::max(1.0, eig.eigenvalues().maxCoeff()))) {
    throw Error("const_shift: degenerate diffusion matrix (min eigenvalue of A A^T is " +
                std::to_string(theta) + ")");
  }
  FieldMeta meta;
  meta.theta = theta;
  meta.hoelder_K = 0.0;
  meta.bound_M = std::max(A.colwise().norm().maxCoeff(), b.norm());
  meta.growth = Growth::bounded;
  auto coeffs = [A, b](const Eigen::Ref<const Point>&, Eigen::Ref<Matrix> a) {
    a.col(0) = b;
    a.rightCols(A.cols()) = A;
  };
  auto jac = [](const Eigen::Ref<const Point>&, Eigen::Ref<Matrix> da) { da.setZero(); };
  return VectorFieldSet(n, n, coeffs, jac, meta, "const_shift", params);
}

std::mutex& registry_mutex() {
  static std::mutex mu;
  return mu;
}

std::map<std::string, FieldFactory>& registry() {
  static std::map<std::string, FieldFactory> r;
  return r;
}

std::string growth_name(Growth g) {
  switch (g) {
    case Growth::bounded: return "bounded";
    case Growth::linear: return "linear";
    case Growth::custom: return "custom";
  }
  return "bounded";
}

Growth growth_from_name(const std::string& s) {
  if (s == "bounded") return Growth::bounded;
  if (s == "linear") return Growth::linear;
  if (s == "custom") return Growth::custom;
  throw Error("field spec: unknown growth '" + s + "'");
}

// JSON has no infinity; a missing bound is written as null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

VectorFieldSet builtin_field(const std::string& name, const std::vector<double>& params) {
  if (name == "bm") return make_bm(params);
  if (name == "ou") return make_ou(params);
  if (name == "log_example") return make_log_example(params);
  if (name == "const_shift") return make_const_shift(params);
  FieldFactory factory;
  {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(name);
    if (it != registry().end()) factory = it->second;
  }
  if (!factory) throw Error("unknown field family '" + name + "'");
  return factory(params);
}

void register_field(const std::string& name, FieldFactory factory) {
  if (name == "bm" || name == "ou" || name == "log_example" || name == "const_shift") {
    throw Error("cannot re-register built-in field '" + name + "'");
  }
  std::lock_guard lock(registry_mutex());
  registry()[name] = std::move(factory);
}

json field_to_json(const VectorFieldSet& fs) {
  const auto& meta = fs.meta();
  json m = {{"theta", meta.theta},
            {"hoelder_K", meta.hoelder_K},
            {"hoelder_alpha", meta.hoelder_alpha},
            {"bound_M", number_or_null(meta.bound_M)},
            {"growth", growth_name(meta.growth)}};
  if (meta.profile) m["growth_profile"] = {{"psi1", meta.profile->psi1_desc}, {"psi2", meta.profile->psi2_desc}};
  return {{"name", fs.name()}, {"params", fs.params()}, {"n", fs.n()}, {"m", fs.m()}, {"meta", m}};
}

VectorFieldSet field_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("name")) throw Error("field spec: object with 'name' required");
  const auto name = doc.at("name").get<std::string>();
  const auto params = doc.value("params", std::vector<double>{});
  VectorFieldSet fs = builtin_field(name, params);
  if (doc.contains("n") && doc.at("n").get<std::size_t>() != fs.n()) {
    throw Error("field spec: n = " + doc.at("n").dump() + " does not match family dimension " +
                std::to_string(fs.n()));
  }
  if (doc.contains("m") && doc.at("m").get<std::size_t>() != fs.m()) {
    throw Error("field spec: m = " + doc.at("m").dump() + " does not match family noise dimension " +
                std::to_string(fs.m()));
  }
  if (doc.contains("meta")) {
    const auto& m = doc.at("meta");
    FieldMeta meta = fs.meta();
    meta.theta = m.value("theta", meta.theta);
    meta.hoelder_K = m.value("hoelder_K", meta.hoelder_K);
    meta.hoelder_alpha = m.value("hoelder_alpha", meta.hoelder_alpha);
    if (m.contains("bound_M")) {
      meta.bound_M = m.at("bound_M").is_null() ? std::numeric_limits<double>::infinity()
                                               : m.at("bound_M").get<double>();
    }
    if (m.contains("growth")) meta.growth = growth_from_name(m.at("growth").get<std::string>());
    if (meta.growth == Growth::custom && !meta.profile) {
      throw Error("field spec: custom growth needs a programmatically registered profile");
    }
    fs = fs.with_meta(std::move(meta));
  }
  return fs;
}

double ellipticity_margin(const VectorFieldSet& fs, const std::vector<Point>& samples) {
  if (samples.empty()) throw Error("ellipticity_margin: empty sample set");
  const auto n = static_cast<Eigen::Index>(fs.n());
  Matrix coeffs(n, static_cast<Eigen::Index>(fs.m() + 1));
  double margin = std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(n);
  for (const auto& x : samples) {
    fs.coefficients(x, coeffs);
    const auto A = coeffs.rightCols(static_cast<Eigen::Index>(fs.m()));
    eig.compute(A * A.transpose(), Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite()) {
      std::string where;
      for (Eigen::Index i = 0; i < x.size(); ++i) where += (i ? ", " : "") + std::to_string(x[i]);
      throw Error("ellipticity_margin: eigen-solver failed at x = (" + where + ")");
    }
    margin = std::min(margin, eig.eigenvalues().minCoeff());
  }
  return margin;
}

double hoelder_estimate(const VectorFieldSet& fs, double alpha,
                        const std::vector<std::pair<Point, Point>>& pairs) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("hoelder_estimate: alpha must lie in (0, 1]");
  double best = 0.0;
  for (const auto& [x, y] : pairs) {
    const double dist = (x - y).norm();
    if (dist == 0.0) throw Error("hoelder_estimate: coincident pair");
    const Matrix diff = fs.coefficients(x) - fs.coefficients(y);
    const double scale = std::pow(dist, alpha);
    for (Eigen::Index l = 0; l < diff.cols(); ++l) best = std::max(best, diff.col(l).norm() / scale);
  }
  return best;
}

double g_function(const VectorFieldSet& fs, const Point& x) {
  return fs.derivatives(x).squaredNorm();
}

ConditionGResult condition_g_estimate(const VectorFieldSet& fs, double sigma, double T0,
                                      const Point& x, std::size_t samples, std::uint64_t seed,
                                      const ConditionGOptions& options) {
  if (!(sigma > 0.0) || !(T0 > 0.0)) throw Error("condition_g_estimate: sigma and T0 must be positive");
  if (samples < 10000) throw Error("condition_g_estimate: need at least 1e4 samples");
  if (!fs.has_derivative()) throw Error("weak derivative unavailable for field '" + fs.name() + "'");
  if (options.blocks == 0 || !(options.ratio > 1.0)) throw Error("condition_g_estimate: bad options");

  const auto n = static_cast<Eigen::Index>(fs.n());
  const std::size_t blocks = options.blocks;
  const std::size_t base = (samples + blocks - 1) / blocks;
  const std::size_t levels = options.doublings + 1;
  const auto key = key_from_seed(mix64(seed ^ 0x436f6e6447ULL));
  const double scale = std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(n)) * T0;

  // sums[b][L] = sum of the first base * 2^L integrand values of block b.
  std::vector<std::vector<double>> sums(blocks, std::vector<double>(levels, 0.0));
  Point y(n);
  Matrix da(n, n * static_cast<Eigen::Index>(fs.m() + 1));
  for (std::size_t b = 0; b < blocks; ++b) {
    double running = 0.0;
    std::size_t j = 0;
    for (std::size_t L = 0; L < levels; ++L) {
      const std::size_t end = base << L;
      for (; j < end; ++j) {
        const auto jj = static_cast<std::uint64_t>(j);
        Philox4x32::Counter ctr{static_cast<std::uint32_t>(jj), static_cast<std::uint32_t>(jj >> 32),
                                static_cast<std::uint32_t>(b), 0u};
        const double s = T0 * uniform_pair(key, ctr).first;
        const double root = std::sqrt(s);
        for (Eigen::Index i = 0; i < n; i += 2) {
          ctr[3] = static_cast<std::uint32_t>(1 + i / 2);
          const auto [z0, z1] = normal_pair(key, ctr);
          y[i] = x[i] + root * z0;
          if (i + 1 < n) y[i + 1] = x[i + 1] + root * z1;
        }
        fs.derivatives(y, da);
        running += std::exp(sigma * da.squaredNorm());
      }
      sums[b][L] = running;
    }
  }

  ConditionGResult result;
  std::vector<double> first(blocks), last(blocks);
  for (std::size_t L = 0; L < levels; ++L) {
    double total = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) total += sums[b][L];
    const std::size_t count = blocks * (base << L);
    result.ladder.emplace_back(count, scale * total / static_cast<double>(count));
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    first[b] = sums[b][0] / static_cast<double>(base);
    last[b] = sums[b][levels - 1] / static_cast<double>(base << (levels - 1));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
  };
  result.estimate = result.ladder.back().second;
  result.growth = median(last) / median(first);
  if (levels > 1) {
    const double prev = result.ladder[levels - 2].second;
    result.last_change = std::abs(result.estimate / prev - 1.0);
  }
  result.diverging = !std::isfinite(result.estimate) || !std::isfinite(result.growth) ||
                     result.growth > options.ratio;
  return result;
}

VectorFieldSet radial_cutoff(const VectorFieldSet& fs, double N) {
  // projected points can land a few ulps outside the sphere; count them as inside
  constexpr double kInside = 1.0 + 8 * std::numeric_limits<double>::epsilon();
  if (!(N > 0.0) || !std::isfinite(N)) throw Error("radial_cutoff: N must be positive");
  const auto n = static_cast<Eigen::Index>(fs.n());
  auto base_coeffs = fs.coeff_fn();
  auto coeffs = [base_coeffs, N](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> a) {
    const double r = x.norm();
    if (r <= N * kInside) {
      base_coeffs(x, a);
    } else {
      const Point p = (N / r) * x;
      base_coeffs(p, a);
    }
  };
  VectorFieldSet::JacobianFn jac;
  if (fs.has_derivative()) {
    auto base_jac = fs.jacobian_fn();
    const auto blocks = static_cast<Eigen::Index>(fs.m() + 1);
    jac = [base_jac, N, n, blocks](const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> da) {
      const double r = x.norm();
      if (r <= N * kInside) {
        base_jac(x, da);
        return;
      }
      // Chain rule through p(x) = N x / |x|: Dp = (N / |x|)(I - u u^T), u = x / |x|.
      const Point u = x / r;
      const Point p = N * u;
      const Matrix dp = (N / r) * (Matrix::Identity(n, n) - u * u.transpose());
      Matrix inner(n, n * blocks);
      base_jac(p, inner);
      for (Eigen::Index l = 0; l < blocks; ++l) da.middleCols(l * n, n) = inner.middleCols(l * n, n) * dp;
    };
  }
  auto params = fs.params();
  params.push_back(N);
  FieldMeta meta = fs.meta();
  meta.growth = Growth::bounded;
  meta.profile.reset();
  return VectorFieldSet(fs.n(), fs.m(), std::move(coeffs), std::move(jac), std::move(meta),
                        fs.name() + "_cutoff", std::move(params));
}

}  // namespace sdem
