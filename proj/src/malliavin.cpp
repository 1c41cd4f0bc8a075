#include "sdem/malliavin.hpp"

#include "sdem/parallel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sdem {

namespace {

constexpr double kResidualTol = 1e-10;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string describe(const Point& x) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? ", " : "") + std::to_string(x[i]);
  return s + ")";
}

Matrix right_inverse_impl(const Matrix& A, const Point* where) {
  const auto n = A.rows();
  auto singular = [&](double min_eig) {
    return Error("right_inverse: singular diffusion matrix" + (where ? " at x = " + describe(*where) : std::string()) +
                 ", min eigenvalue " + std::to_string(min_eig));
  };
  if (n == 1) {
    const double a = A.squaredNorm();
    if (!(a > 1e-16)) throw singular(a);
    Matrix Y = A.transpose() / a;
    if (std::abs((A * Y)(0, 0) - 1.0) <= kResidualTol) return Y;
  }
  const Matrix a = A * A.transpose();
  Eigen::LLT<Matrix> llt(a);
  const double scale = std::max(1.0, a.diagonal().maxCoeff());
  if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 1e-8 * std::sqrt(scale)) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    throw singular(eig.eigenvalues().minCoeff());
  }
  Matrix Y = llt.solve(A).transpose();
  const Matrix I = Matrix::Identity(n, n);
  if ((A * Y - I).norm() <= kResidualTol) return Y;

  using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const MatrixL Al = A.cast<long double>();
  const MatrixL YL = (Al * Al.transpose()).fullPivLu().solve(Al).transpose();
  Y = YL.cast<double>();
  const double residual = (A * Y - I).norm();
  if (residual > kResidualTol) {
    throw Error("right_inverse: residual " + std::to_string(residual) + " above 1e-10" +
                (where ? " at x = " + describe(*where) : std::string()));
  }
  return Y;
}

// Runs one value per path through `per_path` in parallel and reduces in order.
EstimatorReport run_paths(const MonteCarloConfig& cfg, const std::function<double(std::size_t)>& per_path) {
  std::vector<double> values(cfg.paths, kNaN);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) { values[i] = per_path(i); });
  return summarize(values, cfg.config_hash);
}

void check_direction(const VectorFieldSet& fs, const Point& x, const Point& v0) {
  const auto n = static_cast<Eigen::Index>(fs.n());
  if (x.size() != n || v0.size() != n) throw Error("gradient: x and v0 must have dimension n");
}

}  // namespace

Matrix right_inverse(const Matrix& A) { return right_inverse_impl(A, nullptr); }

Matrix right_inverse(const VectorFieldSet& fs, const Point& x) {
  return right_inverse_impl(fs.diffusion(x), &x);
}

EstimatorReport bismut_gradient(const VectorFieldSet& fs, const ScalarFn& f, const Point& x,
                                const Point& v0, const MonteCarloConfig& cfg) {
  check_direction(fs, x, v0);
  const BrownianBatch noise(cfg.seed, cfg.paths, TimeGrid(cfg.t, cfg.steps), fs.m());
  const auto m = static_cast<Eigen::Index>(fs.m());
  return run_paths(cfg, [&](std::size_t i) {
    double weight = 0.0;
    const StepVisitor accumulate = [&](std::size_t, const Point& xi, const Matrix& V, const Matrix& a,
                                       const Matrix&, const Eigen::VectorXd& dw) {
      const Matrix Y = right_inverse_impl(a.rightCols(m), &xi);
      weight += (Y * (V * v0)).dot(dw);
      return true;
    };
    const FlowPath path = integrate(fs, x, noise, i, false, accumulate);
    if (path.flagged) return kNaN;
    return f(path.xi_T) * weight / cfg.t;
  });
}

EstimatorReport intertwine_gradient(const VectorFieldSet& fs, const GradientFn& df, const Point& x,
                                    const Point& v0, const MonteCarloConfig& cfg) {
  check_direction(fs, x, v0);
  const BrownianBatch noise(cfg.seed, cfg.paths, TimeGrid(cfg.t, cfg.steps), fs.m());
  return run_paths(cfg, [&](std::size_t i) {
    const FlowPath path = integrate(fs, x, noise, i, false);
    if (path.flagged) return kNaN;
    return df(path.xi_T).dot(path.V_T * v0);
  });
}

EstimatorReport fd_gradient(const VectorFieldSet& fs, const ScalarFn& f, const Point& x, const Point& v0,
                            double h, const MonteCarloConfig& cfg) {
  check_direction(fs, x, v0);
  if (!(h > 0.0)) throw Error("fd_gradient: h must be positive");
  const BrownianBatch noise(cfg.seed, cfg.paths, TimeGrid(cfg.t, cfg.steps), fs.m());
  const Point xp = x + h * v0;
  const Point xm = x - h * v0;
  return run_paths(cfg, [&](std::size_t i) {
    const FlowPath plus = integrate(fs, xp, noise, i, false);
    const FlowPath minus = integrate(fs, xm, noise, i, false);
    if (plus.flagged || minus.flagged) return kNaN;
    return (f(plus.xi_T) - f(minus.xi_T)) / (2.0 * h);
  });
}

Eigen::VectorXd AdaptedHistory::increment(std::size_t j) const {
  if (j >= step_) throw std::out_of_range("adapted history: increment " + std::to_string(j) +
                                          " is not in the past of step " + std::to_string(step_));
  Eigen::VectorXd dw(static_cast<Eigen::Index>(noise_->dim()));
  noise_->increment(path_, j, {dw.data(), noise_->dim()});
  return dw;
}

CameronMartinPath::CameronMartinPath(std::size_t n, Rate rate) : n_(n), rate_(std::move(rate)) {
  if (n_ == 0 || !rate_) throw Error("cameron-martin path: need a dimension and a rate");
}

CameronMartinPath CameronMartinPath::constant(Point direction) {
  const auto n = static_cast<std::size_t>(direction.size());
  return CameronMartinPath(n, [direction = std::move(direction)](const AdaptedHistory&, Eigen::Ref<Point> hdot) {
    hdot = direction;
  });
}

void CameronMartinPath::rate(const AdaptedHistory& history, Eigen::Ref<Point> hdot) const {
  rate_(history, hdot);
}

namespace {

struct DirectionalTerms {
  double divergence = 0.0;
  double energy = 0.0;
  Matrix tangent;  // column k = V_k h_k
};

DirectionalTerms directional_terms(const CameronMartinPath& h, const FlowPath& path, const VectorFieldSet& fs) {
  if (!path.retained() || !path.noise) throw Error("divergence: path must be retained");
  if (h.dim() != fs.n()) throw Error("divergence: direction dimension must equal n");
  const auto n = static_cast<Eigen::Index>(fs.n());
  const auto m = static_cast<Eigen::Index>(fs.m());
  const BrownianBatch& noise = *path.noise;
  const std::size_t steps = noise.grid().steps();
  const double dt = noise.grid().dt();

  DirectionalTerms out;
  out.tangent.setZero(n, static_cast<Eigen::Index>(steps + 1));
  Point hdot(n);
  Point hk = Point::Zero(n);
  Eigen::VectorXd dw(m);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const auto V = path.derivative_at(k);
    const Point xi = path.xi.col(kk);
    out.tangent.col(kk) = V * hk;
    h.rate(AdaptedHistory(noise, path.path_index, k), hdot);
    noise.increment(path.path_index, k, {dw.data(), static_cast<std::size_t>(m)});
    const Matrix Y = right_inverse(fs, xi);
    out.divergence += (Y * (V * hdot)).dot(dw);
    out.energy += hdot.squaredNorm() * dt;
    hk += hdot * dt;
  }
  out.tangent.col(static_cast<Eigen::Index>(steps)) = path.derivative_at(steps) * hk;
  if (!std::isfinite(out.energy)) throw Error("divergence: Cameron-Martin path has infinite energy");
  return out;
}

}  // namespace

double divergence(const CameronMartinPath& h, const FlowPath& path, const VectorFieldSet& fs) {
  return directional_terms(h, path, fs).divergence;
}

IbpResult ibp_check(const VectorFieldSet& fs, const PathFunctional& F, const PathDerivative& dF,
                    const CameronMartinPath& h, const Point& x, const MonteCarloConfig& cfg) {
  const BrownianBatch noise(cfg.seed, cfg.paths, TimeGrid(cfg.t, cfg.steps), fs.m());
  std::vector<double> lhs(cfg.paths, kNaN);
  std::vector<double> rhs(cfg.paths, kNaN);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) {
    const FlowPath path = integrate(fs, x, noise, i, true);
    if (path.flagged) return;
    const DirectionalTerms terms = directional_terms(h, path, fs);
    lhs[i] = dF(path, terms.tangent);
    rhs[i] = F(path) * terms.divergence;
  });
  IbpResult out;
  out.lhs = summarize(lhs, cfg.config_hash);
  out.rhs = summarize(rhs, cfg.config_hash);
  out.gap = std::abs(out.lhs.estimate - out.rhs.estimate);
  out.se = pooled_se(out.lhs, out.rhs);
  return out;
}

}  // namespace sdem
