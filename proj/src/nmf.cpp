#include "trafficnmf/nmf.hpp"

#include "trafficnmf/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>

namespace trafficnmf {

namespace {

// Uniform in (0, 1] from the raw 64-bit stream, so the sequence is identical
// across standard library implementations.
double unit_open_closed(std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 1.0 - u;
}

void validate(const Eigen::MatrixXd& x, const NmfConfig& cfg) {
  const auto max_rank = std::min(x.rows(), x.cols());
  if (cfg.rank < 1 || cfg.rank > max_rank) {
    throw Error(ErrorKind::InvalidRank, "rank " + std::to_string(cfg.rank) + " outside 1.." +
                                            std::to_string(max_rank) + " for a " + std::to_string(x.rows()) +
                                            "x" + std::to_string(x.cols()) + " matrix");
  }
  if (cfg.restarts < 1) throw Error(ErrorKind::InvalidConfig, "restarts must be >= 1");
  if (!(cfg.tol > 0.0) || cfg.max_iters < 1) {
    throw Error(ErrorKind::InvalidConfig, "tol must be > 0 and max_iters >= 1");
  }
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      if (!std::isfinite(v)) throw Error(ErrorKind::NonNegativityViolation, "input contains a non-finite entry");
      if (v < 0.0) {
        throw Error(ErrorKind::NonNegativityViolation,
                    "input entry (" + std::to_string(i) + "," + std::to_string(j) + ") is negative");
      }
    }
  }
}

void init_random(const Eigen::MatrixXd& x, const NmfConfig& cfg, Eigen::MatrixXd& w, Eigen::MatrixXd& h) {
  std::mt19937_64 rng(cfg.seed);
  const double scale = std::sqrt(x.mean() / cfg.rank);
  w.resize(x.rows(), cfg.rank);
  h.resize(x.cols(), cfg.rank);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * unit_open_closed(rng);
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, j) = scale * unit_open_closed(rng);
}

// NNDSVD (Boutsidis & Gallopoulos) with zeros replaced by the mean of x, so
// multiplicative updates can still move every entry.
void init_nndsvd(const Eigen::MatrixXd& x, const NmfConfig& cfg, Eigen::MatrixXd& w, Eigen::MatrixXd& h) {
  const int r = cfg.rank;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& u = svd.matrixU();
  const auto& v = svd.matrixV();
  const auto& s = svd.singularValues();
  w = Eigen::MatrixXd::Zero(x.rows(), r);
  h = Eigen::MatrixXd::Zero(x.cols(), r);

  w.col(0) = std::sqrt(s(0)) * u.col(0).cwiseAbs();
  h.col(0) = std::sqrt(s(0)) * v.col(0).cwiseAbs();
  for (int j = 1; j < r; ++j) {
    const Eigen::VectorXd up = u.col(j).cwiseMax(0.0);
    const Eigen::VectorXd un = (-u.col(j)).cwiseMax(0.0);
    const Eigen::VectorXd vp = v.col(j).cwiseMax(0.0);
    const Eigen::VectorXd vn = (-v.col(j)).cwiseMax(0.0);
    const double pos = up.norm() * vp.norm();
    const double neg = un.norm() * vn.norm();
    const bool use_pos = pos >= neg;
    const double m = use_pos ? pos : neg;
    if (m <= 0.0) continue;
    const Eigen::VectorXd& uu = use_pos ? up : un;
    const Eigen::VectorXd& vv = use_pos ? vp : vn;
    const double nu = uu.norm();
    const double nv = vv.norm();
    w.col(j) = std::sqrt(s(j) * m) * uu / nu;
    h.col(j) = std::sqrt(s(j) * m) * vv / nv;
  }
  const double fill = x.mean();
  w = w.unaryExpr([fill](double a) { return a > 0.0 ? a : fill; });
  h = h.unaryExpr([fill](double a) { return a > 0.0 ? a : fill; });
}

double frobenius_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& h) {
  return (x - w * h.transpose()).norm();
}

}  // namespace

std::string to_string(InitMethod method) {
  return method == InitMethod::Nndsvd ? "nndsvd" : "random-uniform";
}

InitMethod parse_init_method(const std::string& text) {
  if (text == "random-uniform" || text == "random") return InitMethod::RandomUniform;
  if (text == "nndsvd") return InitMethod::Nndsvd;
  throw Error(ErrorKind::InvalidConfig, "unknown init '" + text + "' (expected random-uniform or nndsvd)");
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  return seed + 0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(restart);
}

FactorPair factorize(const Eigen::MatrixXd& x, const NmfConfig& cfg) {
  FactorPair best = factorize(x, cfg, nullptr);
  if (cfg.init == InitMethod::Nndsvd) return best;
  for (int i = 1; i < cfg.restarts; ++i) {
    NmfConfig c = cfg;
    c.seed = restart_seed(cfg.seed, i);
    FactorPair run = factorize(x, c, nullptr);
    if (run.final_loss() < best.final_loss()) best = std::move(run);
  }
  return best;
}

FactorPair factorize(const Eigen::MatrixXd& x, const NmfConfig& cfg, const IterationObserver& observer) {
  validate(x, cfg);

  FactorPair out;
  if (cfg.init == InitMethod::Nndsvd) {
    init_nndsvd(x, cfg, out.w, out.h);
  } else {
    init_random(x, cfg, out.w, out.h);
  }
  out.objective_trace.reserve(static_cast<std::size_t>(cfg.max_iters) + 1);
  out.objective_trace.push_back(frobenius_residual(x, out.w, out.h));
  if (observer) observer(0, out.w, out.h, out.objective_trace.back());

  const Eigen::MatrixXd xt = x.transpose();
  Eigen::MatrixXd numer;
  Eigen::MatrixXd denom;
  for (int it = 0; it < cfg.max_iters; ++it) {
    // h <- h .* (X^T w) ./ (h w^T w)
    numer.noalias() = xt * out.w;
    denom.noalias() = out.h * (out.w.transpose() * out.w);
    out.h.array() *= numer.array() / denom.array().max(kUpdateEpsilon);

    // w <- w .* (X h) ./ (w h^T h)
    numer.noalias() = x * out.h;
    denom.noalias() = out.w * (out.h.transpose() * out.h);
    out.w.array() *= numer.array() / denom.array().max(kUpdateEpsilon);

    const double prev = out.objective_trace.back();
    const double loss = frobenius_residual(x, out.w, out.h);
    out.objective_trace.push_back(loss);
    out.iterations_run = it + 1;
    if (observer) observer(it + 1, out.w, out.h, loss);
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::NumericalFailure, "objective became non-finite at iteration " + std::to_string(it + 1));
    }
    if (prev == 0.0 || std::fabs(prev - loss) / prev < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

FactorPair factorize(const NormalizedMatrix& x, const NmfConfig& cfg) { return factorize(x.values, cfg); }

double reconstruction_error(const Eigen::MatrixXd& x, const FactorPair& pair) {
  if (pair.w.rows() != x.rows() || pair.h.rows() != x.cols() || pair.w.cols() != pair.h.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "factor shapes (" + std::to_string(pair.w.rows()) + "x" +
                                              std::to_string(pair.w.cols()) + ", " + std::to_string(pair.h.rows()) +
                                              "x" + std::to_string(pair.h.cols()) + ") do not fit a " +
                                              std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " matrix");
  }
  return frobenius_residual(x, pair.w, pair.h);
}

}  // namespace trafficnmf
