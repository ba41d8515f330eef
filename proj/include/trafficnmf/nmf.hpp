#pragma once

#include "trafficnmf/ingest.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace trafficnmf {

enum class InitMethod { RandomUniform, Nndsvd };

std::string to_string(InitMethod method);
InitMethod parse_init_method(const std::string& text);

struct NmfConfig {
  int rank = 1;
  int max_iters = 500;
  // Stop once |loss_prev - loss| / loss_prev drops below this.
  double tol = 1e-5;
  std::uint64_t seed = 0;
  InitMethod init = InitMethod::RandomUniform;
  // Independent random starts; the one with the lowest final loss is kept.
  // Ignored for nndsvd, which is deterministic.
  int restarts = 1;
};

// Seed for restart i. Restart 0 uses the configured seed unchanged.
std::uint64_t restart_seed(std::uint64_t seed, int restart);

// X ~ w * h^T with w (N x r) holding location loadings and h (M x r) holding
// time loadings.
struct FactorPair {
  Eigen::MatrixXd w;
  Eigen::MatrixXd h;
  // Frobenius reconstruction error; entry 0 is the initial guess, entry i the
  // error after update sweep i.
  std::vector<double> objective_trace;
  bool converged = false;
  int iterations_run = 0;

  Eigen::Index rank() const { return w.cols(); }
  double final_loss() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

// Lee-Seung multiplicative updates on ||X - w h^T||_F. Single-threaded and
// bit-reproducible for a fixed seed.
FactorPair factorize(const Eigen::MatrixXd& x, const NmfConfig& cfg);
FactorPair factorize(const NormalizedMatrix& x, const NmfConfig& cfg);

// Called after initialization (iteration 0) and after every update sweep.
// This overload performs a single run from cfg.seed and ignores restarts.
using IterationObserver =
    std::function<void(int iteration, const Eigen::MatrixXd& w, const Eigen::MatrixXd& h, double loss)>;
FactorPair factorize(const Eigen::MatrixXd& x, const NmfConfig& cfg, const IterationObserver& observer);

double reconstruction_error(const Eigen::MatrixXd& x, const FactorPair& pair);

// Denominator floor used in the update rule.
inline constexpr double kUpdateEpsilon = 1e-12;

}  // namespace trafficnmf
