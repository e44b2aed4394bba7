#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "amlopt/controls.hpp"

namespace amlopt {

/// Symmetric positive definite preconditioner of the control perturbations.
struct CovarianceMatrix {
    Eigen::MatrixXd entries;
    std::size_t iteration = 0;

    std::size_t size() const { return static_cast<std::size_t>(entries.rows()); }
};

/// Gaussian perturbations of a control, all projected into the box.
struct PerturbationEnsemble {
    std::vector<ControlVector> members;
    ControlVector mean;

    std::size_t size() const { return members.size(); }
};

/// AR(1) temporal covariance, one N_t x N_t block per well, cross-well terms zero:
/// Cov(u_j^i, u_j^{i+h}) = sigma_j^2 rho^h / (1 - rho^2).
CovarianceMatrix build_initial_covariance(const Eigen::VectorXd& sigmas, double rho, std::size_t n_wells,
                                          std::size_t n_steps);

/// Rank-one adaptation along an accepted step w:
/// (1 - gamma) C + gamma * trace(C) / |w|^2 * w w^T. A zero step returns C unchanged.
CovarianceMatrix adapt_covariance(const CovarianceMatrix& prev, const Eigen::VectorXd& step, double mixing);

/// Lower Cholesky factor; adds a 1e-12 * trace / N jitter once if the plain
/// factorization fails. Throws NumericalError if the matrix is still not SPD.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& cov);

/// `n` draws from N(mean, cov), each projected onto the bounds. Deterministic in `seed`.
PerturbationEnsemble sample_ensemble(const ControlVector& mean, const CovarianceMatrix& cov, std::size_t n,
                                     const ControlBounds& bounds, std::uint64_t seed);

/// Same draws without the projection; used by the statistical checks.
std::vector<Eigen::VectorXd> sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                             std::size_t n, std::uint64_t seed);

}  // namespace amlopt
