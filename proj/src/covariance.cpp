#include "amlopt/covariance.hpp"

#include <cmath>
#include <random>
#include <string>

#include "amlopt/errors.hpp"
#include <spdlog/spdlog.h>

namespace amlopt {

CovarianceMatrix build_initial_covariance(const Eigen::VectorXd& sigmas, double rho, std::size_t n_wells,
                                          std::size_t n_steps) {
    if (static_cast<std::size_t>(sigmas.size()) != n_wells) {
        throw StructuralError("need one sigma per well");
    }
    if (!(rho > -1.0 && rho < 1.0)) throw ParameterError("AR(1) correlation must lie in (-1, 1)");
    if ((sigmas.array() <= 0.0).any()) throw ParameterError("sigma_j must be positive");

    const auto n = static_cast<Eigen::Index>(n_wells * n_steps);
    CovarianceMatrix c{Eigen::MatrixXd::Zero(n, n), 0};
    const double inv = 1.0 / (1.0 - rho * rho);
    for (std::size_t j = 0; j < n_wells; ++j) {
        const double var = sigmas[static_cast<Eigen::Index>(j)] * sigmas[static_cast<Eigen::Index>(j)] * inv;
        for (std::size_t a = 0; a < n_steps; ++a) {
            for (std::size_t b = a; b < n_steps; ++b) {
                const double v = var * std::pow(rho, static_cast<double>(b - a));
                const auto ia = static_cast<Eigen::Index>(a * n_wells + j);
                const auto ib = static_cast<Eigen::Index>(b * n_wells + j);
                c.entries(ia, ib) = v;
                c.entries(ib, ia) = v;
            }
        }
    }
    return c;
}

CovarianceMatrix adapt_covariance(const CovarianceMatrix& prev, const Eigen::VectorXd& step, double mixing) {
    if (!(mixing > 0.0 && mixing < 1.0)) throw ParameterError("covariance mixing weight must lie in (0, 1)");
    if (step.size() != prev.entries.rows()) throw StructuralError("step and covariance dimensions differ");
    const double norm2 = step.squaredNorm();
    if (norm2 == 0.0) return prev;

    const double s = prev.entries.trace() / norm2;
    CovarianceMatrix next{(1.0 - mixing) * prev.entries + (mixing * s) * (step * step.transpose()),
                          prev.iteration + 1};
    // Round-off can break exact symmetry of the outer product sum.
    next.entries = 0.5 * (next.entries + next.entries.transpose()).eval();
    return next;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();

    const double jitter = 1e-12 * cov.trace() / static_cast<double>(cov.rows());
    spdlog::warn("covariance factorization failed, retrying with diagonal jitter {:.3e}", jitter);
    Eigen::MatrixXd shifted = cov;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
    return llt.matrixL();
}

std::vector<Eigen::VectorXd> sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                             std::size_t n, std::uint64_t seed) {
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
        throw StructuralError("mean and covariance dimensions differ");
    }
    const Eigen::MatrixXd factor = cholesky_lower(cov);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    out.reserve(n);
    Eigen::VectorXd z(mean.size());
    for (std::size_t m = 0; m < n; ++m) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
        out.emplace_back(mean + factor.triangularView<Eigen::Lower>() * z);
    }
    return out;
}

PerturbationEnsemble sample_ensemble(const ControlVector& mean, const CovarianceMatrix& cov, std::size_t n,
                                     const ControlBounds& bounds, std::uint64_t seed) {
    if (n == 0) throw ParameterError("ensemble size must be positive");
    bounds.check_against(mean);
    PerturbationEnsemble ens;
    ens.mean = mean;
    ens.members.reserve(n);
    for (auto& draw : sample_gaussian(mean.values, cov.entries, n, seed)) {
        ens.members.push_back(project(ControlVector(std::move(draw), mean.n_wells, mean.n_steps), bounds));
    }
    return ens;
}

}  // namespace amlopt
