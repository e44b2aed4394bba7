#include "amlopt/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace amlopt {
namespace {

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), clamped to the
// inner part of the bracket; bisection when the cubic is degenerate.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    double t = 0.5 * (a + b);
    if (disc >= 0.0 && std::isfinite(disc)) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double denom = db - da + 2.0 * d2;
        if (denom != 0.0) t = b - (b - a) * (db + d2 - d1) / denom;
    }
    const double margin = 0.1 * (hi - lo);
    if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (lo + hi);
    return t;
}

}  // namespace

LbfgsMinimizer::LbfgsMinimizer(Function fn, Eigen::VectorXd x0, LbfgsOptions options)
    : fn_(std::move(fn)), opt_(options), x_(std::move(x0)) {
    g_.resize(x_.size());
    f_ = fn_(x_, g_);
    ++evaluations_;
}

Eigen::VectorXd LbfgsMinimizer::direction() const {
    Eigen::VectorXd q = -g_;
    const std::size_t m = s_hist_.size();
    std::vector<double> alpha(m);
    for (std::size_t i = m; i-- > 0;) {
        alpha[i] = rho_hist_[i] * s_hist_[i].dot(q);
        q -= alpha[i] * y_hist_[i];
    }
    if (m > 0) q *= s_hist_.back().dot(y_hist_.back()) / y_hist_.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
        const double beta = rho_hist_[i] * y_hist_[i].dot(q);
        q += (alpha[i] - beta) * s_hist_[i];
    }
    return q;
}

LbfgsMinimizer::Point LbfgsMinimizer::probe(const Eigen::VectorXd& d, double alpha) {
    Point p;
    p.alpha = alpha;
    p.x = x_ + alpha * d;
    p.g.resize(x_.size());
    p.f = fn_(p.x, p.g);
    ++evaluations_;
    ++budget_;
    p.slope = p.g.dot(d);
    if (!std::isfinite(p.f) || !std::isfinite(p.slope)) {
        p.f = std::numeric_limits<double>::infinity();
        p.slope = std::numeric_limits<double>::infinity();
    }
    return p;
}

bool LbfgsMinimizer::zoom(const Eigen::VectorXd& d, Point lo, Point hi, double slope0, Point& accepted) {
    while (budget_ < opt_.max_line_search_evaluations) {
        if (std::abs(hi.alpha - lo.alpha) * d.lpNorm<Eigen::Infinity>() < opt_.change_tolerance) break;
        const double a = std::isfinite(hi.f) ? cubic_minimizer(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope)
                                             : 0.5 * (lo.alpha + hi.alpha);
        Point p = probe(d, a);
        if (p.f > f_ + opt_.c1 * a * slope0 || p.f >= lo.f) {
            hi = std::move(p);
            continue;
        }
        if (std::abs(p.slope) <= -opt_.c2 * slope0) {
            accepted = std::move(p);
            return true;
        }
        if (p.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(p);
    }
    // Budget exhausted: accept the best sufficient-decrease point if any.
    if (lo.alpha > 0.0) {
        accepted = std::move(lo);
        return true;
    }
    return false;
}

bool LbfgsMinimizer::strong_wolfe(const Eigen::VectorXd& d, double alpha0, Point& accepted) {
    budget_ = 0;
    const double slope0 = g_.dot(d);
    Point prev{0.0, f_, slope0, x_, g_};
    double a = alpha0;
    for (bool first = true; budget_ < opt_.max_line_search_evaluations; first = false) {
        Point p = probe(d, a);
        if (p.f > f_ + opt_.c1 * a * slope0 || (!first && p.f >= prev.f)) return zoom(d, prev, p, slope0, accepted);
        if (std::abs(p.slope) <= -opt_.c2 * slope0) {
            accepted = std::move(p);
            return true;
        }
        if (p.slope >= 0.0) return zoom(d, p, prev, slope0, accepted);
        prev = std::move(p);
        a *= 2.0;
    }
    return false;
}

LbfgsMinimizer::Status LbfgsMinimizer::step() {
    if (g_.lpNorm<Eigen::Infinity>() <= opt_.gradient_tolerance) return Status::converged;

    Eigen::VectorXd d = direction();
    double alpha0 = 1.0;
    if (s_hist_.empty() || !(g_.dot(d) < 0.0)) {
        s_hist_.clear();
        y_hist_.clear();
        rho_hist_.clear();
        d = -g_;
        alpha0 = std::min(1.0, 1.0 / g_.lpNorm<1>());
    }

    Point next;
    if (!strong_wolfe(d, alpha0, next)) return Status::failed;

    Eigen::VectorXd s = next.x - x_;
    Eigen::VectorXd y = next.g - g_;
    const double sy = s.dot(y);
    const double change = std::abs(next.f - f_);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
        if (s_hist_.size() == opt_.memory) {
            s_hist_.pop_front();
            y_hist_.pop_front();
            rho_hist_.pop_front();
        }
        rho_hist_.push_back(1.0 / sy);
        s_hist_.push_back(std::move(s));
        y_hist_.push_back(std::move(y));
    }
    x_ = std::move(next.x);
    g_ = std::move(next.g);
    f_ = next.f;
    ++iterations_;
    if (change < opt_.change_tolerance) return Status::converged;
    return Status::progressed;
}

}  // namespace amlopt
