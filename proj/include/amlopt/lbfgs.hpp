#pragma once

#include <cstddef>
#include <deque>
#include <functional>

#include <Eigen/Dense>

namespace amlopt {

struct LbfgsOptions {
    std::size_t memory = 10;
    double c1 = 1e-4;  // sufficient decrease
    double c2 = 0.9;   // curvature
    std::size_t max_line_search_evaluations = 25;
    double gradient_tolerance = 1e-12;  // max-norm
    double change_tolerance = 1e-16;    // absolute change of f and of the step
};

/// Limited-memory BFGS with a strong-Wolfe line search (bracketing + cubic zoom).
/// Each call to step() performs one quasi-Newton iteration.
class LbfgsMinimizer {
public:
    /// Returns f(x) and writes the gradient into the second argument.
    using Function = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

    enum class Status { progressed, converged, failed };

    LbfgsMinimizer(Function fn, Eigen::VectorXd x0, LbfgsOptions options = {});

    Status step();

    const Eigen::VectorXd& x() const { return x_; }
    const Eigen::VectorXd& gradient() const { return g_; }
    double value() const { return f_; }
    std::size_t evaluations() const { return evaluations_; }
    std::size_t iterations() const { return iterations_; }

private:
    struct Point {
        double alpha = 0.0;
        double f = 0.0;
        double slope = 0.0;
        Eigen::VectorXd x;
        Eigen::VectorXd g;
    };

    Point probe(const Eigen::VectorXd& d, double alpha);
    bool strong_wolfe(const Eigen::VectorXd& d, double alpha0, Point& accepted);
    bool zoom(const Eigen::VectorXd& d, Point lo, Point hi, double slope0, Point& accepted);
    Eigen::VectorXd direction() const;

    Function fn_;
    LbfgsOptions opt_;
    Eigen::VectorXd x_;
    Eigen::VectorXd g_;
    double f_ = 0.0;
    std::deque<Eigen::VectorXd> s_hist_;
    std::deque<Eigen::VectorXd> y_hist_;
    std::deque<double> rho_hist_;
    std::size_t evaluations_ = 0;
    std::size_t iterations_ = 0;
    std::size_t budget_ = 0;
};

}  // namespace amlopt
