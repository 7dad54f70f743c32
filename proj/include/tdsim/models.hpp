#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tdsim/history.hpp"

namespace tdsim {

/// Plant maps (f, h) and observer-controller maps (f_hat, k) with their
/// dimensions and the common maximum delay.
///
/// Contracts (documented, spot-checked in tests rather than enforced):
///   f(0, 0) = 0, h(0) = 0, f_hat(0, 0, 0) = 0, k(0, 0) = 0;
///   all maps Lipschitz on bounded sets;
///   all callables pure and re-entrant (no internal state), so concurrent
///   evaluation from several workers is safe.
struct ModelPair {
    int state_dim = 0;   // n
    int input_dim = 0;   // m
    int output_dim = 0;  // q
    double delay = 0.0;

    /// plant drift: (x_t, u) -> R^n
    std::function<Eigen::VectorXd(const History&, const Eigen::VectorXd&)> f;
    /// output map: x_t -> R^q (may read the whole segment, not just phi(0))
    std::function<Eigen::VectorXd(const History&)> h;
    /// observer drift: (xhat_t, u, y) -> R^n
    std::function<Eigen::VectorXd(const History&, const Eigen::VectorXd&, const Eigen::VectorXd&)>
        f_hat;
    /// feedback: (xhat_t, y) -> R^m
    std::function<Eigen::VectorXd(const History&, const Eigen::VectorXd&)> k;
};

/// Named benchmark with its nominal gains (all overridable by config).
struct BenchmarkSpec {
    std::string name;
    std::string description;
    ModelPair model;
    std::map<std::string, double> gains;
};

/// Right-hand side of the stacked closed loop on C^{2n}:
///
///   [ f(phi1, k(phi2, h(phi1)))              ]
///   [ f_hat(phi2, k(phi2, h(phi1)), h(phi1)) ]
///
/// where phi = [phi1; phi2]. h(phi1) is evaluated once and reused in both
/// blocks.
Eigen::VectorXd stacked_rhs(const ModelPair& model, const History& phi);

/// Right-hand side of the extended open loop, input u_tilde = [u1; u2]
/// in R^{m+n}: first block f(phi1, u1), second block u2 verbatim.
Eigen::VectorXd extended_rhs(const ModelPair& model, const History& phi,
                             const Eigen::VectorXd& u_tilde);

/// Composite feedback [k(phi2, h(phi1)); f_hat(phi2, k(...), h(phi1))].
/// Feeding it back into extended_rhs reproduces stacked_rhs exactly.
Eigen::VectorXd composite_feedback(const ModelPair& model, const History& phi);

/// Compiled-in benchmark registry. Known names:
///   "linear-scalar"   scalar plant a0 x + a1 x(t-delay) + b u, output x(t),
///                     observer copy + L(y - xhat(t)), feedback -K xhat(t);
///                     defaults a0=0.2 a1=0.1 b=1 L=1 K=1.5 delay=1
///   "nonlinear-sine"  0.5 x + 0.5 sin(x(t-delay)) + u, observer copy with
///                     L=1.5, feedback -2 xhat(t), delay=1
///   "delayed-output"  linear-scalar plant with functional output
///                     y = x(t-delay) and matching observer correction
///   "zero"            all maps identically zero (n=m=q=1)
/// Unknown parameter keys raise std::invalid_argument.
BenchmarkSpec make_benchmark(const std::string& name,
                             const std::map<std::string, double>& params = {});

std::vector<std::string> benchmark_names();

/// All four maps identically zero; useful as a degenerate test model.
ModelPair make_zero_model(int n, int m, int q, double delay);

}  // namespace tdsim
