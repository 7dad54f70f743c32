#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdsim/history.hpp"
#include "tdsim/models.hpp"

namespace tdsim {

/// Declared comparison-function class. Membership is validated on a grid
/// only (monotonicity/unboundedness beyond the grid is a declared
/// contract, not a proof).
enum class FnClass { class_p, class_k, class_k_infinity };

struct ComparisonFn {
    std::function<double(double)> fn;
    FnClass declared = FnClass::class_k;
};

/// Everything a smoothly-separable functional V = V1(phi(0)) + V2(phi)
/// needs to drive the checkers: the two parts, the comparison functions
/// sandwiching V1 (beta1/beta2) and V (gamma1/gamma2), the decay rate
/// alpha3, the descent-margin function alpha_bar, the scaling function p
/// with constants eta, mu and the toggle nu in {0, 1}.
///
/// Contracts (documented, grid-checked where possible): v1 is C^1 with
/// locally Lipschitz gradient, v2 is locally Lipschitz, and the map
/// (phi, u) -> D+V2(phi, u) is Lipschitz on bounded sets.
struct FunctionalSuite {
    std::function<double(const Eigen::VectorXd&)> v1;
    std::function<double(const Segment&)> v2;
    ComparisonFn gamma1, gamma2, beta1, beta2, alpha3, alpha_bar, p;
    double eta = 1.0;
    double mu = 1.0;
    int nu = 1;
};

/// V(phi) = V1(phi(0)) + V2(phi).
double suite_value(const FunctionalSuite& suite, const Segment& phi);

/// Exact per-piece quadrature of int_{-delay}^{0} e^{lambda theta}
/// |phi(theta)|^2 dtheta for piecewise-linear segments (no quadrature
/// error beyond rounding).
double exp_weighted_sq_integral(const Segment& phi, double lambda);

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DriverOptions {
    /// Strictly decreasing extension widths, all inside (0, delay).
    std::vector<double> h_sequence{1e-2, 1e-3, 1e-4, 1e-5};
};

/// Finite-h estimate of the Driver-form derivative
///   D+V(phi, u) = limsup_{h->0+} (V(phi_{h,u}) - V(phi)) / h
/// along a fixed drift f(phi, u). The limsup is approximated by the max of
/// the two smallest-h quotients; `richardson` extrapolates those two
/// assuming first-order error. A non-monotone quotient sequence clears
/// `monotone` so callers can flag the sample instead of trusting the
/// estimate.
struct DriverEstimate {
    double estimate = 0.0;
    double richardson = 0.0;
    std::vector<double> quotients;
    bool monotone = true;
};

DriverEstimate driver_derivative(const std::function<double(const Segment&)>& functional,
                                 const Segment& phi, const Eigen::VectorXd& drift,
                                 const DriverOptions& opts = {});

struct Violation {
    std::string inequality;
    std::int64_t sample = -1;  // index into the sample batch; -1 for grid checks
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // lhs - rhs; positive means violated
};

struct FlaggedSample {
    std::string inequality;
    std::int64_t sample = -1;
    std::string reason;
};

struct CheckReport {
    std::string checker;
    int samples_tested = 0;
    std::vector<Violation> violations;
    std::vector<FlaggedSample> flagged;
    double worst_margin = 0.0;  // max of lhs - rhs over everything evaluated
    bool passed = true;         // passed iff violations is empty
};

struct CheckOptions {
    double eval_tolerance = 1e-9;  // for inequalities evaluated without estimation
    double abs_tolerance = 1e-6;   // estimation tolerance: abs + rel * |estimate|
    double rel_tolerance = 1e-3;
    double class_grid_max = 10.0;
    int class_grid_points = 64;
    DriverOptions driver;
};

/// Grid validation of every declared comparison-function class in the
/// suite (zero at zero, positivity, strict growth, unbounded tail for
/// K-infinity, and identity-minus-alpha_bar of class K-infinity).
CheckReport check_comparison_classes(const FunctionalSuite& suite, const CheckOptions& opts = {});

/// Smooth separability: beta1(|phi(0)|) <= V1(phi(0)) <= beta2(|phi(0)|)
/// over the samples, plus the class checks for beta1/beta2.
CheckReport check_smooth_separability(const FunctionalSuite& suite,
                                      const std::vector<Segment>& samples,
                                      const CheckOptions& opts = {});

/// The standing assumption on the closed loop, per sample phi (dim 2n):
///   (i)   gamma1(|phi(0)|) <= V(phi) <= gamma2(sup_norm(phi))
///   (ii)  D+V(phi, 0) <= -alpha3(|phi(0)|)
///   (iii) nu D+V(phi, 0) + eta D+(p o V1)(phi, 0)
///           + eta mu p(V1(phi(0))) <= 0
/// with the Driver derivatives estimated along the closed-loop drift
/// F(phi) (the fictitious input-free choice u = 0). Estimates with
/// non-monotone quotient sequences are flagged rather than counted.
CheckReport check_assumption1(const FunctionalSuite& suite, const ModelPair& model,
                              const std::vector<Segment>& samples,
                              const CheckOptions& opts = {});

enum class DescentMode { definition4, proof_form };

/// Steepest-descent inequality for the composite feedback, per sample:
///   nu D+V(phi, k~(phi)) + eta max{0, D+(p o V1)(phi, k~(phi))
///     + mu p(V1(phi(0)))}  <=  RHS
/// where RHS is alpha_bar(eta mu e^{-mu delay} p(beta1(sup_norm phi)))
/// in definition4 mode and 0 in the stricter proof_form mode. The Driver
/// estimates run along the open-loop drift F~(phi, k~(phi)).
CheckReport check_steepest_descent(const FunctionalSuite& suite, const ModelPair& model,
                                   const std::vector<Segment>& samples, DescentMode mode,
                                   const CheckOptions& opts = {});

/// The functional suite shipped for the default linear-scalar benchmark:
/// V1(x, xh) = x^2 + (x - xh)^2, V2 = c int e^{lambda theta} |phi|^2 with
/// c = lambda = 0.1, quadratic comparison functions from the exact
/// eigenvalue bounds of V1, alpha3(s) = 0.05 s^2, alpha_bar(s) = s/2,
/// p = id, eta = mu = lambda, nu = 1. Constants verified empirically
/// against the worst case over free delayed values before being frozen.
FunctionalSuite linear_scalar_suite(double delay = 1.0);

/// Registered suite for a benchmark name, when one ships.
std::optional<FunctionalSuite> suite_for_benchmark(const std::string& name, double delay);

/// Random piecewise-linear segments with sup_norm <= sup_bound: 2..12
/// knots, per-component uniform values. Sample i is drawn from
/// derive_seed(seed, i), so batches are stable under count changes.
std::vector<Segment> sample_segments(double delay, int dim, int count, double sup_bound,
                                     std::uint64_t seed);

}  // namespace tdsim
