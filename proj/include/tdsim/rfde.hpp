#pragma once

#include <functional>
#include <optional>
#include <stdexcept>

#include "tdsim/history.hpp"
#include "tdsim/models.hpp"

namespace tdsim {

enum class Scheme { euler, rk4 };

/// Fixed-step integration setup. `step` must not exceed the delay
/// (and not delay/2 for rk4, whose mid-stage lookups reach past the front).
/// When `q_tilde` is set, initial segments must satisfy the slope bound
/// q_tilde / sqrt(2) each, matching the admissible-initial-state contract.
struct IntegratorConfig {
    double step = 1e-2;
    Scheme scheme = Scheme::rk4;
    double horizon = 1.0;
    std::optional<double> q_tilde;  // disabled by default for the continuous engine
};

/// Raised when a state leaves the |x| <= 1e9 ball or becomes non-finite.
/// `time` is the first node at which the blow-up was detected; `interval`
/// is the sampling-interval index for sampled runs.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::string what, double time, std::optional<std::size_t> interval = {})
        : std::runtime_error(std::move(what)), time(time), interval(interval) {}
    double time;
    std::optional<std::size_t> interval;
};

/// Functional right-hand side: writes the drift for the given history.
using RhsFn = std::function<void(const History&, Eigen::Ref<Eigen::VectorXd>)>;

/// Fixed-step method-of-steps integration of x'(t) = rhs(x_t).
///
/// Node times are i*step with a final shorter step landing exactly on the
/// horizon when it is not a step multiple. Within a step, rk4 stage
/// histories are the recorded past extended linearly through the stage
/// prediction; past-node lookups use a cubic interpolant internally so the
/// scheme keeps its order through delayed arguments. The returned
/// Trajectory exposes the plain piecewise-linear record.
Trajectory integrate_rfde(const RhsFn& rhs, const Segment& initial, const IntegratorConfig& cfg);

/// Integrates the stacked closed loop x~' = F(x~_t) from [x0; xhat0].
Trajectory integrate_continuous(const ModelPair& model, const Segment& x0, const Segment& xhat0,
                                const IntegratorConfig& cfg);

/// Which algebraic route the extended integration drives.
enum class FeedbackPath { composite, stacked };

/// Integrates the same closed loop through the open-loop map and composite
/// feedback, x~' = F~(x~_t, k~(x~_t)); with FeedbackPath::stacked it runs
/// the direct route instead. Both routes evaluate identical arithmetic and
/// must agree with integrate_continuous to rounding.
Trajectory integrate_extended(const ModelPair& model, const Segment& x0, const Segment& xhat0,
                              FeedbackPath path, const IntegratorConfig& cfg);

}  // namespace tdsim
