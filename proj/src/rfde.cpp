#include "tdsim/rfde.hpp"

#include <cmath>

#include "stepper.hpp"

namespace tdsim {

namespace {

void validate_config(const IntegratorConfig& cfg, double delay) {
    if (!(cfg.step > 0.0)) throw std::domain_error("integrate: step must be positive");
    if (!(cfg.horizon > 0.0)) throw std::domain_error("integrate: horizon must be positive");
    if (cfg.step > delay) throw std::domain_error("integrate: step must not exceed the delay");
    if (cfg.scheme == Scheme::rk4 && cfg.step > 0.5 * delay)
        throw std::domain_error("integrate: rk4 requires step <= delay/2");
}

void check_slope_precondition(const Segment& seg, double q_tilde, const char* which) {
    if (seg.slope_bound() > q_tilde / std::sqrt(2.0))
        throw std::domain_error(std::string("integrate: ") + which +
                                " violates the slope bound q/sqrt(2)");
}

}  // namespace

Trajectory integrate_rfde(const RhsFn& rhs, const Segment& initial, const IntegratorConfig& cfg) {
    validate_config(cfg, initial.delay());
    if (cfg.q_tilde && initial.slope_bound() > *cfg.q_tilde)
        throw std::domain_error("integrate: initial segment violates the slope bound q");

    const double tiny = 1e-9 * cfg.step;
    const auto full_steps = static_cast<std::size_t>(std::floor(cfg.horizon / cfg.step + tiny));
    const bool partial = full_steps * cfg.step < cfg.horizon - tiny;
    detail::DenseRecord rec(initial, full_steps + (partial ? 1 : 0) + 1,
                            cfg.scheme == Scheme::rk4);

    for (std::size_t i = 1; i <= full_steps; ++i) {
        if (!detail::advance_step(rec, rhs, static_cast<double>(i) * cfg.step, cfg.scheme))
            throw DivergenceError("integrate: state norm exceeded 1e9",
                                  static_cast<double>(i) * cfg.step);
    }
    if (partial && rec.front_time() < cfg.horizon) {
        if (!detail::advance_step(rec, rhs, cfg.horizon, cfg.scheme))
            throw DivergenceError("integrate: state norm exceeded 1e9", cfg.horizon);
    }
    return detail::export_trajectory(initial, rec);
}

Trajectory integrate_continuous(const ModelPair& model, const Segment& x0, const Segment& xhat0,
                                const IntegratorConfig& cfg) {
    if (x0.dim() != model.state_dim || xhat0.dim() != model.state_dim)
        throw std::domain_error("integrate_continuous: initial segments must have dimension n");
    if (x0.delay() != model.delay || xhat0.delay() != model.delay)
        throw std::domain_error("integrate_continuous: delay mismatch with the model");
    if (cfg.q_tilde) {
        check_slope_precondition(x0, *cfg.q_tilde, "x0");
        check_slope_precondition(xhat0, *cfg.q_tilde, "xhat0");
    }
    IntegratorConfig inner = cfg;
    inner.q_tilde.reset();  // already enforced on the components
    const Segment initial = stack(x0, xhat0);
    return integrate_rfde(
        [&model](const History& phi, Eigen::Ref<Eigen::VectorXd> out) {
            out = stacked_rhs(model, phi);
        },
        initial, inner);
}

Trajectory integrate_extended(const ModelPair& model, const Segment& x0, const Segment& xhat0,
                              FeedbackPath path, const IntegratorConfig& cfg) {
    if (path == FeedbackPath::stacked) return integrate_continuous(model, x0, xhat0, cfg);
    if (x0.dim() != model.state_dim || xhat0.dim() != model.state_dim)
        throw std::domain_error("integrate_extended: initial segments must have dimension n");
    if (x0.delay() != model.delay || xhat0.delay() != model.delay)
        throw std::domain_error("integrate_extended: delay mismatch with the model");
    if (cfg.q_tilde) {
        check_slope_precondition(x0, *cfg.q_tilde, "x0");
        check_slope_precondition(xhat0, *cfg.q_tilde, "xhat0");
    }
    IntegratorConfig inner = cfg;
    inner.q_tilde.reset();
    const Segment initial = stack(x0, xhat0);
    return integrate_rfde(
        [&model](const History& phi, Eigen::Ref<Eigen::VectorXd> out) {
            out = extended_rhs(model, phi, composite_feedback(model, phi));
        },
        initial, inner);
}

}  // namespace tdsim
