#include <doctest.h>

#include <cmath>

#include "tdsim/models.hpp"
#include "tdsim/rfde.hpp"

using tdsim::FeedbackPath;
using tdsim::integrate_continuous;
using tdsim::integrate_extended;
using tdsim::integrate_rfde;
using tdsim::IntegratorConfig;
using tdsim::make_benchmark;
using tdsim::ModelPair;
using tdsim::Scheme;
using tdsim::Segment;
using tdsim::Trajectory;

namespace {

IntegratorConfig cfg(double step, Scheme scheme, double horizon) {
    IntegratorConfig c;
    c.step = step;
    c.scheme = scheme;
    c.horizon = horizon;
    return c;
}

double max_state_diff(const Trajectory& a, const Trajectory& b) {
    REQUIRE(a.times().size() == b.times().size());
    return (a.states() - b.states()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE_BEGIN("rfde");

TEST_CASE("zero dynamics keep the state constant") {
    const ModelPair zero = tdsim::make_zero_model(1, 1, 1, 1.0);
    Eigen::VectorXd c0(1);
    c0 << 0.8;
    const Segment x0 = Segment::constant(1.0, c0);
    const Trajectory traj = integrate_continuous(zero, x0, x0, cfg(0.1, Scheme::rk4, 3.0));
    CHECK((traj.states().row(0).array() - 0.8).abs().maxCoeff() == 0.0);
    CHECK(traj.end_time() == doctest::Approx(3.0));
}

TEST_CASE("delay-free exponential decay hits the analytic value") {
    // x' = -x through the functional interface; x(1) = exp(-1)
    const auto rhs = [](const tdsim::History& phi, Eigen::Ref<Eigen::VectorXd> out) {
        out = -phi.eval(0.0);
    };
    Eigen::VectorXd one(1);
    one << 1.0;
    const Trajectory traj =
        integrate_rfde(rhs, Segment::constant(1.0, one), cfg(0.01, Scheme::rk4, 1.0));
    CHECK(std::abs(traj.value_at(1.0)(0) - std::exp(-1.0)) < 1e-5);
}

TEST_CASE("closed-loop benchmark decays from unit initial data") {
    const ModelPair m = make_benchmark("linear-scalar").model;
    Eigen::VectorXd one(1);
    one << 1.0;
    const Trajectory traj =
        integrate_continuous(m, Segment::constant(1.0, one), Segment::zero(1.0, 1),
                             cfg(1e-3, Scheme::rk4, 30.0));
    CHECK(traj.window(30.0).sup_norm() <= 1e-3);
}

TEST_CASE("nonlinear benchmark decays as well") {
    const ModelPair m = make_benchmark("nonlinear-sine").model;
    Eigen::VectorXd one(1);
    one << 1.0;
    const Trajectory traj =
        integrate_continuous(m, Segment::constant(1.0, one), Segment::zero(1.0, 1),
                             cfg(1e-3, Scheme::rk4, 30.0));
    CHECK(traj.window(30.0).sup_norm() <= 1e-3);
}

TEST_CASE("composite and stacked integration paths agree to rounding") {
    Eigen::VectorXd one(1);
    one << 1.0;
    for (const auto& name : {"linear-scalar", "nonlinear-sine"}) {
        const ModelPair m = make_benchmark(name).model;
        const Segment x0 = Segment::constant(1.0, one);
        const Segment xh0 = Segment::zero(1.0, 1);
        const auto c = cfg(0.01, Scheme::rk4, 10.0);
        const Trajectory direct = integrate_continuous(m, x0, xh0, c);
        const Trajectory composite = integrate_extended(m, x0, xh0, FeedbackPath::composite, c);
        const Trajectory stacked = integrate_extended(m, x0, xh0, FeedbackPath::stacked, c);
        CHECK(max_state_diff(direct, composite) <= 1e-12);
        CHECK(max_state_diff(direct, stacked) == 0.0);
    }
}

TEST_CASE("extended integration of zero data stays zero") {
    const ModelPair m = make_benchmark("linear-scalar").model;
    const Segment z = Segment::zero(1.0, 1);
    const Trajectory traj =
        integrate_extended(m, z, z, FeedbackPath::composite, cfg(0.05, Scheme::rk4, 5.0));
    CHECK(traj.states().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("step halving shows the scheme orders") {
    const ModelPair m = make_benchmark("linear-scalar").model;
    Eigen::VectorXd one(1);
    one << 1.0;
    const Segment x0 = Segment::constant(1.0, one);
    const Segment xh0 = Segment::zero(1.0, 1);
    const Trajectory ref = integrate_continuous(m, x0, xh0, cfg(1e-4, Scheme::rk4, 5.0));
    const Eigen::VectorXd ref_end = ref.value_at(5.0);

    const auto terminal_error = [&](double step, Scheme scheme) {
        const Trajectory t = integrate_continuous(m, x0, xh0, cfg(step, scheme, 5.0));
        return (t.value_at(5.0) - ref_end).norm();
    };
    const double e1 = terminal_error(0.02, Scheme::euler);
    const double e2 = terminal_error(0.01, Scheme::euler);
    CHECK(e1 / e2 >= 1.7);
    CHECK(e1 / e2 <= 2.3);

    const double r1 = terminal_error(0.1, Scheme::rk4);
    const double r2 = terminal_error(0.05, Scheme::rk4);
    CHECK(r1 / r2 >= 12.0);
    CHECK(r1 / r2 <= 20.0);
}

TEST_CASE("consecutive states move no faster than the local drift bound") {
    const ModelPair m = make_benchmark("linear-scalar").model;
    Eigen::VectorXd one(1);
    one << 1.0;
    const Trajectory traj =
        integrate_continuous(m, Segment::constant(1.0, one), Segment::zero(1.0, 1),
                             cfg(0.01, Scheme::rk4, 10.0));
    double max_norm = 0.0;
    for (Eigen::Index i = 0; i < traj.states().cols(); ++i)
        max_norm = std::max(max_norm, traj.states().col(i).norm());
    const double drift_bound = 5.0 * max_norm;  // coarse Lipschitz bound for this model
    for (Eigen::Index i = 1; i < traj.states().cols(); ++i) {
        const double dt = traj.times()[static_cast<std::size_t>(i)] -
                          traj.times()[static_cast<std::size_t>(i - 1)];
        CHECK((traj.states().col(i) - traj.states().col(i - 1)).norm() <=
              dt * (drift_bound + 1.0));
    }
}

TEST_CASE("destabilized feedback diverges loudly") {
    const ModelPair m = make_benchmark("linear-scalar", {{"K", -1.5}}).model;
    Eigen::VectorXd one(1);
    one << 1.0;
    bool thrown = false;
    try {
        (void)integrate_continuous(m, Segment::constant(1.0, one), Segment::zero(1.0, 1),
                                   cfg(0.01, Scheme::rk4, 40.0));
    } catch (const tdsim::DivergenceError& e) {
        thrown = true;
        CHECK(e.time > 0.0);
        CHECK(e.time < 40.0);
    }
    CHECK(thrown);
}

TEST_CASE("configuration preconditions") {
    const ModelPair m = make_benchmark("linear-scalar").model;
    const Segment z = Segment::zero(1.0, 1);
    CHECK_THROWS_AS((void)integrate_continuous(m, z, z, cfg(1.5, Scheme::euler, 1.0)),
                    std::domain_error);
    CHECK_THROWS_AS((void)integrate_continuous(m, z, z, cfg(0.7, Scheme::rk4, 1.0)),
                    std::domain_error);

    // slope precondition: a ramp from -1 to 1 has slope 2 > q/sqrt(2)
    Eigen::MatrixXd vals(1, 2);
    vals << -1.0, 1.0;
    const Segment steep(1.0, {-1.0, 0.0}, vals);
    auto guarded = cfg(0.01, Scheme::rk4, 1.0);
    guarded.q_tilde = 1.0;
    CHECK_THROWS_AS((void)integrate_continuous(m, steep, z, guarded), std::domain_error);
    CHECK_NOTHROW((void)integrate_continuous(m, z, z, guarded));
}

TEST_SUITE_END();
