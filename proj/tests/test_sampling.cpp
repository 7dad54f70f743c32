#include <doctest.h>

#include <cmath>
#include <memory>

#include "tdsim/models.hpp"
#include "tdsim/rfde.hpp"
#include "tdsim/rng.hpp"
#include "tdsim/sampling.hpp"

using tdsim::derive_seed;
using tdsim::generate_partition;
using tdsim::make_benchmark;
using tdsim::ModelPair;
using tdsim::Partition;
using tdsim::reconstruct_observer_history;
using tdsim::Rng;
using tdsim::SampledOptions;
using tdsim::SampledRun;
using tdsim::sample_initial_state;
using tdsim::Segment;
using tdsim::simulate_sampled;
using tdsim::Trajectory;

namespace {

Segment scalar_segment(double delay, std::vector<double> knots, std::vector<double> vals) {
    Eigen::MatrixXd m(1, static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = vals[i];
    return Segment(delay, std::move(knots), m);
}

// Synthetic run with externally chosen observer samples; the plant part is
// irrelevant for reconstruction tests.
SampledRun synthetic_run(const Segment& initial_observer, Partition partition,
                         Eigen::MatrixXd samples) {
    Eigen::MatrixXd plant_states(initial_observer.dim(), 2);
    plant_states.col(0) = Eigen::VectorXd::Zero(initial_observer.dim());
    plant_states.col(1) = Eigen::VectorXd::Zero(initial_observer.dim());
    Trajectory plant(Segment::zero(initial_observer.delay(), initial_observer.dim()),
                     {0.0, partition.times.back()}, plant_states);
    return SampledRun{std::move(plant), initial_observer, partition.times, std::move(samples),
                      std::move(partition)};
}

}  // namespace

TEST_SUITE_BEGIN("sampling");

TEST_CASE("periodic partition covers the horizon") {
    const Partition p = generate_partition(1.0, 0.1, 0.35, 0);
    REQUIRE(p.times.size() == 5);
    const double expect[] = {0.0, 0.1, 0.2, 0.3, 0.4};
    for (int i = 0; i < 5; ++i)
        CHECK(p.times[static_cast<std::size_t>(i)] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("gaps stay inside [a delta, delta] by construction") {
    const Partition p = generate_partition(0.35, 0.01, 70.0, 99);  // >10^4 draws
    CHECK(p.times.size() > 10000);
    for (std::size_t i = 1; i < p.times.size(); ++i) {
        const double gap = p.times[i] - p.times[i - 1];
        CHECK(gap >= 0.35 * 0.01 * (1.0 - 1e-9));
        CHECK(gap <= 0.01 * (1.0 + 1e-9));
    }
}

TEST_CASE("partition generation is deterministic per seed") {
    const Partition p1 = generate_partition(0.5, 0.1, 10.0, 42);
    const Partition p2 = generate_partition(0.5, 0.1, 10.0, 42);
    const Partition p3 = generate_partition(0.5, 0.1, 10.0, 43);
    CHECK(p1.times == p2.times);
    CHECK(p1.times != p3.times);
}

TEST_CASE("partition validation") {
    CHECK_THROWS_AS((void)generate_partition(0.0, 0.1, 1.0, 0), std::domain_error);
    CHECK_THROWS_AS((void)generate_partition(1.5, 0.1, 1.0, 0), std::domain_error);
    CHECK_THROWS_AS((void)generate_partition(1.0, -0.1, 1.0, 0), std::domain_error);
    CHECK_THROWS_AS(Partition(0.9, 0.1, {0.0, 0.05}), std::domain_error);  // gap < a delta
    CHECK_THROWS_AS(Partition(0.5, 0.1, {0.1, 0.2}), std::domain_error);   // must start at 0
}

TEST_CASE("reconstruction at the first instant returns the initial data") {
    const Segment init = scalar_segment(1.0, {-1.0, -0.25, 0.0}, {4.0, -2.0, 1.0});
    Eigen::MatrixXd samples(1, 2);
    samples << 1.0, 9.0;  // col 0 must equal init(0)
    const SampledRun run = synthetic_run(init, Partition(1.0, 0.5, {0.0, 0.5}), samples);
    const Segment rec = reconstruct_observer_history(run, 0.0);
    CHECK(rec.knots() == init.knots());
    CHECK(rec.values() == init.values());
}

TEST_CASE("reconstruction interpolates between stored samples") {
    const Segment init = Segment::constant(1.0, Eigen::VectorXd::Ones(1));
    Eigen::MatrixXd samples(1, 2);
    samples << 1.0, 2.0;
    const SampledRun run = synthetic_run(init, Partition(1.0, 0.1, {0.0, 0.1}), samples);
    const Segment rec = reconstruct_observer_history(run, 0.1);
    CHECK(rec.eval(-0.05)(0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(rec.eval(0.0)(0) == 2.0);

    CHECK_THROWS_AS((void)reconstruct_observer_history(run, 0.07), std::domain_error);
}

TEST_CASE("reconstruction reads the initial data branch") {
    // xhat0(theta) = 3 - 2 theta on [-1, 0]
    const Segment init = scalar_segment(1.0, {-1.0, 0.0}, {5.0, 3.0});
    Eigen::MatrixXd samples(1, 2);
    samples << 3.0, 7.0;
    const SampledRun run = synthetic_run(init, Partition(1.0, 0.4, {0.0, 0.4}), samples);
    const Segment rec = reconstruct_observer_history(run, 0.4);
    // t_j + theta = -0.3 <= 0 -> xhat0(-0.3)
    CHECK(rec.eval(-0.7)(0) == doctest::Approx(3.6).epsilon(1e-14));
    // splice: theta = -t_j returns xhat0(0) = xhat(t_0) bit-exactly
    CHECK(rec.eval(-0.4)(0) == 3.0);
}

TEST_CASE("reconstruction is node-exact on randomized runs") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(seed);
        const double delta = rng.uniform(0.05, 0.3);
        const Partition part = generate_partition(0.5, delta, 3.0, seed + 1000);
        const std::size_t j_count = part.times.size();
        Eigen::MatrixXd samples(2, static_cast<Eigen::Index>(j_count));
        for (Eigen::Index c = 0; c < samples.cols(); ++c)
            for (int d = 0; d < 2; ++d) samples(d, c) = rng.uniform(-5.0, 5.0);
        Eigen::MatrixXd init_vals(2, 2);
        init_vals.col(0) << rng.uniform(-5, 5), rng.uniform(-5, 5);
        init_vals.col(1) = samples.col(0);  // continuity at 0
        const Segment init(1.0, {-1.0, 0.0}, init_vals);
        const SampledRun run = synthetic_run(init, part, samples);

        for (std::size_t j = 0; j < j_count; j += 3) {
            const double tj = part.times[j];
            const Segment rec = reconstruct_observer_history(run, tj);
            for (std::size_t l = 0; l <= j; ++l) {
                const double theta = part.times[l] - tj;
                if (theta < -1.0) continue;
                CHECK(rec.eval(theta) == samples.col(static_cast<Eigen::Index>(l)));
            }
            // initial branch at shifted initial knots is stored exactly
            if (tj < 1.0) {
                const double theta = -1.0 + (1.0 - tj);  // knot -1.0 shifted... skip: below -delay
                (void)theta;
                CHECK(rec.eval(-tj) == init_vals.col(1));
            }
        }
    }
}

TEST_CASE("zero model with zero data yields the zero run") {
    const ModelPair zero = tdsim::make_zero_model(1, 1, 1, 1.0);
    const Segment z = Segment::zero(1.0, 1);
    const SampledRun run =
        simulate_sampled(zero, z, z, generate_partition(1.0, 0.25, 2.0, 0), SampledOptions{});
    CHECK(run.plant.states().cwiseAbs().maxCoeff() == 0.0);
    CHECK(run.observer_values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one interval performs a single explicit Euler observer update") {
    ModelPair m = tdsim::make_zero_model(1, 1, 1, 1.0);
    m.f_hat = [](const tdsim::History&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        Eigen::VectorXd c(1);
        c << 2.5;
        return c;
    };
    Eigen::VectorXd x0v(1);
    x0v << 0.5;
    const Segment xh0 = Segment::constant(1.0, x0v);
    const SampledRun run = simulate_sampled(m, Segment::zero(1.0, 1), xh0,
                                            Partition(1.0, 0.4, {0.0, 0.4}), SampledOptions{});
    CHECK(run.observer_values(0, 0) == 0.5);
    CHECK(run.observer_values(0, 1) == doctest::Approx(0.5 + 0.4 * 2.5).epsilon(1e-15));
}

TEST_CASE("the input is held: one feedback evaluation per interval") {
    auto spec = make_benchmark("linear-scalar");
    ModelPair m = spec.model;
    auto counter = std::make_shared<int>(0);
    const auto base_k = m.k;
    m.k = [counter, base_k](const tdsim::History& phi, const Eigen::VectorXd& y) {
        ++*counter;
        return base_k(phi, y);
    };
    const Partition part = generate_partition(0.5, 0.2, 5.0, 7);
    Eigen::VectorXd one(1);
    one << 1.0;
    (void)simulate_sampled(m, Segment::constant(1.0, one), Segment::zero(1.0, 1), part,
                           SampledOptions{});
    CHECK(*counter == static_cast<int>(part.times.size()) - 1);
}

TEST_CASE("sampled benchmark tracks the stable loop at small delta") {
    const ModelPair m = make_benchmark("linear-scalar").model;
    Eigen::VectorXd one(1);
    one << 1.0;
    const SampledRun run =
        simulate_sampled(m, Segment::constant(1.0, one), Segment::zero(1.0, 1),
                         generate_partition(1.0, 0.05, 30.0, 0), SampledOptions{});
    CHECK(run.plant.window(30.0).sup_norm() <= 1e-2);
}

TEST_CASE("a functional output map runs through the whole sampled loop") {
    // y = x(t - delay): exercises segment-wide reads of h in window
    // construction, reconstruction and the hold path
    const ModelPair m = make_benchmark("delayed-output").model;
    Eigen::VectorXd one(1);
    one << 1.0;
    const SampledRun run =
        simulate_sampled(m, Segment::constant(1.0, one), Segment::zero(1.0, 1),
                         generate_partition(1.0, 0.05, 30.0, 0), SampledOptions{});
    CHECK(run.plant.window(30.0).sup_norm() <= 1e-2);

    tdsim::IntegratorConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 30.0;
    const Trajectory traj = integrate_continuous(m, Segment::constant(1.0, one),
                                                 Segment::zero(1.0, 1), cfg);
    CHECK(traj.window(30.0).sup_norm() <= 1e-3);
}

TEST_CASE("sampled plant error scales linearly in delta") {
    const ModelPair m = make_benchmark("linear-scalar").model;
    Eigen::VectorXd one(1);
    one << 1.0;
    const Segment x0 = Segment::constant(1.0, one);
    const Segment xh0 = Segment::zero(1.0, 1);
    tdsim::IntegratorConfig rc;
    rc.step = 1e-3;
    rc.scheme = tdsim::Scheme::rk4;
    rc.horizon = 5.0;
    const Trajectory ref = integrate_continuous(m, x0, xh0, rc);

    std::vector<double> errors;
    for (const double delta : {0.1, 0.05, 0.025}) {
        const SampledRun run = simulate_sampled(m, x0, xh0,
                                                generate_partition(1.0, delta, 5.0, 0),
                                                SampledOptions{});
        double err = 0.0;
        for (std::size_t i = 0; i < run.plant.times().size(); ++i) {
            const double t = run.plant.times()[i];
            if (t > 5.0) break;
            err = std::max(err, std::abs(run.plant.states()(0, static_cast<Eigen::Index>(i)) -
                                         ref.value_at(t)(0)));
        }
        errors.push_back(err);
    }
    CHECK(errors[0] / errors[1] >= 1.6);
    CHECK(errors[0] / errors[1] <= 2.4);
    CHECK(errors[1] / errors[2] >= 1.6);
    CHECK(errors[1] / errors[2] <= 2.4);
}

TEST_CASE("divergence reports the interval index") {
    const ModelPair m = make_benchmark("linear-scalar", {{"K", -1.5}}).model;
    Eigen::VectorXd one(1);
    one << 1.0;
    bool thrown = false;
    try {
        (void)simulate_sampled(m, Segment::constant(1.0, one), Segment::zero(1.0, 1),
                               generate_partition(1.0, 0.1, 40.0, 0), SampledOptions{});
    } catch (const tdsim::DivergenceError& e) {
        thrown = true;
        REQUIRE(e.interval.has_value());
        CHECK(*e.interval > 0);
    }
    CHECK(thrown);
}

TEST_CASE("initial-state sampler honors both bounds exactly") {
    const double q = 1.0, radius = 1.0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const Segment s = sample_initial_state(radius, q, 1.0, 2, seed);
        CHECK(s.sup_norm() <= radius);
        CHECK(s.slope_bound() <= q / std::sqrt(2.0));
        CHECK(s.knots().size() == 8);
    }
    // stacked draws respect the combined bounds
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const Segment a = sample_initial_state(radius / std::sqrt(2.0), q, 1.0, 1, 2 * seed);
        const Segment b = sample_initial_state(radius / std::sqrt(2.0), q, 1.0, 1, 2 * seed + 1);
        const Segment s = stack(a, b);
        CHECK(s.sup_norm() <= radius);
        CHECK(s.slope_bound() <= q);
    }
}

TEST_CASE("initial-state sampler edge cases") {
    const Segment z = sample_initial_state(0.0, 1.0, 1.0, 2, 5);
    CHECK(z.sup_norm() == 0.0);

    const Segment a = sample_initial_state(1.0, 1.0, 1.0, 2, 17);
    const Segment b = sample_initial_state(1.0, 1.0, 1.0, 2, 17);
    CHECK(a.values() == b.values());
    const Segment c = sample_initial_state(1.0, 1.0, 1.0, 2, 18);
    CHECK(a.values() != c.values());
}

TEST_CASE("slope precondition is enforced when enabled") {
    const ModelPair m = make_benchmark("linear-scalar").model;
    Eigen::MatrixXd vals(1, 2);
    vals << -1.0, 1.0;  // slope 2
    const Segment steep(1.0, {-1.0, 0.0}, vals);
    const Partition part = generate_partition(1.0, 0.1, 1.0, 0);
    CHECK_THROWS_AS(
        (void)simulate_sampled(m, steep, Segment::zero(1.0, 1), part, SampledOptions{}),
        std::domain_error);
    SampledOptions off;
    off.q_tilde.reset();
    CHECK_NOTHROW((void)simulate_sampled(m, steep, Segment::zero(1.0, 1), part, off));
}

TEST_SUITE_END();
