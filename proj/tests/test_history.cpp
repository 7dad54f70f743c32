#include <doctest.h>

#include <cmath>

#include "tdsim/history.hpp"
#include "tdsim/rng.hpp"

using tdsim::Rng;
using tdsim::Segment;
using tdsim::Trajectory;

namespace {

Segment scalar_segment(double delay, std::vector<double> knots, std::vector<double> vals) {
    Eigen::MatrixXd m(1, static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = vals[i];
    return Segment(delay, std::move(knots), m);
}

Segment random_segment(double delay, int dim, double amp, std::uint64_t seed) {
    Rng rng(seed);
    const int interior = static_cast<int>(rng.raw() % 7);
    std::vector<double> knots{-delay};
    std::vector<double> inner(static_cast<std::size_t>(interior));
    for (auto& v : inner) v = rng.uniform(-delay, 0.0);
    std::sort(inner.begin(), inner.end());
    for (double v : inner)
        if (v - knots.back() > 1e-6 && -v > 1e-6) knots.push_back(v);
    knots.push_back(0.0);
    Eigen::MatrixXd values(dim, static_cast<Eigen::Index>(knots.size()));
    for (Eigen::Index j = 0; j < values.cols(); ++j)
        for (int d = 0; d < dim; ++d) values(d, j) = rng.uniform(-amp, amp);
    return Segment(delay, std::move(knots), std::move(values));
}

}  // namespace

TEST_SUITE_BEGIN("history");

TEST_CASE("segment evaluation at and between knots") {
    const Segment zero = Segment::zero(1.0, 1);
    CHECK(zero.eval(-0.5)(0) == 0.0);

    const Segment lin = scalar_segment(1.0, {-1.0, 0.0}, {1.0, 2.0});
    CHECK(lin.eval(0.0)(0) == 2.0);   // endpoint exactness
    CHECK(lin.eval(-1.0)(0) == 1.0);
    CHECK(lin.eval(-0.5)(0) == doctest::Approx(1.5).epsilon(1e-15));

    CHECK_THROWS_AS((void)lin.eval(-1.5), std::domain_error);
    CHECK_THROWS_AS((void)lin.eval(0.25), std::domain_error);
}

TEST_CASE("segment evaluation returns stored knot values bit-exactly") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Segment seg = random_segment(1.0, 3, 5.0, seed);
        for (std::size_t i = 0; i < seg.knots().size(); ++i) {
            const Eigen::VectorXd v = seg.eval(seg.knots()[i]);
            CHECK(v == seg.values().col(static_cast<Eigen::Index>(i)));
        }
    }
}

TEST_CASE("segment constructor rejects malformed input") {
    Eigen::MatrixXd two = Eigen::MatrixXd::Zero(1, 2);
    CHECK_THROWS_AS(Segment(1.0, {-0.9, 0.0}, two), std::invalid_argument);
    CHECK_THROWS_AS(Segment(1.0, {-1.0, 0.1}, two), std::invalid_argument);
    CHECK_THROWS_AS(Segment(-1.0, {1.0, 0.0}, two), std::invalid_argument);
    Eigen::MatrixXd three = Eigen::MatrixXd::Zero(1, 3);
    CHECK_THROWS_AS(Segment(1.0, {-1.0, -0.5, -0.5, 0.0}, three), std::invalid_argument);
    CHECK_THROWS_AS(Segment(1.0, {-1.0, 0.0}, three), std::invalid_argument);
    Eigen::MatrixXd bad = two;
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(Segment(1.0, {-1.0, 0.0}, bad), std::invalid_argument);
}

TEST_CASE("sup_norm over knots") {
    CHECK(Segment::zero(1.0, 2).sup_norm() == 0.0);
    CHECK(scalar_segment(1.0, {-1.0, -0.5, 0.0}, {1.0, -3.0, 2.0}).sup_norm() == 3.0);

    Eigen::MatrixXd v(2, 2);
    v << 3.0, 0.0, 4.0, 0.0;
    CHECK(Segment(1.0, {-1.0, 0.0}, v).sup_norm() == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("slope_bound over pieces") {
    Eigen::VectorXd c(1);
    c << 3.25;
    CHECK(Segment::constant(2.0, c).slope_bound() == 0.0);
    CHECK(scalar_segment(1.0, {-1.0, 0.0}, {0.0, 0.7}).slope_bound() ==
          doctest::Approx(0.7).epsilon(1e-15));
    CHECK(scalar_segment(2.0, {-2.0, -1.0, 0.0}, {0.0, 1.0, 0.5}).slope_bound() ==
          doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("stack of zero segments and the sqrt2 mechanism") {
    const Segment z = Segment::zero(1.0, 1);
    const Segment zz = stack(z, z);
    CHECK(zz.dim() == 2);
    CHECK(zz.sup_norm() == 0.0);

    Eigen::VectorXd v(1);
    v << 0.7071;
    const Segment a = Segment::constant(1.0, v);
    const Segment ab = stack(a, a);
    // each component bounded by q/sqrt(2) makes the stacked norm ~q
    CHECK(std::abs(ab.eval(-0.3).norm() - 1.0) < 2e-5);
}

TEST_CASE("stack refines to the union knot set") {
    const Segment a = scalar_segment(1.0, {-1.0, 0.0}, {1.0, 2.0});
    const Segment b = scalar_segment(1.0, {-1.0, -0.3, 0.0}, {0.0, 5.0, 1.0});
    const Segment s = stack(a, b);
    CHECK(s.knots() == std::vector<double>{-1.0, -0.3, 0.0});

    const Segment other_delay = scalar_segment(2.0, {-2.0, 0.0}, {0.0, 0.0});
    CHECK_THROWS_AS((void)stack(a, other_delay), std::domain_error);
}

TEST_CASE("stack is pointwise exact at union knots") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Segment a = random_segment(1.0, 2, 3.0, 2 * seed);
        const Segment b = random_segment(1.0, 1, 3.0, 2 * seed + 1);
        const Segment s = stack(a, b);
        for (const double theta : s.knots()) {
            const Eigen::VectorXd sv = s.eval(theta);
            CHECK(sv.head(2) == a.eval(theta));
            CHECK(sv.tail(1) == b.eval(theta));
            CHECK(sv.squaredNorm() ==
                  doctest::Approx(a.eval(theta).squaredNorm() + b.eval(theta).squaredNorm())
                      .epsilon(1e-14));
        }
        CHECK(s.sup_norm() * s.sup_norm() <=
              a.sup_norm() * a.sup_norm() + b.sup_norm() * b.sup_norm() + 1e-12);
    }
}

TEST_CASE("euler_extend endpoints and the two-branch formula") {
    Eigen::VectorXd d0 = Eigen::VectorXd::Zero(1);
    const Segment lin = scalar_segment(1.0, {-1.0, 0.0}, {1.0, 2.0});
    CHECK(euler_extend(lin, 0.5, d0).eval(0.0)(0) == 2.0);  // zero drift keeps the endpoint

    Eigen::VectorXd c(1), d(1);
    c << -0.25;
    d << 3.0;
    const Segment cseg = Segment::constant(1.0, c);
    CHECK(euler_extend(cseg, 0.125, d).eval(0.0)(0) ==
          doctest::Approx(-0.25 + 0.125 * 3.0).epsilon(1e-15));

    // hand evaluation of the shift + ramp branches (seg(theta) = theta + 2)
    Eigen::VectorXd drift(1);
    drift << 4.0;
    const Segment ext = euler_extend(lin, 0.25, drift);
    CHECK(ext.eval(-0.25)(0) == 2.0);                                  // seg(0)
    CHECK(ext.eval(0.0)(0) == doctest::Approx(3.0).epsilon(1e-15));    // seg(0) + h*drift
    CHECK(ext.eval(-1.0)(0) == doctest::Approx(1.25).epsilon(1e-15));  // seg(-0.75)

    CHECK_THROWS_AS((void)euler_extend(lin, 0.0, drift), std::domain_error);
    CHECK_THROWS_AS((void)euler_extend(lin, 1.0, drift), std::domain_error);
}

TEST_CASE("euler_extend agrees with a pointwise brute-force evaluator") {
    // independent oracle straight from the case formula
    const auto oracle = [](const Segment& seg, double h, const Eigen::VectorXd& drift, double s) {
        if (s < -h) return seg.eval(s + h).eval();
        return (seg.eval(0.0) + (s + h) * drift).eval();
    };
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Segment seg = random_segment(1.0, 2, 4.0, seed + 100);
        Rng rng(seed);
        Eigen::VectorXd drift(2);
        drift << rng.uniform(-3, 3), rng.uniform(-3, 3);
        const double h = rng.uniform(0.05, 0.9);
        const Segment ext = euler_extend(seg, h, drift);
        for (int g = 0; g <= 200; ++g) {
            const double s = -1.0 + g / 200.0;
            CHECK((ext.eval(s) - oracle(seg, h, drift, s)).norm() < 1e-12);
        }
    }
}

TEST_CASE("euler_extend converges to the segment as h -> 0") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Segment seg = random_segment(1.0, 1, 2.0, seed + 300);
        Eigen::VectorXd drift(1);
        drift << 1.5;
        for (const double h : {1e-2, 1e-3, 1e-4}) {
            const Segment ext = euler_extend(seg, h, drift);
            double sup = 0.0;
            // the difference is piecewise linear; checking at both knot
            // sets bounds its sup
            for (const double theta : ext.knots())
                sup = std::max(sup, (ext.eval(theta) - seg.eval(theta)).norm());
            for (const double theta : seg.knots())
                sup = std::max(sup, (ext.eval(theta) - seg.eval(theta)).norm());
            CHECK(sup <= h * (seg.slope_bound() + drift.norm()) + 1e-15);
        }
    }
}

TEST_CASE("trajectory lookup and window") {
    // x(s) = s on [0, 2] continuing a zero initial segment
    Eigen::MatrixXd states(1, 3);
    states << 0.0, 1.0, 2.0;
    const Trajectory traj(Segment::zero(1.0, 1), {0.0, 1.0, 2.0}, states);

    CHECK(traj.value_at(-0.4)(0) == 0.0);
    CHECK(traj.value_at(0.5)(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(traj.value_at(2.0)(0) == 2.0);
    CHECK_THROWS_AS((void)traj.value_at(2.5), std::domain_error);
    CHECK_THROWS_AS((void)traj.window(2.5), std::domain_error);

    const Segment w = traj.window(1.5);
    CHECK(w.eval(-1.0)(0) == doctest::Approx(0.5).epsilon(1e-15));  // direct lookup oracle
    CHECK(w.eval(0.0)(0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("window at zero reproduces the initial segment") {
    const Segment init = scalar_segment(1.0, {-1.0, -0.4, 0.0}, {2.0, -1.0, 0.5});
    Eigen::MatrixXd states(1, 2);
    states << 0.5, 0.25;
    const Trajectory traj(init, {0.0, 1.0}, states);
    const Segment w = traj.window(0.0);
    CHECK(w.knots() == init.knots());
    CHECK(w.values() == init.values());
}

TEST_CASE("constant trajectory windows stay constant") {
    Eigen::VectorXd c(1);
    c << 0.75;
    Eigen::MatrixXd states(1, 4);
    states << 0.75, 0.75, 0.75, 0.75;
    const Trajectory traj(Segment::constant(1.0, c), {0.0, 0.7, 1.3, 2.9}, states);
    for (const double t : {0.0, 0.3, 1.0, 2.9}) {
        const Segment w = traj.window(t);
        for (const double theta : w.knots()) CHECK(w.eval(theta)(0) == 0.75);
    }
}

TEST_CASE("trajectory validates continuity with the initial segment") {
    Eigen::MatrixXd states(1, 2);
    states << 0.1, 0.2;  // initial(0) = 0, mismatch
    CHECK_THROWS_AS(Trajectory(Segment::zero(1.0, 1), {0.0, 1.0}, states),
                    std::invalid_argument);
}

TEST_SUITE_END();
