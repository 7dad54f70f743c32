#include "tdsim/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stepper.hpp"
#include "tdsim/rfde.hpp"
#include "tdsim/rng.hpp"

namespace tdsim {

namespace {

// Core of the case formula; `available` limits how many samples may be
// read (reconstruction at t_j never looks past index j).
Eigen::VectorXd observer_value_at(const Segment& initial, const std::vector<double>& instants,
                                  const Eigen::MatrixXd& samples, std::size_t available,
                                  double s) {
    if (s <= 0.0) return initial.eval(std::max(s, -initial.delay()));
    // t_k = max{t_l <= s}
    const auto it = std::upper_bound(instants.begin(), instants.begin() +
                                         static_cast<std::ptrdiff_t>(available), s);
    const std::size_t k = static_cast<std::size_t>(it - instants.begin()) - 1;
    if (instants[k] == s || k + 1 >= available)
        return samples.col(static_cast<Eigen::Index>(k));
    const double w = (s - instants[k]) / (instants[k + 1] - instants[k]);
    return samples.col(static_cast<Eigen::Index>(k)) +
           w * (samples.col(static_cast<Eigen::Index>(k + 1)) -
                samples.col(static_cast<Eigen::Index>(k)));
}

Segment reconstruct_impl(const Segment& initial, const std::vector<double>& instants,
                         const Eigen::MatrixXd& samples, std::size_t j) {
    const double t_j = instants[j];
    const double d = initial.delay();

    std::vector<double> knots;
    std::vector<Eigen::VectorXd> cols;
    auto push = [&](double theta, const Eigen::VectorXd& v) {
        if (!knots.empty() && theta <= knots.back()) return;
        knots.push_back(theta);
        cols.push_back(v);
    };

    push(-d, observer_value_at(initial, instants, samples, j + 1, t_j - d));
    if (t_j < d) {
        // kinks of the initial-data branch, including the splice at -t_j
        for (std::size_t i = 0; i < initial.knots().size(); ++i) {
            const double abs_time = initial.knots()[i];
            if (abs_time <= t_j - d) continue;
            const double theta = abs_time - t_j;
            if (theta >= 0.0) break;
            push(theta, initial.values().col(static_cast<Eigen::Index>(i)));
        }
    }
    // stored samples inside the window, exactly at their shifted instants
    for (std::size_t l = 0; l <= j; ++l) {
        if (instants[l] <= 0.0 || instants[l] <= t_j - d) continue;
        const double theta = instants[l] - t_j;
        if (theta >= 0.0) break;
        push(theta, samples.col(static_cast<Eigen::Index>(l)));
    }
    if (knots.back() != 0.0) {
        knots.push_back(0.0);
        cols.push_back(samples.col(static_cast<Eigen::Index>(j)));
    } else {
        cols.back() = samples.col(static_cast<Eigen::Index>(j));
    }

    Eigen::MatrixXd values(initial.dim(), static_cast<Eigen::Index>(knots.size()));
    for (std::size_t i = 0; i < cols.size(); ++i)
        values.col(static_cast<Eigen::Index>(i)) = cols[i];
    return Segment(d, std::move(knots), std::move(values));
}

void check_initial_slope(const Segment& seg, double q_tilde, const char* which) {
    if (seg.slope_bound() > q_tilde / std::sqrt(2.0))
        throw std::domain_error(std::string("simulate_sampled: ") + which +
                                " violates the slope bound q/sqrt(2)");
}

}  // namespace

Partition::Partition(double a_in, double delta_in, std::vector<double> times_in)
    : a(a_in), delta(delta_in), times(std::move(times_in)) {
    if (!(a > 0.0) || a > 1.0) throw std::domain_error("Partition: a must lie in (0, 1]");
    if (!(delta > 0.0)) throw std::domain_error("Partition: delta must be positive");
    if (times.empty() || times.front() != 0.0)
        throw std::domain_error("Partition: instants must start at 0");
    const double lo = a * delta * (1.0 - 1e-9);
    const double hi = delta * (1.0 + 1e-9);
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double gap = times[i] - times[i - 1];
        if (!(gap >= lo) || !(gap <= hi))
            throw std::domain_error("Partition: gap outside [a*delta, delta]");
    }
}

Partition generate_partition(double a, double delta, double horizon, std::uint64_t seed) {
    if (!(a > 0.0) || a > 1.0) throw std::domain_error("generate_partition: a must lie in (0, 1]");
    if (!(delta > 0.0)) throw std::domain_error("generate_partition: delta must be positive");
    if (!(horizon > 0.0)) throw std::domain_error("generate_partition: horizon must be positive");

    Rng rng(seed);
    std::vector<double> times{0.0};
    while (times.back() < horizon) {
        const double gap = (a == 1.0) ? delta : a * delta + rng.unit() * (delta - a * delta);
        times.push_back(times.back() + gap);
    }
    return Partition(a, delta, std::move(times));
}

Segment reconstruct_observer_history(const SampledRun& run, double t_j) {
    const auto& instants = run.observer_times;
    const auto it = std::lower_bound(instants.begin(), instants.end(), t_j);
    if (it == instants.end() || *it != t_j)
        throw std::domain_error("reconstruct_observer_history: t_j is not a partition instant");
    const std::size_t j = static_cast<std::size_t>(it - instants.begin());
    return reconstruct_impl(run.initial_observer, instants, run.observer_values, j);
}

SampledRun simulate_sampled(const ModelPair& model, const Segment& x0, const Segment& xhat0,
                            const Partition& partition, const SampledOptions& opts) {
    if (x0.dim() != model.state_dim || xhat0.dim() != model.state_dim)
        throw std::domain_error("simulate_sampled: initial segments must have dimension n");
    if (x0.delay() != model.delay || xhat0.delay() != model.delay)
        throw std::domain_error("simulate_sampled: delay mismatch with the model");
    if (opts.substeps < 1) throw std::domain_error("simulate_sampled: substeps must be >= 1");
    if (opts.q_tilde) {
        check_initial_slope(x0, *opts.q_tilde, "x0");
        check_initial_slope(xhat0, *opts.q_tilde, "xhat0");
    }

    const std::size_t intervals = partition.times.size() - 1;
    const std::size_t substeps = static_cast<std::size_t>(opts.substeps);
    detail::DenseRecord plant(x0, intervals * substeps + 1, true);

    Eigen::MatrixXd observer(model.state_dim,
                             static_cast<Eigen::Index>(partition.times.size()));
    observer.col(0) = xhat0.eval(0.0);

    Eigen::VectorXd u, y;
    for (std::size_t j = 0; j < intervals; ++j) {
        const double t0 = partition.times[j];
        const double t1 = partition.times[j + 1];
        const double gap = t1 - t0;

        const Segment xhat_tj =
            reconstruct_impl(xhat0, partition.times, observer, j);
        y = model.h(detail::StepView(plant, t0));
        u = model.k(xhat_tj, y);  // held over the whole interval

        const RhsFn plant_rhs = [&](const History& hist, Eigen::Ref<Eigen::VectorXd> out) {
            out = model.f(hist, u);
        };
        for (std::size_t i = 1; i <= substeps; ++i) {
            const double target = (i == substeps) ? t1 : t0 + static_cast<double>(i) * gap /
                                                              static_cast<double>(substeps);
            if (!detail::advance_step(plant, plant_rhs, target, Scheme::rk4))
                throw DivergenceError("simulate_sampled: plant norm exceeded 1e9", target, j);
        }

        const Eigen::VectorXd next =
            observer.col(static_cast<Eigen::Index>(j)) + gap * model.f_hat(xhat_tj, u, y);
        if (detail::state_diverged(next))
            throw DivergenceError("simulate_sampled: observer norm exceeded 1e9", t1, j);
        observer.col(static_cast<Eigen::Index>(j) + 1) = next;
    }

    return SampledRun{detail::export_trajectory(x0, plant), xhat0, partition.times,
                      std::move(observer), partition};
}

Segment sample_initial_state(double sup_bound, double q_tilde, double delay, int dim,
                             std::uint64_t seed) {
    if (sup_bound < 0.0) throw std::domain_error("sample_initial_state: negative radius");
    if (!(q_tilde > 0.0)) throw std::domain_error("sample_initial_state: q_tilde must be positive");
    if (!(delay > 0.0) || dim < 1)
        throw std::domain_error("sample_initial_state: bad delay or dimension");

    constexpr int kKnots = 8;
    std::vector<double> knots(kKnots);
    for (int i = 0; i < kKnots; ++i)
        knots[static_cast<std::size_t>(i)] = -delay * static_cast<double>(kKnots - 1 - i) /
                                             static_cast<double>(kKnots - 1);

    Rng rng(seed);
    Eigen::MatrixXd values(dim, kKnots);
    for (int i = 0; i < kKnots; ++i)
        for (int d = 0; d < dim; ++d) values(d, i) = rng.uniform(-sup_bound, sup_bound);

    // shave the targets a hair below the bounds so the constraints survive
    // re-evaluation after the rescaling multiplications round
    const double norm_target = sup_bound * (1.0 - 1e-12);
    const double slope_target = q_tilde / std::sqrt(2.0) * (1.0 - 1e-12);

    for (int i = 0; i < kKnots; ++i) {
        const double n = values.col(i).norm();
        if (n > norm_target) values.col(i) *= norm_target / n;
    }
    Segment seg(delay, knots, values);
    if (seg.slope_bound() > slope_target) {
        // shrink the deviation around the knot mean, not the values
        // themselves: slopes scale with the deviation while every knot
        // stays a convex combination of points inside the norm ball
        const double scale = slope_target / seg.slope_bound();
        const Eigen::VectorXd mean = values.rowwise().mean();
        values = (mean * (1.0 - scale)).replicate(1, kKnots) + scale * values;
        seg = Segment(delay, knots, values);
    }
    for (int guard = 0; guard < 32; ++guard) {
        const bool norm_ok = seg.sup_norm() <= sup_bound;
        const bool slope_ok = seg.slope_bound() <= q_tilde / std::sqrt(2.0);
        if (norm_ok && slope_ok) break;
        double scale = 1.0;
        if (!norm_ok) scale = std::min(scale, norm_target / seg.sup_norm());
        if (!slope_ok) scale = std::min(scale, slope_target / seg.slope_bound());
        values *= scale;
        seg = Segment(delay, knots, values);
    }
    return seg;
}

}  // namespace tdsim
