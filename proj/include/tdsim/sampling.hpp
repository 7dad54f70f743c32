#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tdsim/history.hpp"
#include "tdsim/models.hpp"

namespace tdsim {

/// Sampling instants t_0 = 0 < t_1 < ... with every gap in [a*delta, delta]
/// (validated with a 1e-9 relative slack to absorb accumulation rounding)
/// and the last instant covering the requested horizon.
struct Partition {
    double a = 1.0;
    double delta = 0.0;
    std::vector<double> times;

    Partition(double a, double delta, std::vector<double> times);
};

/// Draws a partition with gaps independently uniform on [a*delta, delta]
/// from the seeded generator; a == 1 yields the periodic partition.
/// Deterministic for a fixed seed.
Partition generate_partition(double a, double delta, double horizon, std::uint64_t seed);

struct SampledOptions {
    int substeps = 16;  // rk4 steps per sampling interval for the plant
    /// Initial-state slope precondition: each of x0, xhat0 must satisfy
    /// slope_bound <= q_tilde / sqrt(2). Set to nullopt to disable.
    std::optional<double> q_tilde = 1.0;
};

/// Result of one sampled-data closed-loop run. The plant is a continuous
/// dense trajectory; the observer exists only at the partition instants
/// (the emulated Euler recursion defines nothing in between).
struct SampledRun {
    Trajectory plant;                   // dim n, covers [0, last partition instant]
    Segment initial_observer;           // xhat_0 on [-delay, 0]
    std::vector<double> observer_times; // partition instants, one per sample
    Eigen::MatrixXd observer_values;    // n x observer_times.size()
    Partition partition;
};

/// The observer history segment xhat_{t_j} used by the sampled loop:
///
///   xhat_{t_j}(theta) = xhat_0(t_j + theta)                 t_j + theta <= 0
///   xhat_{t_j}(theta) = linear interpolation of the stored
///                       samples around t_j + theta           otherwise,
///
/// with the stored sample returned exactly when t_j + theta hits an
/// instant (in particular theta = 0 returns xhat(t_j) bit-exactly; no
/// sample after t_j is touched). t_j must be a partition instant with its
/// sample already computed.
Segment reconstruct_observer_history(const SampledRun& run, double t_j);

/// Simulates the sampled-data closed loop over the whole partition:
/// per interval [t_j, t_{j+1}) the input u_j = k(xhat_{t_j}, h(x_{t_j}))
/// is held (computed exactly once), the plant runs continuously with
/// `substeps` internal rk4 steps, and the observer advances by one
/// explicit Euler step of f_hat. Throws DivergenceError carrying the
/// interval index if a state leaves the 1e9 ball.
SampledRun simulate_sampled(const ModelPair& model, const Segment& x0, const Segment& xhat0,
                            const Partition& partition, const SampledOptions& opts = {});

/// Draws an admissible initial segment: 8 uniform knots, values from the
/// seeded generator, clipped so sup_norm <= sup_bound and rescaled so
/// slope_bound <= q_tilde / sqrt(2). Both bounds hold under re-evaluation
/// (a conservative shave absorbs rounding). Deterministic per seed;
/// sup_bound == 0 yields the zero segment.
Segment sample_initial_state(double sup_bound, double q_tilde, double delay, int dim,
                             std::uint64_t seed);

}  // namespace tdsim
