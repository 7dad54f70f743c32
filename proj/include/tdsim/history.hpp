#pragma once

#include <Eigen/Core>
#include <vector>

namespace tdsim {

/// Read-only view of a vector-valued function on [-delay, 0].
///
/// This is the state space of a retarded system: every place the dynamics
/// need "the recent past" they receive one of these. Segment is the
/// materialized implementation; the integrators use lightweight lazy views
/// so that evaluating the right-hand side does not copy the whole history.
class History {
public:
    virtual ~History() = default;

    virtual double delay() const noexcept = 0;
    virtual int dim() const noexcept = 0;

    /// Evaluate at theta in [-delay, 0]; writes dim() entries into out.
    virtual void eval_into(double theta, Eigen::Ref<Eigen::VectorXd> out) const = 0;

    Eigen::VectorXd eval(double theta) const {
        Eigen::VectorXd out(dim());
        eval_into(theta, out);
        return out;
    }

    /// Value at theta = 0 (the "current" state).
    Eigen::VectorXd current() const { return eval(0.0); }
};

/// Piecewise-linear function on [-delay, 0] with explicit knots.
///
/// Knots are strictly increasing with knots.front() == -delay and
/// knots.back() == 0 exactly (no tolerance). Evaluation at a knot returns
/// the stored column bit-exactly; between knots it interpolates linearly.
/// Instances are immutable after construction and safe to share across
/// threads.
class Segment final : public History {
public:
    /// values has one column per knot, dim rows.
    Segment(double delay, std::vector<double> knots, Eigen::MatrixXd values);

    /// Constant segment phi == value with knots {-delay, 0}.
    static Segment constant(double delay, const Eigen::VectorXd& value);

    /// Zero segment of the given dimension.
    static Segment zero(double delay, int dim);

    double delay() const noexcept override { return delay_; }
    int dim() const noexcept override { return static_cast<int>(values_.rows()); }

    const std::vector<double>& knots() const noexcept { return knots_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }

    void eval_into(double theta, Eigen::Ref<Eigen::VectorXd> out) const override;

    /// Sup norm over [-delay, 0]: max over knots of the Euclidean value
    /// norm. Exact for piecewise-linear segments: along a linear piece
    /// t -> |a + t b| is convex in t, so the maximum of the norm over the
    /// piece is attained at one of the two endpoints, also for dim > 1.
    double sup_norm() const;

    /// Essential supremum of |d phi / d theta|: max over pieces of the
    /// Euclidean norm of the piece slope. Exact for piecewise-linear
    /// segments (the derivative is piecewise constant).
    double slope_bound() const;

private:
    double delay_;
    std::vector<double> knots_;
    Eigen::MatrixXd values_;  // dim x knot_count
};

/// Component stacking: result(theta) = [a(theta); b(theta)].
///
/// The result knot set is the union of both knot sets (each input is
/// re-evaluated at the union), so the identity holds exactly at every
/// union knot and both inputs are reproduced without interpolation error.
/// Delays must match exactly.
Segment stack(const Segment& a, const Segment& b);

/// The shift-and-ramp extension used by the Driver-form derivative:
///
///   result(s) = seg(s + h)                      s in [-delay, -h)
///   result(s) = seg(0) + (s + h) * drift        s in [-h, 0]
///
/// Requires 0 < h < delay. The knot set is the original knots shifted left
/// by h (those landing in [-delay, -h]) plus {-delay, -h, 0}.
Segment euler_extend(const Segment& seg, double h, const Eigen::VectorXd& drift);

/// Dense solution record: initial data on [-delay, 0] plus states at
/// strictly increasing times starting at 0. Lookups for s <= 0 read the
/// initial segment; for s > 0 they interpolate linearly between records.
/// Immutable after construction.
class Trajectory {
public:
    Trajectory(Segment initial, std::vector<double> times, Eigen::MatrixXd states);

    double delay() const noexcept { return initial_.delay(); }
    int dim() const noexcept { return initial_.dim(); }
    const Segment& initial() const noexcept { return initial_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const Eigen::MatrixXd& states() const noexcept { return states_; }
    double end_time() const noexcept { return times_.back(); }

    /// Value at absolute time s in [-delay, end_time()].
    Eigen::VectorXd value_at(double s) const;
    void value_at_into(double s, Eigen::Ref<Eigen::VectorXd> out) const;

    /// The history segment x_t on [-delay, 0], materialized with knots at
    /// every record (and initial knot) intersecting [t - delay, t].
    Segment window(double t) const;

private:
    Segment initial_;
    std::vector<double> times_;
    Eigen::MatrixXd states_;  // dim x times_.size()
};

}  // namespace tdsim
