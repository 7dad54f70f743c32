#pragma once

// Internal fixed-step stepping machinery shared by the continuous engine
// and the sampled-data simulator. Not installed.

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <vector>

#include "tdsim/history.hpp"
#include "tdsim/rfde.hpp"

namespace tdsim::detail {

// Dense method-of-steps record over absolute time. Node drifts are filled
// in as integration proceeds (the drift at a node is the RHS evaluated
// there, i.e. the first stage of the step leaving that node).
//
// Lookup between nodes is cubic Hermite when `cubic` is set and both piece
// drifts are available, linear otherwise. The exported Trajectory keeps
// only the piecewise-linear view; the cubic interpolant exists so that the
// rk4 scheme keeps its order through delayed lookups.
struct DenseRecord {
    const Segment* initial = nullptr;
    bool cubic = false;
    std::vector<double> times;
    Eigen::MatrixXd states;  // dim x capacity
    Eigen::MatrixXd drifts;
    std::vector<char> has_drift;

    DenseRecord(const Segment& init, std::size_t capacity, bool use_cubic)
        : initial(&init), cubic(use_cubic) {
        const int d = init.dim();
        times.reserve(capacity);
        states.resize(d, static_cast<Eigen::Index>(capacity));
        drifts.resize(d, static_cast<Eigen::Index>(capacity));
        has_drift.reserve(capacity);
        times.push_back(0.0);
        states.col(0) = init.eval(0.0);
        has_drift.push_back(0);
    }

    int dim() const { return initial->dim(); }
    double front_time() const { return times.back(); }
    std::size_t size() const { return times.size(); }

    void push_node(double t, const Eigen::VectorXd& state) {
        const Eigen::Index i = static_cast<Eigen::Index>(times.size());
        times.push_back(t);
        states.col(i) = state;
        has_drift.push_back(0);
    }

    void set_back_drift(const Eigen::VectorXd& d) {
        const Eigen::Index i = static_cast<Eigen::Index>(times.size()) - 1;
        drifts.col(i) = d;
        has_drift.back() = 1;
    }

    // s must satisfy -delay <= s <= front_time (small slack tolerated).
    void eval_into(double s, Eigen::Ref<Eigen::VectorXd> out) const {
        if (s <= 0.0) {
            initial->eval_into(std::max(s, -initial->delay()), out);
            return;
        }
        const auto it = std::upper_bound(times.begin(), times.end(), s);
        std::size_t hi = static_cast<std::size_t>(it - times.begin());
        if (hi >= times.size()) {
            out = states.col(static_cast<Eigen::Index>(times.size() - 1));
            return;
        }
        const std::size_t lo = hi - 1;
        if (s == times[lo]) {
            out = states.col(static_cast<Eigen::Index>(lo));
            return;
        }
        const double dt = times[hi] - times[lo];
        const double w = (s - times[lo]) / dt;
        const auto y0 = states.col(static_cast<Eigen::Index>(lo));
        const auto y1 = states.col(static_cast<Eigen::Index>(hi));
        if (cubic && has_drift[lo] && has_drift[hi]) {
            const auto d0 = drifts.col(static_cast<Eigen::Index>(lo));
            const auto d1 = drifts.col(static_cast<Eigen::Index>(hi));
            const double w2 = w * w, w3 = w2 * w;
            out = (2 * w3 - 3 * w2 + 1) * y0 + (w3 - 2 * w2 + w) * dt * d0 +
                  (-2 * w3 + 3 * w2) * y1 + (w3 - w2) * dt * d1;
        } else {
            out = y0 + w * (y1 - y0);
        }
    }
};

// History view anchored at eval_time, optionally extended past the record
// front by the line through (front_time, front_state) and
// (ext_time, ext_state). Stage evaluations of the explicit schemes use the
// extension; the first stage of a step evaluates at the front with no
// extension.
class StepView final : public History {
public:
    StepView(const DenseRecord& rec, double eval_time)
        : rec_(rec), eval_time_(eval_time), ext_state_(nullptr), ext_time_(0.0) {}

    StepView(const DenseRecord& rec, double eval_time, double ext_time,
             const Eigen::VectorXd& ext_state)
        : rec_(rec), eval_time_(eval_time), ext_state_(&ext_state), ext_time_(ext_time) {}

    double delay() const noexcept override { return rec_.initial->delay(); }
    int dim() const noexcept override { return rec_.initial->dim(); }

    void eval_into(double theta, Eigen::Ref<Eigen::VectorXd> out) const override {
        const double s = eval_time_ + theta;
        const double front = rec_.front_time();
        if (ext_state_ != nullptr && s > front) {
            const double w = (s - front) / (ext_time_ - front);
            Eigen::VectorXd base(dim());
            rec_.eval_into(front, base);
            out = base + w * (*ext_state_ - base);
            return;
        }
        rec_.eval_into(s, out);
    }

private:
    const DenseRecord& rec_;
    double eval_time_;
    const Eigen::VectorXd* ext_state_;
    double ext_time_;
};

inline constexpr double kDivergenceThreshold = 1e9;

inline bool state_diverged(const Eigen::VectorXd& y) {
    return !y.allFinite() || y.norm() > kDivergenceThreshold;
}

// One explicit step from the record front to time t1. Stores the drift at
// the departing node (its RHS value), pushes the new node, and reports
// divergence through the return value so callers can attach context.
inline bool advance_step(DenseRecord& rec, const RhsFn& rhs, double t1, Scheme scheme) {
    const double t0 = rec.front_time();
    const double h = t1 - t0;
    const int d = rec.dim();
    const Eigen::VectorXd y = rec.states.col(static_cast<Eigen::Index>(rec.size() - 1));

    Eigen::VectorXd k1(d);
    rhs(StepView(rec, t0), k1);
    rec.set_back_drift(k1);

    Eigen::VectorXd next(d);
    if (scheme == Scheme::euler) {
        next = y + h * k1;
    } else {
        const double tm = t0 + 0.5 * h;
        Eigen::VectorXd k2(d), k3(d), k4(d);
        Eigen::VectorXd pred = y + 0.5 * h * k1;
        rhs(StepView(rec, tm, tm, pred), k2);
        pred = y + 0.5 * h * k2;
        rhs(StepView(rec, tm, tm, pred), k3);
        pred = y + h * k3;
        rhs(StepView(rec, t1, t1, pred), k4);
        next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (state_diverged(next)) return false;
    rec.push_node(t1, next);
    return true;
}

inline Trajectory export_trajectory(const Segment& initial, const DenseRecord& rec) {
    return Trajectory(initial, rec.times,
                      rec.states.leftCols(static_cast<Eigen::Index>(rec.size())));
}

}  // namespace tdsim::detail
