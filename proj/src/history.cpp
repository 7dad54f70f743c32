#include "tdsim/history.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tdsim {

namespace {

// Locate theta in a sorted knot vector and interpolate columns.
// Requires knots.front() <= theta <= knots.back().
void interp_columns(const std::vector<double>& knots, const Eigen::MatrixXd& values,
                    double theta, Eigen::Ref<Eigen::VectorXd> out) {
    const auto it = std::upper_bound(knots.begin(), knots.end(), theta);
    std::size_t hi = static_cast<std::size_t>(it - knots.begin());
    if (hi == knots.size()) {
        out = values.col(static_cast<Eigen::Index>(knots.size() - 1));
        return;
    }
    if (hi == 0) {  // theta == knots.front() (upper_bound skipped it means theta < all)
        out = values.col(0);
        return;
    }
    const std::size_t lo = hi - 1;
    if (theta == knots[lo]) {
        out = values.col(static_cast<Eigen::Index>(lo));
        return;
    }
    const double w = (theta - knots[lo]) / (knots[hi] - knots[lo]);
    out = values.col(static_cast<Eigen::Index>(lo)) +
          w * (values.col(static_cast<Eigen::Index>(hi)) - values.col(static_cast<Eigen::Index>(lo)));
}

}  // namespace

Segment::Segment(double delay, std::vector<double> knots, Eigen::MatrixXd values)
    : delay_(delay), knots_(std::move(knots)), values_(std::move(values)) {
    if (!(delay_ > 0.0)) throw std::invalid_argument("Segment: delay must be positive");
    if (knots_.size() < 2) throw std::invalid_argument("Segment: need at least two knots");
    if (knots_.front() != -delay_)
        throw std::invalid_argument("Segment: first knot must equal -delay exactly");
    if (knots_.back() != 0.0)
        throw std::invalid_argument("Segment: last knot must equal 0 exactly");
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (!(knots_[i] > knots_[i - 1]))
            throw std::invalid_argument("Segment: knots must be strictly increasing");
    if (values_.cols() != static_cast<Eigen::Index>(knots_.size()))
        throw std::invalid_argument("Segment: one value column per knot required");
    if (values_.rows() < 1) throw std::invalid_argument("Segment: dim must be positive");
    if (!values_.allFinite()) throw std::invalid_argument("Segment: values must be finite");
}

Segment Segment::constant(double delay, const Eigen::VectorXd& value) {
    Eigen::MatrixXd v(value.size(), 2);
    v.col(0) = value;
    v.col(1) = value;
    return Segment(delay, {-delay, 0.0}, std::move(v));
}

Segment Segment::zero(double delay, int dim) {
    return constant(delay, Eigen::VectorXd::Zero(dim));
}

void Segment::eval_into(double theta, Eigen::Ref<Eigen::VectorXd> out) const {
    if (theta < -delay_ || theta > 0.0)
        throw std::domain_error("Segment::eval: theta outside [-delay, 0]");
    interp_columns(knots_, values_, theta, out);
}

double Segment::sup_norm() const {
    double best = 0.0;
    for (Eigen::Index j = 0; j < values_.cols(); ++j)
        best = std::max(best, values_.col(j).norm());
    return best;
}

double Segment::slope_bound() const {
    double best = 0.0;
    for (std::size_t i = 1; i < knots_.size(); ++i) {
        const Eigen::Index j = static_cast<Eigen::Index>(i);
        const double dt = knots_[i] - knots_[i - 1];
        best = std::max(best, (values_.col(j) - values_.col(j - 1)).norm() / dt);
    }
    return best;
}

Segment stack(const Segment& a, const Segment& b) {
    if (a.delay() != b.delay())
        throw std::domain_error("stack: delays must match exactly");
    // union of the two sorted knot vectors (exact-equality dedupe)
    std::vector<double> knots;
    knots.reserve(a.knots().size() + b.knots().size());
    std::set_union(a.knots().begin(), a.knots().end(), b.knots().begin(), b.knots().end(),
                   std::back_inserter(knots));
    const int na = a.dim(), nb = b.dim();
    Eigen::MatrixXd values(na + nb, static_cast<Eigen::Index>(knots.size()));
    Eigen::VectorXd va(na), vb(nb);
    for (std::size_t i = 0; i < knots.size(); ++i) {
        a.eval_into(knots[i], va);
        b.eval_into(knots[i], vb);
        values.col(static_cast<Eigen::Index>(i)).head(na) = va;
        values.col(static_cast<Eigen::Index>(i)).tail(nb) = vb;
    }
    return Segment(a.delay(), std::move(knots), std::move(values));
}

Segment euler_extend(const Segment& seg, double h, const Eigen::VectorXd& drift) {
    const double delay = seg.delay();
    if (!(h > 0.0) || !(h < delay))
        throw std::domain_error("euler_extend: h must lie in (0, delay)");
    if (drift.size() != seg.dim())
        throw std::domain_error("euler_extend: drift dimension mismatch");

    std::vector<double> knots;
    std::vector<Eigen::VectorXd> cols;
    knots.reserve(seg.knots().size() + 3);

    knots.push_back(-delay);
    cols.push_back(seg.eval(-delay + h));
    // original knots shifted left by h, strictly inside (-delay, -h)
    for (std::size_t i = 0; i < seg.knots().size(); ++i) {
        const double shifted = seg.knots()[i] - h;
        if (shifted <= knots.back() || shifted >= -h) continue;
        knots.push_back(shifted);
        cols.push_back(seg.values().col(static_cast<Eigen::Index>(i)));
    }
    const Eigen::VectorXd end = seg.values().col(static_cast<Eigen::Index>(seg.knots().size() - 1));
    knots.push_back(-h);
    cols.push_back(end);
    knots.push_back(0.0);
    cols.push_back(end + h * drift);

    Eigen::MatrixXd values(seg.dim(), static_cast<Eigen::Index>(knots.size()));
    for (std::size_t i = 0; i < cols.size(); ++i)
        values.col(static_cast<Eigen::Index>(i)) = cols[i];
    return Segment(delay, std::move(knots), std::move(values));
}

Trajectory::Trajectory(Segment initial, std::vector<double> times, Eigen::MatrixXd states)
    : initial_(std::move(initial)), times_(std::move(times)), states_(std::move(states)) {
    if (times_.empty()) throw std::invalid_argument("Trajectory: empty time vector");
    if (times_.front() != 0.0) throw std::invalid_argument("Trajectory: times must start at 0");
    for (std::size_t i = 1; i < times_.size(); ++i)
        if (!(times_[i] > times_[i - 1]))
            throw std::invalid_argument("Trajectory: times must be strictly increasing");
    if (states_.cols() != static_cast<Eigen::Index>(times_.size()) ||
        states_.rows() != initial_.dim())
        throw std::invalid_argument("Trajectory: state matrix shape mismatch");
    if (!states_.allFinite()) throw std::invalid_argument("Trajectory: states must be finite");
    if (states_.col(0) != initial_.eval(0.0))
        throw std::invalid_argument("Trajectory: states[0] must equal initial(0)");
}

void Trajectory::value_at_into(double s, Eigen::Ref<Eigen::VectorXd> out) const {
    const double slack = 1e-12 * std::max(1.0, std::abs(times_.back()));
    if (s < -delay() - slack || s > times_.back() + slack)
        throw std::domain_error("Trajectory::value_at: time outside [-delay, end]");
    s = std::clamp(s, -delay(), times_.back());
    if (s <= 0.0) {
        initial_.eval_into(s, out);
        return;
    }
    interp_columns(times_, states_, s, out);
}

Eigen::VectorXd Trajectory::value_at(double s) const {
    Eigen::VectorXd out(dim());
    value_at_into(s, out);
    return out;
}

Segment Trajectory::window(double t) const {
    const double slack = 1e-12 * std::max(1.0, std::abs(times_.back()));
    if (t < -slack || t > times_.back() + slack)
        throw std::domain_error("Trajectory::window: t outside [0, end]");
    t = std::clamp(t, 0.0, times_.back());
    const double d = delay();

    std::vector<double> knots;
    std::vector<Eigen::VectorXd> cols;
    knots.push_back(-d);
    cols.push_back(value_at(t - d));

    auto add_absolute = [&](double abs_time, const Eigen::VectorXd& v) {
        const double theta = abs_time - t;
        if (theta <= knots.back() || theta >= 0.0) return;
        if (theta <= -d) return;
        knots.push_back(theta);
        cols.push_back(v);
    };
    // initial knots live at absolute times <= 0, records at times >= 0
    for (std::size_t i = 0; i < initial_.knots().size(); ++i) {
        const double abs_time = initial_.knots()[i];
        if (abs_time <= t - d) continue;
        add_absolute(abs_time, initial_.values().col(static_cast<Eigen::Index>(i)));
    }
    const auto lo = std::upper_bound(times_.begin(), times_.end(), t - d);
    for (auto it = lo; it != times_.end() && *it < t; ++it) {
        const Eigen::Index j = static_cast<Eigen::Index>(it - times_.begin());
        if (*it == 0.0) continue;  // already covered by the initial 0-knot
        add_absolute(*it, states_.col(j));
    }
    knots.push_back(0.0);
    cols.push_back(value_at(t));

    Eigen::MatrixXd values(dim(), static_cast<Eigen::Index>(knots.size()));
    for (std::size_t i = 0; i < cols.size(); ++i)
        values.col(static_cast<Eigen::Index>(i)) = cols[i];
    return Segment(d, std::move(knots), std::move(values));
}

}  // namespace tdsim
