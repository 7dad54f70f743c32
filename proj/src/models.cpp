#include "tdsim/models.hpp"

#include <cmath>
#include <stdexcept>

namespace tdsim {

namespace {

// View of a contiguous component range of a wider history. Holds a scratch
// buffer for the base evaluation; instances are created per call on the
// stack, so the mutable scratch is never shared across threads.
class ComponentSlice final : public History {
public:
    ComponentSlice(const History& base, int offset, int dim)
        : base_(base), offset_(offset), dim_(dim), scratch_(base.dim()) {}

    double delay() const noexcept override { return base_.delay(); }
    int dim() const noexcept override { return dim_; }

    void eval_into(double theta, Eigen::Ref<Eigen::VectorXd> out) const override {
        base_.eval_into(theta, scratch_);
        out = scratch_.segment(offset_, dim_);
    }

private:
    const History& base_;
    int offset_;
    int dim_;
    mutable Eigen::VectorXd scratch_;
};

void require_stacked_dim(const ModelPair& model, const History& phi) {
    if (phi.dim() != 2 * model.state_dim)
        throw std::domain_error("stacked history must have dimension 2n");
}

double param(const std::map<std::string, double>& overrides, std::map<std::string, double>& gains,
             const std::string& key) {
    const auto it = overrides.find(key);
    if (it != overrides.end()) gains[key] = it->second;
    return gains[key];
}

void reject_unknown(const std::map<std::string, double>& overrides,
                    const std::map<std::string, double>& gains) {
    for (const auto& [key, value] : overrides) {
        (void)value;
        if (gains.find(key) == gains.end())
            throw std::invalid_argument("unknown model parameter: " + key);
    }
}

BenchmarkSpec make_linear_scalar(const std::map<std::string, double>& overrides) {
    std::map<std::string, double> gains{{"a0", 0.2}, {"a1", 0.1}, {"b", 1.0},
                                        {"L", 1.0},  {"K", 1.5},  {"delay", 1.0}};
    const double a0 = param(overrides, gains, "a0");
    const double a1 = param(overrides, gains, "a1");
    const double b = param(overrides, gains, "b");
    const double gl = param(overrides, gains, "L");
    const double gk = param(overrides, gains, "K");
    const double delay = param(overrides, gains, "delay");
    reject_unknown(overrides, gains);

    ModelPair m;
    m.state_dim = 1;
    m.input_dim = 1;
    m.output_dim = 1;
    m.delay = delay;
    m.f = [a0, a1, b, delay](const History& phi, const Eigen::VectorXd& u) {
        Eigen::VectorXd out(1);
        out(0) = a0 * phi.eval(0.0)(0) + a1 * phi.eval(-delay)(0) + b * u(0);
        return out;
    };
    m.h = [](const History& phi) { return phi.eval(0.0); };
    m.f_hat = [a0, a1, b, gl, delay](const History& phi, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& y) {
        const double xh = phi.eval(0.0)(0);
        Eigen::VectorXd out(1);
        out(0) = a0 * xh + a1 * phi.eval(-delay)(0) + b * u(0) + gl * (y(0) - xh);
        return out;
    };
    m.k = [gk](const History& phi, const Eigen::VectorXd&) {
        Eigen::VectorXd out(1);
        out(0) = -gk * phi.eval(0.0)(0);
        return out;
    };
    return {"linear-scalar",
            "scalar linear plant with delayed state term, Luenberger-style observer",
            std::move(m), std::move(gains)};
}

BenchmarkSpec make_nonlinear_sine(const std::map<std::string, double>& overrides) {
    std::map<std::string, double> gains{
        {"a0", 0.5}, {"a1", 0.5}, {"L", 1.5}, {"K", 2.0}, {"delay", 1.0}};
    const double a0 = param(overrides, gains, "a0");
    const double a1 = param(overrides, gains, "a1");
    const double gl = param(overrides, gains, "L");
    const double gk = param(overrides, gains, "K");
    const double delay = param(overrides, gains, "delay");
    reject_unknown(overrides, gains);

    ModelPair m;
    m.state_dim = 1;
    m.input_dim = 1;
    m.output_dim = 1;
    m.delay = delay;
    m.f = [a0, a1, delay](const History& phi, const Eigen::VectorXd& u) {
        Eigen::VectorXd out(1);
        out(0) = a0 * phi.eval(0.0)(0) + a1 * std::sin(phi.eval(-delay)(0)) + u(0);
        return out;
    };
    m.h = [](const History& phi) { return phi.eval(0.0); };
    m.f_hat = [a0, a1, gl, delay](const History& phi, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& y) {
        const double xh = phi.eval(0.0)(0);
        Eigen::VectorXd out(1);
        out(0) = a0 * xh + a1 * std::sin(phi.eval(-delay)(0)) + u(0) + gl * (y(0) - xh);
        return out;
    };
    m.k = [gk](const History& phi, const Eigen::VectorXd&) {
        Eigen::VectorXd out(1);
        out(0) = -gk * phi.eval(0.0)(0);
        return out;
    };
    return {"nonlinear-sine", "scalar plant with globally Lipschitz delayed nonlinearity",
            std::move(m), std::move(gains)};
}

// Same plant as linear-scalar but the output map reads the delayed state,
// exercising the functional-output side of the interface.
BenchmarkSpec make_delayed_output(const std::map<std::string, double>& overrides) {
    std::map<std::string, double> gains{{"a0", 0.2}, {"a1", 0.1}, {"b", 1.0},
                                        {"L", 1.0},  {"K", 1.5},  {"delay", 1.0}};
    const double a0 = param(overrides, gains, "a0");
    const double a1 = param(overrides, gains, "a1");
    const double b = param(overrides, gains, "b");
    const double gl = param(overrides, gains, "L");
    const double gk = param(overrides, gains, "K");
    const double delay = param(overrides, gains, "delay");
    reject_unknown(overrides, gains);

    ModelPair m;
    m.state_dim = 1;
    m.input_dim = 1;
    m.output_dim = 1;
    m.delay = delay;
    m.f = [a0, a1, b, delay](const History& phi, const Eigen::VectorXd& u) {
        Eigen::VectorXd out(1);
        out(0) = a0 * phi.eval(0.0)(0) + a1 * phi.eval(-delay)(0) + b * u(0);
        return out;
    };
    m.h = [delay](const History& phi) { return phi.eval(-delay); };
    m.f_hat = [a0, a1, b, gl, delay](const History& phi, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& y) {
        Eigen::VectorXd out(1);
        out(0) = a0 * phi.eval(0.0)(0) + a1 * phi.eval(-delay)(0) + b * u(0) +
                 gl * (y(0) - phi.eval(-delay)(0));
        return out;
    };
    m.k = [gk](const History& phi, const Eigen::VectorXd&) {
        Eigen::VectorXd out(1);
        out(0) = -gk * phi.eval(0.0)(0);
        return out;
    };
    return {"delayed-output", "linear-scalar plant with delayed functional output",
            std::move(m), std::move(gains)};
}

}  // namespace

Eigen::VectorXd stacked_rhs(const ModelPair& model, const History& phi) {
    require_stacked_dim(model, phi);
    const int n = model.state_dim;
    ComponentSlice plant(phi, 0, n);
    ComponentSlice observer(phi, n, n);
    const Eigen::VectorXd y = model.h(plant);
    const Eigen::VectorXd u = model.k(observer, y);
    Eigen::VectorXd out(2 * n);
    out.head(n) = model.f(plant, u);
    out.tail(n) = model.f_hat(observer, u, y);
    return out;
}

Eigen::VectorXd extended_rhs(const ModelPair& model, const History& phi,
                             const Eigen::VectorXd& u_tilde) {
    require_stacked_dim(model, phi);
    const int n = model.state_dim;
    if (u_tilde.size() != model.input_dim + n)
        throw std::domain_error("extended input must have dimension m+n");
    ComponentSlice plant(phi, 0, n);
    Eigen::VectorXd out(2 * n);
    out.head(n) = model.f(plant, u_tilde.head(model.input_dim));
    out.tail(n) = u_tilde.tail(n);
    return out;
}

Eigen::VectorXd composite_feedback(const ModelPair& model, const History& phi) {
    require_stacked_dim(model, phi);
    const int n = model.state_dim;
    ComponentSlice plant(phi, 0, n);
    ComponentSlice observer(phi, n, n);
    const Eigen::VectorXd y = model.h(plant);
    const Eigen::VectorXd u = model.k(observer, y);
    Eigen::VectorXd out(model.input_dim + n);
    out.head(model.input_dim) = u;
    out.tail(n) = model.f_hat(observer, u, y);
    return out;
}

BenchmarkSpec make_benchmark(const std::string& name,
                             const std::map<std::string, double>& params) {
    if (name == "linear-scalar") return make_linear_scalar(params);
    if (name == "nonlinear-sine") return make_nonlinear_sine(params);
    if (name == "delayed-output") return make_delayed_output(params);
    if (name == "zero") {
        std::map<std::string, double> gains{{"delay", 1.0}};
        const double delay = param(params, gains, "delay");
        reject_unknown(params, gains);
        return {"zero", "all maps identically zero", make_zero_model(1, 1, 1, delay),
                std::move(gains)};
    }
    throw std::invalid_argument("unknown benchmark: " + name);
}

std::vector<std::string> benchmark_names() {
    return {"linear-scalar", "nonlinear-sine", "delayed-output", "zero"};
}

ModelPair make_zero_model(int n, int m, int q, double delay) {
    ModelPair model;
    model.state_dim = n;
    model.input_dim = m;
    model.output_dim = q;
    model.delay = delay;
    model.f = [n](const History&, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(n); };
    model.h = [q](const History&) { return Eigen::VectorXd::Zero(q); };
    model.f_hat = [n](const History&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(n);
    };
    model.k = [m](const History&, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(m); };
    return model;
}

}  // namespace tdsim
