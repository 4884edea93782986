#pragma once

// Built-in test equations (all scalar, d = m = 1, a single jump atom at
// mark 1 so sigma(x, z) = sigma(x) z and N is a Poisson process).

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jdsim/sde_core.hpp"

namespace jdsim {

namespace detail {

inline void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ProblemError(std::string(what) + " must be finite and > 0");
}

inline CoefficientSet scalar_coefficients() {
    CoefficientSet c;
    c.dim = 1;
    c.noise_dim = 1;
    return c;
}

inline void set1(Matrix& m, double v) {
    if (m.rows != 1 || m.cols != 1) m.resize(1, 1);
    m.data[0] = v;
}

inline void set1(Vector& v, double x) {
    v.resize(1);
    v[0] = x;
}

}  // namespace detail

/// dX = mu X (nu - |X|) dt + xi |X|^{3/2} dW + eta X ln(1 + X^2) dNbar.
inline JumpDiffusionProblem build_three_half_jump(double mu = 3.0, double nu = 1.0, double xi = 0.5, double eta = 0.1,
                                                  double lambda = 1.0, double x0 = 10.0, double T = 1.0) {
    detail::require_positive(mu, "mu");
    detail::require_positive(nu, "nu");
    detail::require_positive(xi, "xi");
    detail::require_positive(eta, "eta");
    detail::require_positive(lambda, "lambda");
    detail::require_positive(T, "T");
    JumpDiffusionProblem p;
    p.name = "three-half-jump";
    p.coefficients = detail::scalar_coefficients();
    auto& c = p.coefficients;
    c.drift = [mu, nu](std::span<const double> x, Vector& out) { detail::set1(out, mu * x[0] * (nu - std::abs(x[0]))); };
    c.diffusion = [xi](std::span<const double> x, Matrix& out) {
        const double a = std::abs(x[0]);
        detail::set1(out, xi * a * std::sqrt(a));
    };
    c.jump = [eta](std::span<const double> x, std::span<const double> z, Vector& out) {
        detail::set1(out, eta * x[0] * std::log1p(x[0] * x[0]) * z[0]);
    };
    c.drift_jacobian = [mu, nu](std::span<const double> x, Matrix& out) {
        detail::set1(out, mu * nu - 2.0 * mu * std::abs(x[0]));
    };
    c.drift_hessian = [mu](std::span<const double> x, Vector& out) {
        detail::set1(out, x[0] > 0.0 ? -2.0 * mu : (x[0] < 0.0 ? 2.0 * mu : 0.0));
    };
    p.measure = MarkMeasure::poisson(lambda);
    p.initial = {x0};
    p.horizon = T;
    return p;
}

/// dX = (X - X^3) dt + dW + dNbar.
inline JumpDiffusionProblem build_cubic_additive(double x0 = 5.0, double T = 1.0, double lambda = 1.0) {
    detail::require_positive(T, "T");
    detail::require_positive(lambda, "lambda");
    JumpDiffusionProblem p;
    p.name = "cubic-additive";
    p.coefficients = detail::scalar_coefficients();
    auto& c = p.coefficients;
    c.drift = [](std::span<const double> x, Vector& out) { detail::set1(out, x[0] - x[0] * x[0] * x[0]); };
    c.diffusion = [](std::span<const double>, Matrix& out) { detail::set1(out, 1.0); };
    c.jump = [](std::span<const double>, std::span<const double> z, Vector& out) { detail::set1(out, z[0]); };
    c.drift_jacobian = [](std::span<const double> x, Matrix& out) { detail::set1(out, 1.0 - 3.0 * x[0] * x[0]); };
    c.drift_hessian = [](std::span<const double> x, Vector& out) { detail::set1(out, -6.0 * x[0]); };
    p.measure = MarkMeasure::poisson(lambda);
    p.initial = {x0};
    p.horizon = T;
    return p;
}

/// Linear test equation dX = X (a dt + b dW + c dNbar) with closed form
/// X(t) = X0 exp((a - c lambda - b^2 / 2) t + b W(t)) (1 + c)^{N(t)}.
/// Not one of the published examples: it exists to check the error pipeline
/// against an exact reference.
inline JumpDiffusionProblem build_merton_linear(double a = 0.05, double b = 0.2, double c_jump = 0.5,
                                                double lambda = 1.0, double x0 = 1.0, double T = 1.0) {
    if (!(c_jump > -1.0)) throw ProblemError("c must be > -1");
    detail::require_positive(lambda, "lambda");
    detail::require_positive(T, "T");
    JumpDiffusionProblem p;
    p.name = "merton-linear";
    p.coefficients = detail::scalar_coefficients();
    auto& c = p.coefficients;
    c.drift = [a](std::span<const double> x, Vector& out) { detail::set1(out, a * x[0]); };
    c.diffusion = [b](std::span<const double> x, Matrix& out) { detail::set1(out, b * x[0]); };
    c.jump = [c_jump](std::span<const double> x, std::span<const double> z, Vector& out) {
        detail::set1(out, c_jump * x[0] * z[0]);
    };
    c.drift_jacobian = [a](std::span<const double>, Matrix& out) { detail::set1(out, a); };
    c.drift_hessian = [](std::span<const double>, Vector& out) { detail::set1(out, 0.0); };
    p.measure = MarkMeasure::poisson(lambda);
    p.initial = {x0};
    p.horizon = T;
    const MarkMeasure measure = p.measure;
    p.exact = ExactSolution{[a, b, c_jump, lambda, measure](double t0, std::span<const double> xs, double t1,
                                                            std::span<const double> dW,
                                                            std::span<const JumpEvent> jumps) {
        if (t1 == t0) return Vector{xs[0]};
        double factor = 1.0;
        for (const auto& e : jumps) factor *= 1.0 + c_jump * measure.atom(e.atom).mark[0];
        const double growth = std::exp((a - c_jump * lambda - 0.5 * b * b) * (t1 - t0) + b * dW[0]);
        return Vector{xs[0] * growth * factor};
    }};
    return p;
}

/// f = g = sigma = 0: every path stays at X0.
inline JumpDiffusionProblem build_zero(double x0 = 1.0, double T = 1.0, double lambda = 1.0) {
    detail::require_positive(T, "T");
    detail::require_positive(lambda, "lambda");
    JumpDiffusionProblem p;
    p.name = "zero";
    p.coefficients = detail::scalar_coefficients();
    auto& c = p.coefficients;
    c.drift = [](std::span<const double>, Vector& out) { detail::set1(out, 0.0); };
    c.diffusion = [](std::span<const double>, Matrix& out) { detail::set1(out, 0.0); };
    c.jump = [](std::span<const double>, std::span<const double>, Vector& out) { detail::set1(out, 0.0); };
    c.drift_jacobian = [](std::span<const double>, Matrix& out) { detail::set1(out, 0.0); };
    c.drift_hessian = [](std::span<const double>, Vector& out) { detail::set1(out, 0.0); };
    p.measure = MarkMeasure::poisson(lambda);
    p.initial = {x0};
    p.horizon = T;
    p.exact = ExactSolution{[](double, std::span<const double> xs, double, std::span<const double>,
                               std::span<const JumpEvent>) { return Vector(xs.begin(), xs.end()); }};
    return p;
}

using ParameterMap = std::map<std::string, double>;

struct ModelInfo {
    std::string id;
    std::string description;
    std::vector<std::pair<std::string, double>> defaults;  // display order
    std::function<JumpDiffusionProblem(const ParameterMap&)> build;
};

class ModelRegistry {
public:
    void add(ModelInfo info) {
        for (const auto& m : models_)
            if (m.id == info.id) throw std::invalid_argument("duplicate model id '" + info.id + "'");
        models_.push_back(std::move(info));
    }

    const std::vector<ModelInfo>& models() const noexcept { return models_; }

    const ModelInfo& find(const std::string& id) const {
        for (const auto& m : models_)
            if (m.id == id) return m;
        throw std::invalid_argument("unknown model '" + id + "'");
    }

    /// Defaults overridden by `overrides`; unknown parameter names are errors.
    ParameterMap resolve(const std::string& id, const ParameterMap& overrides) const {
        const auto& info = find(id);
        ParameterMap params(info.defaults.begin(), info.defaults.end());
        for (const auto& [k, v] : overrides) {
            if (!params.count(k)) throw std::invalid_argument("model '" + id + "' has no parameter '" + k + "'");
            params[k] = v;
        }
        return params;
    }

    JumpDiffusionProblem build(const std::string& id, const ParameterMap& overrides = {}) const {
        return find(id).build(resolve(id, overrides));
    }

private:
    std::vector<ModelInfo> models_;
};

inline const ModelRegistry& default_registry() {
    static const ModelRegistry registry = [] {
        ModelRegistry r;
        r.add({"three-half-jump",
               "dX = mu X (nu - |X|) dt + xi |X|^1.5 dW + eta X ln(1 + X^2) dNbar",
               {{"mu", 3.0}, {"nu", 1.0}, {"xi", 0.5}, {"eta", 0.1}, {"lambda", 1.0}, {"x0", 10.0}, {"T", 1.0}},
               [](const ParameterMap& p) {
                   return build_three_half_jump(p.at("mu"), p.at("nu"), p.at("xi"), p.at("eta"), p.at("lambda"),
                                                p.at("x0"), p.at("T"));
               }});
        r.add({"cubic-additive",
               "dX = (X - X^3) dt + dW + dNbar",
               {{"x0", 5.0}, {"T", 1.0}, {"lambda", 1.0}},
               [](const ParameterMap& p) { return build_cubic_additive(p.at("x0"), p.at("T"), p.at("lambda")); }});
        r.add({"merton-linear",
               "dX = X (a dt + b dW + c dNbar), closed-form solution",
               {{"a", 0.05}, {"b", 0.2}, {"c", 0.5}, {"lambda", 1.0}, {"x0", 1.0}, {"T", 1.0}},
               [](const ParameterMap& p) {
                   return build_merton_linear(p.at("a"), p.at("b"), p.at("c"), p.at("lambda"), p.at("x0"),
                                              p.at("T"));
               }});
        r.add({"zero",
               "f = g = sigma = 0",
               {{"x0", 1.0}, {"T", 1.0}, {"lambda", 1.0}},
               [](const ParameterMap& p) { return build_zero(p.at("x0"), p.at("T"), p.at("lambda")); }});
        return r;
    }();
    return registry;
}

}  // namespace jdsim
