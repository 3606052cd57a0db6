#pragma once

// Generalized point interaction on a shell and the equidistant shell lattice.

#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>

#include "shellspec/errors.hpp"
#include "shellspec/linalg.hpp"

namespace shellspec {

inline constexpr double kConstraintTolerance = 1e-12;

/// Parameters of the transfer matrix e^{i chi} [[gamma, beta], [alpha, delta]]
/// acting on (f, f') across a shell. Only constructible through make_interaction.
class InteractionParams {
public:
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    [[nodiscard]] double delta() const noexcept { return delta_; }
    /// Global phase. Stored for fidelity; all dynamics use chi = 0.
    [[nodiscard]] double chi() const noexcept { return chi_; }

    /// The real transfer matrix (chi dropped).
    template <class T = double>
    [[nodiscard]] Mat2<T> matrix() const {
        return {T(gamma_), T(beta_), T(alpha_), T(delta_)};
    }

    /// The full complex transfer matrix including the phase.
    [[nodiscard]] Mat2<std::complex<double>> complex_matrix() const {
        const std::complex<double> ph = std::polar(1.0, chi_);
        return ph * matrix<std::complex<double>>();
    }

    [[nodiscard]] bool is_free() const noexcept {
        return alpha_ == 0.0 && beta_ == 0.0 && gamma_ == 1.0 && delta_ == 1.0;
    }

    friend bool operator==(const InteractionParams&, const InteractionParams&) = default;

private:
    friend InteractionParams make_interaction(double, double, double, double, double);
    InteractionParams(double a, double b, double g, double d, double chi)
        : alpha_(a), beta_(b), gamma_(g), delta_(d), chi_(chi) {}

    double alpha_, beta_, gamma_, delta_, chi_;
};

/// Defect of Lambda^* sigma_2 Lambda = sigma_2, max-abs over entries.
[[nodiscard]] inline double symplectic_defect(const Mat2<std::complex<double>>& lam) {
    using C = std::complex<double>;
    const C i(0.0, 1.0);
    const Mat2<C> s2{C(0), -i, i, C(0)};
    const Mat2<C> adj{std::conj(lam.a), std::conj(lam.c), std::conj(lam.b), std::conj(lam.d)};
    const Mat2<C> r = adj * s2 * lam;
    return std::max({std::abs(r.a - s2.a), std::abs(r.b - s2.b), std::abs(r.c - s2.c), std::abs(r.d - s2.d)});
}

/// Validates alpha*beta - gamma*delta = -1 and builds the parameter set.
[[nodiscard]] inline InteractionParams make_interaction(double alpha, double beta, double gamma, double delta,
                                                        double chi = 0.0) {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma) || !std::isfinite(delta) ||
        !std::isfinite(chi)) {
        throw ConstraintViolation("interaction parameters must be finite");
    }
    const double defect = alpha * beta - gamma * delta + 1.0;
    if (std::abs(defect) > kConstraintTolerance) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "alpha*beta - gamma*delta = %.17g, expected -1", defect - 1.0);
        throw ConstraintViolation(buf);
    }
    InteractionParams p(alpha, beta, gamma, delta, chi);
    if (symplectic_defect(p.complex_matrix()) > kConstraintTolerance * std::max(1.0, std::abs(gamma * delta))) {
        throw ConstraintViolation("transfer matrix is not sigma_2-unitary");
    }
    return p;
}

[[nodiscard]] inline InteractionParams free_interaction() { return make_interaction(0.0, 0.0, 1.0, 1.0); }
[[nodiscard]] inline InteractionParams delta_interaction(double alpha) { return make_interaction(alpha, 0.0, 1.0, 1.0); }
[[nodiscard]] inline InteractionParams delta_prime_interaction(double beta) {
    return make_interaction(0.0, beta, 1.0, 1.0);
}

/// F(R+) = Lambda F(R-) with chi = 0.
template <class T>
[[nodiscard]] inline Vec2<T> apply_interaction(const InteractionParams& p, const Vec2<T>& f) {
    return p.matrix<T>() * f;
}

/// F(R-) = Lambda^{-1} F(R+).
template <class T>
[[nodiscard]] inline Vec2<T> apply_interaction_inverse(const InteractionParams& p, const Vec2<T>& f) {
    return p.matrix<T>().unimodular_inverse() * f;
}

/// Shells at radii site(n) = n*d + d/2, n = 0, 1, ...
struct LatticeGeometry {
    double d = 1.0;
    int count_hint = 64;

    LatticeGeometry() = default;
    LatticeGeometry(double spacing, int hint = 64) : d(spacing), count_hint(hint) {
        if (!(spacing > 0.0) || !std::isfinite(spacing)) throw InvalidArgument("shell spacing d must be positive");
        if (hint < 1) throw InvalidArgument("count_hint must be >= 1");
    }

    [[nodiscard]] double offset() const noexcept { return 0.5 * d; }
    [[nodiscard]] double site(long n) const noexcept { return static_cast<double>(n) * d + 0.5 * d; }

    /// Index of the first site strictly greater than x.
    [[nodiscard]] long first_site_after(double x) const noexcept {
        long n = static_cast<long>(std::floor((x - 0.5 * d) / d)) + 1;
        while (site(n) <= x) ++n;
        while (n > 0 && site(n - 1) > x) --n;
        return n;
    }
};

enum class InteractionKind { DeltaType, IntermediateType, DeltaPrimeType };

[[nodiscard]] inline const char* to_string(InteractionKind k) {
    switch (k) {
        case InteractionKind::DeltaType: return "DeltaType";
        case InteractionKind::IntermediateType: return "IntermediateType";
        case InteractionKind::DeltaPrimeType: return "DeltaPrimeType";
    }
    return "?";
}

/// High-energy class of an interaction.
///
/// predicted_asymptote depends on the lattice spacing, so classify() takes the
/// geometry: DeltaType gives the limiting gap width 2|alpha|/d, IntermediateType
/// the limiting band/gap width ratio arcsin(2/|g+d|)/arccos(2/|g+d|), and
/// DeltaPrimeType the limiting band width 8/(|beta| d). mu_exponent is the
/// power of the gap/band ratio growth.
struct InteractionClass {
    InteractionKind tag;
    double predicted_asymptote;
    int mu_exponent;
};

[[nodiscard]] inline InteractionClass classify(const InteractionParams& p, const LatticeGeometry& geom) {
    constexpr double tol = kConstraintTolerance;
    const double trace = p.gamma() + p.delta();
    if (p.beta() != 0.0) {
        return {InteractionKind::DeltaPrimeType, 8.0 / (std::abs(p.beta()) * geom.d), +1};
    }
    if (std::abs(p.gamma() - 1.0) <= tol && std::abs(p.delta() - 1.0) <= tol) {
        return {InteractionKind::DeltaType, 2.0 * std::abs(p.alpha()) / geom.d, -1};
    }
    if (std::abs(trace) > 2.0) {
        const double x = 2.0 / std::abs(trace);
        return {InteractionKind::IntermediateType, std::asin(x) / std::acos(x), 0};
    }
    throw UnclassifiableInteraction("beta = 0 with |gamma + delta| <= 2 and (gamma, delta) != (1, 1)");
}

// Config mapping: keys alpha, beta, gamma, delta, chi as decimal strings.

[[nodiscard]] inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

[[nodiscard]] inline double parse_double(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw InvalidArgument("key '" + key + "': not a number: '" + s + "'");
    }
    if (pos != s.size()) throw InvalidArgument("key '" + key + "': trailing characters in '" + s + "'");
    return v;
}

/// Missing keys default to the free interaction; unknown keys are rejected.
[[nodiscard]] inline InteractionParams interaction_from_map(const std::map<std::string, std::string>& m) {
    double v[5] = {0.0, 0.0, 1.0, 1.0, 0.0};
    static const char* const keys[5] = {"alpha", "beta", "gamma", "delta", "chi"};
    for (const auto& [k, s] : m) {
        int idx = -1;
        for (int i = 0; i < 5; ++i)
            if (k == keys[i]) idx = i;
        if (idx < 0) throw InvalidArgument("unknown interaction key '" + k + "'");
        v[idx] = parse_double(k, s);
    }
    return make_interaction(v[0], v[1], v[2], v[3], v[4]);
}

[[nodiscard]] inline std::map<std::string, std::string> interaction_to_map(const InteractionParams& p) {
    return {{"alpha", format_double(p.alpha())},
            {"beta", format_double(p.beta())},
            {"gamma", format_double(p.gamma())},
            {"delta", format_double(p.delta())},
            {"chi", format_double(p.chi())}};
}

}  // namespace shellspec
