#include "pnc/rates.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pnc/errors.hpp"

namespace pnc {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void check_temperature(double temperature_k) {
    if (!(temperature_k >= 0.0) || !std::isfinite(temperature_k)) {
        throw InvalidParameter("temperature must be finite and >= 0 K, got " +
                               std::to_string(temperature_k));
    }
}

double reported(const RateModel& model, double rate) {
    return model.convention == RateConvention::Angular ? kTwoPi * rate : rate;
}

/// n (n + 1) = e^x / (e^x - 1)^2 for x = h nu / k_B T.
double bose_variance(double x) { return std::exp(x) / (std::expm1(x) * std::expm1(x)); }

struct Simpson {
    double (*f)(double, double);
    double param;
    int evaluations = 0;
    bool exhausted = false;

    double eval(double x) {
        ++evaluations;
        return f(x, param);
    }

    double refine(double a, double b, double fa, double fm, double fb, double whole, double tol,
                  int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        const double flm = eval(lm), frm = eval(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double diff = left + right - whole;
        if (std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
        if (depth <= 0) {
            exhausted = true;
            return left + right + diff / 15.0;
        }
        return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
               refine(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
};

/// n (n + 1) nu^2 with nu in GHz and kt = k_B T / h in GHz; tends to kt^2
/// as nu -> 0.
double raman_integrand(double nu, double kt) {
    if (nu <= 0.0) return kt * kt;
    const double x = nu / kt;
    return bose_variance(x) * nu * nu;
}

} // namespace

void OrbitalSystem::validate() const {
    if (!(delta_gs > 0.0) || !std::isfinite(delta_gs)) {
        throw InvalidParameter("ground-state splitting must be positive");
    }
    if (delta_es && !(*delta_es >= 0.0)) {
        throw InvalidParameter("excited-state splitting must be non-negative");
    }
}

void RateModel::validate() const {
    if (!(chi_rho >= 0.0) || !(chi_rho_sq >= 0.0)) {
        throw InvalidParameter("coupling products must be non-negative");
    }
}

double bose_occupation(double delta_ghz, double temperature_k) {
    if (!(delta_ghz > 0.0)) throw InvalidParameter("phonon frequency must be positive");
    check_temperature(temperature_k);
    if (temperature_k == 0.0) return 0.0;
    const double x = delta_ghz / (constants::thermal_ghz_per_kelvin * temperature_k);
    return 1.0 / std::expm1(x);
}

SinglePhononRates single_phonon_rates(const OrbitalSystem& system, const RateModel& model,
                                      double temperature_k) {
    system.validate();
    model.validate();
    const double n = bose_occupation(system.delta_gs, temperature_k);
    const double base = kTwoPi * model.chi_rho * std::pow(system.delta_gs, 3);
    return {reported(model, base * n), reported(model, base * (n + 1.0))};
}

double single_phonon_linear_limit(const OrbitalSystem& system, const RateModel& model,
                                  double temperature_k) {
    system.validate();
    model.validate();
    check_temperature(temperature_k);
    const double kt = constants::thermal_ghz_per_kelvin * temperature_k;
    return reported(model, kTwoPi * model.chi_rho * system.delta_gs * system.delta_gs * kt);
}

double raman_rate(const OrbitalSystem& system, const RateModel& model, double temperature_k,
                  RamanMode mode) {
    system.validate();
    model.validate();
    check_temperature(temperature_k);
    if (temperature_k == 0.0 || model.chi_rho_sq == 0.0) return 0.0;
    const double kt = constants::thermal_ghz_per_kelvin * temperature_k;
    const double prefactor = kTwoPi * model.chi_rho_sq * system.delta_gs * system.delta_gs;

    double integral = 0.0;
    if (mode == RamanMode::ClosedForm) {
        integral = M_PI * M_PI / 3.0 * kt * kt * kt;
    } else {
        const double upper = 50.0 * kt;
        Simpson s{raman_integrand, kt};
        const double fa = s.eval(0.0);
        const double fm = s.eval(0.5 * upper);
        const double fb = s.eval(upper);
        const double whole = upper / 6.0 * (fa + 4.0 * fm + fb);
        const double scale = M_PI * M_PI / 3.0 * kt * kt * kt;
        integral = s.refine(0.0, upper, fa, fm, fb, whole, 1e-9 * scale, 40);
        if (s.exhausted || !std::isfinite(integral)) {
            throw NumericalFailure("Raman quadrature did not reach relative tolerance 1e-9 at T = " +
                                   std::to_string(temperature_k) + " K");
        }
    }
    return reported(model, prefactor * integral);
}

std::optional<double> raman_crossover(const OrbitalSystem& system, const RateModel& model) {
    system.validate();
    model.validate();
    if (model.chi_rho_sq == 0.0) return std::nullopt;
    if (model.chi_rho == 0.0) return 0.0;
    // Raman over single-phonon grows monotonically in T, so the crossing is
    // unique and can be bracketed by doubling.
    auto excess = [&](double t) {
        const SinglePhononRates s = single_phonon_rates(system, model, t);
        return raman_rate(system, model, t) - (s.gamma_up + s.gamma_down);
    };
    double lo = 0.0, hi = 1.0;
    while (excess(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e4) return std::nullopt;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

RateSet total_relaxation(const OrbitalSystem& system, const RateModel& model, double temperature_k) {
    const SinglePhononRates s = single_phonon_rates(system, model, temperature_k);
    RateSet out;
    out.gamma_up = s.gamma_up;
    out.gamma_down = s.gamma_down;
    out.gamma_raman = raman_rate(system, model, temperature_k);
    out.total = out.gamma_up + out.gamma_down + out.gamma_raman;
    RateModel plain = model;
    plain.convention = RateConvention::PlainFrequency;
    const SinglePhononRates decay = single_phonon_rates(system, plain, temperature_k);
    const double sum = decay.gamma_up + decay.gamma_down;
    out.t1_ns = sum > 0.0 ? 1e3 / sum : std::numeric_limits<double>::infinity();
    out.crossover_k = raman_crossover(system, model);
    return out;
}

} // namespace pnc
