#pragma once

#include <optional>

namespace pnc {

namespace constants {
inline constexpr double planck = 6.62607015e-34;    ///< J s
inline constexpr double boltzmann = 1.380649e-23;   ///< J/K
/// k_B T / h in GHz per kelvin.
inline constexpr double thermal_ghz_per_kelvin = boltzmann / planck * 1e-9;
} // namespace constants

/// Ground-state orbital doublet. Splittings are ordinary frequencies in GHz.
struct OrbitalSystem {
    double delta_gs = 50.0;
    std::optional<double> delta_es; ///< informational only

    void validate() const;
};

enum class RateConvention {
    PlainFrequency, ///< rates as decay rates, MHz = 1/us
    Angular,        ///< reported rates multiplied by 2 pi
};

/// Coupling products of the phonon relaxation model.
///
/// gamma_up   = 2 pi chi_rho Delta^3 n
/// gamma_down = 2 pi chi_rho Delta^3 (n + 1)
/// gamma_R    = 2 pi chi_rho_sq Delta^2 Integral_0^inf n (n + 1) nu^2 dnu
///
/// with Delta and nu in GHz and n the Bose occupation at h nu / k_B T.
/// chi_rho is in MHz/GHz^3 and chi_rho_sq in MHz/GHz^5 so that rates come
/// out in MHz.
struct RateModel {
    double chi_rho = 0.0;
    double chi_rho_sq = 0.0;
    RateConvention convention = RateConvention::PlainFrequency;

    void validate() const;
};

/// 1 / (exp(h delta / k_B T) - 1); 0 at T = 0.
double bose_occupation(double delta_ghz, double temperature_k);

struct SinglePhononRates {
    double gamma_up = 0.0;   ///< MHz
    double gamma_down = 0.0; ///< MHz
};

SinglePhononRates single_phonon_rates(const OrbitalSystem& system, const RateModel& model,
                                      double temperature_k);

/// High-temperature form of either single-phonon rate:
/// 2 pi chi_rho Delta^2 k_B T / h.
double single_phonon_linear_limit(const OrbitalSystem& system, const RateModel& model,
                                  double temperature_k);

enum class RamanMode { ClosedForm, NumericIntegral };

/// Two-phonon elastic Raman rate in MHz. The closed form uses
/// Integral_0^inf x^2 e^x / (e^x - 1)^2 dx = pi^2 / 3. The numeric mode runs
/// adaptive quadrature in nu up to 50 k_B T / h with relative tolerance
/// 1e-9 and throws NumericalFailure if it cannot reach it.
double raman_rate(const OrbitalSystem& system, const RateModel& model, double temperature_k,
                  RamanMode mode = RamanMode::ClosedForm);

struct RateSet {
    double gamma_up = 0.0;    ///< MHz
    double gamma_down = 0.0;  ///< MHz
    double gamma_raman = 0.0; ///< MHz
    double total = 0.0;       ///< gamma_up + gamma_down + gamma_raman
    /// 1 / (gamma_up + gamma_down) in ns from the decay rates, independent of
    /// the reporting convention; +inf without a single-phonon channel.
    double t1_ns = 0.0;
    /// Lowest temperature where the Raman rate exceeds gamma_up + gamma_down.
    /// Absent when it never does below 1e4 K.
    std::optional<double> crossover_k;
};

RateSet total_relaxation(const OrbitalSystem& system, const RateModel& model, double temperature_k);

/// Temperature where the Raman rate first exceeds the single-phonon sum.
std::optional<double> raman_crossover(const OrbitalSystem& system, const RateModel& model);

} // namespace pnc
