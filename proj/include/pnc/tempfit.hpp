#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnc/rates.hpp"

namespace pnc {

/// Relaxation rate versus temperature with one error bar per point.
struct RateSeries {
    std::vector<double> temperature; ///< K, strictly increasing
    std::vector<double> rate;        ///< MHz
    std::vector<double> sigma;       ///< MHz, > 0

    /// Throws InvalidParameter unless the invariants hold with at least
    /// `min_points` samples.
    void validate(int min_points = 3) const;

    int size() const { return static_cast<int>(temperature.size()); }

    /// Points with temperature <= t_max.
    RateSeries below(double t_max) const;

    /// CSV with header temperature_K,rate_MHz,sigma_MHz.
    static RateSeries read_csv(std::istream& in);
};

/// Weighted fit of A + B T^exponent.
struct PowerFit {
    int exponent = 1;
    double a = 0.0;
    double b = 0.0;
    double a_error = 0.0;
    double b_error = 0.0;
    double cov_ab = 0.0;
    double chi2 = 0.0; ///< weighted residual sum of squares
    int dof = 0;
    /// A negative offset has no physical meaning but is allowed.
    bool negative_offset = false;

    double evaluate(double temperature) const;
    std::string tag() const;
};

/// Inverse-variance weighted least squares in the basis {1, T^exponent}
/// through the closed-form normal equations. Exponent must be 1, 3, 5 or 7.
/// Two points give an exact interpolation (dof = 0). Throws FitError when
/// the design is rank deficient.
PowerFit fit_power_model(const RateSeries& data, int exponent);

struct ModelRanking {
    std::vector<PowerFit> fits; ///< ascending chi2
    std::vector<double> margins; ///< chi2 - best chi2

    const PowerFit& winner() const { return fits.front(); }
};

ModelRanking select_model(const RateSeries& data, const std::vector<int>& exponents);

struct CrossingReport {
    double t_ref = 0.0;
    double t_elevated = 0.0;
    double bulk_rate = 0.0; ///< MHz at t_ref
    double pnc_rate = 0.0;  ///< MHz at t_elevated
    double ratio = 0.0;     ///< pnc_rate / bulk_rate
};

CrossingReport crossing_report(const PowerFit& bulk, const PowerFit& pnc, double t_ref,
                               double t_elevated);

/// Fit of the relaxation model a (2 n + 1) + b T^3 (single-phonon emission
/// plus absorption and the Raman channel, no offset), converted to coupling
/// products for splitting `delta_ghz`.
struct ChannelFit {
    RateModel model;
    double single_scale = 0.0; ///< a, MHz
    double raman_scale = 0.0;  ///< b, MHz/K^3
    double chi2 = 0.0;
    int dof = 0;
};

ChannelFit fit_two_channel(const RateSeries& data, double delta_ghz);

/// Per-point noise level at which the fitted B of A + B T^exponent over
/// `temperature` has standard error `b_error`.
double noise_for_slope_error(const std::vector<double>& temperature, int exponent, double b_error);

/// Deterministic synthetic data: rate = A + B T^exponent plus Gaussian noise
/// of `sigma` per point.
RateSeries synthetic_series(double a, double b, int exponent, const std::vector<double>& temperature,
                            double sigma, unsigned seed);

} // namespace pnc
