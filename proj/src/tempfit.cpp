#include "pnc/tempfit.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <random>
#include <sstream>

#include "pnc/errors.hpp"

namespace pnc {

void RateSeries::validate(int min_points) const {
    const std::size_t n = temperature.size();
    if (rate.size() != n || sigma.size() != n) {
        throw InvalidParameter("temperature, rate and sigma columns differ in length");
    }
    if (static_cast<int>(n) < min_points) {
        throw InvalidParameter("rate series needs at least " + std::to_string(min_points) +
                               " points, has " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && !(temperature[i] > temperature[i - 1])) {
            throw InvalidParameter("temperatures must be strictly increasing");
        }
        if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
            throw InvalidParameter("uncertainties must be positive");
        }
        if (!std::isfinite(rate[i]) || !std::isfinite(temperature[i])) {
            throw InvalidParameter("rate series contains non-finite values");
        }
    }
}

RateSeries RateSeries::below(double t_max) const {
    RateSeries out;
    for (std::size_t i = 0; i < temperature.size(); ++i) {
        if (temperature[i] <= t_max) {
            out.temperature.push_back(temperature[i]);
            out.rate.push_back(rate[i]);
            out.sigma.push_back(sigma[i]);
        }
    }
    return out;
}

RateSeries RateSeries::read_csv(std::istream& in) {
    RateSeries out;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("temperature_K", 0) == 0) continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double t, r, s;
        if (!(row >> t >> r >> s)) {
            throw InvalidParameter("rate CSV line " + std::to_string(line_no) +
                                   ": expected temperature_K,rate_MHz,sigma_MHz");
        }
        out.temperature.push_back(t);
        out.rate.push_back(r);
        out.sigma.push_back(s);
    }
    return out;
}

double PowerFit::evaluate(double temperature) const {
    return a + b * std::pow(temperature, exponent);
}

std::string PowerFit::tag() const { return "A+BT^" + std::to_string(exponent); }

PowerFit fit_power_model(const RateSeries& data, int exponent) {
    if (exponent != 1 && exponent != 3 && exponent != 5 && exponent != 7) {
        throw InvalidParameter("power-law exponent must be 1, 3, 5 or 7");
    }
    data.validate(2);
    const int n = data.size();
    // Normal equations of the weighted design [1, T^p].
    double s = 0.0, sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = 1.0 / (data.sigma[i] * data.sigma[i]);
        const double x = std::pow(data.temperature[i], exponent);
        s += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * data.rate[i];
        sxy += w * x * data.rate[i];
    }
    const double det = s * sxx - sx * sx;
    if (!(det > 1e-12 * s * sxx)) throw FitError("rank-deficient design: temperatures coincide");

    PowerFit fit;
    fit.exponent = exponent;
    fit.a = (sxx * sy - sx * sxy) / det;
    fit.b = (s * sxy - sx * sy) / det;
    fit.a_error = std::sqrt(sxx / det);
    fit.b_error = std::sqrt(s / det);
    fit.cov_ab = -sx / det;
    for (int i = 0; i < n; ++i) {
        const double r = (data.rate[i] - fit.evaluate(data.temperature[i])) / data.sigma[i];
        fit.chi2 += r * r;
    }
    fit.dof = n - 2;
    fit.negative_offset = fit.a < 0.0;
    return fit;
}

ModelRanking select_model(const RateSeries& data, const std::vector<int>& exponents) {
    if (exponents.empty()) throw InvalidParameter("no models to compare");
    ModelRanking out;
    for (int p : exponents) out.fits.push_back(fit_power_model(data, p));
    std::stable_sort(out.fits.begin(), out.fits.end(),
                     [](const PowerFit& x, const PowerFit& y) { return x.chi2 < y.chi2; });
    for (const PowerFit& f : out.fits) out.margins.push_back(f.chi2 - out.fits.front().chi2);
    return out;
}

CrossingReport crossing_report(const PowerFit& bulk, const PowerFit& pnc, double t_ref,
                               double t_elevated) {
    CrossingReport out;
    out.t_ref = t_ref;
    out.t_elevated = t_elevated;
    out.bulk_rate = bulk.evaluate(t_ref);
    out.pnc_rate = pnc.evaluate(t_elevated);
    out.ratio = out.pnc_rate / out.bulk_rate;
    return out;
}

ChannelFit fit_two_channel(const RateSeries& data, double delta_ghz) {
    data.validate(2);
    const int n = data.size();
    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        const double t = data.temperature[i];
        const double occ = bose_occupation(delta_ghz, t);
        design.row(i) << (2.0 * occ + 1.0) / data.sigma[i], t * t * t / data.sigma[i];
        rhs(i) = data.rate[i] / data.sigma[i];
    }
    const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
    ChannelFit out;
    out.single_scale = coef(0);
    out.raman_scale = coef(1);
    out.chi2 = (design * coef - rhs).squaredNorm();
    out.dof = n - 2;
    const double kt = constants::thermal_ghz_per_kelvin;
    out.model.chi_rho = std::max(0.0, coef(0)) / (2.0 * M_PI * std::pow(delta_ghz, 3));
    out.model.chi_rho_sq = std::max(0.0, coef(1)) /
                           (2.0 * M_PI * delta_ghz * delta_ghz * M_PI * M_PI / 3.0 * kt * kt * kt);
    return out;
}

double noise_for_slope_error(const std::vector<double>& temperature, int exponent, double b_error) {
    if (!(b_error > 0.0)) throw InvalidParameter("target standard error must be positive");
    RateSeries unit;
    unit.temperature = temperature;
    unit.rate.assign(temperature.size(), 0.0);
    unit.sigma.assign(temperature.size(), 1.0);
    return b_error / fit_power_model(unit, exponent).b_error;
}

RateSeries synthetic_series(double a, double b, int exponent, const std::vector<double>& temperature,
                            double sigma, unsigned seed) {
    if (!(sigma > 0.0)) throw InvalidParameter("noise level must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    RateSeries out;
    for (double t : temperature) {
        out.temperature.push_back(t);
        out.rate.push_back(a + b * std::pow(t, exponent) + gauss(rng));
        out.sigma.push_back(sigma);
    }
    return out;
}

} // namespace pnc
