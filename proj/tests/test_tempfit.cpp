#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pnc/errors.hpp"
#include "pnc/rates.hpp"
#include "pnc/tempfit.hpp"

using namespace pnc;

namespace {

std::vector<double> temperature_grid() {
    std::vector<double> t;
    for (int i = 0; i <= 39; ++i) t.push_back(4.4 + 0.4 * i);
    return t;
}

double chi2(const RateSeries& d, int p, double a, double b) {
    double s = 0.0;
    for (int i = 0; i < d.size(); ++i) {
        const double r = (d.rate[i] - a - b * std::pow(d.temperature[i], p)) / d.sigma[i];
        s += r * r;
    }
    return s;
}

// Brute-force minimizer: nested grids that zoom onto the best cell.
std::pair<double, double> grid_search(const RateSeries& d, int p, double a0, double b0, double ra, double rb) {
    double a = a0, b = b0;
    for (int level = 0; level < 14; ++level) {
        double best = 1e300, ba = a, bb = b;
        for (int i = -20; i <= 20; ++i) {
            for (int j = -20; j <= 20; ++j) {
                const double ta = a + ra * i / 20.0, tb = b + rb * j / 20.0;
                const double c = chi2(d, p, ta, tb);
                if (c < best) {
                    best = c;
                    ba = ta;
                    bb = tb;
                }
            }
        }
        a = ba;
        b = bb;
        ra /= 4.0;
        rb /= 4.0;
    }
    return {a, b};
}

RateSeries pnc_piecewise(double sigma) {
    RateSeries d;
    for (double t : temperature_grid()) {
        d.temperature.push_back(t);
        d.rate.push_back(t < 13.0 ? -0.35 + 0.15 * t : 0.52 + 6.3e-4 * t * t * t);
        d.sigma.push_back(sigma);
    }
    return d;
}

} // namespace

TEST_CASE("rate series invariants") {
    RateSeries d{{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, {0.1, 0.1, 0.1}};
    CHECK_NOTHROW(d.validate());
    RateSeries bad = d;
    bad.temperature[2] = 2.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = d;
    bad.sigma[0] = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = d;
    bad.rate.pop_back();
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    RateSeries two{{1.0, 2.0}, {1.0, 2.0}, {0.1, 0.1}};
    CHECK_THROWS_AS(two.validate(), InvalidParameter);
    CHECK(d.below(2.0).size() == 2);
}

TEST_CASE("rate CSV parsing") {
    std::istringstream in("temperature_K,rate_MHz,sigma_MHz\n4.4,1.0,0.1\n# comment\n6.0,2.0,0.2\n");
    const RateSeries d = RateSeries::read_csv(in);
    REQUIRE(d.size() == 2);
    CHECK(d.temperature[1] == 6.0);
    CHECK(d.sigma[1] == 0.2);
    std::istringstream broken("4.4,abc,0.1\n");
    CHECK_THROWS_AS(RateSeries::read_csv(broken), InvalidParameter);
}

TEST_CASE("two exact points are interpolated") {
    RateSeries d{{4.0, 10.0}, {1.47 + 0.68 * 4.0, 1.47 + 0.68 * 10.0}, {0.1, 0.3}};
    const PowerFit f = fit_power_model(d, 1);
    CHECK(f.a == doctest::Approx(1.47).epsilon(1e-12));
    CHECK(f.b == doctest::Approx(0.68).epsilon(1e-12));
    CHECK(f.chi2 < 1e-20);
    CHECK(f.dof == 0);
}

TEST_CASE("rank deficiency and bad exponents are reported") {
    RateSeries d{{5.0, 5.0 + 1e-12, 5.0 + 2e-12}, {1.0, 1.0, 1.0}, {0.1, 0.1, 0.1}};
    CHECK_THROWS_AS(fit_power_model(d, 1), FitError);
    RateSeries ok{{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, {0.1, 0.1, 0.1}};
    CHECK_THROWS_AS(fit_power_model(ok, 2), InvalidParameter);
}

TEST_CASE("weighted fit matches a brute-force grid search") {
    RateSeries d{{4.4, 6.0, 9.0, 13.0, 17.0}, {4.1, 5.9, 7.3, 10.4, 13.3}, {0.3, 0.5, 0.4, 0.8, 0.6}};
    for (int p : {1, 3}) {
        const PowerFit f = fit_power_model(d, p);
        const auto [a, b] = grid_search(d, p, 0.0, 0.0, 20.0, p == 1 ? 2.0 : 0.01);
        CAPTURE(p);
        CHECK(std::abs(f.a - a) < 1e-6);
        CHECK(std::abs(f.b - b) < 1e-6);
        CHECK(f.chi2 == doctest::Approx(chi2(d, p, f.a, f.b)).epsilon(1e-12));
    }
}

TEST_CASE("standard errors follow the inverse normal matrix") {
    RateSeries d{{4.4, 6.0, 9.0, 13.0}, {4.1, 5.9, 7.3, 10.4}, {0.3, 0.5, 0.4, 0.8}};
    const PowerFit f = fit_power_model(d, 1);
    Eigen::MatrixXd x(4, 2);
    for (int i = 0; i < 4; ++i) x.row(i) << 1.0 / d.sigma[i], d.temperature[i] / d.sigma[i];
    const Eigen::Matrix2d cov = (x.transpose() * x).inverse();
    CHECK(f.a_error == doctest::Approx(std::sqrt(cov(0, 0))).epsilon(1e-12));
    CHECK(f.b_error == doctest::Approx(std::sqrt(cov(1, 1))).epsilon(1e-12));
    CHECK(f.cov_ab == doctest::Approx(cov(0, 1)).epsilon(1e-12));
    CHECK(f.dof == 2);
}

TEST_CASE("scaling rates and errors scales the fit") {
    const RateSeries d = synthetic_series(0.52, 6.3e-4, 3, temperature_grid(), 0.1, 5);
    const double c = 3.7;
    RateSeries scaled = d;
    for (int i = 0; i < d.size(); ++i) {
        scaled.rate[i] *= c;
        scaled.sigma[i] *= c;
    }
    const PowerFit f = fit_power_model(d, 3), g = fit_power_model(scaled, 3);
    CHECK(g.a == doctest::Approx(c * f.a).epsilon(1e-12));
    CHECK(g.b == doctest::Approx(c * f.b).epsilon(1e-12));
    CHECK(g.a_error == doctest::Approx(c * f.a_error).epsilon(1e-12));
    CHECK(g.b_error == doctest::Approx(c * f.b_error).epsilon(1e-12));
    const auto r1 = select_model(d, {1, 3, 5, 7}), r2 = select_model(scaled, {1, 3, 5, 7});
    for (int i = 0; i < 4; ++i) CHECK(r1.fits[i].exponent == r2.fits[i].exponent);
}

TEST_CASE("quoted-scale noise matches the requested standard error") {
    const auto temps = temperature_grid();
    const double sigma = noise_for_slope_error(temps, 1, 0.04);
    const RateSeries d = synthetic_series(1.47, 0.68, 1, temps, sigma, 1);
    CHECK(fit_power_model(d, 1).b_error == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("reference parameter sets are recovered within two standard errors") {
    struct Row {
        double a, b, b_error;
        int p;
    };
    const auto temps = temperature_grid();
    for (const Row& row : {Row{1.47, 0.68, 0.04, 1}, Row{1.62, 0.47, 0.02, 1}, Row{-0.35, 0.15, 0.004, 1},
                           Row{0.52, 6.3e-4, 1.8e-5, 3}}) {
        const double sigma = noise_for_slope_error(temps, row.p, row.b_error);
        const RateSeries d = synthetic_series(row.a, row.b, row.p, temps, sigma, 11);
        const PowerFit f = fit_power_model(d, row.p);
        CAPTURE(row.a);
        CHECK(std::abs(f.a - row.a) < 2 * f.a_error);
        CHECK(std::abs(f.b - row.b) < 2 * f.b_error);
        CHECK(f.negative_offset == (f.a < 0.0));
    }
}

TEST_CASE("model selection") {
    const auto temps = temperature_grid();
    const RateSeries cubic = synthetic_series(0.52, 6.3e-4, 3, temps, 0.02, 3);
    const ModelRanking r = select_model(cubic, {3, 5, 7});
    CHECK(r.winner().exponent == 3);
    CHECK(r.margins[0] == 0.0);
    CHECK(r.margins[1] > 0.0);

    RateSeries linear;
    for (double t : temps) {
        linear.temperature.push_back(t);
        linear.rate.push_back(1.0 + 0.5 * t);
        linear.sigma.push_back(0.1);
    }
    CHECK(select_model(linear, {1, 3, 5, 7}).winner().exponent == 1);
    CHECK_THROWS_AS(select_model(linear, {}), InvalidParameter);
}

TEST_CASE("restricted fit below 13 K recovers the low-temperature slope") {
    const PowerFit exact = fit_power_model(pnc_piecewise(0.05).below(13.0), 1);
    CHECK(std::abs(exact.b - 0.15) < 0.5 * 0.004);
    CHECK(exact.a == doctest::Approx(-0.35).epsilon(1e-9));
    CHECK(exact.negative_offset);

    RateSeries noisy = pnc_piecewise(0.05).below(13.0);
    const double sigma = noise_for_slope_error(noisy.temperature, 1, 0.004);
    const RateSeries d = synthetic_series(-0.35, 0.15, 1, noisy.temperature, sigma, 21);
    const PowerFit f = fit_power_model(d, 1);
    CHECK(std::abs(f.b - 0.15) < 2 * f.b_error);
}

TEST_CASE("crossing report") {
    PowerFit bulk;
    bulk.exponent = 1;
    bulk.a = 1.47;
    bulk.b = 0.68;
    PowerFit pnc;
    pnc.exponent = 3;
    pnc.a = 0.52;
    pnc.b = 6.3e-4;
    const CrossingReport r = crossing_report(bulk, pnc, 4.4, 20.0);
    CHECK(r.bulk_rate == doctest::Approx(4.462).epsilon(1e-12));
    CHECK(r.pnc_rate == doctest::Approx(0.52 + 6.3e-4 * 8000.0).epsilon(1e-12));
    CHECK(r.ratio >= 0.8);
    CHECK(r.ratio <= 1.4);
    CHECK(crossing_report(bulk, bulk, 7.0, 7.0).ratio == 1.0);
}

TEST_CASE("two-channel fit of PnC-like data puts the Raman crossover between 10 and 14 K") {
    const RateSeries d = pnc_piecewise(0.05);
    for (double delta : {50.0, 60.0}) {
        const ChannelFit fit = fit_two_channel(d, delta);
        CHECK(fit.single_scale > 0.0);
        CHECK(fit.raman_scale > 0.0);
        CHECK(fit.dof == d.size() - 2);
        const auto tc = raman_crossover(OrbitalSystem{delta, {}}, fit.model);
        REQUIRE(tc.has_value());
        CAPTURE(delta);
        CHECK(*tc >= 10.0);
        CHECK(*tc <= 14.0);
        // The converted model reproduces the fitted curve.
        const RateSet r = total_relaxation(OrbitalSystem{delta, {}}, fit.model, 8.0);
        const double n = bose_occupation(delta, 8.0);
        CHECK(r.total == doctest::Approx(fit.single_scale * (2 * n + 1) + fit.raman_scale * 512.0).epsilon(1e-10));
    }
}
