#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "pnc/errors.hpp"
#include "pnc/spectrum.hpp"

using namespace pnc;

namespace {

// Bands given as closures of reduced k, sampled on a uniform path.
template <typename... F>
BandStructure synthetic_bands(int nk, F... band) {
    BandStructure b;
    b.k = uniform_k_path(nk);
    const std::vector<std::function<double(double)>> fns{band...};
    b.frequencies.resize(nk, static_cast<int>(fns.size()));
    for (int i = 0; i < nk; ++i)
        for (std::size_t j = 0; j < fns.size(); ++j) b.frequencies(i, static_cast<int>(j)) = fns[j](b.k[i]);
    return b;
}

BandStructure two_band_gap(int nk) {
    return synthetic_bands(
        nk, [](double k) { return 10.0 + 10.0 * k; }, [](double k) { return 35.0 + 15.0 * k; },
        [](double k) { return 60.0 + 60.0 * k; });
}

double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    double s = 0.0;
    for (int i = 0; i + 1 < x.size(); ++i) s += 0.5 * (x(i + 1) - x(i)) * (y(i) + y(i + 1));
    return s;
}

} // namespace

TEST_CASE("two separated bands give one complete gap") {
    const auto gaps = find_complete_gaps(two_band_gap(21), 55.0);
    REQUIRE(gaps.size() == 1);
    CHECK(gaps[0].f_lo == doctest::Approx(20.0));
    CHECK(gaps[0].f_hi == doctest::Approx(35.0));
    CHECK(gaps[0].center() == doctest::Approx(27.5));
    CHECK(gaps[0].width() == doctest::Approx(15.0));
    // The gap above f_max is not reported.
    CHECK(find_complete_gaps(two_band_gap(21), 30.0).empty());
}

TEST_CASE("a single linear band has no gap") {
    const auto b = synthetic_bands(21, [](double k) { return 80.0 * k; },
                                   [](double k) { return 80.0 + 40.0 * k; });
    CHECK(find_complete_gaps(b, 75.0).empty());
}

TEST_CASE("bands that do not reach f_max are a coverage error") {
    CHECK_THROWS_AS(find_complete_gaps(two_band_gap(21), 130.0), CoverageError);
    auto b = two_band_gap(21);
    b.frequencies(4, 2) = 50.0; // dips below f_max at one k
    CHECK_THROWS_AS(find_complete_gaps(b, 100.0), CoverageError);
}

TEST_CASE("gap detection is invariant under band and k permutations") {
    BandStructure b = two_band_gap(31);
    std::mt19937 rng(3);
    b.frequencies(7, 0) = 24.0; // band 0 overshoots at one k
    const auto ref = find_complete_gaps(b, 55.0);
    REQUIRE(ref.size() == 1);
    CHECK(ref[0].f_lo == doctest::Approx(24.0));
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<int> rows(b.num_k()), cols(b.num_bands());
        std::iota(rows.begin(), rows.end(), 0);
        std::iota(cols.begin(), cols.end(), 0);
        std::shuffle(rows.begin(), rows.end(), rng);
        std::shuffle(cols.begin(), cols.end(), rng);
        BandStructure p = b;
        for (int i = 0; i < b.num_k(); ++i)
            for (int j = 0; j < b.num_bands(); ++j) p.frequencies(i, j) = b.frequencies(rows[i], cols[j]);
        const auto g = find_complete_gaps(p, 55.0);
        REQUIRE(g.size() == 1);
        CHECK(g[0].f_lo == ref[0].f_lo);
        CHECK(g[0].f_hi == ref[0].f_hi);
    }
}

TEST_CASE("widest gap above a floor") {
    const std::vector<Gap> gaps{{5.0, 25.0}, {30.0, 32.0}, {40.0, 50.0}};
    CHECK(widest_gap(gaps)->f_lo == 5.0);
    CHECK(widest_gap(gaps, 28.0)->f_lo == 40.0);
    CHECK(!widest_gap(gaps, 45.0).has_value());
}

TEST_CASE("DOS of a linear band is constant and equals the inverse slope") {
    const double slope = 40.0; // GHz per unit reduced k
    const auto b = synthetic_bands(401, [=](double k) { return slope * k; });
    const double sigma = 0.5;
    const auto grid = frequency_grid(-5.0, 45.0, 2001);
    const DosCurve dos = compute_dos(b, sigma, grid);
    CHECK(dos.warnings.empty());
    for (int i = 0; i < grid.size(); ++i) {
        CHECK(dos.dos(i) >= 0.0);
        if (grid(i) > 4 * sigma && grid(i) < slope - 4 * sigma) {
            CHECK(dos.dos(i) == doctest::Approx(1.0 / slope).epsilon(1e-3));
        }
    }
}

TEST_CASE("every fully resolved band integrates to one state") {
    const auto b = two_band_gap(81);
    const auto grid = frequency_grid(0.0, 130.0, 6501);
    const DosCurve dos = compute_dos(b, 0.5, grid, DosOptions{false});
    // Total over three bands.
    CHECK(trapezoid(grid, dos.dos) == doctest::Approx(3.0).epsilon(1e-2));
    // Band by band, through single-band structures.
    for (int j = 0; j < 3; ++j) {
        BandStructure one;
        one.k = b.k;
        one.frequencies = b.frequencies.col(j);
        const DosCurve d = compute_dos(one, 0.5, grid, DosOptions{false});
        CAPTURE(j);
        CHECK(std::abs(trapezoid(grid, d.dos) - 1.0) < 1e-2);
    }
}

TEST_CASE("under-sampled k paths fail in strict mode and warn otherwise") {
    const auto b = synthetic_bands(5, [](double k) { return 40.0 * k; });
    const auto grid = frequency_grid(0.0, 40.0, 101);
    CHECK_THROWS_AS(compute_dos(b, 0.5, grid), InvalidParameter);
    const DosCurve d = compute_dos(b, 0.5, grid, DosOptions{false});
    CHECK(!d.warnings.empty());
    CHECK_NOTHROW(compute_dos(b, 4.0, grid));
    CHECK_THROWS_AS(compute_dos(b, 0.0, grid), InvalidParameter);
}

TEST_CASE("depleted DOS intervals coincide with the complete gaps") {
    const auto b = two_band_gap(201);
    const double sigma = 0.5;
    const auto grid = frequency_grid(0.0, 60.0, 6001);
    const DosCurve dos = compute_dos(b, sigma, grid);
    const double threshold = 0.02;
    // Intervals below threshold between the first band and f_max.
    std::vector<Gap> depleted;
    bool inside = false;
    double lo = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
        if (grid(i) < b.frequencies.minCoeff() + 4 * sigma) continue;
        const bool low = dos.dos(i) < threshold;
        if (low && !inside) lo = grid(i);
        if (!low && inside) depleted.push_back({lo, grid(i)});
        inside = low;
    }
    const auto gaps = find_complete_gaps(b, 55.0);
    REQUIRE(depleted.size() == gaps.size());
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        CHECK(std::abs(depleted[i].f_lo - gaps[i].f_lo) < sigma);
        CHECK(std::abs(depleted[i].f_hi - gaps[i].f_hi) < sigma);
    }
}

TEST_CASE("frequency grid") {
    const auto g = frequency_grid(1.0, 3.0, 5);
    CHECK(g.size() == 5);
    CHECK(g(0) == 1.0);
    CHECK(g(4) == 3.0);
    CHECK(g(1) == doctest::Approx(1.5));
    CHECK_THROWS_AS(frequency_grid(1.0, 1.0, 5), InvalidParameter);
    CHECK_THROWS_AS(frequency_grid(0.0, 1.0, 1), InvalidParameter);
}

TEST_CASE("sweep parameter names") {
    for (const char* name : {"w", "h", "t", "r", "a", "d"}) {
        CHECK(std::string(to_string(parse_sweep_parameter(name))) == name);
    }
    CHECK_THROWS_AS(parse_sweep_parameter("q"), InvalidParameter);
    UnitCellParams p;
    parameter_ref(p, SweepParameter::R) = 12.0;
    CHECK(p.r == 12.0);
}

TEST_CASE("an identity sweep reproduces the single-cell pipeline exactly") {
    GapSearch search;
    search.resolution = {8, 6, 4};
    search.k_path = uniform_k_path(5);
    search.n_modes = 12;
    search.f_max = 60.0;
    search.f_min = 0.0;
    const UnitCellParams base;
    const GapResult direct = analyse_cell(base, search);
    const auto sweep = parameter_sweep(base, SweepParameter::W, {base.w}, search, 1);
    REQUIRE(sweep.size() == 1);
    CHECK(sweep[0].value == base.w);
    if (direct.main) {
        CHECK(sweep[0].center == direct.main->center());
        CHECK(sweep[0].width == direct.main->width());
    } else {
        CHECK(std::isnan(sweep[0].center));
        CHECK(sweep[0].width == 0.0);
    }

    std::ostringstream csv;
    write_sweep_csv(csv, sweep);
    CHECK(csv.str().rfind("param_value_nm,center_GHz,width_GHz\n", 0) == 0);
}

TEST_CASE("a sweep value with an invalid geometry is reported") {
    GapSearch search;
    search.resolution = {8, 6, 4};
    search.k_path = {0.0, 1.0};
    search.n_modes = 8;
    CHECK_THROWS_AS(parameter_sweep(UnitCellParams{}, SweepParameter::W, {200.0}, search, 1), InvalidParameter);
}
