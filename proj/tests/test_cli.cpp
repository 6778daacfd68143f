#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "commands.hpp"
#include "config.hpp"
#include "pnc/errors.hpp"
#include "pnc/rates.hpp"
#include "pnc/spectrum.hpp"
#include "text.hpp"

using namespace pnc;
using namespace pnc::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Scratch {
    fs::path dir = fs::temp_directory_path() / ("pnc_cli_test_" + std::to_string(::getpid()));
    Scratch() {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
};

fs::path scratch() {
    static const Scratch s;
    return s.dir;
}

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result pnc_run(std::vector<std::string> args) {
    args.insert(args.begin(), "pnc");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

// Coarse cell settings that keep each mesh run well under a second per k.
std::vector<std::string> coarse(const std::string& run_id) {
    return {"--output_dir", scratch().string(), "--run-id", run_id, "--resolution", "8,6,4",
            "--k_points", "5", "--n_modes", "24", "--f_max_GHz", "80", "--broadening_GHz", "4", "--dos_strict", "false"};
}

// Appends `more`, replacing the value of any "--flag value" pair already in `base`.
std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& more) {
    for (std::size_t i = 0; i < more.size(); ++i) {
        const bool pair = more[i].rfind("--", 0) == 0 && i + 1 < more.size() && more[i + 1].rfind("--", 0) != 0;
        auto it = std::find(base.begin(), base.end(), more[i]);
        if (pair && it != base.end() && it + 1 != base.end()) {
            *(it + 1) = more[++i];
            continue;
        }
        base.push_back(more[i]);
    }
    return base;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) rows.push_back(split(line, ','));
    return rows;
}

json report(const fs::path& dir) { return json::parse(slurp(dir / "report.json")); }

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

} // namespace

TEST_CASE("config round-trips through its text form") {
    RunConfig c;
    CHECK(parse_config(*std::make_unique<std::istringstream>(serialize_config(c))) == c);
    c.structure = "nanobeam";
    c.cell.t = 0.1 + 0.2;
    c.c44_gpa = 1.0 / 3.0;
    c.resolution = {10, 8, 6};
    c.sweep_values_nm = {1e-7, 19.1, 25.100000000000001};
    c.dos_strict = false;
    c.seed = 4294967295u;
    c.output_dir = "out dir";
    std::istringstream in(serialize_config(c));
    const RunConfig back = parse_config(in);
    CHECK(back == c);
    CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("config parsing rejects malformed input") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in);
    };
    CHECK(parse("# comment only\n\n").cell == UnitCellParams{});
    CHECK(parse("t_nm = 20 # trailing comment\n").cell.t == 20.0);
    CHECK_THROWS_AS(parse("q_nm = 1\n"), InvalidParameter);
    CHECK_THROWS_AS(parse("t_nm = 1\nt_nm = 2\n"), InvalidParameter);
    CHECK_THROWS_AS(parse("t_nm 20\n"), InvalidParameter);
    CHECK_THROWS_AS(parse("t_nm = 20nm\n"), InvalidParameter);
    CHECK_THROWS_AS(parse("resolution = 8,6\n"), InvalidParameter);
    CHECK_THROWS_AS(parse("dos_strict = maybe\n"), InvalidParameter);
    CHECK_THROWS_AS(parse("seed = -1\n"), InvalidParameter);
}

TEST_CASE("config validation covers every stage") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = [](auto mutate) {
        RunConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), InvalidParameter);
    };
    bad([](RunConfig& c) { c.cell.w = 200.0; });
    bad([](RunConfig& c) { c.structure = "slab"; });
    bad([](RunConfig& c) { c.c12_gpa = 2000.0; });
    bad([](RunConfig& c) { c.resolution.nx = 2; });
    bad([](RunConfig& c) { c.k_points = 0; });
    bad([](RunConfig& c) { c.f_max_ghz = 10.0; });
    bad([](RunConfig& c) { c.broadening_ghz = 0.0; });
    bad([](RunConfig& c) { c.sweep_param = "q"; });
    bad([](RunConfig& c) { c.sweep_values_nm = {200.0}; c.sweep_param = "h"; });
    bad([](RunConfig& c) { c.sweep_values_nm.clear(); });
}

TEST_CASE("flags override the config file") {
    const fs::path file = scratch() / "override.cfg";
    write(file, "t_nm = 20\nk_points = 7\n");
    const Result r = pnc_run({"--config", file.string(), "--t_nm", "21.5", "--print-config"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    const RunConfig c = parse_config(in);
    CHECK(c.cell.t == 21.5);
    CHECK(c.k_points == 7);
}

TEST_CASE("exit codes") {
    CHECK(pnc_run({}).code == kInvalidConfig);
    CHECK(pnc_run({"--help"}).code == kSuccess);
    CHECK(pnc_run({"gap", "--no-such-flag"}).code == kInvalidConfig);
    const Result geo = pnc_run({"gap", "--w_nm", "200", "--output_dir", scratch().string()});
    CHECK(geo.code == kInvalidConfig);
    CHECK(geo.err.find("invalid configuration") != std::string::npos);
    CHECK(pnc_run({"gap", "--t_nm", "abc"}).code == kInvalidConfig);
    CHECK(pnc_run({"--config", (scratch() / "missing.cfg").string(), "gap"}).code == kInvalidConfig);

    // Too few modes to reach f_max at every k.
    const Result cov = pnc_run(with(coarse("cov"), {"--n_modes", "4", "gap"}));
    CHECK(cov.code == kNumericalFailure);
    CHECK(cov.err.find("coverage") != std::string::npos);

    // The strict DOS check refuses a k path too coarse for the broadening.
    const Result coarse_k = pnc_run(with(coarse("strict"), {"--dos_strict", "true", "dos"}));
    CHECK(coarse_k.code == kInvalidConfig);
    CHECK(coarse_k.err.find("under-sampled") != std::string::npos);

    const fs::path flat = scratch() / "flat.csv";
    write(flat, "tau_ns,ratio\n100,1\n200,1\n300,1\n");
    CHECK(pnc_run({"--output_dir", scratch().string(), "fit-t1", "--input", flat.string()}).code == kNumericalFailure);
}

TEST_CASE("a one-point k path gives a single k column value") {
    const Result r = pnc_run(with(coarse("onek"), {"--k_points", "1", "--n_modes", "6", "bands"}));
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(scratch() / "onek" / "bands" / "bands.csv");
    REQUIRE(rows.size() == 7);
    CHECK(rows[0] == std::vector<std::string>{"k_reduced", "band_index", "frequency_GHz", "parity_y", "parity_z"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i][0] == "0");
        CHECK(rows[i][1] == std::to_string(i - 1));
        CHECK(rows[i][3] != "none");
    }
}

TEST_CASE("the middle sweep row equals the standalone gap run bit for bit") {
    const auto base = coarse("self");
    const Result sweep = pnc_run(with(base, {"--sweep_param", "t", "--sweep_values_nm", "19.1,22.1,25.1", "sweep"}));
    REQUIRE(sweep.code == 0);
    const Result gap = pnc_run(with(base, {"gap"}));
    REQUIRE(gap.code == 0);
    const auto rows = csv_rows(scratch() / "self" / "sweep" / "sweep.csv");
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == std::vector<std::string>{"param_value_nm", "center_GHz", "width_GHz"});
    const json g = report(scratch() / "self" / "gap");
    REQUIRE(!g["main_gap"].is_null());
    CHECK(parse_double(rows[2][0], "t") == 22.1);
    CHECK(parse_double(rows[2][1], "center") == g["main_gap"]["center_GHz"].get<double>());
    CHECK(parse_double(rows[2][2], "width") == g["main_gap"]["width_GHz"].get<double>());
    CHECK(g["reference"].contains("center_within_tolerance"));
    CHECK(g["reference"]["center_GHz"] == 59.1);
    CHECK(g["reference"]["width_GHz"] == 17.3);
}

TEST_CASE("bundle shading equals the complete gaps and reruns are identical") {
    const auto base = coarse("bundle");
    REQUIRE(pnc_run(with(base, {"bundle"})).code == 0);
    const fs::path dir = scratch() / "bundle" / "bundle";
    for (const char* f : {"bands.csv", "dos.csv", "gaps.csv", "plot_bundle.py", "report.json", "config.txt"})
        CHECK(fs::exists(dir / f));

    RunConfig c;
    c.resolution = {8, 6, 4};
    c.k_points = 5;
    c.n_modes = 24;
    c.f_max_ghz = 80.0;
    BandOptions opts;
    opts.classify = false;
    const auto bands = band_diagram(c.mesh(), c.material(), uniform_k_path(5), 24, opts);
    const auto gaps = find_complete_gaps(bands, 80.0);
    const auto rows = csv_rows(dir / "gaps.csv");
    REQUIRE(rows.size() == gaps.size() + 1);
    CHECK(!gaps.empty());
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        CHECK(parse_double(rows[i + 1][0], "lo") == gaps[i].f_lo);
        CHECK(parse_double(rows[i + 1][1], "hi") == gaps[i].f_hi);
    }

    const std::string first = slurp(dir / "bands.csv") + slurp(dir / "dos.csv") + slurp(dir / "report.json");
    REQUIRE(pnc_run(with(base, {"--threads", "2", "bundle"})).code == 0);
    CHECK(slurp(dir / "bands.csv") + slurp(dir / "dos.csv") + slurp(dir / "report.json") == first);
}

TEST_CASE("a nanobeam bundle has no gap shading") {
    const Result r = pnc_run(with(coarse("beam"), {"--structure", "nanobeam", "--k_points", "21", "bundle"}));
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(scratch() / "beam" / "bundle" / "gaps.csv");
    CHECK(rows.size() == 1);
}

TEST_CASE("artifacts are namespaced by run and subcommand") {
    const auto base = with(coarse("ns"), {"--n_modes", "6", "--k_points", "2", "--f_min_GHz", "0", "--f_max_GHz", "5"});
    REQUIRE(pnc_run(with(base, {"bands"})).code == 0);
    const std::string bands = slurp(scratch() / "ns" / "bands" / "bands.csv");
    REQUIRE(pnc_run(with(base, {"--t_nm", "20", "bands"})).code == 0);
    CHECK(slurp(scratch() / "ns" / "bands" / "bands.csv") != bands);
    REQUIRE(pnc_run(with(base, {"rates"})).code == 0);
    CHECK(fs::exists(scratch() / "ns" / "rates" / "rates.csv"));

    // Default run IDs follow the inputs.
    const std::string out = scratch().string();
    const Result a = pnc_run({"--output_dir", out, "rates", "--delta-ghz", "50"});
    const Result b = pnc_run({"--output_dir", out, "rates", "--delta-ghz", "60"});
    const Result a2 = pnc_run({"--output_dir", out, "rates", "--delta-ghz", "50"});
    CHECK(a.out != b.out);
    CHECK(a.out == a2.out);
}

TEST_CASE("the output directory falls back to the environment") {
    const fs::path env_dir = scratch() / "from_env";
    ::setenv("PNC_OUTPUT_DIR", env_dir.c_str(), 1);
    const Result r = pnc_run({"--run-id", "env", "rates"});
    ::unsetenv("PNC_OUTPUT_DIR");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(env_dir / "env" / "rates" / "rates.csv"));
}

TEST_CASE("rates subcommand") {
    const std::string out = scratch().string();
    const Result r = pnc_run({"--output_dir", out, "--run-id", "rates", "rates", "--delta-ghz", "50", "--chi-rho",
                              "1e-6", "--chi-rho-sq", "2e-9", "--temp-k", "4.4,12"});
    REQUIRE(r.code == 0);
    const auto rows = csv_rows(scratch() / "rates" / "rates" / "rates.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"temperature_K", "gamma_up_MHz", "gamma_down_MHz", "gamma_raman_MHz", "t1_ns"});
    const double up = parse_double(rows[1][1], "up"), down = parse_double(rows[1][2], "down");
    CHECK(down / up == doctest::Approx(std::exp(50.0 / (constants::thermal_ghz_per_kelvin * 4.4))).epsilon(1e-12));
    CHECK(parse_double(rows[1][4], "t1") == doctest::Approx(1e3 / (up + down)).epsilon(1e-12));

    const Result numeric = pnc_run({"--output_dir", out, "--run-id", "rates_num", "rates", "--chi-rho-sq", "2e-9",
                                    "--temp-k", "4.4,12", "--raman", "numeric"});
    REQUIRE(numeric.code == 0);
    const auto nrows = csv_rows(scratch() / "rates_num" / "rates" / "rates.csv");
    CHECK(parse_double(nrows[2][3], "raman") == doctest::Approx(parse_double(rows[2][3], "raman")).epsilon(1e-6));

    CHECK(pnc_run({"--output_dir", out, "rates", "--temp-k", "4", "--temp-range", "1:2:1"}).code == kInvalidConfig);
    CHECK(pnc_run({"--output_dir", out, "rates", "--raman", "fast"}).code == kInvalidConfig);
    CHECK(pnc_run({"--output_dir", out, "rates", "--delta-ghz", "-1"}).code == kInvalidConfig);
}

TEST_CASE("pumpprobe subcommand") {
    const std::string out = scratch().string();
    const Result r = pnc_run({"--output_dir", out, "--run-id", "pp", "pumpprobe", "--t1-ns", "486"});
    REQUIRE(r.code == 0);
    const json rep = report(scratch() / "pp" / "pumpprobe");
    CHECK(std::abs(rep["fit"]["t1_ns"].get<double>() / 486.0 - 1.0) < 0.05);
    const auto curve = csv_rows(scratch() / "pp" / "pumpprobe" / "curve.csv");
    CHECK(curve[0] == std::vector<std::string>{"tau_ns", "ratio"});
    CHECK(curve.size() == 22);
    CHECK(csv_rows(scratch() / "pp" / "pumpprobe" / "trace.csv")[0] == std::vector<std::string>{"time_ns", "signal"});

    auto noisy = [&](const std::string& id, const std::string& seed) {
        REQUIRE(pnc_run({"--output_dir", out, "--run-id", id, "pumpprobe", "--gamma-up", "1", "--gamma-down", "2",
                         "--taus", "0,100,200,400,800", "--noise", "0.02", "--seed", seed})
                    .code == 0);
        return slurp(scratch() / id / "pumpprobe" / "curve.csv");
    };
    CHECK(noisy("n1", "5") == noisy("n2", "5"));
    CHECK(noisy("n1", "5") != noisy("n3", "6"));

    CHECK(pnc_run({"--output_dir", out, "pumpprobe", "--t1-ns", "34", "--gamma-up", "1"}).code == kInvalidConfig);
    CHECK(pnc_run({"--output_dir", out, "pumpprobe"}).code == kInvalidConfig);
    CHECK(pnc_run({"--output_dir", out, "pumpprobe", "--t1-ns", "34", "--taus", "1,x"}).code == kInvalidConfig);
}

TEST_CASE("fit-t1 subcommand") {
    const fs::path in = scratch() / "t1.csv";
    std::ostringstream s;
    s << "tau_ns,ratio,sigma\n";
    for (int i = 0; i <= 10; ++i) s << 17.0 * i << ',' << fmt(1.0 - std::exp(-17.0 * i / 34.0)) << ",0.01\n";
    write(in, s.str());
    REQUIRE(pnc_run({"--output_dir", scratch().string(), "--run-id", "t1", "fit-t1", "--input", in.string()}).code == 0);
    const json rep = report(scratch() / "t1" / "fit-t1");
    CHECK(rep["fit"]["t1_ns"].get<double>() == doctest::Approx(34.0).epsilon(1e-9));
    CHECK(csv_rows(scratch() / "t1" / "fit-t1" / "fit_curve.csv")[0] == std::vector<std::string>{"tau_ns", "ratio_fit"});
}

TEST_CASE("fit-temp subcommand") {
    const fs::path in = scratch() / "temp.csv";
    std::ostringstream s;
    s << "temperature_K,rate_MHz,sigma_MHz\n";
    for (int i = 0; i <= 39; ++i) {
        const double t = 4.4 + 0.4 * i;
        s << fmt(t) << ',' << fmt(0.52 + 6.3e-4 * t * t * t) << ",0.02\n";
    }
    write(in, s.str());
    REQUIRE(pnc_run({"--output_dir", scratch().string(), "--run-id", "tf", "fit-temp", "--input", in.string(),
                     "--models", "3,5,7", "--delta-ghz", "50"})
                .code == 0);
    const json rep = report(scratch() / "tf" / "fit-temp");
    CHECK(rep["best_exponent"] == 3);
    CHECK(rep["fits"][0]["A_MHz"].get<double>() == doctest::Approx(0.52).epsilon(1e-9));
    CHECK(rep["fits"].size() == 3);
    CHECK(rep.contains("two_channel"));
    const auto rows = csv_rows(scratch() / "tf" / "fit-temp" / "fit_curves.csv");
    CHECK(rows[0] == std::vector<std::string>{"temperature_K", "rate_T3_MHz", "rate_T5_MHz", "rate_T7_MHz",
                                              "rate_two_channel_MHz"});
    CHECK(rows.size() == 202);

    REQUIRE(pnc_run({"--output_dir", scratch().string(), "--run-id", "tf13", "fit-temp", "--input", in.string(),
                     "--models", "1", "--t-max", "13"})
                .code == 0);
    CHECK(report(scratch() / "tf13" / "fit-temp")["points"] == 22);
    CHECK(pnc_run({"--output_dir", scratch().string(), "fit-temp", "--input", in.string(), "--models", "2"}).code ==
          kInvalidConfig);
}

TEST_CASE("synthetic contours round-trip through fit-geom") {
    const std::string out = scratch().string();
    REQUIRE(pnc_run({"--output_dir", out, "--run-id", "geo", "--seed", "3", "synth-geom", "--cells", "12"}).code == 0);
    const fs::path synth = scratch() / "geo" / "synth-geom";
    REQUIRE(pnc_run({"--output_dir", out, "--run-id", "geo", "fit-geom", "--manifest", (synth / "manifest.csv").string()})
                .code == 0);
    const auto table = csv_rows(scratch() / "geo" / "fit-geom" / "geometry_table.csv");
    REQUIRE(table.size() == 7);
    CHECK(table[0] == std::vector<std::string>{"parameter", "average_nm", "sd_nm"});

    const auto truth = csv_rows(synth / "truth.csv");
    REQUIRE(truth.size() == 13);
    // truth columns: cell, w, h, t, r, a, d; table rows: w, h, t, r, a, d.
    for (int p = 0; p < 6; ++p) {
        double mean = 0.0;
        for (std::size_t i = 1; i < truth.size(); ++i) mean += parse_double(truth[i][p + 1], "truth") / 12.0;
        CAPTURE(table[p + 1][0]);
        CHECK(std::abs(parse_double(table[p + 1][1], "avg") - mean) < 1.0);
    }
    const json rep = report(scratch() / "geo" / "fit-geom");
    CHECK(rep["cells_measured"] == 12);

    const fs::path bad = scratch() / "bad_manifest.csv";
    write(bad, "cell,role,file\nc0,tether-edge,x.csv\n");
    CHECK(pnc_run({"--output_dir", out, "fit-geom", "--manifest", bad.string()}).code == kInvalidConfig);
}
