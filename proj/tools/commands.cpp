#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "config.hpp"
#include "plot.hpp"
#include "pnc/contours.hpp"
#include "pnc/dynamics.hpp"
#include "pnc/errors.hpp"
#include "pnc/fitkit.hpp"
#include "pnc/parallel.hpp"
#include "pnc/rates.hpp"
#include "pnc/spectrum.hpp"
#include "pnc/tempfit.hpp"
#include "text.hpp"

namespace pnc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kReferenceCenter = 59.1;
constexpr double kReferenceWidth = 17.3;
constexpr double kCenterTolerance = 0.15;
constexpr double kWidthTolerance = 0.30;

/// Output directory cannot be used; reported as invalid configuration.
class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Context {
    RunConfig config;
    fs::path dir;
    std::string run_id;
    std::string subcommand;
    json report;
    std::ostream& err;
};

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex;
    s.width(16);
    s.fill('0');
    s << v;
    return s.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidParameter("cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw OutputError("cannot write '" + path.string() + "'");
}

json config_json(const RunConfig& c) {
    json j = json::object();
    for (const auto& k : config_keys()) j[k] = config_value(c, k);
    return j;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Numeric table with a header row; '#' lines and blank lines are skipped.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name, bool required = true) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        if (required) throw InvalidParameter("missing column '" + name + "'");
        return -1;
    }
};

Table read_table(const std::string& path) {
    std::istringstream in(read_file(path));
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        const std::string body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split(body, ',');
            continue;
        }
        const auto cells = split(body, ',');
        if (cells.size() != t.header.size())
            throw InvalidParameter(path + ": row has " + std::to_string(cells.size()) + " fields, expected " +
                                   std::to_string(t.header.size()));
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_double(c, path));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw InvalidParameter(path + ": empty table");
    return t;
}

// ---------------------------------------------------------------- spectra

std::string bands_csv(const BandStructure& b) {
    std::ostringstream s;
    s << "k_reduced,band_index,frequency_GHz,parity_y,parity_z\n";
    const bool labelled = static_cast<int>(b.parity.size()) == b.num_k();
    for (int i = 0; i < b.num_k(); ++i) {
        for (int j = 0; j < b.num_bands(); ++j) {
            s << fmt(b.k[i]) << ',' << j << ',' << fmt(b.frequencies(i, j)) << ',';
            if (labelled) s << to_string(b.parity[i][j].y) << ',' << to_string(b.parity[i][j].z) << '\n';
            else s << "none,none\n";
        }
    }
    return s.str();
}

std::string gaps_csv(const std::vector<Gap>& gaps) {
    std::ostringstream s;
    s << "f_lo_GHz,f_hi_GHz,center_GHz,width_GHz\n";
    for (const Gap& g : gaps) s << fmt(g.f_lo) << ',' << fmt(g.f_hi) << ',' << fmt(g.center()) << ',' << fmt(g.width()) << '\n';
    return s.str();
}

std::string dos_csv(const DosCurve& d) {
    std::ostringstream s;
    s << "frequency_GHz,dos_per_GHz\n";
    for (int i = 0; i < d.frequency.size(); ++i) s << fmt(d.frequency(i)) << ',' << fmt(d.dos(i)) << '\n';
    return s.str();
}

json gaps_json(const std::vector<Gap>& gaps) {
    json a = json::array();
    for (const Gap& g : gaps)
        a.push_back({{"f_lo_GHz", g.f_lo}, {"f_hi_GHz", g.f_hi}, {"center_GHz", g.center()}, {"width_GHz", g.width()}});
    return a;
}

BandStructure compute_bands(const Context& ctx, bool classify) {
    BandOptions opts;
    opts.classify = classify;
    return band_diagram(ctx.config.mesh(), ctx.config.material(), uniform_k_path(ctx.config.k_points),
                        ctx.config.n_modes, opts);
}

void describe_mesh(Context& ctx) {
    const Mesh m = ctx.config.mesh();
    ctx.report["mesh"] = {{"nodes", m.num_nodes()}, {"elements", m.num_elements()}, {"dof", 3 * m.num_nodes()}};
}

DosCurve compute_dos_curve(const Context& ctx, const BandStructure& bands) {
    const auto grid = frequency_grid(0.0, ctx.config.f_max_ghz, ctx.config.dos_points);
    return compute_dos(bands, ctx.config.broadening_ghz, grid, DosOptions{ctx.config.dos_strict});
}

void cmd_bands(Context& ctx) {
    describe_mesh(ctx);
    const BandStructure b = compute_bands(ctx, true);
    write_file(ctx.dir / "bands.csv", bands_csv(b));
    ctx.report["k_points"] = b.num_k();
    ctx.report["bands"] = b.num_bands();
    ctx.report["frequency_range_GHz"] = {b.frequencies.minCoeff(), b.frequencies.maxCoeff()};
}

void cmd_dos(Context& ctx) {
    describe_mesh(ctx);
    const BandStructure b = compute_bands(ctx, false);
    const DosCurve d = compute_dos_curve(ctx, b);
    write_file(ctx.dir / "dos.csv", dos_csv(d));
    ctx.report["warnings"] = d.warnings;
    ctx.report["broadening_GHz"] = ctx.config.broadening_ghz;
}

struct GapOutcome {
    BandStructure bands;
    std::vector<Gap> gaps;
    std::optional<Gap> main;
};

GapOutcome find_gaps(const Context& ctx) {
    GapOutcome out;
    if (ctx.config.structure == "pnc") {
        GapResult r = analyse_cell(ctx.config.cell, ctx.config.gap_search());
        out.bands = std::move(r.bands);
        out.gaps = std::move(r.gaps);
        out.main = r.main;
    } else {
        out.bands = compute_bands(ctx, false);
        out.gaps = find_complete_gaps(out.bands, ctx.config.f_max_ghz);
        out.main = widest_gap(out.gaps, ctx.config.f_min_ghz);
    }
    return out;
}

void report_gaps(Context& ctx, const std::vector<Gap>& gaps, const std::optional<Gap>& main) {
    ctx.report["gaps"] = gaps_json(gaps);
    int in_window = 0;
    for (const Gap& g : gaps) in_window += g.f_lo >= ctx.config.f_min_ghz;
    ctx.report["gaps_in_window"] = in_window;
    ctx.report["window_GHz"] = {ctx.config.f_min_ghz, ctx.config.f_max_ghz};
    json ref = {{"center_GHz", kReferenceCenter},
                {"width_GHz", kReferenceWidth},
                {"center_tolerance", kCenterTolerance},
                {"width_tolerance", kWidthTolerance}};
    if (main) {
        ctx.report["main_gap"] = {{"f_lo_GHz", main->f_lo},
                                  {"f_hi_GHz", main->f_hi},
                                  {"center_GHz", main->center()},
                                  {"width_GHz", main->width()}};
        ref["center_deviation"] = main->center() / kReferenceCenter - 1.0;
        ref["width_deviation"] = main->width() / kReferenceWidth - 1.0;
        ref["center_within_tolerance"] = std::abs(main->center() / kReferenceCenter - 1.0) <= kCenterTolerance;
        ref["width_within_tolerance"] = std::abs(main->width() / kReferenceWidth - 1.0) <= kWidthTolerance;
    } else {
        ctx.report["main_gap"] = nullptr;
        ref["center_within_tolerance"] = false;
        ref["width_within_tolerance"] = false;
    }
    ref["single_gap_in_window"] = in_window == 1;
    ctx.report["reference"] = ref;
}

void cmd_gap(Context& ctx) {
    describe_mesh(ctx);
    const GapOutcome g = find_gaps(ctx);
    write_file(ctx.dir / "gaps.csv", gaps_csv(g.gaps));
    report_gaps(ctx, g.gaps, g.main);
}

void cmd_sweep(Context& ctx) {
    if (ctx.config.structure != "pnc") throw InvalidParameter("sweep needs structure = pnc");
    describe_mesh(ctx);
    const SweepParameter p = parse_sweep_parameter(ctx.config.sweep_param);
    const auto points =
        parameter_sweep(ctx.config.cell, p, ctx.config.sweep_values_nm, ctx.config.gap_search());
    std::ostringstream csv;
    write_sweep_csv(csv, points);
    write_file(ctx.dir / "sweep.csv", csv.str());
    ctx.report["parameter"] = to_string(p);
    json rows = json::array();
    for (const auto& pt : points)
        rows.push_back({{"param_value_nm", pt.value}, {"center_GHz", number(pt.center)}, {"width_GHz", pt.width}});
    ctx.report["points"] = rows;
}

void cmd_bundle(Context& ctx) {
    describe_mesh(ctx);
    const BandStructure b = compute_bands(ctx, true);
    const std::vector<Gap> gaps = find_complete_gaps(b, ctx.config.f_max_ghz);
    const DosCurve d = compute_dos_curve(ctx, b);
    write_file(ctx.dir / "bands.csv", bands_csv(b));
    write_file(ctx.dir / "dos.csv", dos_csv(d));
    write_file(ctx.dir / "gaps.csv", gaps_csv(gaps));
    write_file(ctx.dir / "plot_bundle.py", bundle_plot_script());
    ctx.report["warnings"] = d.warnings;
    report_gaps(ctx, gaps, widest_gap(gaps, ctx.config.f_min_ghz));
}

// ------------------------------------------------------------------ rates

struct RatesArgs {
    double delta_ghz = 50.0;
    std::vector<double> temps;
    std::string temp_range;
    double chi_rho = 0.0;
    double chi_rho_sq = 0.0;
    bool angular = false;
    std::string raman = "closed";
};

void cmd_rates(Context& ctx, const RatesArgs& a) {
    const OrbitalSystem sys{a.delta_ghz, {}};
    RateModel m;
    m.chi_rho = a.chi_rho;
    m.chi_rho_sq = a.chi_rho_sq;
    m.convention = a.angular ? RateConvention::Angular : RateConvention::PlainFrequency;
    sys.validate();
    m.validate();
    if (a.raman != "closed" && a.raman != "numeric") throw InvalidParameter("--raman must be closed or numeric");
    std::vector<double> temps = a.temps;
    if (!a.temp_range.empty()) {
        if (!temps.empty()) throw InvalidParameter("give either --temp-k or --temp-range");
        temps = parse_range(a.temp_range, "--temp-range");
    }
    if (temps.empty()) temps = parse_range("1:30:0.5", "default range");
    for (double t : temps)
        if (!(t >= 0.0)) throw InvalidParameter("temperatures must be non-negative");
    const RamanMode mode = a.raman == "numeric" ? RamanMode::NumericIntegral : RamanMode::ClosedForm;
    const double scale = a.angular ? 2.0 * M_PI : 1.0;
    std::ostringstream csv;
    csv << "temperature_K,gamma_up_MHz,gamma_down_MHz,gamma_raman_MHz,t1_ns\n";
    for (double t : temps) {
        const RateSet r = total_relaxation(sys, m, t);
        double raman = r.gamma_raman;
        if (mode == RamanMode::NumericIntegral) {
            RateModel plain = m;
            plain.convention = RateConvention::PlainFrequency;
            raman = scale * raman_rate(sys, plain, t, mode);
        }
        csv << fmt(t) << ',' << fmt(r.gamma_up) << ',' << fmt(r.gamma_down) << ',' << fmt(raman) << ','
            << fmt(r.t1_ns) << '\n';
    }
    write_file(ctx.dir / "rates.csv", csv.str());
    const auto tc = raman_crossover(sys, m);
    ctx.report["delta_GHz"] = a.delta_ghz;
    ctx.report["chi_rho_MHz_per_GHz3"] = a.chi_rho;
    ctx.report["chi_rho_sq_MHz_per_GHz5"] = a.chi_rho_sq;
    ctx.report["convention"] = a.angular ? "angular" : "plain";
    ctx.report["raman"] = a.raman;
    ctx.report["crossover_K"] = tc ? json(*tc) : json(nullptr);
    ctx.report["temperatures"] = temps.size();
}

// ------------------------------------------------------------- pump-probe

struct PumpArgs {
    std::optional<double> t1_ns;
    double ratio_up_down = 1.0;
    std::optional<double> gamma_up;
    std::optional<double> gamma_down;
    double omega = 2000.0;
    double gamma_opt = 1e3 / 1.7;
    double beta = 0.5;
    std::string taus;
    double noise = 0.0;
    std::optional<unsigned> seed;
    double window_ns = 10.0;
    std::optional<double> trace_tau;
    bool fit = true;
};

void cmd_pumpprobe(Context& ctx, const PumpArgs& a) {
    LevelSystem s;
    if (a.t1_ns) {
        if (a.gamma_up || a.gamma_down) throw InvalidParameter("give either --t1-ns or --gamma-up/--gamma-down");
        if (!(*a.t1_ns > 0.0) || !(a.ratio_up_down > 0.0))
            throw InvalidParameter("--t1-ns and --ratio-up-down must be positive");
        s = LevelSystem::with_t1(*a.t1_ns, a.ratio_up_down);
    } else {
        if (!a.gamma_up || !a.gamma_down) throw InvalidParameter("give --t1-ns or both --gamma-up and --gamma-down");
        s.gamma_up = *a.gamma_up;
        s.gamma_down = *a.gamma_down;
    }
    s.omega = a.omega;
    s.gamma_opt = a.gamma_opt;
    s.beta = a.beta;
    s.validate();
    if (a.noise < 0.0) throw InvalidParameter("--noise must be non-negative");
    const double t1 = s.t1_ns();
    std::vector<double> taus;
    if (!a.taus.empty()) {
        taus = parse_list(a.taus, "--taus");
    } else {
        if (!std::isfinite(t1)) throw InvalidParameter("--taus is required when both orbital rates vanish");
        for (int i = 0; i <= 20; ++i) taus.push_back(5.0 * t1 * i / 20.0);
    }
    for (double t : taus)
        if (!(t >= 0.0)) throw InvalidParameter("--taus must be non-negative");

    CurveOptions opts;
    opts.window_ns = a.window_ns;
    opts.noise = a.noise;
    opts.seed = a.seed.value_or(ctx.config.seed);
    const auto curve = thermalization_curve(s, taus, opts);
    std::ostringstream csv;
    csv << "tau_ns,ratio\n";
    for (const auto& p : curve) csv << fmt(p.tau_ns) << ',' << fmt(p.ratio) << '\n';
    write_file(ctx.dir / "curve.csv", csv.str());

    PulseSequence seq = opts.sequence;
    seq.delay_ns = a.trace_tau.value_or(std::isfinite(t1) ? t1 : taus.front());
    const FluorescenceTrace tr = simulate_sequence(s, seq);
    std::ostringstream trace;
    trace << "time_ns,signal\n";
    for (std::size_t i = 0; i < tr.time_ns.size(); ++i) trace << fmt(tr.time_ns[i]) << ',' << fmt(tr.signal[i]) << '\n';
    write_file(ctx.dir / "trace.csv", trace.str());

    ctx.report["system"] = {{"gamma_up_MHz", s.gamma_up},   {"gamma_down_MHz", s.gamma_down},
                            {"omega_MHz", s.omega},         {"gamma_opt_MHz", s.gamma_opt},
                            {"beta", s.beta},               {"t1_ns", number(t1)}};
    ctx.report["noise"] = a.noise;
    ctx.report["seed"] = opts.seed;
    ctx.report["trace_delay_ns"] = seq.delay_ns;
    if (a.fit) {
        Eigen::VectorXd x(curve.size()), y(curve.size());
        for (std::size_t i = 0; i < curve.size(); ++i) {
            x(i) = curve[i].tau_ns;
            y(i) = curve[i].ratio;
        }
        const double sigma = a.noise > 0.0 ? a.noise : 0.01;
        const RecoveryFit f = fit_recovery(x, y, Eigen::VectorXd::Constant(x.size(), sigma));
        ctx.report["fit"] = {{"t1_ns", f.t1}, {"t1_error_ns", f.t1_error}, {"sigma_assumed", sigma},
                             {"chi2", f.fit.chi2}, {"dof", f.fit.dof}};
    }
}

// ----------------------------------------------------------------- fit-t1

struct FitT1Args {
    std::string input;
    double sigma = 0.02;
};

void cmd_fit_t1(Context& ctx, const FitT1Args& a) {
    const Table t = read_table(a.input);
    const int ct = t.column("tau_ns"), cr = t.column("ratio"), cs = t.column("sigma", false);
    if (cs < 0 && !(a.sigma > 0.0)) throw InvalidParameter("--sigma must be positive");
    const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
    Eigen::VectorXd x(n), y(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = t.rows[i][ct];
        y(i) = t.rows[i][cr];
        s(i) = cs >= 0 ? t.rows[i][cs] : a.sigma;
        if (!(s(i) > 0.0)) throw InvalidParameter("sigma must be positive");
    }
    const RecoveryFit f = fit_recovery(x, y, s);
    std::ostringstream csv;
    csv << "tau_ns,ratio_fit\n";
    const double hi = x.maxCoeff();
    for (int i = 0; i <= 200; ++i) {
        const double tau = hi * i / 200.0;
        csv << fmt(tau) << ',' << fmt(1.0 - std::exp(-tau / f.t1)) << '\n';
    }
    write_file(ctx.dir / "fit_curve.csv", csv.str());
    ctx.report["points"] = n;
    ctx.report["fit"] = {{"t1_ns", f.t1}, {"t1_error_ns", f.t1_error}, {"chi2", f.fit.chi2}, {"dof", f.fit.dof}};
}

// --------------------------------------------------------------- fit-temp

struct FitTempArgs {
    std::string input;
    std::string models = "1,3,5,7";
    std::optional<double> t_max;
    std::optional<double> delta_ghz;
};

void cmd_fit_temp(Context& ctx, const FitTempArgs& a) {
    std::istringstream in(read_file(a.input));
    RateSeries data = RateSeries::read_csv(in);
    if (a.t_max) data = data.below(*a.t_max);
    data.validate(2);
    std::vector<int> exponents;
    for (double e : parse_list(a.models, "--models")) {
        if (e != std::floor(e)) throw InvalidParameter("--models takes integer exponents");
        exponents.push_back(static_cast<int>(e));
    }
    const ModelRanking rank = select_model(data, exponents);
    json fits = json::array();
    for (std::size_t i = 0; i < rank.fits.size(); ++i) {
        const PowerFit& f = rank.fits[i];
        fits.push_back({{"model", f.tag()},          {"exponent", f.exponent}, {"A_MHz", f.a},
                        {"A_error_MHz", f.a_error},  {"B", f.b},               {"B_error", f.b_error},
                        {"cov_AB", f.cov_ab},        {"chi2", f.chi2},         {"dof", f.dof},
                        {"chi2_margin", rank.margins[i]}, {"negative_offset", f.negative_offset}});
    }
    ctx.report["points"] = data.size();
    ctx.report["t_max_K"] = a.t_max ? json(*a.t_max) : json(nullptr);
    ctx.report["fits"] = fits;
    ctx.report["best_exponent"] = rank.winner().exponent;

    std::vector<int> order = exponents;
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    std::ostringstream csv;
    csv << "temperature_K";
    for (int e : order) csv << ",rate_T" << e << "_MHz";
    std::optional<ChannelFit> channel;
    if (a.delta_ghz) {
        channel = fit_two_channel(data, *a.delta_ghz);
        csv << ",rate_two_channel_MHz";
        const auto tc = raman_crossover(OrbitalSystem{*a.delta_ghz, {}}, channel->model);
        ctx.report["two_channel"] = {{"delta_GHz", *a.delta_ghz},
                                     {"single_scale_MHz", channel->single_scale},
                                     {"raman_scale_MHz_per_K3", channel->raman_scale},
                                     {"chi_rho_MHz_per_GHz3", channel->model.chi_rho},
                                     {"chi_rho_sq_MHz_per_GHz5", channel->model.chi_rho_sq},
                                     {"chi2", channel->chi2},
                                     {"dof", channel->dof},
                                     {"crossover_K", tc ? json(*tc) : json(nullptr)}};
    }
    csv << '\n';
    const double lo = data.temperature.front(), hi = data.temperature.back();
    for (int i = 0; i <= 200; ++i) {
        const double t = lo + (hi - lo) * i / 200.0;
        csv << fmt(t);
        for (int e : order) {
            const auto it = std::find_if(rank.fits.begin(), rank.fits.end(), [e](const PowerFit& f) { return f.exponent == e; });
            csv << ',' << fmt(it->evaluate(t));
        }
        if (channel) csv << ',' << fmt(total_relaxation(OrbitalSystem{*a.delta_ghz, {}}, channel->model, t).total);
        csv << '\n';
    }
    write_file(ctx.dir / "fit_curves.csv", csv.str());
}

// --------------------------------------------------------------- fit-geom

struct FitGeomArgs {
    std::string manifest;
};

struct ManifestEntry {
    std::string cell;
    ContourRole role;
    fs::path file;
};

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::istringstream in(read_file(path));
    const fs::path base = fs::path(path).parent_path();
    std::vector<ManifestEntry> out;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        const std::string body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        const auto f = split(body, ',');
        if (!header) {
            if (f != std::vector<std::string>{"cell", "role", "file"})
                throw InvalidParameter(path + ": manifest header must be cell,role,file");
            header = true;
            continue;
        }
        if (f.size() != 3) throw InvalidParameter(path + ": manifest rows need cell,role,file");
        const fs::path p(f[2]);
        out.push_back({f[0], parse_contour_role(f[1]), p.is_absolute() ? p : base / p});
    }
    if (out.empty()) throw InvalidParameter(path + ": manifest lists no contours");
    return out;
}

PointSet2D read_contour(const fs::path& path) {
    const Table t = read_table(path.string());
    const int cx = t.column("x_nm"), cy = t.column("y_nm");
    PointSet2D p(2, static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) p.col(static_cast<Eigen::Index>(i)) << t.rows[i][cx], t.rows[i][cy];
    return p;
}

void cmd_fit_geom(Context& ctx, const FitGeomArgs& a) {
    const auto entries = read_manifest(a.manifest);
    std::vector<std::string> order;
    std::map<std::string, std::vector<Contour>> cells;
    for (const auto& e : entries) {
        if (!cells.count(e.cell)) order.push_back(e.cell);
        cells[e.cell].push_back({e.role, read_contour(e.file)});
    }
    std::vector<CellMeasurement> measured;
    json failures = json::array();
    int dropped = 0;
    std::ostringstream per_cell;
    per_cell << "cell,w_nm,h_nm,t_nm,a_nm,d_nm,r_mean_nm,corners_fitted\n";
    for (const auto& id : order) {
        try {
            const CellMeasurement m = measure_cell(cells[id]);
            double rsum = 0.0;
            for (double r : m.r) rsum += r;
            per_cell << id << ',' << fmt(m.w) << ',' << fmt(m.h) << ',' << fmt(m.t) << ',' << fmt(m.a) << ','
                     << fmt(m.d) << ',' << fmt(m.r.empty() ? std::nan("") : rsum / static_cast<double>(m.r.size()))
                     << ',' << m.r.size() << '\n';
            dropped += m.dropped_corners;
            measured.push_back(m);
        } catch (const FitError& e) {
            failures.push_back({{"cell", id}, {"error", e.what()}});
        }
    }
    if (measured.empty()) throw FitError("no cell could be measured");
    const auto summary = summarize_cells(measured);
    std::ostringstream table;
    table << "parameter,average_nm,sd_nm\n";
    json params = json::array();
    for (const auto& s : summary) {
        table << s.name << ',' << fmt(s.mean) << ',' << fmt(s.sd) << '\n';
        json row = {{"parameter", s.name}, {"average_nm", s.mean}, {"sd_nm", s.sd}, {"count", s.count}};
        if (s.count >= 10) {
            std::vector<double> values;
            for (const auto& m : measured) {
                if (s.name == "r") values.insert(values.end(), m.r.begin(), m.r.end());
                else {
                    const double v = s.name == "w" ? m.w : s.name == "h" ? m.h : s.name == "t" ? m.t
                                   : s.name == "a" ? m.a : m.d;
                    if (!std::isnan(v)) values.push_back(v);
                }
            }
            // Rice rule for the bin count.
            const int bins = std::max(3, static_cast<int>(std::ceil(2.0 * std::cbrt(values.size()))));
            const HistogramStats h = gaussian_histogram_stats(values, bins);
            row["histogram_bins"] = bins;
            if (h.gaussian) {
                row["gaussian_mean_nm"] = h.gaussian->params(1);
                row["gaussian_sd_nm"] = h.gaussian->params(2);
            } else {
                row["gaussian_mean_nm"] = nullptr;
                row["gaussian_sd_nm"] = nullptr;
            }
        }
        params.push_back(row);
    }
    write_file(ctx.dir / "geometry_table.csv", table.str());
    write_file(ctx.dir / "cells.csv", per_cell.str());
    ctx.report["cells"] = order.size();
    ctx.report["cells_measured"] = measured.size();
    ctx.report["cell_failures"] = failures;
    ctx.report["corners_dropped"] = dropped;
    ctx.report["parameters"] = params;
}

// ------------------------------------------------------------- synth-geom

struct SynthArgs {
    int cells = 73;
    double noise_nm = 0.5;
    double pitch_nm = 0.5;
    double spread_scale = 1.0;
};

void cmd_synth_geom(Context& ctx, const SynthArgs& a) {
    if (ctx.config.structure != "pnc") throw InvalidParameter("synth-geom needs structure = pnc");
    if (!(a.spread_scale >= 0.0)) throw InvalidParameter("--spread-scale must be non-negative");
    UnitCellParams spread = fabrication_spread();
    for (double* v : {&spread.w, &spread.h, &spread.a, &spread.t, &spread.r, &spread.d}) *v *= a.spread_scale;
    const auto ensemble = draw_cell_ensemble(a.cells, ctx.config.cell, spread, ctx.config.seed);
    ContourSampling sampling;
    sampling.noise_nm = a.noise_nm;
    sampling.pitch_nm = a.pitch_nm;
    std::mt19937_64 rng(ctx.config.seed + 1);
    const fs::path dir = ctx.dir / "contours";
    fs::create_directories(dir);
    std::ostringstream manifest, truth;
    manifest << "cell,role,file\n";
    truth << "cell,w_nm,h_nm,t_nm,r_nm,a_nm,d_nm\n";
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const auto& p = ensemble[i];
        char id[16];
        std::snprintf(id, sizeof id, "c%03zu", i);
        truth << id << ',' << fmt(p.w) << ',' << fmt(p.h) << ',' << fmt(p.t) << ',' << fmt(p.r) << ',' << fmt(p.a)
              << ',' << fmt(p.d) << '\n';
        const auto contours = synthetic_cell_contours(p, sampling, rng);
        for (std::size_t j = 0; j < contours.size(); ++j) {
            const std::string name = std::string(id) + "_" + std::to_string(j) + "_" + to_string(contours[j].role) + ".csv";
            std::ostringstream pts;
            pts << "x_nm,y_nm\n";
            for (Eigen::Index k = 0; k < contours[j].points.cols(); ++k)
                pts << fmt(contours[j].points(0, k)) << ',' << fmt(contours[j].points(1, k)) << '\n';
            write_file(dir / name, pts.str());
            manifest << id << ',' << to_string(contours[j].role) << ",contours/" << name << '\n';
        }
    }
    write_file(ctx.dir / "manifest.csv", manifest.str());
    write_file(ctx.dir / "truth.csv", truth.str());
    ctx.report["cells"] = ensemble.size();
    ctx.report["noise_nm"] = a.noise_nm;
    ctx.report["pitch_nm"] = a.pitch_nm;
    ctx.report["spread_scale"] = a.spread_scale;
}

fs::path output_root(const RunConfig& c) {
    if (!c.output_dir.empty()) return c.output_dir;
    if (const char* env = std::getenv("PNC_OUTPUT_DIR"); env && *env) return env;
    return "pnc_out";
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Phononic crystal band structures, relaxation models and fits"};
    app.name(args.empty() ? "pnc" : fs::path(args[0]).filename().string());
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path, run_id;
    int threads = 0;
    bool print_config = false;
    std::map<std::string, std::string> overrides;
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--run-id", run_id, "artifact namespace (default: hash of the inputs)");
    app.add_flag("--print-config", print_config, "print the effective config and exit");
    for (const auto& key : config_keys()) {
        app.add_option_function<std::string>(
               "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "overrides config key " + key)
            ->group("Config overrides");
    }

    std::vector<CLI::App*> subs;
    auto add = [&](const std::string& name, const std::string& help) {
        CLI::App* s = app.add_subcommand(name, help);
        subs.push_back(s);
        return s;
    };
    add("bands", "band diagram with mirror parities -> bands.csv");
    add("dos", "broadened density of states -> dos.csv");
    add("gap", "complete gaps and the reference comparison -> gaps.csv");
    add("sweep", "gap center and width versus one parameter -> sweep.csv");
    add("bundle", "bands, DOS, gaps and a plot script");

    RatesArgs ra;
    CLI::App* rates = add("rates", "phonon relaxation rates versus temperature -> rates.csv");
    rates->add_option("--delta-ghz", ra.delta_ghz, "ground-state splitting, GHz");
    rates->add_option("--temp-k", ra.temps, "temperatures, K")->delimiter(',');
    rates->add_option("--temp-range", ra.temp_range, "lo:hi:step in K");
    rates->add_option("--chi-rho", ra.chi_rho, "single-phonon coupling, MHz/GHz^3");
    rates->add_option("--chi-rho-sq", ra.chi_rho_sq, "Raman coupling, MHz/GHz^5");
    rates->add_flag("--angular", ra.angular, "report rates multiplied by 2 pi");
    rates->add_option("--raman", ra.raman, "closed or numeric");

    PumpArgs pa;
    double t1 = 0.0, gup = 0.0, gdown = 0.0, ttau = 0.0;
    unsigned pseed = 0;
    CLI::App* pump = add("pumpprobe", "simulated pump-probe recovery curve -> curve.csv, trace.csv");
    auto* t1_opt = pump->add_option("--t1-ns", t1, "orbital relaxation time, ns");
    pump->add_option("--ratio-up-down", pa.ratio_up_down, "gamma_up / gamma_down when --t1-ns is given");
    auto* gu_opt = pump->add_option("--gamma-up", gup, "|1> -> |2> rate, MHz");
    auto* gd_opt = pump->add_option("--gamma-down", gdown, "|2> -> |1> rate, MHz");
    pump->add_option("--omega", pa.omega, "optical pumping rate, MHz");
    pump->add_option("--gamma-opt", pa.gamma_opt, "excited-state decay rate, MHz");
    pump->add_option("--beta", pa.beta, "branching into |2>");
    pump->add_option("--taus", pa.taus, "comma-separated delays, ns (default 21 over 0..5 T1)");
    pump->add_option("--noise", pa.noise, "absolute Gaussian noise on each ratio");
    auto* seed_opt = pump->add_option("--seed", pseed, "noise seed (default: config seed)");
    pump->add_option("--window-ns", pa.window_ns, "leading-edge window, ns");
    auto* tt_opt = pump->add_option("--trace-tau", ttau, "delay of the dumped trace, ns (default T1)");
    bool no_fit = false;
    pump->add_flag("--no-fit", no_fit, "skip the T1 fit");

    FitT1Args fa;
    CLI::App* fit_t1 = add("fit-t1", "fit 1 - exp(-tau/T1) to tau_ns,ratio[,sigma]");
    fit_t1->add_option("--input", fa.input, "CSV with tau_ns,ratio and optional sigma")->required();
    fit_t1->add_option("--sigma", fa.sigma, "error bar when the CSV has no sigma column");

    FitTempArgs ta;
    double tmax = 0.0, tdelta = 0.0;
    CLI::App* fit_temp = add("fit-temp", "A + B T^p fits and model ranking");
    fit_temp->add_option("--input", ta.input, "CSV temperature_K,rate_MHz,sigma_MHz")->required();
    fit_temp->add_option("--models", ta.models, "exponents to compare");
    auto* tmax_opt = fit_temp->add_option("--t-max", tmax, "only use points at or below this temperature, K");
    auto* tdelta_opt = fit_temp->add_option("--delta-ghz", tdelta, "also fit the two-channel model for this splitting");

    FitGeomArgs ga;
    CLI::App* fit_geom = add("fit-geom", "cell dimensions from contour point sets");
    fit_geom->add_option("--manifest", ga.manifest, "CSV cell,role,file")->required();

    SynthArgs sa;
    CLI::App* synth = add("synth-geom", "synthetic contour sets for fit-geom");
    synth->add_option("--cells", sa.cells, "number of cells");
    synth->add_option("--noise-nm", sa.noise_nm, "edge noise, nm");
    synth->add_option("--pitch-nm", sa.pitch_nm, "point spacing, nm");
    synth->add_option("--spread-scale", sa.spread_scale, "multiplier on the fabrication spread");

    try {
        std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
        std::reverse(rest.begin(), rest.end());
        app.parse(rest);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return kSuccess;
        err << "error: " << e.what() << '\n';
        return kInvalidConfig;
    }

    CLI::App* sub = nullptr;
    for (CLI::App* s : subs)
        if (s->parsed()) sub = s;

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        cfg.validate();
        if (print_config) {
            out << serialize_config(cfg);
            return kSuccess;
        }
        if (!sub) throw InvalidParameter("a subcommand is required (see --help)");
        default_threads() = threads;

        if (*t1_opt) pa.t1_ns = t1;
        if (*gu_opt) pa.gamma_up = gup;
        if (*gd_opt) pa.gamma_down = gdown;
        if (*seed_opt) pa.seed = pseed;
        if (*tt_opt) pa.trace_tau = ttau;
        pa.fit = !no_fit;
        if (*tmax_opt) ta.t_max = tmax;
        if (*tdelta_opt) ta.delta_ghz = tdelta;

        if (run_id.empty()) {
            std::string key = sub->get_name() + "\n" + serialize_config(cfg) + sub->config_to_str(false, false);
            for (const std::string* input : {&fa.input, &ta.input, &ga.manifest})
                if (!input->empty()) key += read_file(*input);
            run_id = "run-" + hex(fnv1a(key));
        }
        if (run_id.find_first_of("/\\") != std::string::npos || run_id == "." || run_id == "..")
            throw InvalidParameter("--run-id must be a plain name");

        Context ctx{cfg, output_root(cfg) / run_id / sub->get_name(), run_id, sub->get_name(), json::object(), err};
        try {
            fs::create_directories(ctx.dir);
        } catch (const fs::filesystem_error& e) {
            throw OutputError(e.what());
        }
        ctx.report["run_id"] = run_id;
        ctx.report["subcommand"] = ctx.subcommand;
        ctx.report["config"] = config_json(cfg);

        const std::string name = sub->get_name();
        if (name == "bands") cmd_bands(ctx);
        else if (name == "dos") cmd_dos(ctx);
        else if (name == "gap") cmd_gap(ctx);
        else if (name == "sweep") cmd_sweep(ctx);
        else if (name == "bundle") cmd_bundle(ctx);
        else if (name == "rates") cmd_rates(ctx, ra);
        else if (name == "pumpprobe") cmd_pumpprobe(ctx, pa);
        else if (name == "fit-t1") cmd_fit_t1(ctx, fa);
        else if (name == "fit-temp") cmd_fit_temp(ctx, ta);
        else if (name == "fit-geom") cmd_fit_geom(ctx, ga);
        else if (name == "synth-geom") cmd_synth_geom(ctx, sa);

        write_file(ctx.dir / "config.txt", serialize_config(cfg));
        write_file(ctx.dir / "report.json", ctx.report.dump(2) + "\n");
        out << ctx.dir.string() << '\n';
        return kSuccess;
    } catch (const InvalidParameter& e) {
        err << "invalid configuration: " << e.what() << '\n';
        return kInvalidConfig;
    } catch (const MeshingError& e) {
        err << "invalid configuration (meshing): " << e.what() << '\n';
        return kInvalidConfig;
    } catch (const OutputError& e) {
        err << "invalid configuration (output directory): " << e.what() << '\n';
        return kInvalidConfig;
    } catch (const CoverageError& e) {
        err << "numerical failure (band coverage): " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const FitError& e) {
        err << "numerical failure (fit): " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return kNumericalFailure;
    }
}

} // namespace pnc::cli
