#include "pnc/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "pnc/errors.hpp"
#include "pnc/parallel.hpp"

namespace pnc {

std::vector<Gap> find_complete_gaps(const BandStructure& bands, double f_max) {
    const int nk = bands.num_k();
    const int nb = bands.num_bands();
    if (nk == 0 || nb == 0) throw CoverageError("band structure is empty");
    for (int ik = 0; ik < nk; ++ik) {
        const double top = bands.frequencies.row(ik).maxCoeff();
        if (!(top > f_max)) {
            std::ostringstream msg;
            msg << "highest band reaches only " << top << " GHz at k = " << bands.k[ik]
                << ", below f_max = " << f_max << " GHz; request more bands";
            throw CoverageError(msg.str());
        }
    }

    // Bands as occupied intervals, merged after sorting by lower edge. Sorting
    // makes the result independent of band order and k-sample order.
    std::vector<std::pair<double, double>> ranges(nb);
    for (int b = 0; b < nb; ++b) {
        ranges[b] = {bands.frequencies.col(b).minCoeff(), bands.frequencies.col(b).maxCoeff()};
    }
    std::sort(ranges.begin(), ranges.end());

    std::vector<Gap> gaps;
    double covered = ranges.front().second;
    for (int b = 1; b < nb; ++b) {
        const auto [lo, hi] = ranges[b];
        if (lo > covered && covered < f_max && lo <= f_max) gaps.push_back({covered, lo});
        covered = std::max(covered, hi);
    }
    return gaps;
}

std::optional<Gap> widest_gap(const std::vector<Gap>& gaps, double f_min) {
    std::optional<Gap> best;
    for (const Gap& g : gaps) {
        if (g.f_lo < f_min) continue;
        if (!best || g.width() > best->width()) best = g;
    }
    return best;
}

namespace {

Eigen::VectorXd trapezoid_weights(const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    if (n == 1) {
        w(0) = 1.0;
        return w;
    }
    for (int i = 0; i + 1 < n; ++i) {
        const double h = 0.5 * (k[i + 1] - k[i]);
        w(i) += h;
        w(i + 1) += h;
    }
    const double total = w.sum();
    if (!(total > 0.0)) throw InvalidParameter("k path has zero length");
    return w / total;
}

} // namespace

DosCurve compute_dos(const BandStructure& bands, double broadening, const Eigen::VectorXd& grid,
                     const DosOptions& options) {
    if (!(broadening > 0.0)) throw InvalidParameter("DOS broadening must be positive");
    if (grid.size() == 0) throw InvalidParameter("DOS frequency grid is empty");

    DosCurve out;
    const int nk = bands.num_k();
    const int nb = bands.num_bands();
    for (int b = 0; b < nb; ++b) {
        for (int ik = 0; ik + 1 < nk; ++ik) {
            const double step = std::abs(bands.frequencies(ik + 1, b) - bands.frequencies(ik, b));
            if (step >= 3.0 * broadening) {
                std::ostringstream msg;
                msg << "k path under-sampled: band " << b << " moves " << step << " GHz between k = "
                    << bands.k[ik] << " and " << bands.k[ik + 1] << " (broadening " << broadening
                    << " GHz)";
                if (options.strict) throw InvalidParameter(msg.str());
                out.warnings.push_back(msg.str());
            }
        }
    }

    const Eigen::VectorXd weight = trapezoid_weights(bands.k);
    const double norm = 1.0 / (broadening * std::sqrt(2.0 * M_PI));
    out.frequency = grid;
    out.dos = Eigen::VectorXd::Zero(grid.size());
    for (int ik = 0; ik < nk; ++ik) {
        for (int b = 0; b < nb; ++b) {
            const double f0 = bands.frequencies(ik, b);
            out.dos += (weight(ik) * norm *
                        (-0.5 * ((grid.array() - f0) / broadening).square()).exp())
                           .matrix();
        }
    }
    return out;
}

Eigen::VectorXd frequency_grid(double lo, double hi, int count) {
    if (count < 2 || !(hi > lo)) throw InvalidParameter("frequency grid needs hi > lo and >= 2 points");
    return Eigen::VectorXd::LinSpaced(count, lo, hi);
}

const char* to_string(SweepParameter p) {
    switch (p) {
    case SweepParameter::W: return "w";
    case SweepParameter::H: return "h";
    case SweepParameter::T: return "t";
    case SweepParameter::R: return "r";
    case SweepParameter::A: return "a";
    case SweepParameter::D: return "d";
    }
    return "?";
}

SweepParameter parse_sweep_parameter(const std::string& name) {
    for (SweepParameter p : {SweepParameter::W, SweepParameter::H, SweepParameter::T,
                             SweepParameter::R, SweepParameter::A, SweepParameter::D}) {
        if (name == to_string(p)) return p;
    }
    throw InvalidParameter("unknown sweep parameter '" + name + "' (expected w, h, t, r, a or d)");
}

double& parameter_ref(UnitCellParams& params, SweepParameter p) {
    switch (p) {
    case SweepParameter::W: return params.w;
    case SweepParameter::H: return params.h;
    case SweepParameter::T: return params.t;
    case SweepParameter::R: return params.r;
    case SweepParameter::A: return params.a;
    case SweepParameter::D: return params.d;
    }
    throw InvalidParameter("unknown sweep parameter");
}

GapResult analyse_cell(const UnitCellParams& params, const GapSearch& search) {
    params.validate();
    const Mesh mesh = build_unit_cell_mesh(params, search.resolution);
    BandOptions opts = search.bands;
    opts.classify = false;
    GapResult out;
    out.bands = band_diagram(mesh, search.material, search.k_path, search.n_modes, opts);
    out.gaps = find_complete_gaps(out.bands, search.f_max);
    out.main = widest_gap(out.gaps, search.f_min);
    return out;
}

std::vector<SweepPoint> parameter_sweep(const UnitCellParams& base, SweepParameter param,
                                        const std::vector<double>& values, const GapSearch& search,
                                        int threads) {
    if (values.empty()) throw InvalidParameter("sweep needs at least one value");
    std::vector<UnitCellParams> cells(values.size(), base);
    for (std::size_t i = 0; i < values.size(); ++i) {
        parameter_ref(cells[i], param) = values[i];
        cells[i].validate();
    }

    const int outer = std::min(resolve_threads(threads), static_cast<int>(values.size()));
    GapSearch inner = search;
    if (outer > 1) inner.bands.threads = 1;

    std::vector<SweepPoint> points(values.size());
    parallel_for(static_cast<int>(values.size()), outer, [&](int i) {
        const GapResult r = analyse_cell(cells[i], inner);
        points[i].value = values[i];
        if (r.main) {
            points[i].center = r.main->center();
            points[i].width = r.main->width();
        } else {
            points[i].center = std::numeric_limits<double>::quiet_NaN();
            points[i].width = 0.0;
        }
    });
    return points;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
    out << "param_value_nm,center_GHz,width_GHz\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const SweepPoint& p : points) out << p.value << ',' << p.center << ',' << p.width << '\n';
}

} // namespace pnc
