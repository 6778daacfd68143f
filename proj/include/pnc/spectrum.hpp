#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnc/elastics.hpp"
#include "pnc/geometry.hpp"

namespace pnc {

/// Frequency interval free of modes, GHz.
struct Gap {
    double f_lo = 0.0;
    double f_hi = 0.0;

    double center() const { return 0.5 * (f_lo + f_hi); }
    double width() const { return f_hi - f_lo; }
};

/// Complete gaps below `f_max`: maximal intervals between the lowest sampled
/// frequency and `f_max` that contain no band frequency at any sampled k.
/// Each band is taken to occupy [min_k f, max_k f]. Gaps whose upper edge is
/// above `f_max` are not reported. Sorted by f_lo.
///
/// Throws CoverageError unless the highest band exceeds `f_max` at every k.
std::vector<Gap> find_complete_gaps(const BandStructure& bands, double f_max);

/// Widest gap with f_lo >= `f_min`, if any.
std::optional<Gap> widest_gap(const std::vector<Gap>& gaps, double f_min = 0.0);

struct DosCurve {
    Eigen::VectorXd frequency; ///< GHz
    Eigen::VectorXd dos;       ///< states per GHz per unit cell
    std::vector<std::string> warnings;
};

struct DosOptions {
    /// Under-sampled k paths throw when set, otherwise add a warning.
    bool strict = true;
};

/// Gaussian-broadened density of states. Samples carry trapezoid weights
/// along the k path (normalized to 1), so every band integrates to one state.
/// The path is under-sampled when adjacent same-band frequencies differ by
/// 3 x `broadening` or more.
DosCurve compute_dos(const BandStructure& bands, double broadening, const Eigen::VectorXd& grid,
                     const DosOptions& options = {});

/// Uniform grid of `count` points over [lo, hi].
Eigen::VectorXd frequency_grid(double lo, double hi, int count);

enum class SweepParameter { W, H, T, R, A, D };

const char* to_string(SweepParameter p);

/// Parses "w", "h", "t", "r", "a" or "d". Throws InvalidParameter.
SweepParameter parse_sweep_parameter(const std::string& name);

double& parameter_ref(UnitCellParams& params, SweepParameter p);

struct GapSearch {
    Resolution resolution;
    Material material;
    std::vector<double> k_path = uniform_k_path(20);
    int n_modes = 40;
    double f_max = 100.0;
    double f_min = 30.0; ///< gaps starting below this are ignored
    BandOptions bands;
};

struct GapResult {
    BandStructure bands;
    std::vector<Gap> gaps;
    std::optional<Gap> main; ///< widest gap above f_min
};

/// Mesh, bands and gaps for one cell. Symmetry labels are not computed.
GapResult analyse_cell(const UnitCellParams& params, const GapSearch& search);

struct SweepPoint {
    double value = 0.0;  ///< nm
    double center = 0.0; ///< GHz, NaN when the gap is closed
    double width = 0.0;  ///< GHz, 0 when the gap is closed
};

/// Gap center and width of the widest gap as one parameter is varied. Points
/// run in parallel (`threads`) and are returned in input order.
std::vector<SweepPoint> parameter_sweep(const UnitCellParams& base, SweepParameter param,
                                        const std::vector<double>& values, const GapSearch& search,
                                        int threads = 0);

/// CSV with header param_value_nm,center_GHz,width_GHz.
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);

} // namespace pnc
