#pragma once

#include <random>
#include <string>
#include <vector>

#include "pnc/fitkit.hpp"
#include "pnc/geometry.hpp"

namespace pnc {

/// What a measured contour traces. Top-view roles follow the cell outline;
/// side roles are the top and bottom slab surfaces of a cross-section.
enum class ContourRole { Block, Corner, TetherUpper, TetherLower, SideTop, SideBottom };

const char* to_string(ContourRole role);
/// Parses "block", "corner", "tether-upper", "tether-lower", "side-top" or
/// "side-bottom". Throws InvalidParameter.
ContourRole parse_contour_role(const std::string& name);

struct Contour {
    ContourRole role = ContourRole::Block;
    PointSet2D points; ///< nm
};

struct ContourSampling {
    double pitch_nm = 0.5; ///< point spacing along each contour
    double noise_nm = 0.5; ///< isotropic Gaussian edge noise
};

/// Contours of one cell in its own frame (x in [0, a], block centred at
/// x = a/2): two block arcs, four fillets, upper and lower edges of the
/// tethers at x = 0 and x = a and two side
/// surfaces at z = +-d/2. Blocks and fillets lie on the cell outline; tether
/// edges follow the waist model of `fit_tether_width` through the fillet
/// ends, since the model cannot represent a straight section.
std::vector<Contour> synthetic_cell_contours(const UnitCellParams& params, const ContourSampling& sampling,
                                             std::mt19937_64& rng);

/// Dimensions recovered from one cell's contours. Entries are NaN (or empty
/// for `r`) when the contours needed for them are absent.
struct CellMeasurement {
    double w = 0.0; ///< 2 x ellipse semi-axis along x
    double h = 0.0; ///< 2 x ellipse semi-axis along y
    double t = 0.0; ///< mean tether width
    double a = 0.0; ///< distance between the first two tether waists
    double d = 0.0; ///< mean top surface minus mean bottom surface
    std::vector<double> r; ///< one radius per fitted fillet
    int dropped_corners = 0; ///< fillets whose circle fit failed
};

/// Block contours are pooled into one ellipse fit; tether edges pair up in
/// order (n-th upper with n-th lower). Corners whose circle fit fails are
/// counted and skipped; other fits throw FitError.
CellMeasurement measure_cell(const std::vector<Contour>& contours);

struct ParameterSummary {
    std::string name; ///< w, h, t, r, a or d
    double mean = 0.0;
    double sd = 0.0;
    int count = 0;
};

/// Sample mean and SD of each parameter over the cells, in the order
/// w, h, t, r, a, d. Parameters without data are omitted.
std::vector<ParameterSummary> summarize_cells(const std::vector<CellMeasurement>& cells);

/// Fabrication spread of the measured devices (SD per parameter, nm).
UnitCellParams fabrication_spread();

/// `count` cells with each parameter drawn independently from
/// N(mean, spread^2). Draws that fail validation or give r < 2 nm are
/// redrawn.
std::vector<UnitCellParams> draw_cell_ensemble(int count, const UnitCellParams& mean,
                                               const UnitCellParams& spread, unsigned seed);

} // namespace pnc
