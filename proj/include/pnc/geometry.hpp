#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace pnc {

/// Block-tether unit cell. All lengths in nm.
///
/// The cell spans x in [0, a] with the elliptical block centred at x = a/2.
/// `w` is the block extent along the beam axis (x), `h` the lateral extent
/// (y), `t` the tether width (y) and `d` the slab thickness (z). `r` is the
/// radius of the fillet joining each tether edge to the ellipse; r = 0 means
/// a sharp junction.
struct UnitCellParams {
    double w = 95.7;
    double h = 89.9;
    double a = 129.6;
    double t = 22.1;
    double r = 16.9;
    double d = 70.3;

    /// Throws InvalidParameter when the cell cannot be built.
    void validate() const;

    friend bool operator==(const UnitCellParams&, const UnitCellParams&) = default;
};

/// Cubic elastic solid. Constants in GPa, density in kg/m^3.
/// `orientation` maps crystal axes onto device axes (x beam, y lateral, z thickness).
struct Material {
    double c11 = 1079.0;
    double c12 = 124.0;
    double c44 = 578.0;
    double density = 3515.0;
    Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();

    static Material diamond() { return {}; }

    void validate() const;

    /// 6x6 Voigt stiffness in Pa, rotated into device axes.
    /// Voigt order: xx, yy, zz, yz, xz, xy (engineering shear strains).
    Eigen::Matrix<double, 6, 6> stiffness() const;

    /// Young's modulus along device axis `axis` (0 = x) from the compliance tensor, Pa.
    double youngs_modulus(int axis) const;
};

struct Resolution {
    int nx = 16;
    int ny = 12;
    int nz = 6;

    friend bool operator==(const Resolution&, const Resolution&) = default;
};

enum NodeTag : std::uint8_t {
    kInterior = 0,
    kPeriodicMin = 1 << 0, ///< x = 0 face
    kPeriodicMax = 1 << 1, ///< x = a face
    kFreeSurface = 1 << 2,
};

/// 8-node hexahedral mesh of one lattice period. Coordinates in metres.
///
/// The cross-section is centred on y = 0 and z = 0. `periodic_min[i]` and
/// `periodic_max[i]` are geometrically matched nodes on the two periodic faces.
struct Mesh {
    Eigen::Matrix3Xd nodes;
    std::vector<std::array<int, 8>> elements;
    std::vector<std::uint8_t> tags;
    std::vector<int> periodic_min;
    std::vector<int> periodic_max;
    double period = 0.0;

    int num_nodes() const { return static_cast<int>(nodes.cols()); }
    int num_elements() const { return static_cast<int>(elements.size()); }
};

/// Planar outline of the block-tether cell: half-width |y| <= Y(x) for x in [0, a].
class CellOutline {
public:
    explicit CellOutline(const UnitCellParams& params);

    const UnitCellParams& params() const { return params_; }

    /// Half width Y(x) in nm, x in [0, a].
    double half_width(double x) const;

    /// Fillet circle of the left junction (upper half): centre and tangent
    /// points. Absent when r = 0.
    struct Fillet {
        Eigen::Vector2d centre;
        Eigen::Vector2d tether_tangent;  ///< on y = t/2
        Eigen::Vector2d ellipse_tangent; ///< on the block
    };
    const std::optional<Fillet>& fillet() const { return fillet_; }

    /// x where the straight tether edge ends (left half).
    double tether_end() const { return tether_end_; }
    /// x where the profile joins the ellipse (left half).
    double ellipse_start() const { return ellipse_start_; }

    /// Breakpoints of the left half profile: 0, tether end, ellipse start, a/2.
    std::array<double, 4> breakpoints() const;

private:
    double left_half_width(double x) const;

    UnitCellParams params_;
    std::optional<Fillet> fillet_;
    double tether_end_ = 0.0;
    double ellipse_start_ = 0.0;
};

Mesh build_unit_cell_mesh(const UnitCellParams& params, const Resolution& res);

/// Rectangular beam segment; lengths in nm.
Mesh build_nanobeam_mesh(double width, double thickness, double period, const Resolution& res);

/// Volume by 2x2x2 Gauss quadrature of the element Jacobians (m^3).
double mesh_volume(const Mesh& mesh);

/// Throws MeshingError if any element Jacobian is non-positive at a quadrature
/// point, or if the periodic faces do not match.
void check_mesh(const Mesh& mesh);

/// Node permutation implementing the reflection y -> -y (axis = 1) or
/// z -> -z (axis = 2). Empty when the node set is not mirror symmetric.
std::optional<std::vector<int>> mirror_map(const Mesh& mesh, int axis, double rel_tol = 1e-9);

} // namespace pnc
