#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pnc/eigensolver.hpp"
#include "pnc/geometry.hpp"

namespace pnc {

using SparseReal = Eigen::SparseMatrix<double>;
using SparseComplex = Eigen::SparseMatrix<std::complex<double>>;

/// Global operators with 3 DOF per node, dof = 3 * node + component.
struct Operators {
    SparseReal stiffness;
    SparseReal mass;
};

using ElementMatrix = Eigen::Matrix<double, 24, 24>;

/// Element stiffness of a trilinear hexahedron, `order`^3 Gauss points.
/// `coords` holds the 8 corner positions as columns. Throws on a
/// non-positive Jacobian.
ElementMatrix element_stiffness(const Eigen::Matrix<double, 3, 8>& coords,
                                const Eigen::Matrix<double, 6, 6>& elasticity, int order = 2);

ElementMatrix element_mass(const Eigen::Matrix<double, 3, 8>& coords, double density,
                           int order = 2);

Operators assemble(const Mesh& mesh, const Material& material);

/// Rigid translation along `axis` as a full DOF vector.
Eigen::VectorXd translation_mode(const Mesh& mesh, int axis);

/// Eliminates the x = a face: u(slave) = exp(i pi k) u(master), where k is
/// the reduced wavevector k_x a / pi.
class BlochMap {
public:
    explicit BlochMap(const Mesh& mesh);

    int full_size() const { return 3 * static_cast<int>(reduced_node_.size()); }
    int reduced_size() const { return 3 * num_reduced_nodes_; }

    /// T^H A T for the Bloch transformation T at reduced wavevector k.
    SparseComplex reduce(const SparseReal& full, double k) const;

    /// Full-mesh field T v from reduced coordinates.
    Eigen::VectorXcd expand(const Eigen::VectorXcd& reduced, double k) const;

private:
    std::vector<int> reduced_node_; ///< full node -> reduced node
    std::vector<bool> is_slave_;
    int num_reduced_nodes_ = 0;
};

struct BlochProblem {
    double k = 0.0;
    SparseComplex stiffness;
    SparseComplex mass;
};

BlochProblem make_bloch_problem(const Operators& ops, const BlochMap& map, double k);

/// ||A - A^H||_F / ||A||_F.
double hermitian_defect(const SparseComplex& a);

struct SolveOptions {
    double target_ghz = 0.0; ///< centre of the shift-invert window
    EigenOptions eigen;
};

struct ModeSet {
    double k = 0.0;
    Eigen::VectorXd frequencies_ghz;  ///< ascending
    Eigen::MatrixXcd shapes;          ///< reduced coordinates, mass-orthonormal
    Eigen::VectorXd eigenvalues;      ///< omega^2 in rad^2/s^2
};

/// Lowest `n_modes` eigenpairs of the Bloch pencil. Frequencies in GHz are
/// sqrt(lambda)/(2 pi 1e9); eigenvalues slightly below zero (above
/// -(2 pi 1e6)^2) are clamped to 0.
ModeSet solve_bands(const BlochProblem& problem, int n_modes, const SolveOptions& options = {});

enum class Parity { Even, Odd, Mixed };

const char* to_string(Parity p);

struct ParityPair {
    Parity y = Parity::Mixed;
    Parity z = Parity::Mixed;
    friend bool operator==(const ParityPair&, const ParityPair&) = default;
};

/// Mirror-symmetry classification of displacement fields about the y and z
/// mid-planes. A field u is reflected as a vector: (R_y u)(x, y, z) =
/// (u_x, -u_y, u_z)(x, -y, z).
class SymmetryClassifier {
public:
    /// Throws InvalidParameter when the mesh is not mirror symmetric.
    SymmetryClassifier(const Mesh& mesh, SparseReal mass);

    /// Re<u, R u>_M / <u, u>_M for axis 1 (y) or 2 (z).
    double overlap(const Eigen::VectorXcd& field, int axis) const;

    Eigen::VectorXcd reflect(const Eigen::VectorXcd& field, int axis) const;

    ParityPair classify(const Eigen::VectorXcd& field) const;

    /// Joint classification of a degenerate group (columns, M-orthonormal).
    /// Returns one label per column, taken from a parity-adapted basis of
    /// the span; labels are Mixed when no pure basis exists.
    std::vector<ParityPair> classify_group(const Eigen::MatrixXcd& fields) const;

    static Parity label(double overlap);

private:
    std::vector<int> mirror_y_;
    std::vector<int> mirror_z_;
    SparseReal mass_;
};

struct BandStructure {
    std::vector<double> k;
    Eigen::MatrixXd frequencies;                 ///< rows: k samples, columns: bands
    std::vector<std::vector<ParityPair>> parity; ///< [k][band]

    int num_bands() const { return static_cast<int>(frequencies.cols()); }
    int num_k() const { return static_cast<int>(k.size()); }
};

struct BandOptions {
    SolveOptions solve;
    bool classify = true;
    double degeneracy_ghz = 1e-3;
    int threads = 0; ///< 0: hardware concurrency
};

/// Bands along an ascending path of reduced wavevectors in [0, 1].
BandStructure band_diagram(const Mesh& mesh, const Material& material,
                           const std::vector<double>& k_path, int n_modes,
                           const BandOptions& options = {});

/// Uniform path of `count` points over [0, 1].
std::vector<double> uniform_k_path(int count);

} // namespace pnc
