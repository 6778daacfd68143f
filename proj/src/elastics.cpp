#include "pnc/elastics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pnc/errors.hpp"
#include "pnc/hex8.hpp"
#include "pnc/parallel.hpp"

namespace pnc {

namespace {

using Complex = std::complex<double>;

constexpr double kTwoPi = 2.0 * M_PI;

// Strain-displacement matrix for engineering strains (xx, yy, zz, yz, xz, xy).
Eigen::Matrix<double, 6, 24> strain_matrix(const Eigen::Matrix<double, 3, 8>& grad) {
    Eigen::Matrix<double, 6, 24> b = Eigen::Matrix<double, 6, 24>::Zero();
    for (int a = 0; a < 8; ++a) {
        const double dx = grad(0, a), dy = grad(1, a), dz = grad(2, a);
        const int c = 3 * a;
        b(0, c) = dx;
        b(1, c + 1) = dy;
        b(2, c + 2) = dz;
        b(3, c + 1) = dz;
        b(3, c + 2) = dy;
        b(4, c) = dz;
        b(4, c + 2) = dx;
        b(5, c) = dy;
        b(5, c + 1) = dx;
    }
    return b;
}

template <typename Fn>
void integrate(const Eigen::Matrix<double, 3, 8>& coords, int order, Fn&& fn) {
    const auto rule = hex8::gauss_legendre(order);
    for (int i = 0; i < order; ++i) {
        for (int j = 0; j < order; ++j) {
            for (int k = 0; k < order; ++k) {
                const double xi = rule.points[i], eta = rule.points[j], zeta = rule.points[k];
                const Eigen::Matrix<double, 3, 8> dn = hex8::shape_gradient(xi, eta, zeta);
                const Eigen::Matrix3d jac = coords * dn.transpose();
                const double det = jac.determinant();
                if (!(det > 0.0)) throw MeshingError("singular element Jacobian during assembly");
                const double weight = rule.weights[i] * rule.weights[j] * rule.weights[k] * det;
                fn(xi, eta, zeta, jac, dn, weight);
            }
        }
    }
}

} // namespace

ElementMatrix element_stiffness(const Eigen::Matrix<double, 3, 8>& coords,
                                const Eigen::Matrix<double, 6, 6>& elasticity, int order) {
    ElementMatrix ke = ElementMatrix::Zero();
    integrate(coords, order, [&](double, double, double, const Eigen::Matrix3d& jac,
                                 const Eigen::Matrix<double, 3, 8>& dn, double weight) {
        // dN/dx = J^-T dN/dxi with J = dx/dxi stored row-per-coordinate.
        const Eigen::Matrix<double, 3, 8> grad = jac.transpose().inverse() * dn;
        const Eigen::Matrix<double, 6, 24> b = strain_matrix(grad);
        ke.noalias() += weight * b.transpose() * elasticity * b;
    });
    return ke;
}

ElementMatrix element_mass(const Eigen::Matrix<double, 3, 8>& coords, double density, int order) {
    ElementMatrix me = ElementMatrix::Zero();
    integrate(coords, order, [&](double xi, double eta, double zeta, const Eigen::Matrix3d&,
                                 const Eigen::Matrix<double, 3, 8>&, double weight) {
        const Eigen::Matrix<double, 8, 1> n = hex8::shape(xi, eta, zeta);
        const Eigen::Matrix<double, 8, 8> nn = density * weight * n * n.transpose();
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b)
                for (int c = 0; c < 3; ++c) me(3 * a + c, 3 * b + c) += nn(a, b);
    });
    return me;
}

Operators assemble(const Mesh& mesh, const Material& material) {
    material.validate();
    const Eigen::Matrix<double, 6, 6> elasticity = material.stiffness();
    const int ndof = 3 * mesh.num_nodes();
    std::vector<Eigen::Triplet<double>> k_trip, m_trip;
    k_trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * 576);
    m_trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * 192);

    Eigen::Matrix<double, 3, 8> coords;
    for (const auto& element : mesh.elements) {
        for (int a = 0; a < 8; ++a) coords.col(a) = mesh.nodes.col(element[a]);
        const ElementMatrix ke = element_stiffness(coords, elasticity);
        const ElementMatrix me = element_mass(coords, material.density);
        for (int a = 0; a < 8; ++a) {
            for (int b = 0; b < 8; ++b) {
                for (int i = 0; i < 3; ++i) {
                    const int row = 3 * element[a] + i;
                    for (int j = 0; j < 3; ++j) {
                        k_trip.emplace_back(row, 3 * element[b] + j, ke(3 * a + i, 3 * b + j));
                    }
                    m_trip.emplace_back(row, 3 * element[b] + i, me(3 * a + i, 3 * b + i));
                }
            }
        }
    }
    Operators ops;
    ops.stiffness.resize(ndof, ndof);
    ops.mass.resize(ndof, ndof);
    ops.stiffness.setFromTriplets(k_trip.begin(), k_trip.end());
    ops.mass.setFromTriplets(m_trip.begin(), m_trip.end());
    return ops;
}

Eigen::VectorXd translation_mode(const Mesh& mesh, int axis) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(3 * mesh.num_nodes());
    for (int n = 0; n < mesh.num_nodes(); ++n) u(3 * n + axis) = 1.0;
    return u;
}

BlochMap::BlochMap(const Mesh& mesh)
    : reduced_node_(mesh.num_nodes(), -1), is_slave_(mesh.num_nodes(), false) {
    for (int n : mesh.periodic_max) is_slave_[n] = true;
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        if (!is_slave_[n]) reduced_node_[n] = num_reduced_nodes_++;
    }
    for (std::size_t i = 0; i < mesh.periodic_max.size(); ++i) {
        const int master = mesh.periodic_min[i];
        if (is_slave_[master]) throw MeshingError("periodic master node lies on the slave face");
        reduced_node_[mesh.periodic_max[i]] = reduced_node_[master];
    }
}

SparseComplex BlochMap::reduce(const SparseReal& full, double k) const {
    const Complex phase = std::polar(1.0, M_PI * k);
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(full.nonZeros()));
    for (int col = 0; col < full.outerSize(); ++col) {
        const int node_c = col / 3;
        const int rc = 3 * reduced_node_[node_c] + col % 3;
        const Complex phi_c = is_slave_[node_c] ? phase : Complex(1.0);
        for (SparseReal::InnerIterator it(full, col); it; ++it) {
            const int row = static_cast<int>(it.row());
            const int node_r = row / 3;
            const int rr = 3 * reduced_node_[node_r] + row % 3;
            const Complex phi_r = is_slave_[node_r] ? phase : Complex(1.0);
            trip.emplace_back(rr, rc, std::conj(phi_r) * it.value() * phi_c);
        }
    }
    SparseComplex out(reduced_size(), reduced_size());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

Eigen::VectorXcd BlochMap::expand(const Eigen::VectorXcd& reduced, double k) const {
    const Complex phase = std::polar(1.0, M_PI * k);
    Eigen::VectorXcd full(full_size());
    for (std::size_t n = 0; n < reduced_node_.size(); ++n) {
        const Complex phi = is_slave_[n] ? phase : Complex(1.0);
        for (int c = 0; c < 3; ++c) full(3 * n + c) = phi * reduced(3 * reduced_node_[n] + c);
    }
    return full;
}

BlochProblem make_bloch_problem(const Operators& ops, const BlochMap& map, double k) {
    return {k, map.reduce(ops.stiffness, k), map.reduce(ops.mass, k)};
}

double hermitian_defect(const SparseComplex& a) {
    const SparseComplex adj = a.adjoint();
    const double norm = a.norm();
    return norm > 0 ? (a - adj).norm() / norm : 0.0;
}

ModeSet solve_bands(const BlochProblem& problem, int n_modes, const SolveOptions& options) {
    if (n_modes < 1 || n_modes > problem.stiffness.rows()) {
        throw InvalidParameter("n_modes must be in [1, system size]");
    }
    if (hermitian_defect(problem.stiffness) > 1e-12 || hermitian_defect(problem.mass) > 1e-12) {
        throw InvalidParameter("Bloch-reduced operators are not Hermitian");
    }
    EigenOptions eig = options.eigen;
    const double target = kTwoPi * 1e9 * options.target_ghz;
    eig.sigma = options.target_ghz > 0 ? target * target : -(kTwoPi * 1e9) * (kTwoPi * 1e9);

    EigenPairs<Complex> pairs;
    try {
        pairs = shift_invert_eigs(problem.stiffness, problem.mass, n_modes, eig);
    } catch (const NumericalFailure& e) {
        std::ostringstream msg;
        msg << "at k = " << problem.k << ": " << e.what();
        throw NumericalFailure(msg.str());
    }

    const double floor = -std::pow(kTwoPi * 1e6, 2);
    ModeSet modes;
    modes.k = problem.k;
    modes.eigenvalues = pairs.values;
    modes.shapes = std::move(pairs.vectors);
    modes.frequencies_ghz.resize(n_modes);
    for (int i = 0; i < n_modes; ++i) {
        double lambda = pairs.values(i);
        if (lambda < 0.0) {
            if (lambda < floor) {
                std::ostringstream msg;
                msg << "negative eigenvalue " << lambda << " at k = " << problem.k;
                throw NumericalFailure(msg.str());
            }
            lambda = 0.0;
        }
        modes.frequencies_ghz(i) = std::sqrt(lambda) / (kTwoPi * 1e9);
    }
    return modes;
}

const char* to_string(Parity p) {
    switch (p) {
    case Parity::Even: return "even";
    case Parity::Odd: return "odd";
    case Parity::Mixed: return "mixed";
    }
    return "mixed";
}

SymmetryClassifier::SymmetryClassifier(const Mesh& mesh, SparseReal mass) : mass_(std::move(mass)) {
    auto y = mirror_map(mesh, 1);
    auto z = mirror_map(mesh, 2);
    if (!y || !z) {
        throw InvalidParameter("symmetry classification requires a mesh mirror-symmetric in y and z");
    }
    mirror_y_ = std::move(*y);
    mirror_z_ = std::move(*z);
}

Eigen::VectorXcd SymmetryClassifier::reflect(const Eigen::VectorXcd& field, int axis) const {
    const auto& map = axis == 1 ? mirror_y_ : mirror_z_;
    Eigen::VectorXcd out(field.size());
    for (std::size_t n = 0; n < map.size(); ++n) {
        for (int c = 0; c < 3; ++c) {
            const Complex v = field(3 * map[n] + c);
            out(3 * n + c) = c == axis ? -v : v;
        }
    }
    return out;
}

double SymmetryClassifier::overlap(const Eigen::VectorXcd& field, int axis) const {
    const Eigen::VectorXcd mu = mass_ * field;
    const double norm = mu.dot(field).real();
    if (!(norm > 0.0)) return 0.0;
    return mu.dot(reflect(field, axis)).real() / norm;
}

Parity SymmetryClassifier::label(double overlap) {
    if (overlap > 0.9) return Parity::Even;
    if (overlap < -0.9) return Parity::Odd;
    return Parity::Mixed;
}

ParityPair SymmetryClassifier::classify(const Eigen::VectorXcd& field) const {
    return {label(overlap(field, 1)), label(overlap(field, 2))};
}

std::vector<ParityPair> SymmetryClassifier::classify_group(const Eigen::MatrixXcd& fields) const {
    const int g = static_cast<int>(fields.cols());
    if (g == 1) return {classify(fields.col(0))};

    auto gram = [&](const Eigen::MatrixXcd& u, int axis) {
        Eigen::MatrixXcd ru(u.rows(), u.cols());
        for (int j = 0; j < u.cols(); ++j) ru.col(j) = reflect(u.col(j), axis);
        Eigen::MatrixXcd gm = (mass_ * u).adjoint() * ru;
        return Eigen::MatrixXcd(0.5 * (gm + gm.adjoint()));
    };

    // Orthonormalize in M so the reflection Gram matrices are unitary images.
    Eigen::MatrixXcd overlap_m = (mass_ * fields).adjoint() * fields;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s(0.5 * (overlap_m + overlap_m.adjoint()));
    const Eigen::VectorXd ev = s.eigenvalues().cwiseMax(1e-300);
    const Eigen::MatrixXcd basis =
        fields * s.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sy(gram(basis, 1));
    const Eigen::MatrixXcd by = basis * sy.eigenvectors();

    std::vector<ParityPair> out(g);
    int start = 0;
    while (start < g) {
        int end = start + 1;
        while (end < g && std::abs(sy.eigenvalues()(end) - sy.eigenvalues()(start)) < 0.2) ++end;
        const Eigen::MatrixXcd block = by.middleCols(start, end - start);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sz(gram(block, 2));
        for (int j = start; j < end; ++j) {
            out[j] = {label(sy.eigenvalues()(j)), label(sz.eigenvalues()(j - start))};
        }
        start = end;
    }
    return out;
}

BandStructure band_diagram(const Mesh& mesh, const Material& material,
                           const std::vector<double>& k_path, int n_modes,
                           const BandOptions& options) {
    if (k_path.empty()) throw InvalidParameter("k path is empty");
    for (std::size_t i = 0; i < k_path.size(); ++i) {
        if (k_path[i] < 0.0 || k_path[i] > 1.0 || (i > 0 && k_path[i] < k_path[i - 1])) {
            throw InvalidParameter("k path must be ascending within [0, 1]");
        }
    }
    const Operators ops = assemble(mesh, material);
    const BlochMap map(mesh);
    std::optional<SymmetryClassifier> classifier;
    if (options.classify) classifier.emplace(mesh, ops.mass);

    const int nk = static_cast<int>(k_path.size());
    BandStructure bands;
    bands.k = k_path;
    bands.frequencies.resize(nk, n_modes);
    bands.parity.assign(nk, std::vector<ParityPair>(n_modes));

    parallel_for(nk, options.threads, [&](int ik) {
        const double k = k_path[ik];
        const ModeSet modes = solve_bands(make_bloch_problem(ops, map, k), n_modes, options.solve);
        bands.frequencies.row(ik) = modes.frequencies_ghz.transpose();
        if (!classifier) return;
        int start = 0;
        while (start < n_modes) {
            int end = start + 1;
            while (end < n_modes && modes.frequencies_ghz(end) - modes.frequencies_ghz(end - 1) <
                                        options.degeneracy_ghz) {
                ++end;
            }
            Eigen::MatrixXcd fields(map.full_size(), end - start);
            for (int j = start; j < end; ++j) {
                fields.col(j - start) = map.expand(modes.shapes.col(j), k);
            }
            const auto labels = classifier->classify_group(fields);
            for (int j = start; j < end; ++j) bands.parity[ik][j] = labels[j - start];
            start = end;
        }
    });
    return bands;
}

std::vector<double> uniform_k_path(int count) {
    if (count < 1) throw InvalidParameter("k path needs at least one point");
    if (count == 1) return {0.0};
    std::vector<double> k(count);
    for (int i = 0; i < count; ++i) k[i] = static_cast<double>(i) / (count - 1);
    return k;
}

} // namespace pnc
