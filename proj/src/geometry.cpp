#include "pnc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <tuple>

#include "pnc/errors.hpp"
#include "pnc/hex8.hpp"

namespace pnc {

namespace {

constexpr double kNm = 1e-9;

std::string describe(const UnitCellParams& p) {
    std::ostringstream os;
    os << "(w=" << p.w << ", h=" << p.h << ", a=" << p.a << ", t=" << p.t << ", r=" << p.r
       << ", d=" << p.d << " nm)";
    return os.str();
}

// Node x positions on [0, length] equidistributing the arc length of the
// profile curve (x, Y(x)), so steep flanks of the block get more columns.
std::vector<double> arclength_stations(const std::function<double(double)>& profile,
                                       double length, int n) {
    constexpr int kSamples = 20000;
    std::vector<double> xs(kSamples + 1), s(kSamples + 1, 0.0);
    double prev_y = profile(0.0);
    xs[0] = 0.0;
    for (int i = 1; i <= kSamples; ++i) {
        xs[i] = length * i / kSamples;
        const double y = profile(xs[i]);
        s[i] = s[i - 1] + std::hypot(xs[i] - xs[i - 1], y - prev_y);
        prev_y = y;
    }
    std::vector<double> stations(n + 1);
    stations[0] = 0.0;
    stations[n] = length;
    for (int k = 1; k < n; ++k) {
        const double target = s.back() * k / n;
        const auto it = std::lower_bound(s.begin(), s.end(), target);
        const auto i = static_cast<std::size_t>(std::distance(s.begin(), it));
        const double f = (target - s[i - 1]) / (s[i] - s[i - 1]);
        stations[k] = xs[i - 1] + f * (xs[i] - xs[i - 1]);
    }
    // Enforce exact mirror symmetry about length/2.
    for (int k = 0; k <= n / 2; ++k) {
        const double m = 0.5 * (stations[k] + (length - stations[n - k]));
        stations[k] = m;
        stations[n - k] = length - m;
    }
    if (n % 2 == 0) stations[n / 2] = 0.5 * length;
    return stations;
}

// Extrudes the planar region |y| <= Y(x) through the thickness. Lengths in nm.
Mesh extrude(const std::function<double(double)>& half_width, const std::vector<double>& xs,
             double thickness, const Resolution& res) {
    const int nx = res.nx, ny = res.ny, nz = res.nz;
    const int n_nodes = (nx + 1) * (ny + 1) * (nz + 1);
    auto id = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };

    Mesh mesh;
    mesh.period = xs.back() * kNm;
    mesh.nodes.resize(3, n_nodes);
    mesh.tags.assign(n_nodes, kInterior);
    for (int k = 0; k <= nz; ++k) {
        const double z = thickness * (static_cast<double>(k) / nz - 0.5);
        for (int j = 0; j <= ny; ++j) {
            const double s = 2.0 * j / ny - 1.0;
            for (int i = 0; i <= nx; ++i) {
                const double x = i == nx ? xs.back() : xs[i];
                const double y = (j == ny / 2 && ny % 2 == 0) ? 0.0 : s * half_width(x);
                const int n = id(i, j, k);
                mesh.nodes.col(n) << x * kNm, y * kNm, z * kNm;
                std::uint8_t tag = kInterior;
                if (i == 0) tag |= kPeriodicMin;
                if (i == nx) tag |= kPeriodicMax;
                if (j == 0 || j == ny || k == 0 || k == nz) tag |= kFreeSurface;
                mesh.tags[n] = tag;
            }
        }
    }
    mesh.elements.reserve(static_cast<std::size_t>(nx) * ny * nz);
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                mesh.elements.push_back({id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k),
                                         id(i, j + 1, k), id(i, j, k + 1), id(i + 1, j, k + 1),
                                         id(i + 1, j + 1, k + 1), id(i, j + 1, k + 1)});
            }
        }
    }
    for (int k = 0; k <= nz; ++k) {
        for (int j = 0; j <= ny; ++j) {
            mesh.periodic_min.push_back(id(0, j, k));
            mesh.periodic_max.push_back(id(nx, j, k));
        }
    }
    return mesh;
}

void check_resolution(const Resolution& res) {
    if (res.nx < 4 || res.ny < 4 || res.nz < 4) {
        throw InvalidParameter("mesh resolution must be at least 4 elements per axis");
    }
}

} // namespace

void UnitCellParams::validate() const {
    const bool positive = w > 0 && h > 0 && a > 0 && t > 0 && d > 0 && r >= 0;
    if (!positive || !std::isfinite(w + h + a + t + r + d)) {
        throw InvalidParameter("unit cell lengths must be positive " + describe(*this));
    }
    if (w >= a || h >= a) {
        throw InvalidParameter("block does not fit in the lattice period " + describe(*this));
    }
    if (t > h || (t == h && r > 0)) {
        throw InvalidParameter("tether must be narrower than the block " + describe(*this));
    }
}

void Material::validate() const {
    if (!(c44 > 0 && c11 > std::abs(c12) && c11 + 2 * c12 > 0 && density > 0)) {
        throw InvalidParameter("elastic constants are not positive definite");
    }
    const Eigen::Matrix3d gram = orientation.transpose() * orientation;
    if (!gram.isIdentity(1e-9) || orientation.determinant() < 0) {
        throw InvalidParameter("orientation must be a proper rotation");
    }
}

Eigen::Matrix<double, 6, 6> Material::stiffness() const {
    double c[3][3][3][3] = {};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i == j) {
                c[i][i][i][i] = c11;
            } else {
                c[i][i][j][j] = c12;
                c[i][j][i][j] = c44;
                c[i][j][j][i] = c44;
            }
        }
    }
    const Eigen::Matrix3d& q = orientation;
    static constexpr int kVoigt[6][2] = {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
    Eigen::Matrix<double, 6, 6> out;
    for (int I = 0; I < 6; ++I) {
        for (int J = 0; J < 6; ++J) {
            const int p = kVoigt[I][0], qq = kVoigt[I][1];
            const int r = kVoigt[J][0], s = kVoigt[J][1];
            double sum = 0.0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k)
                        for (int l = 0; l < 3; ++l)
                            sum += q(p, i) * q(qq, j) * q(r, k) * q(s, l) * c[i][j][k][l];
            out(I, J) = sum * 1e9;
        }
    }
    return out;
}

double Material::youngs_modulus(int axis) const {
    const Eigen::Matrix<double, 6, 6> compliance = stiffness().inverse();
    return 1.0 / compliance(axis, axis);
}

CellOutline::CellOutline(const UnitCellParams& params) : params_(params) {
    params.validate();
    const double semi_x = 0.5 * params.w;
    const double semi_y = 0.5 * params.h;
    const double xc = 0.5 * params.a;
    const double half_t = 0.5 * params.t;

    if (params.r == 0.0) {
        const double q = half_t / semi_y;
        tether_end_ = ellipse_start_ = xc - semi_x * std::sqrt(std::max(0.0, 1.0 - q * q));
        return;
    }

    // Circle of radius r tangent to y = t/2 from above and externally tangent
    // to the ellipse: solve for the ellipse angle whose offset point sits at
    // height t/2 + r.
    const double r = params.r;
    auto centre = [&](double theta) {
        const Eigen::Vector2d p(xc + semi_x * std::cos(theta), semi_y * std::sin(theta));
        const Eigen::Vector2d n = Eigen::Vector2d(std::cos(theta) / semi_x,
                                                  std::sin(theta) / semi_y).normalized();
        return std::pair<Eigen::Vector2d, Eigen::Vector2d>{p, p + r * n};
    };
    double lo = 0.5 * M_PI, hi = M_PI;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double g = centre(mid).second.y() - (half_t + r);
        (g > 0 ? lo : hi) = mid;
    }
    const auto [p, q] = centre(0.5 * (lo + hi));
    if (std::abs(q.y() - (half_t + r)) > 1e-9 * params.a || q.x() < 0.0) {
        throw InvalidParameter("fillet of radius r is not constructible " + describe(params));
    }
    fillet_ = Fillet{q, Eigen::Vector2d(q.x(), half_t), p};
    tether_end_ = q.x();
    ellipse_start_ = p.x();
}

std::array<double, 4> CellOutline::breakpoints() const {
    return {0.0, tether_end_, ellipse_start_, 0.5 * params_.a};
}

double CellOutline::left_half_width(double x) const {
    const double half_t = 0.5 * params_.t;
    if (x <= tether_end_) return half_t;
    if (fillet_ && x < ellipse_start_) {
        const double dx = x - fillet_->centre.x();
        return fillet_->centre.y() - std::sqrt(std::max(0.0, params_.r * params_.r - dx * dx));
    }
    const double u = (x - 0.5 * params_.a) / (0.5 * params_.w);
    return std::max(half_t, 0.5 * params_.h * std::sqrt(std::max(0.0, 1.0 - u * u)));
}

double CellOutline::half_width(double x) const {
    return left_half_width(std::min(x, params_.a - x));
}

Mesh build_unit_cell_mesh(const UnitCellParams& params, const Resolution& res) {
    check_resolution(res);
    const CellOutline outline(params);
    auto profile = [&](double x) { return outline.half_width(x); };
    const auto xs = arclength_stations(profile, params.a, res.nx);
    Mesh mesh = extrude(profile, xs, params.d, res);
    check_mesh(mesh);
    return mesh;
}

Mesh build_nanobeam_mesh(double width, double thickness, double period, const Resolution& res) {
    if (!(width > 0 && thickness > 0 && period > 0)) {
        throw InvalidParameter("nanobeam dimensions must be positive");
    }
    check_resolution(res);
    std::vector<double> xs(res.nx + 1);
    for (int i = 0; i <= res.nx; ++i) xs[i] = period * i / res.nx;
    Mesh mesh = extrude([&](double) { return 0.5 * width; }, xs, thickness, res);
    check_mesh(mesh);
    return mesh;
}

namespace {

template <typename Fn>
void for_each_gauss_jacobian(const Mesh& mesh, Fn&& fn) {
    const double g = 1.0 / std::sqrt(3.0);
    Eigen::Matrix<double, 3, 8> coords;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        for (int a = 0; a < 8; ++a) coords.col(a) = mesh.nodes.col(mesh.elements[e][a]);
        for (int q = 0; q < 8; ++q) {
            const auto& c = hex8::kCorners[q];
            const Eigen::Matrix3d jac =
                coords * hex8::shape_gradient(g * c[0], g * c[1], g * c[2]).transpose();
            fn(e, jac.determinant());
        }
    }
}

} // namespace

double mesh_volume(const Mesh& mesh) {
    double volume = 0.0;
    for_each_gauss_jacobian(mesh, [&](int, double det) { volume += det; });
    return volume;
}

void check_mesh(const Mesh& mesh) {
    for_each_gauss_jacobian(mesh, [&](int e, double det) {
        if (!(det > 0.0)) {
            throw MeshingError("element " + std::to_string(e) +
                               " has a non-positive Jacobian determinant");
        }
    });
    if (mesh.periodic_min.size() != mesh.periodic_max.size() || mesh.periodic_min.empty()) {
        throw MeshingError("periodic faces have different node counts");
    }
    const double tol = 1e-9 * mesh.period;
    for (std::size_t i = 0; i < mesh.periodic_min.size(); ++i) {
        const Eigen::Vector3d lo = mesh.nodes.col(mesh.periodic_min[i]);
        const Eigen::Vector3d hi = mesh.nodes.col(mesh.periodic_max[i]);
        if (std::abs(hi.x() - lo.x() - mesh.period) > tol || std::abs(hi.y() - lo.y()) > tol ||
            std::abs(hi.z() - lo.z()) > tol) {
            throw MeshingError("periodic face nodes are not matched");
        }
    }
}

std::optional<std::vector<int>> mirror_map(const Mesh& mesh, int axis, double rel_tol) {
    const Eigen::Vector3d extent =
        mesh.nodes.rowwise().maxCoeff() - mesh.nodes.rowwise().minCoeff();
    const double tol = rel_tol * extent.maxCoeff();
    using Key = std::tuple<long long, long long, long long>;
    auto key = [&](const Eigen::Vector3d& p) {
        return Key{std::llround(p.x() / tol), std::llround(p.y() / tol), std::llround(p.z() / tol)};
    };
    std::map<Key, int> index;
    for (int n = 0; n < mesh.num_nodes(); ++n) index.emplace(key(mesh.nodes.col(n)), n);

    std::vector<int> map(mesh.num_nodes());
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        Eigen::Vector3d p = mesh.nodes.col(n);
        p(axis) = -p(axis);
        const auto [kx, ky, kz] = key(p);
        int found = -1;
        for (long long dx = -1; dx <= 1 && found < 0; ++dx)
            for (long long dy = -1; dy <= 1 && found < 0; ++dy)
                for (long long dz = -1; dz <= 1 && found < 0; ++dz) {
                    const auto it = index.find({kx + dx, ky + dy, kz + dz});
                    if (it != index.end() && (mesh.nodes.col(it->second) - p).norm() <= tol) {
                        found = it->second;
                    }
                }
        if (found < 0) return std::nullopt;
        map[n] = found;
    }
    return map;
}

} // namespace pnc
