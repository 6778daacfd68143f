#include <doctest.h>

#include <cmath>

#include "pnc/errors.hpp"
#include "pnc/geometry.hpp"

using namespace pnc;

namespace {

// Left fillet centre found without CellOutline: bisection on the centre x so
// that the distance from the centre to a densely sampled ellipse equals r.
Eigen::Vector2d oracle_fillet_centre(const UnitCellParams& p) {
    const double cy = 0.5 * p.t + p.r;
    auto gap = [&](double cx) {
        double best = 1e300;
        for (int i = 0; i <= 200000; ++i) {
            const double th = M_PI * i / 200000.0;
            const double ex = 0.5 * p.a + 0.5 * p.w * std::cos(th);
            const double ey = 0.5 * p.h * std::sin(th);
            best = std::min(best, std::hypot(ex - cx, ey - cy));
        }
        return best - p.r;
    };
    double lo = 0.0, hi = 0.5 * p.a - 0.5 * p.w;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) > 0 ? lo : hi) = mid;
    }
    return {0.5 * (lo + hi), cy};
}

bool inside_outline(const UnitCellParams& p, const Eigen::Vector2d& fc, double x, double y) {
    const double ay = std::abs(y);
    if (ay <= 0.5 * p.t) return true;
    const double u = (x - 0.5 * p.a) / (0.5 * p.w), v = y / (0.5 * p.h);
    if (u * u + v * v <= 1.0) return true;
    if (p.r == 0.0) return false;
    const double xl = std::min(x, p.a - x);
    return xl >= fc.x() && ay <= fc.y() && std::hypot(xl - fc.x(), ay - fc.y()) >= p.r;
}

double oracle_area(const UnitCellParams& p, int n) {
    const Eigen::Vector2d fc = oracle_fillet_centre(p);
    const double hy = 0.5 * p.h;
    const double dx = p.a / n, dy = 2.0 * hy / n;
    long count = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            count += inside_outline(p, fc, (i + 0.5) * dx, -hy + (j + 0.5) * dy);
        }
    }
    return count * dx * dy;
}

} // namespace

TEST_CASE("unit cell parameters are validated") {
    UnitCellParams p;
    CHECK_NOTHROW(p.validate());

    UnitCellParams bad = p;
    bad.w = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = p;
    bad.w = 130.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = p;
    bad.t = 95.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = p;
    bad.r = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
}

TEST_CASE("an oversized fillet is rejected instead of clamped") {
    UnitCellParams p;
    p.r = 60.0;
    CHECK_THROWS_AS(CellOutline{p}, InvalidParameter);
    CHECK_THROWS_AS(build_unit_cell_mesh(p, {8, 6, 4}), InvalidParameter);
}

TEST_CASE("fillet is tangent to the tether edge and the ellipse") {
    const UnitCellParams p;
    const CellOutline outline(p);
    REQUIRE(outline.fillet().has_value());
    const auto& f = *outline.fillet();
    CHECK(f.tether_tangent.y() == doctest::Approx(0.5 * p.t));
    CHECK((f.centre - f.tether_tangent).norm() == doctest::Approx(p.r));
    CHECK((f.centre - f.ellipse_tangent).norm() == doctest::Approx(p.r));
    const double u = (f.ellipse_tangent.x() - 0.5 * p.a) / (0.5 * p.w);
    const double v = f.ellipse_tangent.y() / (0.5 * p.h);
    CHECK(u * u + v * v == doctest::Approx(1.0).epsilon(1e-12));

    const Eigen::Vector2d oracle = oracle_fillet_centre(p);
    CHECK(f.centre.x() == doctest::Approx(oracle.x()).epsilon(1e-6));

    // The profile is continuous at both junctions.
    for (double x : {outline.tether_end(), outline.ellipse_start()}) {
        CHECK(outline.half_width(x - 1e-9) == doctest::Approx(outline.half_width(x + 1e-9)).epsilon(1e-6));
    }
}

TEST_CASE("nominal cell meshes with matched periodic faces") {
    const UnitCellParams p;
    const Mesh mesh = build_unit_cell_mesh(p, {16, 16, 8});
    CHECK(mesh.num_elements() == 16 * 16 * 8);
    CHECK(mesh.period == doctest::Approx(p.a * 1e-9));
    CHECK_NOTHROW(check_mesh(mesh));
    REQUIRE(mesh.periodic_min.size() == mesh.periodic_max.size());
    for (std::size_t i = 0; i < mesh.periodic_min.size(); ++i) {
        const Eigen::Vector3d lo = mesh.nodes.col(mesh.periodic_min[i]);
        const Eigen::Vector3d hi = mesh.nodes.col(mesh.periodic_max[i]);
        CHECK(hi.x() - lo.x() == doctest::Approx(mesh.period));
        CHECK(std::abs(hi.y() - lo.y()) < 1e-15);
        CHECK(std::abs(hi.z() - lo.z()) < 1e-15);
        CHECK((mesh.tags[mesh.periodic_min[i]] & kPeriodicMin));
        CHECK((mesh.tags[mesh.periodic_max[i]] & kPeriodicMax));
    }
}

TEST_CASE("degenerate straight cell meshes as a uniform beam") {
    UnitCellParams p;
    p.w = p.h = 60.0;
    p.t = 60.0;
    p.r = 0.0;
    const Mesh mesh = build_unit_cell_mesh(p, {6, 4, 4});
    const double expected = p.a * p.t * p.d * 1e-27;
    CHECK(mesh_volume(mesh) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("meshed volume matches an area oracle of the outline") {
    const UnitCellParams p;
    const double area = oracle_area(p, 4000);
    const double expected = area * p.d * 1e-27;
    double previous_error = 1.0;
    for (auto res : {Resolution{8, 6, 4}, Resolution{16, 12, 4}, Resolution{32, 24, 4}}) {
        const double err = std::abs(mesh_volume(build_unit_cell_mesh(p, res)) - expected) / expected;
        CAPTURE(res.nx);
        CHECK(err < 0.02);
        CHECK(err < previous_error);
        previous_error = err;
    }
}

TEST_CASE("unit cell mesh is mirror symmetric about the y and z mid-planes") {
    const Mesh mesh = build_unit_cell_mesh(UnitCellParams{}, {12, 8, 4});
    for (int axis : {1, 2}) {
        const auto map = mirror_map(mesh, axis);
        REQUIRE(map.has_value());
        for (int i = 0; i < mesh.num_nodes(); ++i) {
            const int j = (*map)[i];
            CHECK((*map)[j] == i);
            Eigen::Vector3d reflected = mesh.nodes.col(i);
            reflected(axis) = -reflected(axis);
            CHECK((reflected - mesh.nodes.col(j)).norm() < 1e-18);
        }
    }
}

TEST_CASE("nanobeam meshes") {
    const Mesh mesh = build_nanobeam_mesh(90.0, 70.0, 130.0, {4, 4, 4});
    CHECK(mesh.num_elements() == 64);
    CHECK_NOTHROW(check_mesh(mesh));
    CHECK(mesh_volume(mesh) == doctest::Approx(90.0 * 70.0 * 130.0 * 1e-27).epsilon(1e-12));
    CHECK_THROWS_AS(build_nanobeam_mesh(0.0, 70.0, 130.0, {4, 4, 4}), InvalidParameter);
}

TEST_CASE("resolution below 4 per axis is rejected") {
    CHECK_THROWS_AS(build_unit_cell_mesh(UnitCellParams{}, {3, 8, 8}), InvalidParameter);
    CHECK_THROWS_AS(build_nanobeam_mesh(90, 70, 130, {4, 4, 2}), InvalidParameter);
}

TEST_CASE("cubic material") {
    const Material m = Material::diamond();
    CHECK_NOTHROW(m.validate());
    const auto c = m.stiffness();
    CHECK(c(0, 0) == doctest::Approx(1079e9));
    CHECK(c(0, 1) == doctest::Approx(124e9));
    CHECK(c(3, 3) == doctest::Approx(578e9));
    CHECK((c - c.transpose()).norm() < 1e-6 * c.norm());

    // Compliance oracle for a cubic crystal along <100>:
    // 1/E = (C11 + C12) / ((C11 - C12)(C11 + 2 C12)).
    const double s11 = (1079.0 + 124.0) / ((1079.0 - 124.0) * (1079.0 + 2 * 124.0));
    CHECK(m.youngs_modulus(0) == doctest::Approx(1e9 / s11).epsilon(1e-12));

    Material bad = m;
    bad.c12 = 1200.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = m;
    bad.orientation = -Eigen::Matrix3d::Identity();
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
}

TEST_CASE("rotating the crystal about the beam axis by 90 degrees leaves cubic stiffness unchanged") {
    Material m = Material::diamond();
    m.orientation = Eigen::AngleAxisd(0.5 * M_PI, Eigen::Vector3d::UnitX()).toRotationMatrix();
    CHECK((m.stiffness() - Material::diamond().stiffness()).norm() < 1e-12 * m.stiffness().norm());

    // A 45 degree rotation about z gives the <110> Young's modulus.
    m.orientation = Eigen::AngleAxisd(0.25 * M_PI, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const double c11 = 1079.0, c12 = 124.0, c44 = 578.0;
    const double s11 = (c11 + c12) / ((c11 - c12) * (c11 + 2 * c12));
    const double s12 = -c12 / ((c11 - c12) * (c11 + 2 * c12));
    const double s44 = 1.0 / c44;
    const double inv_e110 = s11 - 0.5 * (s11 - s12 - 0.5 * s44);
    CHECK(m.youngs_modulus(0) == doctest::Approx(1e9 / inv_e110).epsilon(1e-10));
}
