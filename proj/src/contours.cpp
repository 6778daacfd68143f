#include "pnc/contours.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnc/errors.hpp"

namespace pnc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RoleName {
    ContourRole role;
    const char* name;
};

constexpr RoleName kRoles[] = {
    {ContourRole::Block, "block"},           {ContourRole::Corner, "corner"},
    {ContourRole::TetherUpper, "tether-upper"}, {ContourRole::TetherLower, "tether-lower"},
    {ContourRole::SideTop, "side-top"},      {ContourRole::SideBottom, "side-bottom"},
};

void add_noise(PointSet2D& p, double sigma, std::mt19937_64& rng) {
    if (sigma <= 0.0) return;
    std::normal_distribution<double> g(0.0, sigma);
    for (int j = 0; j < p.cols(); ++j) {
        p(0, j) += g(rng);
        p(1, j) += g(rng);
    }
}

PointSet2D concat(const std::vector<const PointSet2D*>& parts) {
    Eigen::Index n = 0;
    for (const auto* p : parts) n += p->cols();
    PointSet2D out(2, n);
    Eigen::Index c = 0;
    for (const auto* p : parts) {
        out.middleCols(c, p->cols()) = *p;
        c += p->cols();
    }
    return out;
}

double mean_y(const PointSet2D& p) { return p.row(1).mean(); }

} // namespace

const char* to_string(ContourRole role) {
    for (const auto& r : kRoles)
        if (r.role == role) return r.name;
    return "?";
}

ContourRole parse_contour_role(const std::string& name) {
    for (const auto& r : kRoles)
        if (name == r.name) return r.role;
    throw InvalidParameter("unknown contour role '" + name + "'");
}

std::vector<Contour> synthetic_cell_contours(const UnitCellParams& params, const ContourSampling& sampling,
                                             std::mt19937_64& rng) {
    params.validate();
    if (!(sampling.pitch_nm > 0.0) || sampling.noise_nm < 0.0)
        throw InvalidParameter("contour pitch must be positive and noise non-negative");
    auto count = [&](double length, int minimum) {
        return std::max(minimum, static_cast<int>(std::ceil(length / sampling.pitch_nm)) + 1);
    };
    const CellOutline outline(params);
    const double a = params.a, xc = 0.5 * a;
    const double sx = 0.5 * params.w, sy = 0.5 * params.h;
    std::vector<Contour> out;

    // Visible block arcs between the two fillets.
    const double x0 = outline.ellipse_start();
    const double phi0 = std::acos(std::clamp((xc - x0) / sx, -1.0, 1.0));
    // Ramanujan's perimeter approximation sets the point count.
    const double perimeter = M_PI * (3 * (sx + sy) - std::sqrt((3 * sx + sy) * (sx + 3 * sy)));
    const int nb = count(perimeter * (M_PI - 2 * phi0) / (2 * M_PI), 6);
    for (double sign : {1.0, -1.0}) {
        PointSet2D p(2, nb);
        for (int i = 0; i < nb; ++i) {
            const double phi = phi0 + (M_PI - 2 * phi0) * i / (nb - 1);
            p.col(i) << xc + sx * std::cos(phi), sign * sy * std::sin(phi);
        }
        add_noise(p, sampling.noise_nm, rng);
        out.push_back({ContourRole::Block, std::move(p)});
    }

    if (const auto& f = outline.fillet()) {
        const Eigen::Vector2d d0 = f->tether_tangent - f->centre, d1 = f->ellipse_tangent - f->centre;
        const double th0 = std::atan2(d0.y(), d0.x()), th1 = std::atan2(d1.y(), d1.x());
        const int nc = count(params.r * std::abs(th1 - th0), 3);
        for (double mx : {1.0, -1.0}) {
            for (double my : {1.0, -1.0}) {
                PointSet2D p(2, nc);
                for (int i = 0; i < nc; ++i) {
                    const double th = th0 + (th1 - th0) * i / (nc - 1);
                    const double x = f->centre.x() + params.r * std::cos(th);
                    const double y = f->centre.y() + params.r * std::sin(th);
                    p.col(i) << (mx > 0 ? x : a - x), my * y;
                }
                add_noise(p, sampling.noise_nm, rng);
                out.push_back({ContourRole::Corner, std::move(p)});
            }
        }
    }

    // Tether edges follow the waist model with the tether's width, pinned to
    // the ellipse tangent point. Short fillets still get a window of a/5 so
    // that the curvature is resolved under noise.
    const double reach = std::max(x0, 0.2 * a);
    const double s = 0.5 * reach;
    const double rise = std::max(outline.half_width(x0) - 0.5 * params.t, 1e-3);
    const double c = rise * (1.0 + x0 / s) / (x0 * x0);
    const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(count(2 * reach, 5), -reach, reach);
    for (double junction : {0.0, a}) {
        for (ContourRole role : {ContourRole::TetherUpper, ContourRole::TetherLower}) {
            PointSet2D p = tether_edge(params.t, c, s, junction, u.array() + junction,
                                       role == ContourRole::TetherUpper);
            add_noise(p, sampling.noise_nm, rng);
            out.push_back({role, std::move(p)});
        }
    }

    for (ContourRole role : {ContourRole::SideTop, ContourRole::SideBottom}) {
        const double sign = role == ContourRole::SideTop ? 1.0 : -1.0;
        const int ns = count(a, 2);
        PointSet2D p(2, ns);
        for (int i = 0; i < ns; ++i) p.col(i) << a * i / (ns - 1), sign * 0.5 * params.d;
        add_noise(p, sampling.noise_nm, rng);
        out.push_back({role, std::move(p)});
    }
    return out;
}

CellMeasurement measure_cell(const std::vector<Contour>& contours) {
    std::vector<const PointSet2D*> block, upper, lower, top, bottom;
    CellMeasurement m;
    for (const auto& c : contours) {
        switch (c.role) {
        case ContourRole::Block: block.push_back(&c.points); break;
        case ContourRole::Corner:
            // Short noisy arcs can be indistinguishable from a line.
            try {
                m.r.push_back(fit_circle(c.points).radius);
            } catch (const FitError&) {
                ++m.dropped_corners;
            }
            break;
        case ContourRole::TetherUpper: upper.push_back(&c.points); break;
        case ContourRole::TetherLower: lower.push_back(&c.points); break;
        case ContourRole::SideTop: top.push_back(&c.points); break;
        case ContourRole::SideBottom: bottom.push_back(&c.points); break;
        }
    }
    m.w = m.h = m.t = m.a = m.d = kNaN;
    if (!block.empty()) {
        const EllipseFit e = fit_ellipse(concat(block));
        m.w = 2 * e.semi_axes(0);
        m.h = 2 * e.semi_axes(1);
    }
    if (upper.size() != lower.size()) throw InvalidParameter("tether edges must come in upper/lower pairs");
    if (!upper.empty()) {
        std::vector<double> waists;
        double t_sum = 0.0;
        for (std::size_t i = 0; i < upper.size(); ++i) {
            const TetherFit f = fit_tether_width(*upper[i], *lower[i]);
            t_sum += f.width;
            waists.push_back(f.waist_x);
        }
        m.t = t_sum / static_cast<double>(upper.size());
        if (waists.size() >= 2) m.a = std::abs(waists[1] - waists[0]);
    }
    if (!top.empty() && !bottom.empty()) m.d = mean_y(concat(top)) - mean_y(concat(bottom));
    return m;
}

std::vector<ParameterSummary> summarize_cells(const std::vector<CellMeasurement>& cells) {
    auto summary = [](const char* name, const std::vector<double>& v) {
        ParameterSummary s;
        s.name = name;
        s.count = static_cast<int>(v.size());
        if (v.empty()) return s;
        double sum = 0.0;
        for (double x : v) sum += x;
        s.mean = sum / s.count;
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = s.count > 1 ? std::sqrt(ss / (s.count - 1)) : 0.0;
        return s;
    };
    std::vector<double> w, h, t, r, a, d;
    for (const auto& c : cells) {
        if (!std::isnan(c.w)) w.push_back(c.w);
        if (!std::isnan(c.h)) h.push_back(c.h);
        if (!std::isnan(c.t)) t.push_back(c.t);
        r.insert(r.end(), c.r.begin(), c.r.end());
        if (!std::isnan(c.a)) a.push_back(c.a);
        if (!std::isnan(c.d)) d.push_back(c.d);
    }
    std::vector<ParameterSummary> out;
    const std::pair<const char*, const std::vector<double>*> rows[] = {{"w", &w}, {"h", &h}, {"t", &t},
                                                                      {"r", &r}, {"a", &a}, {"d", &d}};
    for (const auto& [name, values] : rows)
        if (!values->empty()) out.push_back(summary(name, *values));
    return out;
}

UnitCellParams fabrication_spread() {
    UnitCellParams s;
    s.w = 4.9;
    s.h = 4.2;
    s.a = 2.6;
    s.t = 3.0;
    s.r = 5.6;
    s.d = 3.7;
    return s;
}

std::vector<UnitCellParams> draw_cell_ensemble(int count, const UnitCellParams& mean, const UnitCellParams& spread,
                                               unsigned seed) {
    if (count < 1) throw InvalidParameter("ensemble size must be positive");
    mean.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<UnitCellParams> cells;
    int attempts = 0;
    while (static_cast<int>(cells.size()) < count) {
        if (++attempts > 100 * count) throw InvalidParameter("spread too wide: too many invalid cells");
        UnitCellParams p;
        p.w = mean.w + spread.w * g(rng);
        p.h = mean.h + spread.h * g(rng);
        p.a = mean.a + spread.a * g(rng);
        p.t = mean.t + spread.t * g(rng);
        p.r = mean.r + spread.r * g(rng);
        p.d = mean.d + spread.d * g(rng);
        if (p.r < 2.0) continue;
        try {
            p.validate();
            (void)CellOutline(p);
        } catch (const InvalidParameter&) {
            continue;
        }
        cells.push_back(p);
    }
    return cells;
}

} // namespace pnc
