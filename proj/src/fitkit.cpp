#include "pnc/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pnc {

namespace {

void check_covariance_input(const Eigen::MatrixXd& jtj) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jtj);
    const double top = es.eigenvalues().maxCoeff();
    const double bottom = es.eigenvalues().minCoeff();
    if (!(top > 0.0) || !(bottom > 1e-14 * top)) {
        throw FitError("parameters are not identifiable from the data (singular normal matrix)");
    }
}

} // namespace

LeastSquaresResult least_squares(const ResidualFn& residual, const Eigen::VectorXd& init,
                                 const LmOptions& options) {
    const int np = static_cast<int>(init.size());
    Eigen::VectorXd p = init;
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    residual(p, r, &jac);
    if (jac.rows() != r.size() || jac.cols() != np) {
        throw InvalidParameter("residual callback returned a Jacobian of the wrong shape");
    }
    if (r.size() < np) throw FitError("fewer residuals than parameters");
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw FitError("residuals are not finite at the initial point");

    LeastSquaresResult out;
    out.residuals = static_cast<int>(r.size());
    double lambda = options.initial_damping;
    const double lambda_floor = options.initial_damping > 0.0 ? 1e-12 : 0.0;
    Eigen::VectorXd grad = jac.transpose() * r;
    bool converged = grad.lpNorm<Eigen::Infinity>() < options.gradient_tol;

    Eigen::VectorXd r_new;
    int evaluations = 0;
    while (!converged) {
        if (evaluations++ >= options.max_iterations) break;
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        Eigen::VectorXd scale = jtj.diagonal();
        const double floor = 1e-12 * std::max(scale.maxCoeff(), 1e-300);
        scale = scale.cwiseMax(floor);
        Eigen::MatrixXd damped = jtj;
        damped.diagonal() += lambda * scale;
        const Eigen::VectorXd step = damped.ldlt().solve(-grad);
        if (!step.allFinite()) {
            lambda = std::max(lambda * 10.0, 1e-3);
            continue;
        }
        if (step.norm() <= options.step_tol * (p.norm() + options.step_tol)) {
            converged = true;
            break;
        }
        const Eigen::VectorXd trial = p + step;
        residual(trial, r_new, nullptr);
        const double trial_cost = r_new.squaredNorm();
        if (std::isfinite(trial_cost) && trial_cost <= cost) {
            p = trial;
            cost = trial_cost;
            ++out.iterations;
            lambda = std::max(lambda / 10.0, lambda_floor);
            residual(p, r, &jac);
            grad = jac.transpose() * r;
            if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tol) converged = true;
        } else {
            lambda = std::max(lambda * 10.0, 1e-3);
            if (lambda > 1e20) {
                // No descent possible along any damped direction: at the
                // minimum within rounding.
                converged = true;
            }
        }
    }

    out.params = p;
    out.cost = cost;
    if (!converged) {
        std::ostringstream msg;
        msg << "least squares did not converge in " << options.max_iterations
            << " iterations (cost " << cost << ")";
        throw NonConvergence(msg.str(), out);
    }
    if (options.compute_covariance) {
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        check_covariance_input(jtj);
        out.covariance = jtj.ldlt().solve(Eigen::MatrixXd::Identity(np, np));
        out.errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    return out;
}

Eigen::VectorXd CurveModel::predict(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const {
    Eigen::VectorXd y;
    evaluate(x, p, y, nullptr);
    return y;
}

Eigen::MatrixXd CurveModel::jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const {
    Eigen::VectorXd y;
    Eigen::MatrixXd jac;
    evaluate(x, p, y, &jac);
    return jac;
}

CurveFit fit_nonlinear(const CurveModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& sigma, const Eigen::VectorXd& init,
                       const LmOptions& options) {
    if (x.size() != y.size() || x.size() != sigma.size()) {
        throw InvalidParameter("x, y and sigma must have equal lengths");
    }
    if (init.size() != model.num_parameters()) {
        throw InvalidParameter("model '" + model.tag + "' expects " +
                               std::to_string(model.num_parameters()) + " parameters");
    }
    if ((sigma.array() <= 0.0).any() || !sigma.allFinite()) {
        throw InvalidParameter("sigma must be positive");
    }
    if (x.size() < init.size()) throw FitError("fewer data points than parameters");
    const Eigen::ArrayXd inv = sigma.array().inverse();
    const ResidualFn residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r,
                                    Eigen::MatrixXd* jac) {
        Eigen::VectorXd f;
        model.evaluate(x, p, f, jac);
        r = ((f - y).array() * inv).matrix();
        if (jac) *jac = inv.matrix().asDiagonal() * *jac;
    };
    const LeastSquaresResult ls = least_squares(residual, init, options);
    CurveFit fit;
    fit.tag = model.tag;
    fit.params = ls.params;
    fit.errors = ls.errors;
    fit.covariance = ls.covariance;
    fit.chi2 = ls.cost;
    fit.dof = static_cast<int>(x.size() - init.size());
    fit.iterations = ls.iterations;
    return fit;
}

namespace models {

CurveModel recovery() {
    return {"recovery", {"T1"},
            [](const Eigen::VectorXd& x, const Eigen::VectorXd& p, Eigen::VectorXd& y,
               Eigen::MatrixXd* jac) {
                const double t1 = p(0);
                const Eigen::ArrayXd e = (-x.array() / t1).exp();
                y = (1.0 - e).matrix();
                if (jac) {
                    jac->resize(x.size(), 1);
                    jac->col(0) = (-e * x.array() / (t1 * t1)).matrix();
                }
            }};
}

CurveModel lorentzian() {
    return {"lorentzian", {"center", "fwhm", "amplitude", "offset"},
            [](const Eigen::VectorXd& x, const Eigen::VectorXd& p, Eigen::VectorXd& y,
               Eigen::MatrixXd* jac) {
                const double h = 0.5 * p(1), amp = p(2);
                const Eigen::ArrayXd u = x.array() - p(0);
                const Eigen::ArrayXd den = u.square() + h * h;
                const Eigen::ArrayXd shape = h * h / den;
                y = (amp * shape + p(3)).matrix();
                if (jac) {
                    jac->resize(x.size(), 4);
                    jac->col(0) = (amp * h * h * 2.0 * u / den.square()).matrix();
                    jac->col(1) = (0.5 * 2.0 * amp * h * u.square() / den.square()).matrix();
                    jac->col(2) = shape.matrix();
                    jac->col(3).setOnes();
                }
            }};
}

CurveModel saturation() {
    return {"saturation", {"I_max", "P_sat"},
            [](const Eigen::VectorXd& x, const Eigen::VectorXd& p, Eigen::VectorXd& y,
               Eigen::MatrixXd* jac) {
                const Eigen::ArrayXd e = (-x.array() / p(1)).exp();
                y = (p(0) * (1.0 - e)).matrix();
                if (jac) {
                    jac->resize(x.size(), 2);
                    jac->col(0) = (1.0 - e).matrix();
                    jac->col(1) = (-p(0) * e * x.array() / (p(1) * p(1))).matrix();
                }
            }};
}

CurveModel gaussian() {
    return {"gaussian", {"amplitude", "mean", "sd"},
            [](const Eigen::VectorXd& x, const Eigen::VectorXd& p, Eigen::VectorXd& y,
               Eigen::MatrixXd* jac) {
                const double s = p(2);
                const Eigen::ArrayXd u = x.array() - p(1);
                const Eigen::ArrayXd e = (-0.5 * u.square() / (s * s)).exp();
                y = (p(0) * e).matrix();
                if (jac) {
                    jac->resize(x.size(), 3);
                    jac->col(0) = e.matrix();
                    jac->col(1) = (p(0) * e * u / (s * s)).matrix();
                    jac->col(2) = (p(0) * e * u.square() / (s * s * s)).matrix();
                }
            }};
}

CurveModel waist() {
    return {"waist", {"x0", "y0", "c", "log_s"},
            [](const Eigen::VectorXd& x, const Eigen::VectorXd& p, Eigen::VectorXd& y,
               Eigen::MatrixXd* jac) {
                const double c = p(2), s = std::exp(p(3));
                const Eigen::ArrayXd u = x.array() - p(0);
                const Eigen::ArrayXd au = u.abs();
                const Eigen::ArrayXd q = 1.0 + au / s;
                y = (p(1) + c * u.square() / q).matrix();
                if (jac) {
                    jac->resize(x.size(), 4);
                    const Eigen::ArrayXd dydu =
                        c * (2.0 * u * q - u.square() * u.sign() / s) / q.square();
                    jac->col(0) = (-dydu).matrix();
                    jac->col(1).setOnes();
                    jac->col(2) = (u.square() / q).matrix();
                    jac->col(3) = (c * u.square() * au / (s * q.square())).matrix();
                }
            }};
}

std::vector<CurveModel> builtin() { return {recovery(), lorentzian(), saturation(), gaussian(), waist()}; }

} // namespace models

namespace {

void check_lengths(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& s,
                   int min_points, const char* what) {
    if (x.size() != y.size() || x.size() != s.size()) {
        throw InvalidParameter(std::string(what) + ": x, y and sigma must have equal lengths");
    }
    if (x.size() < min_points) {
        throw InvalidParameter(std::string(what) + " needs at least " + std::to_string(min_points) +
                               " points");
    }
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

RecoveryFit fit_recovery(const Eigen::VectorXd& taus, const Eigen::VectorXd& ratios,
                         const Eigen::VectorXd& sigma) {
    check_lengths(taus, ratios, sigma, 3, "recovery fit");
    if ((ratios.array() <= 0.0).all()) throw FitError("all ratios are <= 0: no recovery to fit");
    std::vector<double> guesses;
    for (Eigen::Index i = 0; i < taus.size(); ++i) {
        if (taus(i) > 0.0 && ratios(i) > 0.0 && ratios(i) < 1.0) {
            guesses.push_back(-taus(i) / std::log1p(-ratios(i)));
        }
    }
    if (guesses.empty()) {
        throw FitError("T1 is not identifiable: no ratio lies strictly between 0 and 1");
    }
    Eigen::VectorXd init(1);
    init << median(guesses);
    RecoveryFit out;
    out.fit = fit_nonlinear(models::recovery(), taus, ratios, sigma, init);
    out.t1 = out.fit.params(0);
    out.t1_error = out.fit.errors(0);
    if (!(out.t1 > 0.0)) throw FitError("fitted T1 is not positive");
    return out;
}

LorentzianFit fit_lorentzian(const Eigen::VectorXd& freq, const Eigen::VectorXd& counts,
                             const Eigen::VectorXd& sigma) {
    check_lengths(freq, counts, sigma, 5, "Lorentzian fit");
    Eigen::Index peak;
    const double top = counts.maxCoeff(&peak);
    const double base = counts.minCoeff();
    const double half = 0.5 * (top + base);
    // Extent of the points at or above half maximum; a quarter of the range
    // when only the peak qualifies.
    double a = freq(peak), b = freq(peak);
    for (Eigen::Index i = 0; i < freq.size(); ++i) {
        if (counts(i) >= half) {
            a = std::min(a, freq(i));
            b = std::max(b, freq(i));
        }
    }
    double span = b - a;
    if (!(span > 0.0)) span = 0.25 * (freq.maxCoeff() - freq.minCoeff());
    Eigen::VectorXd init(4);
    init << freq(peak), span, top - base, base;
    LorentzianFit out;
    out.fit = fit_nonlinear(models::lorentzian(), freq, counts, sigma, init);
    out.center = out.fit.params(0);
    out.fwhm = std::abs(out.fit.params(1));
    out.amplitude = out.fit.params(2);
    out.offset = out.fit.params(3);
    return out;
}

SaturationFit fit_saturation(const Eigen::VectorXd& power, const Eigen::VectorXd& counts,
                             const Eigen::VectorXd& sigma) {
    check_lengths(power, counts, sigma, 3, "saturation fit");
    std::vector<Eigen::Index> order(power.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return power(a) < power(b); });
    SaturationFit out;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto i = order[k - 1], j = order[k];
        const double drop = counts(i) - counts(j);
        if (drop > 3.0 * std::hypot(sigma(i), sigma(j))) {
            std::ostringstream msg;
            msg << "counts drop by " << drop << " between P = " << power(i) << " and " << power(j);
            out.warnings.push_back(msg.str());
        }
    }
    const double i_max = counts.maxCoeff();
    if (!(i_max > 0.0)) throw FitError("saturation data has no positive counts");
    double p_sat = power.maxCoeff() / 3.0;
    for (auto i : order) {
        if (counts(i) >= (1.0 - std::exp(-1.0)) * i_max) {
            if (power(i) > 0.0) p_sat = power(i);
            break;
        }
    }
    Eigen::VectorXd init(2);
    init << i_max, p_sat;
    out.fit = fit_nonlinear(models::saturation(), power, counts, sigma, init);
    out.i_max = out.fit.params(0);
    out.p_sat = out.fit.params(1);
    return out;
}

namespace {

/// Throws FitError when the points span (numerically) less than two dimensions.
void check_spread(const PointSet2D& points, const char* what) {
    const Eigen::Vector2d mean = points.rowwise().mean();
    const Eigen::Matrix2d cov = (points.colwise() - mean) * (points.colwise() - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    if (!(es.eigenvalues()(0) > 1e-12 * es.eigenvalues()(1))) {
        throw FitError(std::string(what) + ": points are collinear");
    }
}

constexpr double kQuarterPi = 0.25 * M_PI;

/// Orders the semi-axes so the rotation lies in (-pi/4, pi/4].
void normalize_rotation(EllipseFit& e) {
    double th = std::remainder(e.rotation, M_PI); // [-pi/2, pi/2]
    if (th > kQuarterPi) {
        th -= 0.5 * M_PI;
        std::swap(e.semi_axes(0), e.semi_axes(1));
    } else if (th <= -kQuarterPi) {
        th += 0.5 * M_PI;
        std::swap(e.semi_axes(0), e.semi_axes(1));
    }
    e.rotation = th;
    if (std::abs(e.semi_axes(0) - e.semi_axes(1)) <= 1e-9 * e.semi_axes.maxCoeff()) e.rotation = 0.0;
}

} // namespace

EllipseFit fit_ellipse_direct(const PointSet2D& points) {
    const Eigen::Index n = points.cols();
    if (n < 6) throw InvalidParameter("ellipse fit needs at least 6 points");
    check_spread(points, "ellipse fit");

    // Work in centred, unit-scaled coordinates for conditioning.
    const Eigen::Vector2d mean = points.rowwise().mean();
    const double scale = std::sqrt((points.colwise() - mean).squaredNorm() / n);
    const Eigen::Matrix2Xd q = (points.colwise() - mean) / scale;

    Eigen::MatrixXd d1(n, 3), d2(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = q(0, i), y = q(1, i);
        d1.row(i) << x * x, x * y, y * y;
        d2.row(i) << x, y, 1.0;
    }
    const Eigen::Matrix3d s1 = d1.transpose() * d1;
    const Eigen::Matrix3d s2 = d1.transpose() * d2;
    const Eigen::Matrix3d s3 = d2.transpose() * d2;
    const Eigen::Matrix3d t = -s3.ldlt().solve(s2.transpose());
    const Eigen::Matrix3d m = s1 + s2 * t;
    Eigen::Matrix3d reduced;
    reduced.row(0) = 0.5 * m.row(2);
    reduced.row(1) = -m.row(1);
    reduced.row(2) = 0.5 * m.row(0);
    Eigen::EigenSolver<Eigen::Matrix3d> es(reduced);
    int pick = -1;
    double best = 0.0;
    Eigen::Vector3d a1;
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d v = es.eigenvectors().col(k).real();
        const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
        if (cond > best) {
            best = cond;
            pick = k;
            a1 = v;
        }
    }
    if (pick < 0) throw FitError("ellipse fit: no elliptical conic fits the points");
    const Eigen::Vector3d a2 = t * a1;
    const double A = a1(0), B = a1(1), C = a1(2), D = a2(0), E = a2(1), F = a2(2);

    Eigen::Matrix2d sys;
    sys << 2.0 * A, B, B, 2.0 * C;
    const Eigen::Vector2d c = sys.lu().solve(Eigen::Vector2d(-D, -E));
    const double f0 = F + 0.5 * (D * c(0) + E * c(1));
    Eigen::Matrix2d quad;
    quad << A, 0.5 * B, 0.5 * B, C;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qs(quad);
    const Eigen::Vector2d lam = qs.eigenvalues();
    if (!(-f0 / lam(0) > 0.0) || !(-f0 / lam(1) > 0.0)) {
        throw FitError("ellipse fit: degenerate conic");
    }
    EllipseFit out;
    out.center = mean + scale * c;
    out.semi_axes << scale * std::sqrt(-f0 / lam(0)), scale * std::sqrt(-f0 / lam(1));
    const Eigen::Vector2d axis = qs.eigenvectors().col(0);
    out.rotation = std::atan2(axis(1), axis(0));
    if (std::abs(lam(0) - lam(1)) <= 1e-12 * lam.cwiseAbs().maxCoeff()) out.rotation = 0.0;
    normalize_rotation(out);
    return out;
}

PointSet2D ellipse_points(const EllipseFit& e, const Eigen::VectorXd& phi) {
    const Eigen::Rotation2Dd rot(e.rotation);
    PointSet2D out(2, phi.size());
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
        out.col(i) = e.center + rot * Eigen::Vector2d(e.semi_axes(0) * std::cos(phi(i)),
                                                      e.semi_axes(1) * std::sin(phi(i)));
    }
    return out;
}

EllipseFit fit_ellipse(const PointSet2D& points) {
    const EllipseFit start = fit_ellipse_direct(points);
    const Eigen::Index n = points.cols();

    // Parameters: cx, cy, a, b, theta, then one angle per point.
    Eigen::VectorXd init(5 + n);
    init << start.center, start.semi_axes, start.rotation, Eigen::VectorXd::Zero(n);
    const Eigen::Rotation2Dd inv(-start.rotation);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector2d local = inv * (points.col(i) - start.center);
        init(5 + i) = std::atan2(local(1) / start.semi_axes(1), local(0) / start.semi_axes(0));
    }
    const ResidualFn residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r,
                                    Eigen::MatrixXd* jac) {
        const double ct = std::cos(p(4)), st = std::sin(p(4));
        r.resize(2 * n);
        if (jac) jac->setZero(2 * n, 5 + n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double cp = std::cos(p(5 + i)), sp = std::sin(p(5 + i));
            const double ex = p(2) * cp, ey = p(3) * sp;
            const double mx = p(0) + ct * ex - st * ey;
            const double my = p(1) + st * ex + ct * ey;
            r(2 * i) = points(0, i) - mx;
            r(2 * i + 1) = points(1, i) - my;
            if (!jac) continue;
            auto& j = *jac;
            j(2 * i, 0) = -1.0;
            j(2 * i + 1, 1) = -1.0;
            j(2 * i, 2) = -ct * cp;
            j(2 * i + 1, 2) = -st * cp;
            j(2 * i, 3) = st * sp;
            j(2 * i + 1, 3) = -ct * sp;
            j(2 * i, 4) = st * ex + ct * ey;
            j(2 * i + 1, 4) = -ct * ex + st * ey;
            const double dx = -p(2) * sp, dy = p(3) * cp;
            j(2 * i, 5 + i) = -(ct * dx - st * dy);
            j(2 * i + 1, 5 + i) = -(st * dx + ct * dy);
        }
    };
    LmOptions opts;
    opts.compute_covariance = false;
    const LeastSquaresResult ls = least_squares(residual, init, opts);
    EllipseFit out;
    out.center = ls.params.head<2>();
    out.semi_axes = ls.params.segment<2>(2).cwiseAbs();
    out.rotation = ls.params(4);
    out.rms_distance = std::sqrt(ls.cost / static_cast<double>(n));
    normalize_rotation(out);
    return out;
}

CircleFit fit_circle(const PointSet2D& points) {
    const Eigen::Index n = points.cols();
    if (n < 3) throw InvalidParameter("circle fit needs at least 3 points");
    check_spread(points, "circle fit");
    const Eigen::Vector2d mean = points.rowwise().mean();
    const Eigen::Matrix2Xd q = points.colwise() - mean;

    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design.row(i) << q(0, i), q(1, i), 1.0;
        rhs(i) = -q.col(i).squaredNorm();
    }
    const Eigen::Vector3d abc = design.colPivHouseholderQr().solve(rhs);
    const Eigen::Vector2d c(-0.5 * abc(0), -0.5 * abc(1));
    const double r2 = c.squaredNorm() - abc(2);
    if (!(r2 > 0.0)) throw FitError("circle fit: degenerate algebraic solution");

    const ResidualFn residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r,
                                    Eigen::MatrixXd* jac) {
        r.resize(n);
        if (jac) jac->resize(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Vector2d d = q.col(i) - p.head<2>();
            const double dist = d.norm();
            r(i) = dist - p(2);
            if (jac) jac->row(i) << -d(0) / dist, -d(1) / dist, -1.0;
        }
    };
    Eigen::Vector3d init(c(0), c(1), std::sqrt(r2));
    LmOptions opts;
    opts.compute_covariance = false;
    const LeastSquaresResult ls = least_squares(residual, init, opts);
    CircleFit out;
    out.center = mean + ls.params.head<2>();
    out.radius = std::abs(ls.params(2));
    out.rms_distance = std::sqrt(ls.cost / static_cast<double>(n));
    return out;
}

PointSet2D tether_edge(double t, double c, double s, double x0, const Eigen::VectorXd& x, bool upper) {
    PointSet2D out(2, x.size());
    const double sign = upper ? 1.0 : -1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double u = x(i) - x0;
        out(0, i) = x(i);
        out(1, i) = sign * (0.5 * t + c * u * u / (1.0 + std::abs(u) / s));
    }
    return out;
}

namespace {

Eigen::Vector4d fit_edge(const PointSet2D& edge, bool upper) {
    const Eigen::Index n = edge.cols();
    if (n < 5) throw InvalidParameter("tether edge needs at least 5 points");
    const Eigen::VectorXd x = edge.row(0).transpose();
    const Eigen::VectorXd y = edge.row(1).transpose();
    Eigen::Index k;
    const double y0 = upper ? y.minCoeff(&k) : y.maxCoeff(&k);
    const double xmin = x.minCoeff(), xmax = x.maxCoeff();
    if (x(k) == xmin || x(k) == xmax) {
        throw FitError("tether edge has no waist: the extreme point lies on the boundary");
    }
    const double s0 = 0.5 * (xmax - xmin);
    // Curvature guess from a one-parameter least-squares fit around the vertex.
    const Eigen::ArrayXd u = x.array() - x(k);
    const Eigen::ArrayXd basis = u.square() / (1.0 + u.abs() / s0);
    const double c0 = (basis * (y.array() - y0)).sum() / basis.square().sum();
    Eigen::VectorXd init(4);
    init << x(k), y0, c0, std::log(s0);
    const CurveFit fit = fit_nonlinear(models::waist(), x, y, Eigen::VectorXd::Ones(n), init,
                                       LmOptions{.compute_covariance = false});
    const Eigen::Vector4d p = fit.params;
    if ((upper && !(p(2) > 0.0)) || (!upper && !(p(2) < 0.0)) || p(0) < xmin || p(0) > xmax) {
        throw FitError("tether edge has no waist inside the sampled range");
    }
    return p;
}

} // namespace

TetherFit fit_tether_width(const PointSet2D& upper_edge, const PointSet2D& lower_edge) {
    TetherFit out;
    out.upper = fit_edge(upper_edge, true);
    out.lower = fit_edge(lower_edge, false);
    out.width = out.upper(1) - out.lower(1);
    out.waist_x = 0.5 * (out.upper(0) + out.lower(0));
    if (!(out.width > 0.0)) throw FitError("tether edges cross");
    return out;
}

HistogramStats gaussian_histogram_stats(const std::vector<double>& values, int bins) {
    if (values.size() < 10) throw InvalidParameter("histogram statistics need at least 10 samples");
    if (bins < 3) throw InvalidParameter("histogram needs at least 3 bins");
    HistogramStats out;
    out.count = static_cast<int>(values.size());
    const Eigen::Map<const Eigen::VectorXd> v(values.data(), out.count);
    out.mean = v.mean();
    out.sd = std::sqrt((v.array() - out.mean).square().sum() / (out.count - 1));
    if (!(v.maxCoeff() > v.minCoeff())) {
        out.sd = 0.0;
        out.degenerate = true;
        out.bin_edges = Eigen::VectorXd::Constant(2, v.minCoeff());
        out.bin_counts = Eigen::VectorXd::Constant(1, out.count);
        return out;
    }
    // Bins span mean +- 4 sd so the fit sees both tails, not a window
    // clipped at the sample extremes.
    const double lo = std::min(v.minCoeff(), out.mean - 4.0 * out.sd);
    const double hi = std::max(v.maxCoeff(), out.mean + 4.0 * out.sd);
    out.bin_edges = Eigen::VectorXd::LinSpaced(bins + 1, lo, hi);
    out.bin_counts = Eigen::VectorXd::Zero(bins);
    const double width = (hi - lo) / bins;
    for (double x : values) {
        const int b = std::min(bins - 1, static_cast<int>((x - lo) / width));
        out.bin_counts(b) += 1.0;
    }
    const Eigen::VectorXd centers =
        0.5 * (out.bin_edges.head(bins) + out.bin_edges.tail(bins));
    const CurveModel gauss = models::gaussian();
    Eigen::VectorXd init(3);
    init << out.bin_counts.maxCoeff(), out.mean, out.sd;
    // Poisson likelihood through signed deviance residuals,
    // r = sign(m - n) sqrt(2 (m - n + n ln(n / m))).
    const Eigen::VectorXd& n = out.bin_counts;
    const ResidualFn deviance = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        Eigen::VectorXd m;
        Eigen::MatrixXd dm;
        gauss.evaluate(centers, p, m, jac ? &dm : nullptr);
        r.resize(bins);
        Eigen::VectorXd drdm(bins);
        for (int i = 0; i < bins; ++i) {
            const double mi = std::max(m(i), 1e-300);
            const double d = 2.0 * (mi - n(i) + (n(i) > 0.0 ? n(i) * std::log(n(i) / mi) : 0.0));
            r(i) = std::copysign(std::sqrt(std::max(d, 0.0)), mi - n(i));
            // dr/dm = (1 - n/m) / r, which tends to 1/sqrt(m) as m -> n.
            drdm(i) = std::abs(r(i)) > 1e-8 ? (1.0 - n(i) / mi) / r(i) : 1.0 / std::sqrt(mi);
        }
        if (jac) *jac = drdm.asDiagonal() * dm;
    };
    try {
        const LeastSquaresResult res = least_squares(deviance, init);
        CurveFit fit;
        fit.tag = gauss.tag;
        fit.params = res.params;
        fit.params(2) = std::abs(fit.params(2));
        fit.errors = res.errors;
        fit.covariance = res.covariance;
        fit.chi2 = res.cost;
        fit.dof = bins - 3;
        fit.iterations = res.iterations;
        out.gaussian = fit;
    } catch (const FitError&) {
        out.degenerate = true;
    }
    return out;
}

} // namespace pnc
