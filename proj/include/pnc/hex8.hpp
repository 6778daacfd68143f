#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace pnc::hex8 {

// Reference corners, counter-clockwise on the bottom face then the top face.
inline constexpr std::array<std::array<int, 3>, 8> kCorners{{
    {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
    {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1},
}};

template <typename Scalar>
Eigen::Matrix<Scalar, 8, 1> shape(Scalar xi, Scalar eta, Scalar zeta) {
    Eigen::Matrix<Scalar, 8, 1> n;
    for (int a = 0; a < 8; ++a) {
        n(a) = Scalar(0.125) * (1 + kCorners[a][0] * xi) * (1 + kCorners[a][1] * eta) *
               (1 + kCorners[a][2] * zeta);
    }
    return n;
}

/// Derivatives w.r.t. (xi, eta, zeta); column a holds dN_a.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 8> shape_gradient(Scalar xi, Scalar eta, Scalar zeta) {
    Eigen::Matrix<Scalar, 3, 8> g;
    for (int a = 0; a < 8; ++a) {
        const Scalar sx = kCorners[a][0], sy = kCorners[a][1], sz = kCorners[a][2];
        g(0, a) = Scalar(0.125) * sx * (1 + sy * eta) * (1 + sz * zeta);
        g(1, a) = Scalar(0.125) * sy * (1 + sx * xi) * (1 + sz * zeta);
        g(2, a) = Scalar(0.125) * sz * (1 + sx * xi) * (1 + sy * eta);
    }
    return g;
}

/// Gauss-Legendre points and weights on [-1, 1].
struct GaussRule {
    std::vector<double> points;
    std::vector<double> weights;
};

inline GaussRule gauss_legendre(int n) {
    GaussRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.points[i] = -x;
        rule.points[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

} // namespace pnc::hex8
