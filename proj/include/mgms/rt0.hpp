#pragma once

#include "coefficient.hpp"

namespace mgms::rt0 {

using Triangle = std::array<Point, 3>;

inline Triangle vertices(const FineMesh& mesh, int c)
{
    const auto& v = mesh.cell(c);
    return {mesh.node(v[0]), mesh.node(v[1]), mesh.node(v[2])};
}

/// Shape function of local edge k with unit outward flux:
/// (x - P_k) / (2|T|), P_k the vertex opposite edge k.
inline Point shape(const Triangle& t, double area, int k, const Point& x)
{
    return (x - t[k]) / (2.0 * area);
}

/// Exact local mass matrix int_T kappa^-1 phi_k . phi_l for outward-oriented
/// shape functions. The integrand is quadratic, so the edge-midpoint rule
/// is exact.
inline Eigen::Matrix3d mass(const Triangle& t, double area, double inv_kappa)
{
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (int q = 0; q < 3; ++q) {
        const Point x = 0.5 * (t[(q + 1) % 3] + t[(q + 2) % 3]);
        std::array<Point, 3> phi;
        for (int k = 0; k < 3; ++k) phi[k] = shape(t, area, k, x);
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) m(k, l) += phi[k].dot(phi[l]);
    }
    return m * (inv_kappa * area / 3.0);
}

/// Mass matrix in the canonical (global) edge orientation of cell c.
inline Eigen::Matrix3d oriented_mass(const FineMesh& mesh, int c, double inv_kappa)
{
    Eigen::Matrix3d m = mass(vertices(mesh, c), mesh.area(c), inv_kappa);
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) m(k, l) *= mesh.orientation(c, k) * mesh.orientation(c, l);
    return m;
}

/// Value at x in cell c of the RT0 field with global flux DOFs `u`.
inline Point evaluate(const FineMesh& mesh, const Vec& u, int c, const Point& x)
{
    const Triangle t = vertices(mesh, c);
    Point v = Point::Zero();
    for (int k = 0; k < 3; ++k)
        v += mesh.orientation(c, k) * u[mesh.cell_edges(c)[k]] * shape(t, mesh.area(c), k, x);
    return v;
}

} // namespace mgms::rt0
