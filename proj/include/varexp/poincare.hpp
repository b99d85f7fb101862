// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "calculus.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace varexp
{
    /// Exterior cones x + C(axis, theta, h) at sampled boundary points.
    template <std::size_t D>
    struct ConeParams
    {
        double theta = M_PI / 4;
        double h = 1.0;
        std::vector<Point<D>> points;
        std::vector<Point<D>> axes;

        double h0() const noexcept
        {
            return h / 4.0;
        }

        double h1() const noexcept
        {
            return h0() / 4.0;
        }
    };

    namespace detail
    {
        template <std::size_t D>
        Point<D> normalized(Point<D> v)
        {
            double s = 0.0;
            for (double c : v)
            {
                s += c * c;
            }
            s = std::sqrt(s);
            require(s > 0.0, "normalized: zero vector");
            for (double& c : v)
            {
                c /= s;
            }
            return v;
        }

        /// Orthonormal complement of a unit vector (D - 1 vectors).
        template <std::size_t D>
        std::array<Point<D>, D - 1> complement(const Point<D>& axis)
        {
            std::array<Point<D>, D - 1> out{};
            std::size_t k = 0;
            for (std::size_t e = 0; e < D && k < D - 1; ++e)
            {
                Point<D> v{};
                v[e] = 1.0;
                const auto project = [&](const Point<D>& b) {
                    double dot = 0.0;
                    for (std::size_t a = 0; a < D; ++a)
                    {
                        dot += v[a] * b[a];
                    }
                    for (std::size_t a = 0; a < D; ++a)
                    {
                        v[a] -= dot * b[a];
                    }
                };
                project(axis);
                for (std::size_t j = 0; j < k; ++j)
                {
                    project(out[j]);
                }
                double s = 0.0;
                for (double c : v)
                {
                    s += c * c;
                }
                if (s > 1e-6)
                {
                    out[k++] = normalized(v);
                }
            }
            return out;
        }

        /// Whether y lies outside the domain: analytic for discs and boxes,
        /// nearest-node lookup for masks.
        template <std::size_t D>
        bool outside(const Domain<D>& domain, const Point<D>& y)
        {
            switch (domain.kind())
            {
            case DomainKind::disc:
                return distance(y, domain.center) >= domain.radius;
            case DomainKind::rectangle:
                for (std::size_t a = 0; a < D; ++a)
                {
                    if (y[a] <= domain.lower[a] || y[a] >= domain.upper[a])
                    {
                        return true;
                    }
                }
                return false;
            default:
            {
                const auto& g = domain.grid();
                Index<D> idx{};
                for (std::size_t a = 0; a < D; ++a)
                {
                    idx[a] = static_cast<int>(std::lround((y[a] - g.origin()[a]) / g.spacing()[a]));
                }
                return !g.contains(idx) || !domain.inside(g.flat(idx));
            }
            }
        }

        /// Sample points of x + C(axis, theta, h), skipping a neighbourhood of the apex of radius `skip`.
        template <std::size_t D>
        std::vector<Point<D>> cone_samples(const Point<D>& x, const Point<D>& axis, double theta, double h, double skip)
        {
            std::vector<Point<D>> out;
            const auto basis = complement(axis);
            const int radial = 12;
            const int angular = 9;
            for (int i = 1; i <= radial; ++i)
            {
                const double s = skip + (h - skip) * i / radial;
                for (int j = 0; j < angular; ++j)
                {
                    // Polar angle from the axis, strictly inside the opening.
                    const double phi = theta * (0.999 * j / (angular - 1));
                    const int turns = D == 2 ? 2 : 8;
                    for (int k = 0; k < turns; ++k)
                    {
                        Point<D> dir{};
                        double az = 2.0 * M_PI * k / turns;
                        for (std::size_t a = 0; a < D; ++a)
                        {
                            dir[a] = std::cos(phi) * axis[a];
                        }
                        if constexpr (D == 2)
                        {
                            const double sgn = k == 0 ? 1.0 : -1.0;
                            for (std::size_t a = 0; a < D; ++a)
                            {
                                dir[a] += sgn * std::sin(phi) * basis[0][a];
                            }
                        }
                        else
                        {
                            for (std::size_t a = 0; a < D; ++a)
                            {
                                dir[a] += std::sin(phi) * (std::cos(az) * basis[0][a] + std::sin(az) * basis[1][a]);
                            }
                        }
                        Point<D> y{};
                        for (std::size_t a = 0; a < D; ++a)
                        {
                            y[a] = x[a] + s * dir[a];
                        }
                        out.push_back(y);
                    }
                }
            }
            return out;
        }
    }

    /// Verifies that every cone in `cones` lies outside the domain; throws otherwise.
    template <std::size_t D>
    void verify_cones(const Domain<D>& domain, const ConeParams<D>& cones)
    {
        require(cones.theta > 0.0 && cones.theta < M_PI / 2, "cone_params: opening angle must lie in (0, pi/2)");
        require(cones.h > 0.0, "cone_params: height must be positive");
        require(cones.points.size() == cones.axes.size() && !cones.points.empty(), "cone_params: no boundary samples");
        const double skip = domain.kind() == DomainKind::polygon_mask ? 1.5 * domain.grid().max_spacing() : 0.0;
        for (std::size_t k = 0; k < cones.points.size(); ++k)
        {
            for (const auto& y : detail::cone_samples(cones.points[k], cones.axes[k], cones.theta, cones.h, skip))
            {
                require(detail::outside(domain, y), "cone_params: exterior cone check failed at a sampled boundary point");
            }
        }
    }

    /// Exterior cone parameters with outward axes, verified by sampling.
    template <std::size_t D>
    ConeParams<D> cone_params_for(const Domain<D>& domain, double theta = M_PI / 4)
    {
        require(theta > 0.0 && theta < M_PI / 2, "cone_params_for: opening angle must lie in (0, pi/2)");
        ConeParams<D> cp;
        cp.theta = theta;
        if (domain.kind() == DomainKind::disc)
        {
            cp.h = std::min(1.0, domain.radius);
            const int count = D == 2 ? 64 : 128;
            for (int k = 0; k < count; ++k)
            {
                Point<D> dir{};
                if constexpr (D == 2)
                {
                    dir = {std::cos(2.0 * M_PI * k / count), std::sin(2.0 * M_PI * k / count)};
                }
                else
                {
                    // Fibonacci sphere.
                    const double z = 1.0 - 2.0 * (k + 0.5) / count;
                    const double az = M_PI * (3.0 - std::sqrt(5.0)) * k;
                    const double rr = std::sqrt(1.0 - z * z);
                    dir = {rr * std::cos(az), rr * std::sin(az), z};
                }
                Point<D> x{};
                for (std::size_t a = 0; a < D; ++a)
                {
                    x[a] = domain.center[a] + domain.radius * dir[a];
                }
                cp.points.push_back(x);
                cp.axes.push_back(dir);
            }
        }
        else if (domain.kind() == DomainKind::rectangle)
        {
            double shortest = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < D; ++a)
            {
                shortest = std::min(shortest, domain.upper[a] - domain.lower[a]);
            }
            cp.h = std::min(1.0, 0.5 * shortest);
            // Face samples with outward normals.
            const int per = 5;
            for (std::size_t a = 0; a < D; ++a)
            {
                for (int side = 0; side < 2; ++side)
                {
                    const int total = D == 2 ? per : per * per;
                    for (int k = 0; k < total; ++k)
                    {
                        Point<D> x{};
                        Point<D> axis{};
                        int rem = k;
                        for (std::size_t b = 0; b < D; ++b)
                        {
                            if (b == a)
                            {
                                x[b] = side == 0 ? domain.lower[b] : domain.upper[b];
                                axis[b] = side == 0 ? -1.0 : 1.0;
                                continue;
                            }
                            const double f = (rem % per + 0.5) / per;
                            rem /= per;
                            x[b] = domain.lower[b] + f * (domain.upper[b] - domain.lower[b]);
                        }
                        cp.points.push_back(x);
                        cp.axes.push_back(axis);
                    }
                }
            }
            // Corners with diagonal axes.
            for (int c = 0; c < (1 << D); ++c)
            {
                Point<D> x{};
                Point<D> axis{};
                for (std::size_t a = 0; a < D; ++a)
                {
                    const bool hi = (c >> a) & 1;
                    x[a] = hi ? domain.upper[a] : domain.lower[a];
                    axis[a] = hi ? 1.0 : -1.0;
                }
                cp.points.push_back(x);
                cp.axes.push_back(detail::normalized(axis));
            }
        }
        else
        {
            // Mask boundary nodes; the axis points towards the unmasked neighbours.
            const auto& g = domain.grid();
            double rmax = 0.0;
            for (std::size_t n = 0; n < g.size(); ++n)
            {
                rmax = std::max(rmax, domain.r(n));
                if (!domain.inside(n))
                {
                    continue;
                }
                const auto idx = g.index(n);
                Point<D> axis{};
                bool boundary = false;
                for (std::size_t a = 0; a < D; ++a)
                {
                    for (int s : {-1, 1})
                    {
                        auto m = idx;
                        m[a] += s;
                        if (!g.contains(m) || !domain.inside(g.flat(m)))
                        {
                            axis[a] += s;
                            boundary = true;
                        }
                    }
                }
                if (!boundary || std::all_of(axis.begin(), axis.end(), [](double v) { return v == 0.0; }))
                {
                    continue;
                }
                const auto dir = detail::normalized(axis);
                Point<D> x = g.point(n);
                for (std::size_t a = 0; a < D; ++a)
                {
                    x[a] += 0.5 * g.spacing()[a] * dir[a];
                }
                cp.points.push_back(x);
                cp.axes.push_back(dir);
            }
            cp.h = std::min(1.0, rmax);
        }
        verify_cones(domain, cp);
        return cp;
    }

    /// H^{d-1} of a spherical cap of polar opening `opening` on the sphere of radius `radius`.
    inline double cap_area(int d, double opening, double radius)
    {
        require(opening > 0.0 && opening <= M_PI, "cap_area: opening must lie in (0, pi]");
        require(radius >= 0.0, "cap_area: negative radius");
        if (d == 2)
        {
            return 2.0 * opening * radius;
        }
        if (d == 3)
        {
            return 2.0 * M_PI * radius * radius * (1.0 - std::cos(opening));
        }
        throw invalid_input("cap_area: only d = 2 and d = 3 are supported");
    }

    /// Phi_i(eta) on the unit sphere, i in 1..D; Phi_i = E_i Phi_D.
    template <std::size_t D>
    Point<D> phi_map(int i, const std::array<double, D - 1>& eta)
    {
        require(i >= 1 && i <= static_cast<int>(D), "phi_map: axis index out of range");
        double s = 1.0;
        for (double e : eta)
        {
            s += e * e;
        }
        const double inv = 1.0 / std::sqrt(s);
        Point<D> out{};
        for (std::size_t j = 0; j + 1 < D; ++j)
        {
            out[j] = eta[j] * inv;
        }
        out[D - 1] = inv;
        if (i < static_cast<int>(D))
        {
            out[i - 1] = -out[i - 1];
        }
        return out;
    }

    /// Determinant of a small dense matrix by elimination with partial pivoting.
    template <std::size_t D>
    double determinant(std::array<Point<D>, D> m)
    {
        double det = 1.0;
        for (std::size_t c = 0; c < D; ++c)
        {
            std::size_t piv = c;
            for (std::size_t r = c + 1; r < D; ++r)
            {
                if (std::abs(m[r][c]) > std::abs(m[piv][c]))
                {
                    piv = r;
                }
            }
            if (m[piv][c] == 0.0)
            {
                return 0.0;
            }
            if (piv != c)
            {
                std::swap(m[piv], m[c]);
                det = -det;
            }
            det *= m[c][c];
            for (std::size_t r = c + 1; r < D; ++r)
            {
                const double f = m[r][c] / m[c][c];
                for (std::size_t k = c; k < D; ++k)
                {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        return det;
    }

    struct UpphiDet
    {
        double det = 0.0;
        bool flagged = false;  // some eta component is zero
    };

    /// det of the matrix with rows Phi_1(eta), ..., Phi_D(eta).
    template <std::size_t D>
    UpphiDet upphi_det(const std::array<double, D - 1>& eta)
    {
        std::array<Point<D>, D> m{};
        for (std::size_t i = 0; i < D; ++i)
        {
            m[i] = phi_map<D>(static_cast<int>(i) + 1, eta);
        }
        UpphiDet out;
        out.det = determinant<D>(m);
        out.flagged = std::any_of(eta.begin(), eta.end(), [](double e) { return e == 0.0; });
        return out;
    }

    /// min |det Upphi| over a tensor sweep of Q_alpha = {|eta| < alpha, |eta_i| > alpha / (2d)}.
    template <std::size_t D>
    double mu_alpha(double alpha, int per_axis = 64)
    {
        require(alpha > 0.0, "mu_alpha: alpha must be positive");
        const double floor = alpha / (2.0 * D);
        double best = std::numeric_limits<double>::infinity();
        std::array<int, D - 1> k{};
        while (true)
        {
            std::array<double, D - 1> eta{};
            double s = 0.0;
            for (std::size_t a = 0; a + 1 < D; ++a)
            {
                eta[a] = -alpha + 2.0 * alpha * (k[a] + 0.5) / per_axis;
                s += eta[a] * eta[a];
            }
            const bool in_q = s < alpha * alpha &&
                              std::all_of(eta.begin(), eta.end(), [&](double e) { return std::abs(e) > floor; });
            if (in_q)
            {
                best = std::min(best, std::abs(upphi_det<D>(eta).det));
            }
            std::size_t a = 0;
            while (a + 1 < D && ++k[a] == per_axis)
            {
                k[a] = 0;
                ++a;
            }
            if (a + 1 == D)
            {
                break;
            }
        }
        return best;
    }

    namespace detail
    {
        /// Integral of |y|^{1-D} over the box of half-widths `half` centred at the origin.
        /// Splitting into 3^D sub-boxes and using the 1-homogeneity I(s/3) = I(s)/3
        /// reduces it to 1.5 times the integral over the 3^D - 1 outer sub-boxes.
        template <std::size_t D>
        double singular_cell_integral(const Point<D>& half)
        {
            static const QuadratureRule rule = gauss_legendre(12);
            const int sub = 4;  // panels per outer sub-box axis
            double outer = 0.0;
            Index<D> box{};
            box.fill(-1);
            while (true)
            {
                if (!std::all_of(box.begin(), box.end(), [](int v) { return v == 0; }))
                {
                    const std::size_t per = rule.nodes.size() * sub;
                    std::size_t total = 1;
                    for (std::size_t a = 0; a < D; ++a)
                    {
                        total *= per;
                    }
                    for (std::size_t t = 0; t < total; ++t)
                    {
                        std::size_t rem = t;
                        double w = 1.0;
                        double r2 = 0.0;
                        for (std::size_t a = 0; a < D; ++a)
                        {
                            const std::size_t j = rem % per;
                            rem /= per;
                            const std::size_t panel = j / rule.nodes.size();
                            const std::size_t node = j % rule.nodes.size();
                            const double width = 2.0 * half[a] / 3.0;
                            const double lo = -half[a] + (box[a] + 1) * width + panel * width / sub;
                            const double y = lo + 0.5 * (rule.nodes[node] + 1.0) * width / sub;
                            w *= 0.5 * rule.weights[node] * width / sub;
                            r2 += y * y;
                        }
                        outer += w * std::pow(r2, 0.5 * (1.0 - static_cast<double>(D)));
                    }
                }
                std::size_t a = 0;
                while (a < D && ++box[a] == 2)
                {
                    box[a] = -1;
                    ++a;
                }
                if (a == D)
                {
                    break;
                }
            }
            return 1.5 * outer;
        }
    }

    /// Integral over B_radius(x) intersected with the domain of |E(y)| |x - y|^{1-D};
    /// the cell of x uses the exact cell integral of the kernel.
    template <std::size_t D>
    double riesz_integral(const SymTensorField<D, static_cast<int>(D)>& E, const Domain<D>& domain, std::size_t node,
                          double radius)
    {
        require(E.grid() == domain.grid(), "riesz_integral: grid mismatch");
        const auto& g = domain.grid();
        const Point<D> x = g.point(node);
        const auto xi = g.index(node);
        Index<D> reach{};
        for (std::size_t a = 0; a < D; ++a)
        {
            reach[a] = static_cast<int>(std::ceil(radius / g.spacing()[a]));
        }
        Point<D> half{};
        for (std::size_t a = 0; a < D; ++a)
        {
            half[a] = 0.5 * g.spacing()[a];
        }
        static thread_local Point<D> cached_half{};
        static thread_local double cached = -1.0;
        if (cached < 0.0 || cached_half != half)
        {
            cached = detail::singular_cell_integral<D>(half);
            cached_half = half;
        }
        double sum = domain.inside(node) ? E.norm_at(node) * cached : 0.0;
        Index<D> k{};
        for (std::size_t a = 0; a < D; ++a)
        {
            k[a] = -reach[a];
        }
        const double vol = g.cell_volume();
        while (true)
        {
            Index<D> y{};
            bool ok = true;
            bool centre = true;
            for (std::size_t a = 0; a < D; ++a)
            {
                y[a] = xi[a] + k[a];
                ok = ok && y[a] >= 0 && y[a] < g.dims()[a];
                centre = centre && k[a] == 0;
            }
            if (ok && !centre)
            {
                const std::size_t m = g.flat(y);
                if (domain.inside(m))
                {
                    const double d = distance(x, g.point(m));
                    if (d < radius)
                    {
                        sum += E.norm_at(m) * std::pow(d, 1.0 - static_cast<double>(D)) * vol;
                    }
                }
            }
            std::size_t a = D;
            while (a-- > 0)
            {
                if (++k[a] <= reach[a])
                {
                    break;
                }
                k[a] = -reach[a];
            }
            if (a == static_cast<std::size_t>(-1))
            {
                break;
            }
        }
        return sum;
    }

    /// Right-hand side of the pointwise inequality at node x: integral over B_{2 r(x)}.
    template <std::size_t D>
    double riesz_rhs(const VectorField<D, static_cast<int>(D)>& u, const Domain<D>& domain, std::size_t node)
    {
        require(domain.r(node) > 0.0, "riesz_rhs: sample must lie inside the domain");
        return riesz_integral(sym_gradient(u, domain), domain, node, 2.0 * domain.r(node));
    }

    template <std::size_t D>
    struct PoincareRow
    {
        Point<D> x{};
        double r = 0.0;
        double lhs = 0.0;
        double rhs = 0.0;
        double ratio = 0.0;
    };

    template <std::size_t D>
    struct PoincareReport
    {
        std::vector<PoincareRow<D>> rows;
        double c0 = 0.0;      // max lhs / rhs over rows with rhs above the floor
        double budget = 0.0;
        bool pass = false;    // lhs <= budget * rhs at every row
    };

    /// About `count` nodes with 0 < r(x) <= h0. On discs the nodes nearest to a
    /// polar lattice of targets are used, so the sample set tracks fixed
    /// physical points under refinement; otherwise the candidates are thinned
    /// evenly in flat order.
    template <std::size_t D>
    std::vector<std::size_t> near_boundary_samples(const Domain<D>& domain, double h0, std::size_t count)
    {
        const auto& g = domain.grid();
        const auto usable = [&](std::size_t n) { return domain.inside(n) && domain.r(n) > 0.0 && domain.r(n) <= h0; };
        std::vector<std::size_t> out;
        if (D == 2 && domain.kind() == DomainKind::disc)
        {
            const std::size_t rings = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(count / 8.0)));
            const std::size_t per = (count + rings - 1) / rings;
            for (std::size_t i = 0; i < rings && out.size() < count; ++i)
            {
                const double depth = h0 * (i + 0.5) / rings;
                for (std::size_t j = 0; j < per && out.size() < count; ++j)
                {
                    const double a = 2.0 * M_PI * (j + 0.5 * (i % 2)) / per;
                    Point<D> x{};
                    x[0] = domain.center[0] + (domain.radius - depth) * std::cos(a);
                    x[1] = domain.center[1] + (domain.radius - depth) * std::sin(a);
                    const auto idx = g.nearest(x);
                    if (!g.contains(idx))
                    {
                        continue;
                    }
                    const std::size_t n = g.flat(idx);
                    if (usable(n) && std::find(out.begin(), out.end(), n) == out.end())
                    {
                        out.push_back(n);
                    }
                }
            }
            return out;
        }
        std::vector<std::size_t> all;
        for (std::size_t n = 0; n < g.size(); ++n)
        {
            if (usable(n))
            {
                all.push_back(n);
            }
        }
        if (all.size() <= count)
        {
            return all;
        }
        for (std::size_t k = 0; k < count; ++k)
        {
            out.push_back(all[k * all.size() / count]);
        }
        return out;
    }

    /// Evaluates |u(x)| against the Riesz-type integral of |eps(u)| at each sample.
    /// A budget <= 0 reports the empirical constant and passes by definition.
    template <std::size_t D>
    PoincareReport<D> poincare_verify(const VectorField<D, static_cast<int>(D)>& u, const Domain<D>& domain,
                                      const std::vector<std::size_t>& samples, double h0, double budget = 0.0)
    {
        const auto& g = domain.grid();
        require(u.grid() == g, "poincare_verify: grid mismatch");
        for (std::size_t n = 0; n < g.size(); ++n)
        {
            if (u.norm_at(n) != 0.0)
            {
                require(domain.inside(n) && domain.r(n) > g.max_spacing(),
                        "poincare_verify: u must vanish within one cell of the boundary");
            }
        }
        for (std::size_t n : samples)
        {
            require(n < g.size() && domain.r(n) > 0.0 && domain.r(n) <= h0, "poincare_verify: samples need 0 < r(x) <= h0");
        }
        const auto E = sym_gradient(u, domain);
        PoincareReport<D> rep;
        rep.rows.resize(samples.size());
        parallel_for(
            samples.size(),
            [&](std::size_t k) {
                const std::size_t n = samples[k];
                auto& row = rep.rows[k];
                row.x = g.point(n);
                row.r = domain.r(n);
                row.lhs = u.norm_at(n);
                row.rhs = riesz_integral(E, domain, n, 2.0 * row.r);
            },
            1);
        double scale = 0.0;
        for (const auto& row : rep.rows)
        {
            scale = std::max({scale, row.lhs, row.rhs});
        }
        const double floor = 1e-13 * scale;
        for (auto& row : rep.rows)
        {
            if (row.rhs > floor)
            {
                row.ratio = row.lhs / row.rhs;
                rep.c0 = std::max(rep.c0, row.ratio);
            }
            else
            {
                row.ratio = row.lhs > floor ? std::numeric_limits<double>::infinity() : 0.0;
            }
        }
        rep.budget = budget > 0.0 ? budget : rep.c0;
        rep.pass = std::all_of(rep.rows.begin(), rep.rows.end(),
                               [&](const PoincareRow<D>& row) { return row.lhs <= rep.budget * row.rhs + floor; });
        return rep;
    }

    template <std::size_t D>
    void write_poincare_csv(const std::string& path, const PoincareReport<D>& rep, const std::string& comment = "")
    {
        auto os = detail::open_out(path);
        if (!comment.empty())
        {
            os << "# " << comment << "\n";
        }
        for (std::size_t a = 0; a < D; ++a)
        {
            os << 'x' << a + 1 << ',';
        }
        os << "r,lhs,rhs,ratio\n";
        for (const auto& row : rep.rows)
        {
            for (std::size_t a = 0; a < D; ++a)
            {
                os << detail::fmt_g17(row.x[a]) << ',';
            }
            os << detail::fmt_g17(row.r) << ',' << detail::fmt_g17(row.lhs) << ',' << detail::fmt_g17(row.rhs) << ','
               << detail::fmt_g17(row.ratio) << "\n";
        }
        os << "# c0 " << detail::fmt_g17(rep.c0) << " budget " << detail::fmt_g17(rep.budget) << ' '
           << (rep.pass ? "PASS" : "FAIL") << "\n";
    }
}
