// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "field.hpp"

namespace varexp
{
    enum class DomainKind
    {
        rectangle,
        disc,
        polygon_mask
    };

    /// Masked region of a spatial grid together with r(x) = dist(x, boundary).
    /// Masked-out nodes carry r = 0 and, by convention, fields vanish there.
    template <std::size_t D>
    class Domain
    {
      public:
        Domain(Grid<D> grid, std::vector<std::uint8_t> mask, std::vector<double> r, DomainKind kind)
            : grid_(std::move(grid))
            , mask_(std::move(mask))
            , r_(std::move(r))
            , kind_(kind)
        {
            require(mask_.size() == grid_.size() && r_.size() == grid_.size(), "Domain: mask/distance size mismatch");
        }

        const Grid<D>& grid() const noexcept
        {
            return grid_;
        }

        bool inside(std::size_t n) const noexcept
        {
            return mask_[n] != 0;
        }

        const std::vector<std::uint8_t>& mask() const noexcept
        {
            return mask_;
        }

        double r(std::size_t n) const noexcept
        {
            return r_[n];
        }

        const std::vector<double>& distances() const noexcept
        {
            return r_;
        }

        DomainKind kind() const noexcept
        {
            return kind_;
        }

        std::size_t count() const noexcept
        {
            return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
        }

        bool empty() const noexcept
        {
            return count() == 0;
        }

        double measure() const noexcept
        {
            return static_cast<double>(count()) * grid_.cell_volume();
        }

        // Analytic description, when known.
        Point<D> center{};
        double radius = 0.0;
        Point<D> lower{};
        Point<D> upper{};

      private:
        Grid<D> grid_;
        std::vector<std::uint8_t> mask_;
        std::vector<double> r_;
        DomainKind kind_;
    };

    /// Disc (ball) {|x - center| < radius}; r = radius - |x - center|.
    template <std::size_t D>
    Domain<D> make_disc_domain(const Point<D>& center, double radius, const Grid<D>& grid)
    {
        require(radius > 0.0, "make_disc_domain: radius must be positive");
        for (std::size_t a = 0; a < D; ++a)
        {
            require(center[a] - radius > grid.coordinate(a, 0) && center[a] + radius < grid.upper(a),
                    "make_disc_domain: disc of radius " + std::to_string(radius) + " is not contained in the grid extent on axis " +
                        std::to_string(a));
        }
        std::vector<std::uint8_t> mask(grid.size(), 0);
        std::vector<double> r(grid.size(), 0.0);
        for (std::size_t n = 0; n < grid.size(); ++n)
        {
            const double rho = distance(grid.point(n), center);
            if (rho < radius)
            {
                mask[n] = 1;
                r[n] = radius - rho;
            }
        }
        Domain<D> dom(grid, std::move(mask), std::move(r), DomainKind::disc);
        dom.center = center;
        dom.radius = radius;
        return dom;
    }

    /// Open box (lower, upper); r = distance to the nearest face.
    template <std::size_t D>
    Domain<D> make_rectangle_domain(const Point<D>& lower, const Point<D>& upper, const Grid<D>& grid)
    {
        for (std::size_t a = 0; a < D; ++a)
        {
            require(upper[a] > lower[a], "make_rectangle_domain: empty box");
            const double half = 0.5 * grid.spacing()[a] * (1.0 + 1e-9);
            require(lower[a] >= grid.coordinate(a, 0) - half && upper[a] <= grid.upper(a) + half,
                    "make_rectangle_domain: box is not contained in the grid extent");
        }
        std::vector<std::uint8_t> mask(grid.size(), 0);
        std::vector<double> r(grid.size(), 0.0);
        const double slack = 1e-12 * grid.min_spacing();
        for (std::size_t n = 0; n < grid.size(); ++n)
        {
            const auto x = grid.point(n);
            double d = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < D; ++a)
            {
                d = std::min({d, x[a] - lower[a], upper[a] - x[a]});
            }
            if (d > slack)
            {
                mask[n] = 1;
                r[n] = d;
            }
        }
        Domain<D> dom(grid, std::move(mask), std::move(r), DomainKind::rectangle);
        dom.lower = lower;
        dom.upper = upper;
        return dom;
    }

    /// Arbitrary mask. r is the brute-force distance to the nearest unmasked
    /// node adjacent to the mask (grid-edge ghost nodes count as unmasked).
    template <std::size_t D>
    Domain<D> make_polygon_domain(const Grid<D>& grid, std::vector<std::uint8_t> mask)
    {
        require(mask.size() == grid.size(), "make_polygon_domain: mask size mismatch");
        std::vector<Point<D>> boundary;
        for (std::size_t n = 0; n < grid.size(); ++n)
        {
            const auto idx = grid.index(n);
            for (std::size_t a = 0; a < D; ++a)
            {
                for (int s : {-1, 1})
                {
                    auto nb = idx;
                    nb[a] += s;
                    const bool nb_in = grid.contains(nb) && mask[grid.flat(nb)] != 0;
                    if (mask[n] != 0 && !nb_in && !grid.contains(nb))
                    {
                        boundary.push_back(grid.point(nb));
                    }
                    if (mask[n] == 0 && grid.contains(nb) && mask[grid.flat(nb)] != 0)
                    {
                        boundary.push_back(grid.point(n));
                        a = D;
                        break;
                    }
                }
            }
        }
        std::vector<double> r(grid.size(), 0.0);
        for (std::size_t n = 0; n < grid.size(); ++n)
        {
            if (mask[n] == 0)
            {
                continue;
            }
            const auto x = grid.point(n);
            double d = std::numeric_limits<double>::infinity();
            for (const auto& b : boundary)
            {
                d = std::min(d, distance(x, b));
            }
            r[n] = std::isfinite(d) ? d : 0.0;
        }
        return Domain<D>(grid, std::move(mask), std::move(r), DomainKind::polygon_mask);
    }

    /// Convex polygon (2-D, counter-clockwise vertices) rasterised to a mask.
    inline Domain<2> make_convex_polygon_domain(const std::vector<Point<2>>& vertices, const Grid<2>& grid)
    {
        require(vertices.size() >= 3, "make_convex_polygon_domain: need at least 3 vertices");
        std::vector<std::uint8_t> mask(grid.size(), 0);
        for (std::size_t n = 0; n < grid.size(); ++n)
        {
            const auto x = grid.point(n);
            bool in = true;
            for (std::size_t v = 0; v < vertices.size() && in; ++v)
            {
                const auto& a = vertices[v];
                const auto& b = vertices[(v + 1) % vertices.size()];
                const double cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
                in = cross > 0.0;
            }
            mask[n] = in ? 1 : 0;
        }
        return make_polygon_domain(grid, std::move(mask));
    }

    /// Omega_eps = {x : r(x) > eps}, with r shifted by eps.
    template <std::size_t D>
    Domain<D> shrink(const Domain<D>& domain, double eps)
    {
        require(eps >= 0.0, "shrink: eps must be non-negative");
        std::vector<std::uint8_t> mask(domain.grid().size(), 0);
        std::vector<double> r(domain.grid().size(), 0.0);
        for (std::size_t n = 0; n < mask.size(); ++n)
        {
            if (domain.inside(n) && domain.r(n) > eps)
            {
                mask[n] = 1;
                r[n] = domain.r(n) - eps;
            }
        }
        Domain<D> out(domain.grid(), std::move(mask), std::move(r), domain.kind());
        out.center = domain.center;
        out.radius = std::max(0.0, domain.radius - eps);
        out.lower = domain.lower;
        out.upper = domain.upper;
        for (std::size_t a = 0; a < D; ++a)
        {
            out.lower[a] += eps;
            out.upper[a] -= eps;
        }
        return out;
    }

    /// Quadrature region on an N-dimensional grid: a node mask with the
    /// midpoint weight cell_volume on masked nodes.
    template <std::size_t N>
    class Region
    {
      public:
        Region(Grid<N> grid, std::vector<std::uint8_t> mask)
            : grid_(std::move(grid))
            , mask_(std::move(mask))
        {
            require(mask_.size() == grid_.size(), "Region: mask size mismatch");
        }

        /// Every node of the grid (R^n with zero extension beyond the grid).
        static Region whole(const Grid<N>& grid)
        {
            return Region(grid, std::vector<std::uint8_t>(grid.size(), 1));
        }

        static Region of(const Domain<N>& domain)
        {
            return Region(domain.grid(), domain.mask());
        }

        /// I x Omega: the spatial mask broadcast over every time node.
        template <std::size_t D>
        static Region cylinder(const Grid<1>& time, const Domain<D>& domain)
        {
            static_assert(D + 1 == N);
            const Grid<N> g = space_time(time, domain.grid());
            std::vector<std::uint8_t> mask(g.size());
            const std::size_t slice = domain.grid().size();
            for (int k = 0; k < time.dims()[0]; ++k)
            {
                std::copy(domain.mask().begin(), domain.mask().end(), mask.begin() + k * slice);
            }
            return Region(g, std::move(mask));
        }

        const Grid<N>& grid() const noexcept
        {
            return grid_;
        }

        bool inside(std::size_t n) const noexcept
        {
            return mask_[n] != 0;
        }

        const std::vector<std::uint8_t>& mask() const noexcept
        {
            return mask_;
        }

        double weight() const noexcept
        {
            return grid_.cell_volume();
        }

        std::size_t count() const noexcept
        {
            return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
        }

        double measure() const noexcept
        {
            return static_cast<double>(count()) * weight();
        }

        /// Intersection with another mask on the same grid.
        Region restricted(const std::vector<std::uint8_t>& other) const
        {
            require(other.size() == mask_.size(), "Region::restricted: mask size mismatch");
            std::vector<std::uint8_t> m(mask_.size());
            for (std::size_t i = 0; i < m.size(); ++i)
            {
                m[i] = (mask_[i] != 0 && other[i] != 0) ? 1 : 0;
            }
            return Region(grid_, std::move(m));
        }

      private:
        Grid<N> grid_;
        std::vector<std::uint8_t> mask_;
    };

    /// Midpoint-rule integral over the masked nodes, summed in node order.
    template <std::size_t N>
    double integrate(const ScalarField<N>& f, const Region<N>& region)
    {
        require(f.grid() == region.grid(), "integrate: field and region live on different grids");
        double s = 0.0;
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            if (region.inside(n))
            {
                s += f(n);
            }
        }
        return s * region.weight();
    }

    template <std::size_t D>
    double integrate(const ScalarField<D>& f, const Domain<D>& domain)
    {
        return integrate(f, Region<D>::of(domain));
    }

    /// Zeroes a field outside the mask.
    template <std::size_t N, class Kind>
    Field<N, Kind> masked(Field<N, Kind> f, const Region<N>& region)
    {
        require(f.grid() == region.grid(), "masked: grid mismatch");
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            if (!region.inside(n))
            {
                for (int c = 0; c < Kind::components; ++c)
                {
                    f(n, c) = 0.0;
                }
            }
        }
        return f;
    }

    template <std::size_t D, class Kind>
    Field<D, Kind> masked(Field<D, Kind> f, const Domain<D>& domain)
    {
        return masked(std::move(f), Region<D>::of(domain));
    }

    /// Indicator field of a domain's mask.
    template <std::size_t D>
    ScalarField<D> indicator(const Domain<D>& domain)
    {
        ScalarField<D> chi(domain.grid());
        for (std::size_t n = 0; n < chi.nodes(); ++n)
        {
            chi(n) = domain.inside(n) ? 1.0 : 0.0;
        }
        return chi;
    }
}
