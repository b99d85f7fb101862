// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "error.hpp"

namespace varexp
{
    template <std::size_t N>
    using Point = std::array<double, N>;

    template <std::size_t N>
    using Index = std::array<int, N>;

    /// Uniform structured grid. Node i has coordinate origin + i * spacing on
    /// every axis; the last axis is the fastest varying one in flat storage.
    /// Space-time grids put time on axis 0.
    template <std::size_t N>
    class Grid
    {
      public:
        static constexpr std::size_t dimension = N;

        Grid() = default;

        Grid(Index<N> dims, Point<N> spacing, Point<N> origin)
            : dims_(dims)
            , spacing_(spacing)
            , origin_(origin)
        {
            for (std::size_t a = 0; a < N; ++a)
            {
                require(dims_[a] >= 2, "Grid: every axis needs at least 2 nodes (axis " + std::to_string(a) + ")");
                require(spacing_[a] > 0.0 && std::isfinite(spacing_[a]), "Grid: spacing must be positive");
                require(std::isfinite(origin_[a]), "Grid: origin must be finite");
            }
            std::size_t stride = 1;
            for (std::size_t a = N; a-- > 0;)
            {
                strides_[a] = stride;
                stride *= static_cast<std::size_t>(dims_[a]);
            }
            size_ = stride;
        }

        /// n nodes at the centers of n equal cells covering [lo, hi] on every axis.
        static Grid cell_centered(const Point<N>& lo, const Point<N>& hi, const Index<N>& n)
        {
            Point<N> h{};
            Point<N> o{};
            for (std::size_t a = 0; a < N; ++a)
            {
                require(hi[a] > lo[a], "Grid::cell_centered: empty interval");
                h[a] = (hi[a] - lo[a]) / n[a];
                o[a] = lo[a] + 0.5 * h[a];
            }
            return Grid(n, h, o);
        }

        /// n + 1 nodes including both endpoints of [lo, hi] on every axis.
        static Grid vertex_centered(const Point<N>& lo, const Point<N>& hi, const Index<N>& cells)
        {
            Point<N> h{};
            Index<N> n{};
            for (std::size_t a = 0; a < N; ++a)
            {
                require(hi[a] > lo[a], "Grid::vertex_centered: empty interval");
                h[a] = (hi[a] - lo[a]) / cells[a];
                n[a] = cells[a] + 1;
            }
            return Grid(n, h, lo);
        }

        const Index<N>& dims() const noexcept
        {
            return dims_;
        }

        const Point<N>& spacing() const noexcept
        {
            return spacing_;
        }

        const Point<N>& origin() const noexcept
        {
            return origin_;
        }

        std::size_t size() const noexcept
        {
            return size_;
        }

        std::size_t stride(std::size_t axis) const noexcept
        {
            return strides_[axis];
        }

        double cell_volume() const noexcept
        {
            double v = 1.0;
            for (double h : spacing_)
            {
                v *= h;
            }
            return v;
        }

        double min_spacing() const noexcept
        {
            double m = spacing_[0];
            for (double h : spacing_)
            {
                m = std::min(m, h);
            }
            return m;
        }

        double max_spacing() const noexcept
        {
            double m = spacing_[0];
            for (double h : spacing_)
            {
                m = std::max(m, h);
            }
            return m;
        }

        double coordinate(std::size_t axis, int i) const noexcept
        {
            return origin_[axis] + i * spacing_[axis];
        }

        /// Largest coordinate on an axis.
        double upper(std::size_t axis) const noexcept
        {
            return coordinate(axis, dims_[axis] - 1);
        }

        std::size_t flat(const Index<N>& idx) const noexcept
        {
            std::size_t f = 0;
            for (std::size_t a = 0; a < N; ++a)
            {
                f += static_cast<std::size_t>(idx[a]) * strides_[a];
            }
            return f;
        }

        Index<N> index(std::size_t flat) const noexcept
        {
            Index<N> idx{};
            for (std::size_t a = 0; a < N; ++a)
            {
                idx[a] = static_cast<int>(flat / strides_[a]);
                flat %= strides_[a];
            }
            return idx;
        }

        bool contains(const Index<N>& idx) const noexcept
        {
            for (std::size_t a = 0; a < N; ++a)
            {
                if (idx[a] < 0 || idx[a] >= dims_[a])
                {
                    return false;
                }
            }
            return true;
        }

        Point<N> point(const Index<N>& idx) const noexcept
        {
            Point<N> x{};
            for (std::size_t a = 0; a < N; ++a)
            {
                x[a] = coordinate(a, idx[a]);
            }
            return x;
        }

        Point<N> point(std::size_t flat) const noexcept
        {
            return point(index(flat));
        }

        /// Index of the node nearest to x; components may fall outside the grid.
        Index<N> nearest(const Point<N>& x) const noexcept
        {
            Index<N> idx{};
            for (std::size_t a = 0; a < N; ++a)
            {
                idx[a] = static_cast<int>(std::lround((x[a] - origin_[a]) / spacing_[a]));
            }
            return idx;
        }

        bool operator==(const Grid& other) const noexcept
        {
            return dims_ == other.dims_ && spacing_ == other.spacing_ && origin_ == other.origin_;
        }

      private:
        Index<N> dims_{};
        Point<N> spacing_{};
        Point<N> origin_{};
        std::array<std::size_t, N> strides_{};
        std::size_t size_ = 0;
    };

    /// Space-time grid with time on axis 0.
    template <std::size_t D>
    Grid<D + 1> space_time(const Grid<1>& time, const Grid<D>& space)
    {
        Index<D + 1> n{};
        Point<D + 1> h{};
        Point<D + 1> o{};
        n[0] = time.dims()[0];
        h[0] = time.spacing()[0];
        o[0] = time.origin()[0];
        for (std::size_t a = 0; a < D; ++a)
        {
            n[a + 1] = space.dims()[a];
            h[a + 1] = space.spacing()[a];
            o[a + 1] = space.origin()[a];
        }
        return Grid<D + 1>(n, h, o);
    }

    template <std::size_t N>
    Grid<1> time_axis(const Grid<N>& st)
    {
        return Grid<1>({st.dims()[0]}, {st.spacing()[0]}, {st.origin()[0]});
    }

    template <std::size_t N>
    Grid<N - 1> space_axes(const Grid<N>& st)
    {
        constexpr std::size_t D = N - 1;
        Index<D> n{};
        Point<D> h{};
        Point<D> o{};
        for (std::size_t a = 0; a < D; ++a)
        {
            n[a] = st.dims()[a + 1];
            h[a] = st.spacing()[a + 1];
            o[a] = st.origin()[a + 1];
        }
        return Grid<D>(n, h, o);
    }

    template <std::size_t N>
    double distance(const Point<N>& a, const Point<N>& b) noexcept
    {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i)
        {
            s += (a[i] - b[i]) * (a[i] - b[i]);
        }
        return std::sqrt(s);
    }

    /// True when `inner` nodes coincide with nodes of `outer` (same spacing,
    /// integer node offset) and lie inside it. Writes the offset on success.
    template <std::size_t N>
    bool aligned_inside(const Grid<N>& inner, const Grid<N>& outer, Index<N>& offset)
    {
        for (std::size_t a = 0; a < N; ++a)
        {
            const double h = outer.spacing()[a];
            if (std::abs(inner.spacing()[a] - h) > 1e-12 * h)
            {
                return false;
            }
            const double shift = (inner.origin()[a] - outer.origin()[a]) / h;
            const double rounded = std::round(shift);
            if (std::abs(shift - rounded) > 1e-8)
            {
                return false;
            }
            offset[a] = static_cast<int>(rounded);
            if (offset[a] < 0 || offset[a] + inner.dims()[a] > outer.dims()[a])
            {
                return false;
            }
        }
        return true;
    }
}
