// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "grid.hpp"

namespace varexp
{
    // Value kinds. Each carries its component count, name, and the Euclidean
    // (Frobenius for tensors) inner product on its storage.

    struct Scalar
    {
        static constexpr int components = 1;

        static std::string name()
        {
            return "scalar";
        }

        static double dot(const double* a, const double* b) noexcept
        {
            return a[0] * b[0];
        }

        static double norm(const double* a) noexcept
        {
            return std::abs(a[0]);
        }
    };

    template <int D>
    struct Vector
    {
        static constexpr int dim = D;
        static constexpr int components = D;

        static std::string name()
        {
            return "vector" + std::to_string(D);
        }

        static double dot(const double* a, const double* b) noexcept
        {
            double s = 0.0;
            for (int i = 0; i < D; ++i)
            {
                s += a[i] * b[i];
            }
            return s;
        }

        static double norm(const double* a) noexcept
        {
            return std::sqrt(dot(a, a));
        }
    };

    /// Symmetric D x D tensor stored as its upper triangle, row by row:
    /// (0,0), (0,1), ..., (0,D-1), (1,1), ...
    template <int D>
    struct SymTensor
    {
        static constexpr int dim = D;
        static constexpr int components = D * (D + 1) / 2;

        static std::string name()
        {
            return "symtensor" + std::to_string(D);
        }

        static constexpr int slot(int i, int j) noexcept
        {
            if (i > j)
            {
                const int t = i;
                i = j;
                j = t;
            }
            return i * D - i * (i - 1) / 2 + (j - i);
        }

        static double dot(const double* a, const double* b) noexcept
        {
            double s = 0.0;
            for (int i = 0; i < D; ++i)
            {
                s += a[slot(i, i)] * b[slot(i, i)];
                for (int j = i + 1; j < D; ++j)
                {
                    s += 2.0 * a[slot(i, j)] * b[slot(i, j)];
                }
            }
            return s;
        }

        static double norm(const double* a) noexcept
        {
            return std::sqrt(dot(a, a));
        }
    };

    /// Full D x D tensor, row-major: entry (i,j) at i*D + j.
    template <int D>
    struct Tensor
    {
        static constexpr int dim = D;
        static constexpr int components = D * D;

        static std::string name()
        {
            return "tensor" + std::to_string(D);
        }

        static double dot(const double* a, const double* b) noexcept
        {
            double s = 0.0;
            for (int i = 0; i < D * D; ++i)
            {
                s += a[i] * b[i];
            }
            return s;
        }

        static double norm(const double* a) noexcept
        {
            return std::sqrt(dot(a, a));
        }
    };

    template <int D>
    using Matrix = std::array<std::array<double, D>, D>;

    template <int D>
    std::array<double, SymTensor<D>::components> to_sym(const Matrix<D>& m)
    {
        std::array<double, SymTensor<D>::components> s{};
        for (int i = 0; i < D; ++i)
        {
            for (int j = i; j < D; ++j)
            {
                s[SymTensor<D>::slot(i, j)] = 0.5 * (m[i][j] + m[j][i]);
            }
        }
        return s;
    }

    template <int D>
    Matrix<D> from_sym(std::span<const double> s)
    {
        Matrix<D> m{};
        for (int i = 0; i < D; ++i)
        {
            for (int j = 0; j < D; ++j)
            {
                m[i][j] = s[SymTensor<D>::slot(i, j)];
            }
        }
        return m;
    }

    /// Sampled field on a structured grid: Kind::components numbers per node,
    /// node-major storage.
    template <std::size_t N, class Kind>
    class Field
    {
      public:
        using kind = Kind;
        static constexpr std::size_t dimension = N;
        static constexpr int components = Kind::components;

        Field() = default;

        explicit Field(Grid<N> grid, double fill = 0.0)
            : grid_(std::move(grid))
            , values_(grid_.size() * components, fill)
        {
        }

        Field(Grid<N> grid, std::vector<double> values)
            : grid_(std::move(grid))
            , values_(std::move(values))
        {
            require(values_.size() == grid_.size() * components, "Field: value count does not match grid size");
        }

        /// Samples fn(x) at every node; fn returns std::array<double, components>
        /// or, for scalar fields, a double.
        template <class Fn>
        static Field sample(const Grid<N>& grid, Fn&& fn)
        {
            Field f(grid);
            for (std::size_t n = 0; n < grid.size(); ++n)
            {
                const auto x = grid.point(n);
                if constexpr (components == 1 && std::is_convertible_v<std::invoke_result_t<Fn, const Point<N>&>, double>)
                {
                    f.values_[n] = fn(x);
                }
                else
                {
                    const auto v = fn(x);
                    for (int c = 0; c < components; ++c)
                    {
                        f.values_[n * components + c] = v[c];
                    }
                }
            }
            return f;
        }

        const Grid<N>& grid() const noexcept
        {
            return grid_;
        }

        std::size_t nodes() const noexcept
        {
            return grid_.size();
        }

        double* node(std::size_t n) noexcept
        {
            return values_.data() + n * components;
        }

        const double* node(std::size_t n) const noexcept
        {
            return values_.data() + n * components;
        }

        double& operator()(std::size_t n, int c = 0) noexcept
        {
            return values_[n * components + c];
        }

        double operator()(std::size_t n, int c = 0) const noexcept
        {
            return values_[n * components + c];
        }

        double norm_at(std::size_t n) const noexcept
        {
            return Kind::norm(node(n));
        }

        std::vector<double>& values() noexcept
        {
            return values_;
        }

        const std::vector<double>& values() const noexcept
        {
            return values_;
        }

        double max_norm() const noexcept
        {
            double m = 0.0;
            for (std::size_t n = 0; n < nodes(); ++n)
            {
                m = std::max(m, norm_at(n));
            }
            return m;
        }

        Field& operator+=(const Field& o)
        {
            require(o.grid_ == grid_, "Field: grid mismatch");
            for (std::size_t i = 0; i < values_.size(); ++i)
            {
                values_[i] += o.values_[i];
            }
            return *this;
        }

        Field& operator-=(const Field& o)
        {
            require(o.grid_ == grid_, "Field: grid mismatch");
            for (std::size_t i = 0; i < values_.size(); ++i)
            {
                values_[i] -= o.values_[i];
            }
            return *this;
        }

        Field& operator*=(double a) noexcept
        {
            for (double& v : values_)
            {
                v *= a;
            }
            return *this;
        }

        friend Field operator+(Field a, const Field& b)
        {
            return a += b;
        }

        friend Field operator-(Field a, const Field& b)
        {
            return a -= b;
        }

        friend Field operator*(double s, Field a)
        {
            return a *= s;
        }

      private:
        Grid<N> grid_;
        std::vector<double> values_;
    };

    template <std::size_t N>
    using ScalarField = Field<N, Scalar>;

    template <std::size_t N, int D>
    using VectorField = Field<N, Vector<D>>;

    template <std::size_t N, int D>
    using SymTensorField = Field<N, SymTensor<D>>;

    template <std::size_t N, int D>
    using TensorField = Field<N, Tensor<D>>;

    /// Pointwise norm |f(x)| as a scalar field.
    template <std::size_t N, class Kind>
    ScalarField<N> pointwise_norm(const Field<N, Kind>& f)
    {
        ScalarField<N> out(f.grid());
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            out(n) = f.norm_at(n);
        }
        return out;
    }

    /// Multiplies every component by a scalar field on the same grid.
    template <std::size_t N, class Kind>
    Field<N, Kind> multiply(const ScalarField<N>& s, const Field<N, Kind>& f)
    {
        require(s.grid() == f.grid(), "multiply: grid mismatch");
        Field<N, Kind> out = f;
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            for (int c = 0; c < Kind::components; ++c)
            {
                out(n, c) *= s(n);
            }
        }
        return out;
    }

    /// g(t) F(x) on the space-time grid of g's time axis and F's grid.
    template <std::size_t D, class Kind>
    Field<D + 1, Kind> separable_product(const ScalarField<1>& g, const Field<D, Kind>& f)
    {
        const Grid<D + 1> st = space_time(g.grid(), f.grid());
        Field<D + 1, Kind> out(st);
        const std::size_t slice = f.nodes() * Kind::components;
        for (int k = 0; k < g.grid().dims()[0]; ++k)
        {
            const double gk = g(static_cast<std::size_t>(k));
            double* dst = out.values().data() + k * slice;
            for (std::size_t i = 0; i < slice; ++i)
            {
                dst[i] = gk * f.values()[i];
            }
        }
        return out;
    }

    /// Time slice k of a space-time field.
    template <std::size_t N, class Kind>
    Field<N - 1, Kind> time_slice(const Field<N, Kind>& f, int k)
    {
        const Grid<N - 1> sg = space_axes(f.grid());
        const std::size_t slice = sg.size() * Kind::components;
        std::vector<double> v(f.values().begin() + k * slice, f.values().begin() + (k + 1) * slice);
        return Field<N - 1, Kind>(sg, std::move(v));
    }

    /// Stacks equally-gridded spatial fields along a new leading time axis.
    template <std::size_t D, class Kind>
    Field<D + 1, Kind> stack_in_time(const Grid<1>& time, const std::vector<Field<D, Kind>>& slices)
    {
        require(static_cast<int>(slices.size()) == time.dims()[0], "stack_in_time: slice count does not match time grid");
        Field<D + 1, Kind> out(space_time(time, slices.front().grid()));
        const std::size_t slice = slices.front().nodes() * Kind::components;
        for (std::size_t k = 0; k < slices.size(); ++k)
        {
            require(slices[k].grid() == slices.front().grid(), "stack_in_time: slices on different grids");
            std::copy(slices[k].values().begin(), slices[k].values().end(), out.values().begin() + k * slice);
        }
        return out;
    }
}
