// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>

#include "modular.hpp"

namespace varexp
{
    // Difference stencils on a masked grid. At a masked node, the derivative
    // along an axis is central when both neighbours are masked, one-sided
    // towards the single masked neighbour otherwise, and 0 for an isolated
    // node. Unmasked nodes get 0. Vector/tensor kinds of dimension D act on the
    // last D grid axes, so space-time fields (time on axis 0) work unchanged.

    struct StencilTerm
    {
        std::size_t node;
        double weight;
    };

    struct Stencil
    {
        std::array<StencilTerm, 2> terms{};
        int size = 0;
    };

    template <std::size_t N>
    Stencil difference_stencil(const Region<N>& region, std::size_t n, std::size_t axis)
    {
        Stencil st;
        if (!region.inside(n))
        {
            return st;
        }
        const auto& g = region.grid();
        const int i = g.index(n)[axis];
        const std::size_t s = g.stride(axis);
        const double h = g.spacing()[axis];
        const bool plus = i + 1 < g.dims()[axis] && region.inside(n + s);
        const bool minus = i > 0 && region.inside(n - s);
        if (plus && minus)
        {
            st.terms = {StencilTerm{n + s, 0.5 / h}, StencilTerm{n - s, -0.5 / h}};
            st.size = 2;
        }
        else if (plus)
        {
            st.terms = {StencilTerm{n + s, 1.0 / h}, StencilTerm{n, -1.0 / h}};
            st.size = 2;
        }
        else if (minus)
        {
            st.terms = {StencilTerm{n, 1.0 / h}, StencilTerm{n - s, -1.0 / h}};
            st.size = 2;
        }
        return st;
    }

    /// Partial derivative of component c of f along grid axis `axis`.
    template <std::size_t N, class Kind>
    double partial_at(const Field<N, Kind>& f, int c, std::size_t axis, const Region<N>& region, std::size_t n)
    {
        const Stencil st = difference_stencil(region, n, axis);
        double v = 0.0;
        for (int t = 0; t < st.size; ++t)
        {
            v += st.terms[t].weight * f(st.terms[t].node, c);
        }
        return v;
    }

    /// Spatial gradient of a scalar field: component j is d/dx_j over the last D axes.
    template <int D, std::size_t N>
    VectorField<N, D> gradient_scalar(const ScalarField<N>& f, const Region<N>& region)
    {
        static_assert(D >= 1 && static_cast<std::size_t>(D) <= N);
        require(f.grid() == region.grid(), "gradient: grid mismatch");
        constexpr std::size_t off = N - D;
        VectorField<N, D> out(f.grid());
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            for (int j = 0; j < D; ++j)
            {
                out(n, j) = partial_at(f, 0, off + j, region, n);
            }
        }
        return out;
    }

    /// (grad u)_{ij} = d u_i / d x_j, stored row-major.
    template <std::size_t N, int D>
    TensorField<N, D> gradient(const VectorField<N, D>& u, const Region<N>& region)
    {
        static_assert(static_cast<std::size_t>(D) <= N);
        require(u.grid() == region.grid(), "gradient: grid mismatch");
        constexpr std::size_t off = N - D;
        TensorField<N, D> out(u.grid());
        for (std::size_t n = 0; n < u.nodes(); ++n)
        {
            if (!region.inside(n))
            {
                continue;
            }
            for (int j = 0; j < D; ++j)
            {
                const Stencil st = difference_stencil(region, n, off + j);
                for (int i = 0; i < D; ++i)
                {
                    double v = 0.0;
                    for (int t = 0; t < st.size; ++t)
                    {
                        v += st.terms[t].weight * u(st.terms[t].node, i);
                    }
                    out(n, i * D + j) = v;
                }
            }
        }
        return out;
    }

    template <std::size_t N, int D>
    TensorField<N, D> gradient(const VectorField<N, D>& u, const Domain<N>& domain)
    {
        return gradient(u, Region<N>::of(domain));
    }

    /// Symmetric part of a full tensor field.
    template <std::size_t N, int D>
    SymTensorField<N, D> symmetrize(const TensorField<N, D>& g)
    {
        SymTensorField<N, D> out(g.grid());
        for (std::size_t n = 0; n < g.nodes(); ++n)
        {
            for (int i = 0; i < D; ++i)
            {
                for (int j = i; j < D; ++j)
                {
                    out(n, SymTensor<D>::slot(i, j)) = 0.5 * (g(n, i * D + j) + g(n, j * D + i));
                }
            }
        }
        return out;
    }

    template <std::size_t N, int D>
    SymTensorField<N, D> sym_gradient(const VectorField<N, D>& u, const Region<N>& region)
    {
        return symmetrize(gradient(u, region));
    }

    template <std::size_t N, int D>
    SymTensorField<N, D> sym_gradient(const VectorField<N, D>& u, const Domain<N>& domain)
    {
        return sym_gradient(u, Region<N>::of(domain));
    }

    /// Exact transpose of sym_gradient with respect to the node-wise inner
    /// products: sum_n T(n) : eps(u)(n) = sum_n adj(T)(n) . u(n).
    template <std::size_t N, int D>
    VectorField<N, D> sym_gradient_adjoint(const SymTensorField<N, D>& T, const Region<N>& region)
    {
        require(T.grid() == region.grid(), "sym_gradient_adjoint: grid mismatch");
        constexpr std::size_t off = N - D;
        VectorField<N, D> out(T.grid());
        for (std::size_t n = 0; n < T.nodes(); ++n)
        {
            if (!region.inside(n))
            {
                continue;
            }
            for (int j = 0; j < D; ++j)
            {
                const Stencil st = difference_stencil(region, n, off + j);
                for (int t = 0; t < st.size; ++t)
                {
                    for (int i = 0; i < D; ++i)
                    {
                        out(st.terms[t].node, i) += st.terms[t].weight * T(n, SymTensor<D>::slot(i, j));
                    }
                }
            }
        }
        return out;
    }

    /// Row-wise divergence (div T)_i = sum_j d T_ij / d x_j.
    template <std::size_t N, int D>
    VectorField<N, D> divergence(const SymTensorField<N, D>& T, const Region<N>& region)
    {
        require(T.grid() == region.grid(), "divergence: grid mismatch");
        constexpr std::size_t off = N - D;
        VectorField<N, D> out(T.grid());
        for (std::size_t n = 0; n < T.nodes(); ++n)
        {
            if (!region.inside(n))
            {
                continue;
            }
            for (int j = 0; j < D; ++j)
            {
                const Stencil st = difference_stencil(region, n, off + j);
                for (int t = 0; t < st.size; ++t)
                {
                    for (int i = 0; i < D; ++i)
                    {
                        out(n, i) += st.terms[t].weight * T(st.terms[t].node, SymTensor<D>::slot(i, j));
                    }
                }
            }
        }
        return out;
    }

    template <std::size_t N, int D>
    VectorField<N, D> divergence(const SymTensorField<N, D>& T, const Domain<N>& domain)
    {
        return divergence(T, Region<N>::of(domain));
    }

    /// div u = sum_i d u_i / d x_i.
    template <std::size_t N, int D>
    ScalarField<N> divergence(const VectorField<N, D>& u, const Region<N>& region)
    {
        require(u.grid() == region.grid(), "divergence: grid mismatch");
        constexpr std::size_t off = N - D;
        ScalarField<N> out(u.grid());
        for (std::size_t n = 0; n < u.nodes(); ++n)
        {
            for (int i = 0; i < D; ++i)
            {
                out(n) += partial_at(u, i, off + i, region, n);
            }
        }
        return out;
    }

    struct KornReport
    {
        double grad_norm = 0.0;
        double sym_norm = 0.0;
        double ratio = 0.0;   // infinite when flagged
        bool rigid = false;   // eps(u) vanishes while grad u does not
    };

    /// ||grad u||_p / ||eps(u)||_p for a single spatial exponent.
    template <std::size_t N, int D>
    KornReport korn_steady_check(const VectorField<N, D>& u, const ExponentField<N>& p, const Domain<N>& domain,
                                 double tol = 1e-8)
    {
        static_assert(N == static_cast<std::size_t>(D), "korn_steady_check: spatial fields only");
        const Region<N> region = Region<N>::of(domain);
        KornReport rep;
        rep.grad_norm = luxembourg_norm(gradient(u, region), p, region, tol);
        rep.sym_norm = luxembourg_norm(sym_gradient(u, region), p, region, tol);
        if (rep.sym_norm <= 1e-12 * rep.grad_norm || rep.sym_norm == 0.0)
        {
            rep.rigid = rep.grad_norm > 0.0;
            rep.ratio = rep.rigid ? std::numeric_limits<double>::infinity() : 0.0;
            return rep;
        }
        rep.ratio = rep.grad_norm / rep.sym_norm;
        return rep;
    }
}
