// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <varexp/rothe.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace varexp::oracle
{
    // The linear step (I/tau - div eps) u = u_prev/tau + f + div F assembled
    // as a sparse matrix from scratch: nodal central differences, one-sided
    // on the grid border, trapezoid weights on strain terms, solved by LDLT.
    inline VectorField<2, 2> linear_oracle(const ProblemData<2>& data, const VectorField<2, 2>& u_prev, int k)
    {
        const Grid<2>& g = data.domain.grid();
        const int nx = g.dims()[0], ny = g.dims()[1];
        const double hx = g.spacing()[0], hy = g.spacing()[1];
        const double w = hx * hy;
        std::vector<int> dof(g.size(), -1);
        int ndof = 0;
        for (int i = 1; i + 1 < nx; ++i)
        {
            for (int j = 1; j + 1 < ny; ++j)
            {
                const std::size_t n = g.flat({i, j});
                if (data.domain.inside(n))
                {
                    dof[n] = ndof;
                    ndof += 2;
                }
            }
        }
        // Rows: for each node, sqrt(q) * (e00, sqrt2 e01, e11).
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd Fvec = Eigen::VectorXd::Zero(3 * static_cast<int>(g.size()));
        const std::size_t S = g.size();
        for (int i = 0; i < nx; ++i)
        {
            for (int j = 0; j < ny; ++j)
            {
                const std::size_t n = g.flat({i, j});
                const double q = w * ((i == 0 || i == nx - 1) ? 0.5 : 1.0) * ((j == 0 || j == ny - 1) ? 0.5 : 1.0);
                const double sq = std::sqrt(q);
                // d/dx and d/dy stencils as (node, weight) lists.
                std::vector<std::pair<std::size_t, double>> dx, dy;
                if (i == 0)
                    dx = {{g.flat({1, j}), 1 / hx}, {n, -1 / hx}};
                else if (i == nx - 1)
                    dx = {{n, 1 / hx}, {g.flat({i - 1, j}), -1 / hx}};
                else
                    dx = {{g.flat({i + 1, j}), 0.5 / hx}, {g.flat({i - 1, j}), -0.5 / hx}};
                if (j == 0)
                    dy = {{g.flat({i, 1}), 1 / hy}, {n, -1 / hy}};
                else if (j == ny - 1)
                    dy = {{n, 1 / hy}, {g.flat({i, j - 1}), -1 / hy}};
                else
                    dy = {{g.flat({i, j + 1}), 0.5 / hy}, {g.flat({i, j - 1}), -0.5 / hy}};
                const int r = 3 * static_cast<int>(n);
                const auto add = [&](int row, std::size_t node, int comp, double v) {
                    if (dof[node] >= 0)
                    {
                        trip.emplace_back(row, dof[node] + comp, v);
                    }
                };
                for (auto [m, v] : dx)
                {
                    add(r, m, 0, sq * v);                          // e00 = du0/dx
                    add(r + 1, m, 1, sq * std::sqrt(0.5) * v);     // sqrt2 * 0.5 du1/dx
                }
                for (auto [m, v] : dy)
                {
                    add(r + 2, m, 1, sq * v);                      // e11 = du1/dy
                    add(r + 1, m, 0, sq * std::sqrt(0.5) * v);     // sqrt2 * 0.5 du0/dy
                }
                const std::size_t st = static_cast<std::size_t>(k) * S + n;
                Fvec[r] = sq * data.F(st, 0);
                Fvec[r + 1] = sq * std::sqrt(2.0) * data.F(st, 1);
                Fvec[r + 2] = sq * data.F(st, 2);
            }
        }
        Eigen::SparseMatrix<double> B(3 * static_cast<int>(S), ndof);
        B.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseMatrix<double> I(ndof, ndof);
        I.setIdentity();
        Eigen::SparseMatrix<double> A = (w / data.tau) * I;
        A += Eigen::SparseMatrix<double>(B.transpose() * B);
        Eigen::VectorXd rhs = B.transpose() * Fvec;
        for (std::size_t n = 0; n < S; ++n)
        {
            if (dof[n] < 0)
                continue;
            for (int c = 0; c < 2; ++c)
            {
                rhs[dof[n] + c] += w * (u_prev(n, c) / data.tau + data.f(static_cast<std::size_t>(k) * S + n, c));
            }
        }
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
        if (solver.info() != Eigen::Success)
        {
            throw std::runtime_error("linear_oracle: factorisation failed");
        }
        const Eigen::VectorXd x = solver.solve(rhs);
        VectorField<2, 2> out(g);
        for (std::size_t n = 0; n < S; ++n)
        {
            if (dof[n] >= 0)
            {
                out(n, 0) = x[dof[n]];
                out(n, 1) = x[dof[n] + 1];
            }
        }
        return out;
    }
}
