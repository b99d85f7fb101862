// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "error.hpp"

namespace varexp
{
    struct QuadratureRule
    {
        std::vector<double> nodes;
        std::vector<double> weights;
    };

    /// n-point Gauss-Legendre rule on [-1, 1].
    inline QuadratureRule gauss_legendre(int n)
    {
        require(n >= 1, "gauss_legendre: need at least one node");
        QuadratureRule q;
        q.nodes.resize(n);
        q.weights.resize(n);
        for (int i = 0; i < (n + 1) / 2; ++i)
        {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it)
            {
                double p0 = 1.0;
                double p1 = x;
                for (int k = 2; k <= n; ++k)
                {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                if (n == 1)
                {
                    p1 = x;
                    p0 = 1.0;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16)
                {
                    break;
                }
            }
            q.nodes[i] = -x;
            q.nodes[n - 1 - i] = x;
            q.weights[i] = q.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        return q;
    }

    /// Integral of fn over [a, b] with an n-point Gauss-Legendre rule.
    template <class Fn>
    double integrate_gl(Fn&& fn, double a, double b, const QuadratureRule& rule)
    {
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        double s = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        {
            s += rule.weights[i] * fn(mid + half * rule.nodes[i]);
        }
        return s * half;
    }

    /// Composite Gauss-Legendre over `panels` equal sub-intervals.
    template <class Fn>
    double integrate_gl_composite(Fn&& fn, double a, double b, int panels, const QuadratureRule& rule)
    {
        double s = 0.0;
        const double w = (b - a) / panels;
        for (int k = 0; k < panels; ++k)
        {
            s += integrate_gl(fn, a + k * w, a + (k + 1) * w, rule);
        }
        return s;
    }
}
