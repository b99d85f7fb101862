// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <vector>

#include "domain.hpp"

namespace varexp
{
    /// Default pair radius, in grid cells, for the log-Hoelder estimate.
    template <std::size_t N>
    constexpr int default_clog_radius() noexcept
    {
        return N <= 2 ? 8 : 4;
    }

    /// max over node pairs with index offset at most `radius_cells` per axis of
    /// |p(x) - p(y)| * log(e + 1/|x - y|).
    template <std::size_t N>
    double estimate_clog(const ScalarField<N>& p, int radius_cells = default_clog_radius<N>())
    {
        require(radius_cells >= 1, "estimate_clog: radius must be at least one cell");
        const auto& g = p.grid();
        // Half of the offset cube: the first nonzero component is positive.
        std::vector<Index<N>> offsets;
        std::vector<double> weights;
        Index<N> k{};
        k.fill(-radius_cells);
        while (true)
        {
            bool positive = false;
            for (std::size_t a = 0; a < N; ++a)
            {
                if (k[a] != 0)
                {
                    positive = k[a] > 0;
                    break;
                }
            }
            if (positive)
            {
                double s = 0.0;
                for (std::size_t a = 0; a < N; ++a)
                {
                    s += (k[a] * g.spacing()[a]) * (k[a] * g.spacing()[a]);
                }
                offsets.push_back(k);
                weights.push_back(std::log(std::exp(1.0) + 1.0 / std::sqrt(s)));
            }
            std::size_t a = N;
            while (a-- > 0)
            {
                if (++k[a] <= radius_cells)
                {
                    break;
                }
                k[a] = -radius_cells;
            }
            if (a == static_cast<std::size_t>(-1))
            {
                break;
            }
        }
        double best = 0.0;
        for (std::size_t n = 0; n < g.size(); ++n)
        {
            const auto idx = g.index(n);
            for (std::size_t o = 0; o < offsets.size(); ++o)
            {
                Index<N> m{};
                for (std::size_t a = 0; a < N; ++a)
                {
                    m[a] = idx[a] + offsets[o][a];
                }
                if (!g.contains(m))
                {
                    continue;
                }
                const double dp = std::abs(p(n) - p(g.flat(m)));
                if (dp > 0.0)
                {
                    best = std::max(best, dp * weights[o]);
                }
            }
        }
        return best;
    }

    /// Sampled variable exponent with its bounds and log-Hoelder estimate.
    template <std::size_t N>
    class ExponentField
    {
      public:
        /// Computes p-, p+ and the clog estimate from the samples.
        explicit ExponentField(ScalarField<N> values, int clog_radius = default_clog_radius<N>())
            : values_(std::move(values))
        {
            bounds_();
            clog_ = estimate_clog(values_, clog_radius);
        }

        /// Uses a known clog value instead of estimating it.
        ExponentField(ScalarField<N> values, double clog)
            : values_(std::move(values))
            , clog_(clog)
        {
            bounds_();
            require(std::isfinite(clog_) && clog_ >= 0.0, "ExponentField: clog must be finite and non-negative");
        }

        static ExponentField constant(const Grid<N>& grid, double q)
        {
            return ExponentField(ScalarField<N>(grid, q), 0.0);
        }

        const Grid<N>& grid() const noexcept
        {
            return values_.grid();
        }

        double operator()(std::size_t n) const noexcept
        {
            return values_(n);
        }

        const ScalarField<N>& values() const noexcept
        {
            return values_;
        }

        double p_minus() const noexcept
        {
            return p_minus_;
        }

        double p_plus() const noexcept
        {
            return p_plus_;
        }

        double clog() const noexcept
        {
            return clog_;
        }

        bool is_constant() const noexcept
        {
            return p_minus_ == p_plus_;
        }

      private:
        void bounds_()
        {
            require(values_.nodes() > 0, "ExponentField: empty grid");
            p_minus_ = std::numeric_limits<double>::infinity();
            p_plus_ = -std::numeric_limits<double>::infinity();
            for (double v : values_.values())
            {
                require(std::isfinite(v), "ExponentField: non-finite exponent value");
                p_minus_ = std::min(p_minus_, v);
                p_plus_ = std::max(p_plus_, v);
            }
            require(p_minus_ > 1.0, "ExponentField: exponent must exceed 1 everywhere (p- = " + std::to_string(p_minus_) + ")");
        }

        ScalarField<N> values_;
        double p_minus_ = 0.0;
        double p_plus_ = 0.0;
        double clog_ = 0.0;
    };

    /// p' = p / (p - 1), with (p')- = (p+)' and (p')+ = (p-)'.
    template <std::size_t N>
    ExponentField<N> conjugate(const ExponentField<N>& p)
    {
        require(p.p_minus() > 1.0, "conjugate: p- must exceed 1");
        ScalarField<N> q(p.grid());
        for (std::size_t n = 0; n < q.nodes(); ++n)
        {
            q(n) = p(n) / (p(n) - 1.0);
        }
        return ExponentField<N>(std::move(q));
    }

    /// The same spatial exponent at every node of a time axis. The clog
    /// estimate carries over: time offsets lengthen distances at unchanged |dp|.
    template <std::size_t D>
    ExponentField<D + 1> extend_constant_in_time(const ExponentField<D>& p, const Grid<1>& time)
    {
        ScalarField<1> one(time, 1.0);
        return ExponentField<D + 1>(separable_product(one, p.values()), p.clog());
    }

    /// rho_p(f) = integral over the region of |f|^p; zero nodes contribute 0.
    template <std::size_t N, class Kind>
    double modular(const Field<N, Kind>& f, const ExponentField<N>& p, const Region<N>& region)
    {
        require(f.grid() == p.grid() && f.grid() == region.grid(), "modular: field, exponent and region grids differ");
        double s = 0.0;
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            if (!region.inside(n))
            {
                continue;
            }
            const double a = f.norm_at(n);
            if (a > 0.0)
            {
                s += std::pow(a, p(n));
            }
        }
        return s * region.weight();
    }

    template <std::size_t D, class Kind>
    double modular(const Field<D, Kind>& f, const ExponentField<D>& p, const Domain<D>& domain)
    {
        return modular(f, p, Region<D>::of(domain));
    }

    struct NormResult
    {
        double norm = 0.0;
        double modular_at_norm = 0.0; // rho(f / norm); 0 for f = 0
        bool flagged = false;         // |rho(f / norm) - 1| > 10 tol
        int iterations = 0;
    };

    /// Luxembourg norm by bracketing and bisection on lambda -> rho(f / lambda).
    template <std::size_t N, class Kind>
    NormResult luxembourg_norm_detail(const Field<N, Kind>& f, const ExponentField<N>& p, const Region<N>& region,
                                      double tol = 1e-8)
    {
        require(tol > 0.0, "luxembourg_norm: tol must be positive");
        require(f.grid() == p.grid() && f.grid() == region.grid(), "luxembourg_norm: field, exponent and region grids differ");
        std::vector<double> logs;
        std::vector<double> exps;
        double sup = 0.0;
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            if (!region.inside(n))
            {
                continue;
            }
            const double a = f.norm_at(n);
            require(std::isfinite(a), "luxembourg_norm: non-finite field value");
            if (a > 0.0)
            {
                logs.push_back(std::log(a));
                exps.push_back(p(n));
                sup = std::max(sup, a);
            }
        }
        NormResult res;
        if (logs.empty())
        {
            return res;
        }
        const double w = region.weight();
        const auto rho = [&](double lambda) {
            const double ll = std::log(lambda);
            double s = 0.0;
            for (std::size_t i = 0; i < logs.size(); ++i)
            {
                s += std::exp(exps[i] * (logs[i] - ll));
            }
            return s * w;
        };
        double hi = std::max(1.0, sup) * std::pow(std::max(1.0, region.measure()), 1.0 / p.p_minus());
        while (rho(hi) > 1.0)
        {
            hi *= 2.0;
            ++res.iterations;
        }
        double lo = 0.5 * hi;
        while (rho(lo) <= 1.0)
        {
            hi = lo;
            lo *= 0.5;
            ++res.iterations;
            require(lo > std::numeric_limits<double>::min(), "luxembourg_norm: bracket underflow");
        }
        while ((hi - lo) > tol * hi)
        {
            const double mid = 0.5 * (lo + hi);
            (rho(mid) > 1.0 ? lo : hi) = mid;
            ++res.iterations;
        }
        res.norm = 0.5 * (lo + hi);
        res.modular_at_norm = rho(res.norm);
        res.flagged = std::abs(res.modular_at_norm - 1.0) > 10.0 * tol;
        if (res.flagged)
        {
            std::clog << "varexp: luxembourg_norm: modular at the returned norm is " << res.modular_at_norm
                      << " (expected 1 within " << 10.0 * tol << ")\n";
        }
        return res;
    }

    template <std::size_t N, class Kind>
    double luxembourg_norm(const Field<N, Kind>& f, const ExponentField<N>& p, const Region<N>& region, double tol = 1e-8)
    {
        return luxembourg_norm_detail(f, p, region, tol).norm;
    }

    template <std::size_t D, class Kind>
    double luxembourg_norm(const Field<D, Kind>& f, const ExponentField<D>& p, const Domain<D>& domain, double tol = 1e-8)
    {
        return luxembourg_norm_detail(f, p, Region<D>::of(domain), tol).norm;
    }

    /// Constant-exponent Lebesgue norm (integral of |f|^q)^(1/q) over the region.
    template <std::size_t N, class Kind>
    double lebesgue_norm(const Field<N, Kind>& f, double q, const Region<N>& region)
    {
        require(q >= 1.0, "lebesgue_norm: q must be at least 1");
        require(f.grid() == region.grid(), "lebesgue_norm: grid mismatch");
        double s = 0.0;
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            if (region.inside(n))
            {
                const double a = f.norm_at(n);
                if (a > 0.0)
                {
                    s += std::pow(a, q);
                }
            }
        }
        return std::pow(s * region.weight(), 1.0 / q);
    }

    /// Integral of f . g (full contraction for vectors and tensors).
    template <std::size_t N, class Kind>
    double holder_pairing(const Field<N, Kind>& f, const Field<N, Kind>& g, const Region<N>& region)
    {
        require(f.grid() == g.grid() && f.grid() == region.grid(), "holder_pairing: grid mismatch");
        double s = 0.0;
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            if (region.inside(n))
            {
                s += Kind::dot(f.node(n), g.node(n));
            }
        }
        return s * region.weight();
    }

    template <std::size_t D, class Kind>
    double holder_pairing(const Field<D, Kind>& f, const Field<D, Kind>& g, const Domain<D>& domain)
    {
        return holder_pairing(f, g, Region<D>::of(domain));
    }
}
