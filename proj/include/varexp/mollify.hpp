// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "calculus.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace varexp
{
    /// Standard mollifier on R^n: omega(x) = c_norm exp(-1/(1-|x|^2)) on |x| < 1,
    /// scaled as omega_eps(x) = eps^-n omega(x/eps).
    template <std::size_t Dim>
    class MollifierFamily
    {
      public:
        static constexpr std::size_t dimension = Dim;

        MollifierFamily()
        {
            const auto rule = gauss_legendre(64);
            const double radial =
                integrate_gl_composite([](double r) { return bump(r * r) * std::pow(r, static_cast<double>(Dim) - 1.0); }, 0.0,
                                       1.0, 8, rule);
            const double sphere = 2.0 * std::pow(M_PI, 0.5 * Dim) / std::tgamma(0.5 * Dim);
            c_norm_ = 1.0 / (sphere * radial);
        }

        /// exp(-1/(1-s)) for s = |x|^2 < 1, else 0.
        static double bump(double s) noexcept
        {
            return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
        }

        double c_norm() const noexcept
        {
            return c_norm_;
        }

        double profile(const Point<Dim>& x) const noexcept
        {
            double s = 0.0;
            for (double v : x)
            {
                s += v * v;
            }
            return c_norm_ * bump(s);
        }

        double scaled(const Point<Dim>& x, double eps) const noexcept
        {
            Point<Dim> y{};
            for (std::size_t a = 0; a < Dim; ++a)
            {
                y[a] = x[a] / eps;
            }
            return profile(y) / std::pow(eps, static_cast<double>(Dim));
        }

      private:
        double c_norm_ = 0.0;
    };

    /// omega_eps sampled at lattice offsets k*spacing with |k*spacing| < eps,
    /// renormalised to unit sum. Stored as rows along the last axis.
    template <std::size_t N>
    class SampledKernel
    {
      public:
        struct Row
        {
            Index<N> lead{};  // offsets on axes 0..N-2 (last entry unused)
            int lo = 0;       // first last-axis offset
            std::vector<double> w;
        };

        SampledKernel(const Point<N>& spacing, double eps)
            : eps_(eps)
        {
            require(eps > 0.0 && std::isfinite(eps), "SampledKernel: eps must be positive");
            Index<N> reach{};
            for (std::size_t a = 0; a < N; ++a)
            {
                reach[a] = static_cast<int>(std::floor(eps / spacing[a]));
            }
            double total = 0.0;
            Index<N> k{};
            for (std::size_t a = 0; a + 1 < N; ++a)
            {
                k[a] = -reach[a];
            }
            while (true)
            {
                double lead2 = 0.0;
                for (std::size_t a = 0; a + 1 < N; ++a)
                {
                    lead2 += (k[a] * spacing[a]) * (k[a] * spacing[a]);
                }
                Row row;
                row.lead = k;
                for (int j = -reach[N - 1]; j <= reach[N - 1]; ++j)
                {
                    const double x = j * spacing[N - 1];
                    const double s = (lead2 + x * x) / (eps * eps);
                    if (s < 1.0)
                    {
                        if (row.w.empty())
                        {
                            row.lo = j;
                        }
                        row.w.push_back(MollifierFamily<N>::bump(s));
                    }
                }
                if (!row.w.empty())
                {
                    for (double v : row.w)
                    {
                        total += v;
                    }
                    rows_.push_back(std::move(row));
                }
                if (N == 1)
                {
                    break;
                }
                std::size_t a = N - 1;
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
            for (auto& row : rows_)
            {
                for (double& v : row.w)
                {
                    v /= total;
                }
            }
            norm_ = total;
        }

        double eps() const noexcept
        {
            return eps_;
        }

        const std::vector<Row>& rows() const noexcept
        {
            return rows_;
        }

        /// Raw (unnormalised) weight sum; multiply a bump value by 1/normaliser().
        double normaliser() const noexcept
        {
            return norm_;
        }

        std::size_t size() const noexcept
        {
            std::size_t s = 0;
            for (const auto& r : rows_)
            {
                s += r.w.size();
            }
            return s;
        }

        double sum() const noexcept
        {
            double s = 0.0;
            for (const auto& r : rows_)
            {
                for (double v : r.w)
                {
                    s += v;
                }
            }
            return s;
        }

        bool is_delta() const noexcept
        {
            return size() == 1;
        }

      private:
        double eps_;
        double norm_ = 1.0;
        std::vector<Row> rows_;
    };

    namespace detail
    {
        // Gather convolution out(x) = sum_k w_k f(x + k), f = 0 off the grid.
        // Work is organised per output line; source lines without nonzero
        // values are skipped through their [first, last] nonzero extent.
        template <std::size_t N, class Kind>
        Field<N, Kind> convolve_sampled(const Field<N, Kind>& f, const SampledKernel<N>& kernel)
        {
            constexpr int C = Kind::components;
            const auto& g = f.grid();
            const int len = g.dims()[N - 1];
            const std::size_t lines = g.size() / static_cast<std::size_t>(len);
            std::vector<int> first(lines, len);
            std::vector<int> last(lines, -1);
            const double* src = f.values().data();
            for (std::size_t l = 0; l < lines; ++l)
            {
                const double* line = src + l * len * C;
                for (int i = 0; i < len * C; ++i)
                {
                    if (line[i] != 0.0)
                    {
                        first[l] = std::min(first[l], i / C);
                        last[l] = std::max(last[l], i / C);
                    }
                }
            }
            Field<N, Kind> out(g);
            double* dst = out.values().data();
            const auto& rows = kernel.rows();
            // Leading index of a line, stored in an Index<N> with the last entry 0.
            const auto lead_of = [&](std::size_t l) {
                Index<N> idx = g.index(l * static_cast<std::size_t>(len));
                return idx;
            };
            parallel_for(
                lines,
                [&](std::size_t l) {
                    const Index<N> base = lead_of(l);
                    double* orow = dst + l * len * C;
                    for (const auto& row : rows)
                    {
                        Index<N> sidx = base;
                        bool ok = true;
                        for (std::size_t a = 0; a + 1 < N; ++a)
                        {
                            sidx[a] += row.lead[a];
                            if (sidx[a] < 0 || sidx[a] >= g.dims()[a])
                            {
                                ok = false;
                                break;
                            }
                        }
                        if (!ok)
                        {
                            continue;
                        }
                        sidx[N - 1] = 0;
                        const std::size_t sl = g.flat(sidx) / static_cast<std::size_t>(len);
                        if (last[sl] < 0)
                        {
                            continue;
                        }
                        const double* sline = src + sl * len * C;
                        const int rl = static_cast<int>(row.w.size());
                        const int ilo = std::max(0, first[sl] - row.lo - rl + 1);
                        const int ihi = std::min(len - 1, last[sl] - row.lo);
                        for (int i = ilo; i <= ihi; ++i)
                        {
                            const int jlo = std::max(0, first[sl] - row.lo - i);
                            const int jhi = std::min(rl - 1, last[sl] - row.lo - i);
                            for (int c = 0; c < C; ++c)
                            {
                                double s = 0.0;
                                for (int j = jlo; j <= jhi; ++j)
                                {
                                    s += row.w[j] * sline[(i + row.lo + j) * C + c];
                                }
                                orow[i * C + c] += s;
                            }
                        }
                    }
                },
                1);
            return out;
        }
    }

    /// omega_eps * f with the sampled, renormalised kernel; f is taken as 0
    /// beyond the grid. eps must be at least the largest grid spacing.
    template <std::size_t N, class Kind>
    Field<N, Kind> convolve(const Field<N, Kind>& f, double eps)
    {
        require(eps >= f.grid().max_spacing() * (1.0 - 1e-12),
                "convolve: eps = " + std::to_string(eps) + " is below the grid spacing " + std::to_string(f.grid().max_spacing()) +
                    "; the sampled kernel would collapse to a point. Use eps >= spacing or refine the grid.");
        return detail::convolve_sampled(f, SampledKernel<N>(f.grid().spacing(), eps));
    }

    /// Discrete Hardy-Littlewood maximal function of |f|: the largest average
    /// over closed lattice balls of radius m * min_spacing, m = 0, 1, ..., up to
    /// max_radius (default: grid diameter). Lattice points beyond the grid
    /// count in the denominator with value 0.
    template <std::size_t N, class Kind>
    ScalarField<N> maximal(const Field<N, Kind>& f, double max_radius = -1.0)
    {
        const auto& g = f.grid();
        double diam2 = 0.0;
        for (std::size_t a = 0; a < N; ++a)
        {
            const double L = (g.dims()[a] - 1) * g.spacing()[a];
            diam2 += L * L;
        }
        const double smin = g.min_spacing();
        if (max_radius < 0.0)
        {
            max_radius = std::sqrt(diam2);
        }
        const int mmax = static_cast<int>(std::ceil(max_radius / smin - 1e-9));
        const int len = g.dims()[N - 1];
        const std::size_t lines = g.size() / static_cast<std::size_t>(len);

        // Prefix sums of |f| along the last axis, one extra slot per line.
        std::vector<double> prefix(lines * (len + 1), 0.0);
        for (std::size_t l = 0; l < lines; ++l)
        {
            double s = 0.0;
            for (int i = 0; i < len; ++i)
            {
                s += f.norm_at(l * len + i);
                prefix[l * (len + 1) + i + 1] = s;
            }
        }

        // Ball m: list of (leading offset, last-axis half width) and lattice count.
        struct BallRow
        {
            Index<N> lead;
            int half;
        };
        std::vector<std::vector<BallRow>> balls(mmax + 1);
        std::vector<double> counts(mmax + 1, 0.0);
        for (int m = 0; m <= mmax; ++m)
        {
            const double r = m * smin;
            const double r2 = r * r * (1.0 + 1e-12);
            Index<N> reach{};
            for (std::size_t a = 0; a < N; ++a)
            {
                reach[a] = static_cast<int>(std::floor(r / g.spacing()[a] + 1e-9));
            }
            Index<N> k{};
            for (std::size_t a = 0; a + 1 < N; ++a)
            {
                k[a] = -reach[a];
            }
            while (true)
            {
                double lead2 = 0.0;
                for (std::size_t a = 0; a + 1 < N; ++a)
                {
                    lead2 += (k[a] * g.spacing()[a]) * (k[a] * g.spacing()[a]);
                }
                if (lead2 <= r2)
                {
                    const double rest = std::sqrt(std::max(0.0, r2 - lead2));
                    const int half = static_cast<int>(std::floor(rest / g.spacing()[N - 1] + 1e-9));
                    balls[m].push_back({k, half});
                    counts[m] += 2.0 * half + 1.0;
                }
                if (N == 1)
                {
                    break;
                }
                std::size_t a = N - 1;
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
        }

        ScalarField<N> out(g);
        parallel_for(
            g.size(),
            [&](std::size_t n) {
                const Index<N> idx = g.index(n);
                double best = 0.0;
                for (int m = 0; m <= mmax; ++m)
                {
                    double s = 0.0;
                    for (const auto& br : balls[m])
                    {
                        Index<N> src = idx;
                        bool ok = true;
                        for (std::size_t a = 0; a + 1 < N; ++a)
                        {
                            src[a] += br.lead[a];
                            if (src[a] < 0 || src[a] >= g.dims()[a])
                            {
                                ok = false;
                                break;
                            }
                        }
                        if (!ok)
                        {
                            continue;
                        }
                        src[N - 1] = 0;
                        const std::size_t l = g.flat(src) / static_cast<std::size_t>(len);
                        const int lo = std::max(0, idx[N - 1] - br.half);
                        const int hi = std::min(len - 1, idx[N - 1] + br.half);
                        s += prefix[l * (len + 1) + hi + 1] - prefix[l * (len + 1) + lo];
                    }
                    best = std::max(best, s / counts[m]);
                }
                out(n) = best;
            },
            64);
        return out;
    }

    /// Copies u into a larger grid whose nodes contain u's nodes; 0 elsewhere.
    template <std::size_t N, class Kind>
    Field<N, Kind> zero_extend(const Field<N, Kind>& u, const Grid<N>& target)
    {
        Index<N> off{};
        require(aligned_inside(u.grid(), target, off), "zero_extend: source grid is not node-aligned inside the target grid");
        Field<N, Kind> out(target);
        for (std::size_t n = 0; n < u.nodes(); ++n)
        {
            auto idx = u.grid().index(n);
            for (std::size_t a = 0; a < N; ++a)
            {
                idx[a] += off[a];
            }
            const std::size_t m = target.flat(idx);
            for (int c = 0; c < Kind::components; ++c)
            {
                out(m, c) = u(n, c);
            }
        }
        return out;
    }

    /// Values of u on the nodes of a node-aligned sub-grid.
    template <std::size_t N, class Kind>
    Field<N, Kind> restrict_to(const Field<N, Kind>& u, const Grid<N>& sub)
    {
        Index<N> off{};
        require(aligned_inside(sub, u.grid(), off), "restrict_to: target grid is not node-aligned inside the source grid");
        Field<N, Kind> out(sub);
        for (std::size_t n = 0; n < sub.size(); ++n)
        {
            auto idx = sub.index(n);
            for (std::size_t a = 0; a < N; ++a)
            {
                idx[a] += off[a];
            }
            const std::size_t m = u.grid().flat(idx);
            for (int c = 0; c < Kind::components; ++c)
            {
                out(n, c) = u(m, c);
            }
        }
        return out;
    }

    namespace detail
    {
        template <std::size_t N>
        void require_cell_centered_time(const Grid<N>& g)
        {
            const double tau = g.spacing()[0];
            require(std::abs(g.origin()[0] - 0.5 * tau) <= 1e-9 * tau,
                    "reflect_extend: time axis must be cell-centred on (0, T) (first node at tau/2)");
        }

        template <std::size_t N>
        Grid<N> reflected_grid(const Grid<N>& g)
        {
            Index<N> dims = g.dims();
            Point<N> origin = g.origin();
            const int K = dims[0];
            dims[0] = 3 * K;
            origin[0] = g.origin()[0] - K * g.spacing()[0];
            return Grid<N>(dims, g.spacing(), origin);
        }

        inline int reflected_source(int j, int K) noexcept
        {
            if (j < K)
            {
                return K - 1 - j;
            }
            if (j < 2 * K)
            {
                return j - K;
            }
            return 3 * K - 1 - j;
        }
    }

    /// Extension from I = (0, T) to (-T, 2T) in time (axis 0) by reflection at
    /// t = 0 and t = T. Requires a cell-centred time axis.
    template <std::size_t N, class Kind>
    Field<N, Kind> reflect_extend(const Field<N, Kind>& u)
    {
        detail::require_cell_centered_time(u.grid());
        const Grid<N> g = detail::reflected_grid(u.grid());
        const int K = u.grid().dims()[0];
        const std::size_t slice = u.grid().stride(0) * Kind::components;
        Field<N, Kind> out(g);
        for (int j = 0; j < 3 * K; ++j)
        {
            const int s = detail::reflected_source(j, K);
            std::copy(u.values().begin() + s * slice, u.values().begin() + (s + 1) * slice, out.values().begin() + j * slice);
        }
        return out;
    }

    /// Reflected exponent; mirrored pairs are never closer than the original
    /// pairs with the same values, so the clog estimate carries over.
    template <std::size_t N>
    ExponentField<N> reflect_extend(const ExponentField<N>& p)
    {
        return ExponentField<N>(reflect_extend(p.values()), p.clog());
    }

    /// Nearest-node clamped extension of an exponent onto another grid. p- and
    /// p+ are preserved; clog is re-estimated on the target grid.
    template <std::size_t N>
    ExponentField<N> clamp_extend(const ExponentField<N>& p, const Grid<N>& target)
    {
        const auto& g = p.grid();
        ScalarField<N> v(target);
        for (std::size_t n = 0; n < target.size(); ++n)
        {
            auto idx = g.nearest(target.point(n));
            for (std::size_t a = 0; a < N; ++a)
            {
                idx[a] = std::clamp(idx[a], 0, g.dims()[a] - 1);
            }
            v(n) = p(g.flat(idx));
        }
        return ExponentField<N>(std::move(v));
    }

    /// eta_h = omega_{h/2} * chi_{Omega_{5h/2}} on the domain's grid, with its
    /// gradient taken through the sampled kernel gradient. eta_h = 1 on
    /// Omega_{3h}, vanishes outside Omega_{2h}, and grad eta_h vanishes on
    /// Omega_{3h}, each node-exactly.
    template <std::size_t D>
    class CutoffFamily
    {
      public:
        CutoffFamily(const Domain<D>& domain, double h)
            : domain_(domain)
            , h_(h)
            , eta_(domain.grid())
            , grad_(domain.grid())
        {
            require(h > 0.0, "CutoffFamily: h must be positive");
            const auto& g = domain.grid();
            const Domain<D> core = shrink(domain, 2.5 * h);
            const double eps = 0.5 * h;
            // Offsets strictly inside the ball of radius eps with bump weights
            // and bump gradients; normalised by the weight sum.
            std::vector<Index<D>> offs;
            std::vector<double> w;
            std::vector<Point<D>> dw;
            Index<D> reach{};
            for (std::size_t a = 0; a < D; ++a)
            {
                reach[a] = static_cast<int>(std::floor(eps / g.spacing()[a]));
            }
            Index<D> k{};
            k.fill(0);
            for (std::size_t a = 0; a < D; ++a)
            {
                k[a] = -reach[a];
            }
            double total = 0.0;
            while (true)
            {
                Point<D> x{};
                double s = 0.0;
                for (std::size_t a = 0; a < D; ++a)
                {
                    x[a] = k[a] * g.spacing()[a];
                    s += x[a] * x[a];
                }
                s /= eps * eps;
                if (s < 1.0)
                {
                    const double b = MollifierFamily<D>::bump(s);
                    Point<D> grad{};
                    for (std::size_t a = 0; a < D; ++a)
                    {
                        grad[a] = -b * 2.0 * x[a] / (eps * eps) / ((1.0 - s) * (1.0 - s));
                    }
                    offs.push_back(k);
                    w.push_back(b);
                    dw.push_back(grad);
                    total += b;
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
            for (std::size_t i = 0; i < w.size(); ++i)
            {
                w[i] /= total;
                for (std::size_t a = 0; a < D; ++a)
                {
                    dw[i][a] /= total;
                }
            }
            double gmax = 0.0;
            for (std::size_t n = 0; n < g.size(); ++n)
            {
                const auto idx = g.index(n);
                double inside = 0.0;
                std::size_t hits = 0;
                Point<D> grad{};
                for (std::size_t i = 0; i < offs.size(); ++i)
                {
                    // eta(x) = sum_k w(k) chi(x - k); grad eta(x) = sum_k dw(k) chi(x - k).
                    Index<D> y = idx;
                    for (std::size_t a = 0; a < D; ++a)
                    {
                        y[a] -= offs[i][a];
                    }
                    const bool chi = g.contains(y) && core.inside(g.flat(y));
                    if (chi)
                    {
                        inside += w[i];
                        ++hits;
                    }
                    else
                    {
                        // sum_k dw(k) = 0, so the gradient is minus the sum over chi = 0.
                        for (std::size_t a = 0; a < D; ++a)
                        {
                            grad[a] -= dw[i][a];
                        }
                    }
                }
                if (hits == 0)
                {
                    eta_(n) = 0.0;
                    grad = Point<D>{};
                }
                else if (hits == offs.size())
                {
                    eta_(n) = 1.0;
                    grad = Point<D>{};
                }
                else
                {
                    eta_(n) = std::clamp(inside, 0.0, 1.0);
                }
                double gn = 0.0;
                for (std::size_t a = 0; a < D; ++a)
                {
                    grad_(n, static_cast<int>(a)) = grad[a];
                    gn += grad[a] * grad[a];
                }
                gmax = std::max(gmax, std::sqrt(gn));
            }
            c_eta_ = gmax * h;
        }

        const Domain<D>& domain() const noexcept
        {
            return domain_;
        }

        double h() const noexcept
        {
            return h_;
        }

        const ScalarField<D>& eta() const noexcept
        {
            return eta_;
        }

        const VectorField<D, static_cast<int>(D)>& grad_eta() const noexcept
        {
            return grad_;
        }

        /// sup |grad eta_h| * h.
        double c_eta() const noexcept
        {
            return c_eta_;
        }

      private:
        Domain<D> domain_;
        double h_;
        ScalarField<D> eta_;
        VectorField<D, static_cast<int>(D)> grad_;
        double c_eta_ = 0.0;
    };

    /// Smoothing operators on Q_T = I x Omega (time on axis 0). Output lives on
    /// the Q_T grid padded by ceil(h / tau) time nodes on each side, which
    /// holds (-h, T + h) x Omega.
    template <std::size_t D>
    class Smoother
    {
      public:
        static constexpr std::size_t N = D + 1;

        Smoother(const Grid<N>& qt, const Domain<D>& domain, double h)
            : qt_(qt)
            , h_(snap(h, domain.grid()))
            , cutoff_(domain, h_)
            , padded_(pad(qt, h_))
            , kernel_(qt.spacing(), h_)
        {
            require(space_axes(qt) == domain.grid(), "Smoother: space-time grid and domain grid differ");
        }

        /// h rounded to the nearest positive multiple of the spatial spacing.
        static double snap(double h, const Grid<D>& space)
        {
            const double s = space.max_spacing();
            require(h >= s * (1.0 - 1e-9), "Smoother: h = " + std::to_string(h) + " is below the spatial grid spacing " +
                                               std::to_string(s) + "; refine the grid or enlarge h");
            return std::max(1.0, std::round(h / s)) * s;
        }

        static Grid<N> pad(const Grid<N>& qt, double h)
        {
            const double tau = qt.spacing()[0];
            const int extra = static_cast<int>(std::ceil(h / tau - 1e-9));
            Index<N> dims = qt.dims();
            Point<N> origin = qt.origin();
            dims[0] += 2 * extra;
            origin[0] -= extra * tau;
            return Grid<N>(dims, qt.spacing(), origin);
        }

        double h() const noexcept
        {
            return h_;
        }

        const Grid<N>& grid() const noexcept
        {
            return padded_;
        }

        const Grid<N>& qt_grid() const noexcept
        {
            return qt_;
        }

        const CutoffFamily<D>& cutoff() const noexcept
        {
            return cutoff_;
        }

        const SampledKernel<N>& kernel() const noexcept
        {
            return kernel_;
        }

        /// F_{Q_T} u on the padded grid.
        template <class Kind>
        Field<N, Kind> extend(const Field<N, Kind>& u) const
        {
            require(u.grid() == qt_, "Smoother: field is not on the Q_T grid");
            return zero_extend(u, padded_);
        }

        /// Multiplies a padded-grid field by eta_h(x) at every time.
        template <class Kind>
        Field<N, Kind> apply_cutoff(Field<N, Kind> f) const
        {
            const auto& eta = cutoff_.eta();
            const std::size_t slice = eta.nodes();
            for (std::size_t n = 0; n < f.nodes(); ++n)
            {
                const double e = eta(n % slice);
                for (int c = 0; c < Kind::components; ++c)
                {
                    f(n, c) *= e;
                }
            }
            return f;
        }

        /// R^h u = omega_h * (eta_h F u).
        template <class Kind>
        Field<N, Kind> R(const Field<N, Kind>& u) const
        {
            return detail::convolve_sampled(apply_cutoff(extend(u)), kernel_);
        }

        /// (R^h)* u = (omega_h * F u) eta_h.
        template <class Kind>
        Field<N, Kind> Rstar(const Field<N, Kind>& u) const
        {
            return apply_cutoff(detail::convolve_sampled(extend(u), kernel_));
        }

        struct Decomposition
        {
            SymTensorField<N, static_cast<int>(D)> termA;  // R^h(eps(u))
            SymTensorField<N, static_cast<int>(D)> termB;  // omega_h * [(F u) (x) grad eta_h]^sym
        };

        /// Both right-hand terms of eps(R^h u) = R^h(eps(u)) + omega_h * [(Fu) (x) grad eta_h]^sym.
        Decomposition decompose(const VectorField<N, static_cast<int>(D)>& u) const
        {
            constexpr int d = static_cast<int>(D);
            const auto region = Region<N>::whole(qt_);
            Decomposition out;
            out.termA = R(sym_gradient(u, region));
            const auto fu = extend(u);
            SymTensorField<N, d> outer(padded_);
            const auto& ge = cutoff_.grad_eta();
            const std::size_t slice = ge.nodes();
            for (std::size_t n = 0; n < fu.nodes(); ++n)
            {
                const std::size_t m = n % slice;
                for (int i = 0; i < d; ++i)
                {
                    for (int j = i; j < d; ++j)
                    {
                        outer(n, SymTensor<d>::slot(i, j)) = 0.5 * (fu(n, i) * ge(m, j) + fu(n, j) * ge(m, i));
                    }
                }
            }
            out.termB = detail::convolve_sampled(outer, kernel_);
            return out;
        }

      private:
        Grid<N> qt_;
        double h_;
        CutoffFamily<D> cutoff_;
        Grid<N> padded_;
        SampledKernel<N> kernel_;
    };

    template <std::size_t N, class Kind>
    Field<N, Kind> smooth_R(const Field<N, Kind>& u, const Domain<N - 1>& domain, double h)
    {
        return Smoother<N - 1>(u.grid(), domain, h).R(u);
    }

    template <std::size_t N, class Kind>
    Field<N, Kind> smooth_Rstar(const Field<N, Kind>& u, const Domain<N - 1>& domain, double h)
    {
        return Smoother<N - 1>(u.grid(), domain, h).Rstar(u);
    }

    template <std::size_t N, int D>
    typename Smoother<N - 1>::Decomposition sym_grad_smooth_decomposition(const VectorField<N, D>& u, const Domain<N - 1>& domain,
                                                                          double h)
    {
        static_assert(static_cast<std::size_t>(D) + 1 == N);
        return Smoother<N - 1>(u.grid(), domain, h).decompose(u);
    }
}
