// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "calculus.hpp"
#include "io.hpp"
#include "parallel.hpp"

namespace varexp
{
    /// Critical exponent used for the lower-order growth bound:
    /// p (d + 2) / d below the dimension, p + 2 from the dimension on.
    inline double parabolic_embedding_exponent(double p, int d)
    {
        require(p > 1.0 && d >= 1, "parabolic_embedding_exponent: need p > 1 and d >= 1");
        return p < d ? p * (d + 2) / d : p + 2.0;
    }

    /// Largest admissible growth exponent r for b: (p-)_* / (p-)'.
    inline double lower_order_growth_limit(double p_minus, int d)
    {
        return parabolic_embedding_exponent(p_minus, d) / (p_minus / (p_minus - 1.0));
    }

    /// Flux S(t, x, A) = (delta + |A|)^(p - 2) A on symmetric tensors, with
    /// the exponent sampled on the space-time grid of the problem.
    template <std::size_t D>
    struct ConstitutiveLaw
    {
        static constexpr int C = SymTensor<static_cast<int>(D)>::components;

        double delta = 0.0;
        ExponentField<D + 1> exponent;
        double alpha = 1.0;
        double c0 = 1.0;
        double beta = 0.0;   // constant offset in the growth bound
        double c1 = 0.0;     // constant offset in the coercivity bound

        ConstitutiveLaw(double delta_, ExponentField<D + 1> p)
            : delta(delta_)
            , exponent(std::move(p))
        {
            require(delta >= 0.0 && std::isfinite(delta), "ConstitutiveLaw: delta must be finite and non-negative");
        }

        /// Spatial exponent repeated at every time node.
        static ConstitutiveLaw constant_in_time(double delta_, const ExponentField<D>& p, const Grid<1>& time)
        {
            return ConstitutiveLaw(delta_, extend_constant_in_time(p, time));
        }

        /// (delta + s)^(p - 2), with the limits 0 (p > 2), 1 (p = 2) and
        /// infinity (p < 2) at delta = s = 0.
        static double coefficient(double s, double p, double d) noexcept
        {
            const double base = d + s;
            if (base == 0.0)
            {
                return p > 2.0 ? 0.0 : (p == 2.0 ? 1.0 : std::numeric_limits<double>::infinity());
            }
            return std::pow(base, p - 2.0);
        }

        /// Potential Phi with Phi(0) = 0 and Phi'(s) = (delta + s)^(p - 2) s.
        static double potential(double s, double p, double d) noexcept
        {
            if (s == 0.0)
            {
                return 0.0;
            }
            if (d == 0.0)
            {
                return std::pow(s, p) / p;
            }
            const double x = s / d;
            const double dp = std::pow(d, p);
            if (x < 0.05)
            {
                // Binomial series of (1 + y)^(p - 2) y integrated over [0, x].
                double binom = 1.0;
                double xk = x * x;
                double sum = 0.0;
                for (int k = 0; k < 14; ++k)
                {
                    sum += binom * xk / (k + 2);
                    binom *= (p - 2.0 - k) / (k + 1);
                    xk *= x;
                }
                return dp * sum;
            }
            const double L = std::log1p(x);
            return dp * (std::expm1(p * L) / p - std::expm1((p - 1.0) * L) / (p - 1.0));
        }

        static std::array<double, C> flux(const double* A, double p, double d) noexcept
        {
            const double s = SymTensor<static_cast<int>(D)>::norm(A);
            std::array<double, C> out{};
            if (s == 0.0)
            {
                return out;
            }
            const double a = coefficient(s, p, d);
            for (int c = 0; c < C; ++c)
            {
                out[c] = a * A[c];
            }
            return out;
        }
    };

    /// Lower-order term b(t, x, a): either 0 or gamma |a|^(r - 1) a.
    template <std::size_t D>
    struct LowerOrderLaw
    {
        double gamma = 0.0;
        double r = 1.0;
        double eta = 0.0;   // constant offset in the growth bound
        double c2 = 0.0;    // constant offset in the sign condition

        static LowerOrderLaw zero()
        {
            return {};
        }

        static LowerOrderLaw power(double gamma_, double r_)
        {
            require(gamma_ >= 0.0 && std::isfinite(gamma_), "LowerOrderLaw: gamma must be finite and non-negative");
            require(r_ > 0.0 && std::isfinite(r_), "LowerOrderLaw: growth exponent must be positive");
            LowerOrderLaw b;
            b.gamma = gamma_;
            b.r = r_;
            return b;
        }

        bool is_zero() const noexcept
        {
            return gamma == 0.0;
        }

        /// Rejects growth exponents at or above (p-)_* / (p-)'.
        void validate(double p_minus) const
        {
            if (is_zero())
            {
                return;
            }
            const double limit = lower_order_growth_limit(p_minus, static_cast<int>(D));
            require(r < limit, "LowerOrderLaw: growth exponent " + std::to_string(r) + " is not below (p-)_*/(p-)' = " +
                                   std::to_string(limit));
        }

        std::array<double, D> operator()(const double* a) const noexcept
        {
            std::array<double, D> out{};
            if (is_zero())
            {
                return out;
            }
            double s = 0.0;
            for (std::size_t i = 0; i < D; ++i)
            {
                s += a[i] * a[i];
            }
            s = std::sqrt(s);
            if (s == 0.0)
            {
                return out;
            }
            const double k = gamma * std::pow(s, r - 1.0);
            for (std::size_t i = 0; i < D; ++i)
            {
                out[i] = k * a[i];
            }
            return out;
        }
    };

    /// Violation counts from random sampling of the structure conditions.
    struct StructureReport
    {
        int samples = 0;
        int growth = 0;        // |S(A)| <= alpha (delta + |A|)^(p-2) |A| + beta
        int coercivity = 0;    // S(A):A >= c0 (delta + |A|)^(p-2) |A|^2 - c1
        int monotonicity = 0;  // (S(A) - S(B)):(A - B) >= 0
        int lower_growth = 0;  // |b(a)| <= gamma (1 + |a|)^r + eta
        int lower_sign = 0;    // b(a).a >= -c2
        int modular_coercivity = 0;  // S(A):A >= (c0/2)|A|^p - c0 delta^p - c1
        double worst = 0.0;    // largest relative violation seen (0 if none)

        int violations() const noexcept
        {
            return growth + coercivity + monotonicity + lower_growth + lower_sign + modular_coercivity;
        }
    };

    /// Samples (A, B, p, delta, a) tuples: tensor and vector magnitudes
    /// log-uniform in [1e-4, 1e3], p uniform in [p_lo, p_hi], delta uniform
    /// in [0, delta_hi] with every tenth delta exactly 0. A violation is a
    /// relative defect beyond tol.
    template <std::size_t D>
    StructureReport sample_structure(int count, std::uint64_t seed, const LowerOrderLaw<D>& low, double p_lo = 1.1,
                                     double p_hi = 4.0, double delta_hi = 1.0, double tol = 1e-10)
    {
        constexpr int Di = static_cast<int>(D);
        constexpr int C = SymTensor<Di>::components;
        using Law = ConstitutiveLaw<D>;
        require(count >= 0 && p_lo > 1.0 && p_hi >= p_lo && delta_hi >= 0.0, "sample_structure: bad sampling ranges");
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        std::uniform_real_distribution<double> logmag(std::log(1e-4), std::log(1e3));
        std::uniform_real_distribution<double> pdist(p_lo, p_hi);
        std::uniform_real_distribution<double> ddist(0.0, delta_hi);
        const auto tensor = [&] {
            std::array<double, C> A{};
            for (auto& v : A)
            {
                v = unit(rng);
            }
            const double s = SymTensor<Di>::norm(A.data());
            const double m = std::exp(logmag(rng));
            for (auto& v : A)
            {
                v *= s > 0.0 ? m / s : 0.0;
            }
            return A;
        };
        StructureReport rep;
        rep.samples = count;
        const double alpha = 1.0, c0 = 1.0, beta = 0.0, c1 = 0.0;
        const auto check = [&](double lhs, double rhs, double scale, int& counter) {
            const double defect = (lhs - rhs) / std::max(scale, std::numeric_limits<double>::min());
            if (defect > tol)
            {
                ++counter;
                rep.worst = std::max(rep.worst, defect);
            }
        };
        for (int i = 0; i < count; ++i)
        {
            const auto A = tensor();
            const auto B = tensor();
            const double p = pdist(rng);
            const double delta = (i % 10 == 0) ? 0.0 : ddist(rng);
            const auto SA = Law::flux(A.data(), p, delta);
            const auto SB = Law::flux(B.data(), p, delta);
            const double nA = SymTensor<Di>::norm(A.data());
            const double nSA = SymTensor<Di>::norm(SA.data());
            const double coef = Law::coefficient(nA, p, delta);
            const double SAA = SymTensor<Di>::dot(SA.data(), A.data());
            check(nSA, alpha * coef * nA + beta, nSA + alpha * coef * nA + beta, rep.growth);
            const double lower = c0 * coef * nA * nA - c1;
            check(lower, SAA, std::abs(SAA) + std::abs(lower), rep.coercivity);
            const double shadow = 0.5 * c0 * std::pow(nA, p) - c0 * std::pow(delta, p) - c1;
            check(shadow, SAA, std::abs(SAA) + std::abs(shadow), rep.modular_coercivity);
            std::array<double, C> dS{};
            std::array<double, C> dA{};
            for (int c = 0; c < C; ++c)
            {
                dS[c] = SA[c] - SB[c];
                dA[c] = A[c] - B[c];
            }
            const double mono = SymTensor<Di>::dot(dS.data(), dA.data());
            const double mono_scale = (nSA + SymTensor<Di>::norm(SB.data())) * SymTensor<Di>::norm(dA.data());
            check(-mono, 0.0, mono_scale, rep.monotonicity);

            std::array<double, D> a{};
            double na = 0.0;
            for (auto& v : a)
            {
                v = unit(rng);
                na += v * v;
            }
            na = std::sqrt(na);
            const double ma = std::exp(logmag(rng));
            for (auto& v : a)
            {
                v *= na > 0.0 ? ma / na : 0.0;
            }
            const auto b = low(a.data());
            double nb = 0.0;
            double ba = 0.0;
            for (std::size_t k = 0; k < D; ++k)
            {
                nb += b[k] * b[k];
                ba += b[k] * a[k];
            }
            nb = std::sqrt(nb);
            const double bound = low.gamma * std::pow(1.0 + ma, low.r) + low.eta;
            check(nb, bound, nb + bound, rep.lower_growth);
            check(-low.c2, ba, std::abs(ba) + low.c2, rep.lower_sign);
        }
        return rep;
    }

    /// Nodes carrying unknowns: inside the domain and off the grid border.
    /// All other nodes are held at 0, so stencils reaching out of the domain
    /// see the zero extension.
    template <std::size_t D>
    std::vector<std::uint8_t> dirichlet_free_nodes(const Domain<D>& domain)
    {
        const auto& g = domain.grid();
        std::vector<std::uint8_t> free(g.size(), 0);
        for (std::size_t n = 0; n < g.size(); ++n)
        {
            if (!domain.inside(n))
            {
                continue;
            }
            const auto idx = g.index(n);
            bool ok = true;
            for (std::size_t a = 0; a < D && ok; ++a)
            {
                ok = idx[a] > 0 && idx[a] + 1 < g.dims()[a];
            }
            free[n] = ok ? 1 : 0;
        }
        return free;
    }

    /// Initial value, forcing f, tensor forcing F and the time step. f, F
    /// live on the time nodes t_k = k tau, k = 0..K.
    template <std::size_t D>
    struct ProblemData
    {
        static constexpr int Di = static_cast<int>(D);

        Domain<D> domain;
        double T = 1.0;
        double tau = 0.1;
        VectorField<D, Di> u0;
        VectorField<D + 1, Di> f;
        SymTensorField<D + 1, Di> F;

        /// Zero data on the given domain.
        ProblemData(Domain<D> domain_, double horizon, double step)
            : domain(std::move(domain_))
            , T(horizon)
            , tau(step)
        {
            require(T > 0.0 && tau > 0.0 && std::isfinite(T) && std::isfinite(tau), "ProblemData: T and tau must be positive");
            const double k = T / tau;
            require(std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k), "ProblemData: tau must divide T");
            u0 = VectorField<D, Di>(domain.grid());
            f = VectorField<D + 1, Di>(space_time(time_grid(), domain.grid()));
            F = SymTensorField<D + 1, Di>(space_time(time_grid(), domain.grid()));
        }

        int steps() const noexcept
        {
            return static_cast<int>(std::lround(T / tau));
        }

        double time(int k) const noexcept
        {
            return k * tau;
        }

        Grid<1> time_grid() const
        {
            return Grid<1>({steps() + 1}, {tau}, {0.0});
        }

        /// Time index of t, which must be a time node.
        int index_of(double t) const
        {
            const double k = t / tau;
            const long kr = std::lround(k);
            require(std::abs(k - static_cast<double>(kr)) <= 1e-9 * std::max(1.0, std::abs(k)) && kr >= 0 && kr <= steps(),
                    "ProblemData: t = " + std::to_string(t) + " is not a time node");
            return static_cast<int>(kr);
        }

        void validate() const
        {
            const Grid<D + 1> st = space_time(time_grid(), domain.grid());
            require(u0.grid() == domain.grid(), "ProblemData: u0 grid does not match the domain grid");
            require(f.grid() == st, "ProblemData: f must live on the space-time grid of the time nodes");
            require(F.grid() == st, "ProblemData: F must live on the space-time grid of the time nodes");
            for (std::size_t n = 0; n < u0.nodes(); ++n)
            {
                if (!domain.inside(n))
                {
                    require(u0.norm_at(n) == 0.0, "ProblemData: u0 is not supported in the domain");
                }
            }
        }
    };

    /// Trapezoid weights on the grid: cell volume, halved once per axis on
    /// which the node sits on the grid border. Flux terms of the step energy
    /// use these, which keeps the one-sided strain at held border nodes
    /// consistent with the Dirichlet condition.
    template <std::size_t D>
    std::vector<double> trapezoid_weights(const Grid<D>& grid)
    {
        std::vector<double> w(grid.size(), grid.cell_volume());
        for (std::size_t n = 0; n < grid.size(); ++n)
        {
            const auto idx = grid.index(n);
            for (std::size_t a = 0; a < D; ++a)
            {
                if (idx[a] == 0 || idx[a] + 1 == grid.dims()[a])
                {
                    w[n] *= 0.5;
                }
            }
        }
        return w;
    }

    struct StepOptions
    {
        double rel_tol = 1e-8;
        int max_newton = 100;
        int max_cg = 5000;
        int max_picard = 50;
        double picard_damping = 0.5;
        double delta_reg = 1e-8;
    };

    struct StepReport
    {
        int iterations = 0;         // Newton iterations summed over Picard sweeps
        int picard = 0;
        double residual = 0.0;      // final RMS nodal residual
        double tolerance = 0.0;
        double delta_used = 0.0;
        bool regularized = false;
        std::vector<double> energies;  // J after every accepted inner iterate
    };

    /// Discrete step energy
    ///   J(u) = (1/2tau)|u - u_prev|^2 + sum Phi(|eps(u)|) - f.u - F:eps(u) + bbar.u
    /// with midpoint weights on the mass and load terms, trapezoid weights on
    /// the flux terms, and bbar a frozen lower-order term. Gradients are taken with respect to the free nodal values.
    template <std::size_t D>
    class StepEnergy
    {
      public:
        static constexpr int Di = static_cast<int>(D);
        static constexpr int C = SymTensor<Di>::components;
        using Vec = VectorField<D, Di>;
        using Sym = SymTensorField<D, Di>;

        StepEnergy(const ConstitutiveLaw<D>& law, const ProblemData<D>& data, int k, Vec u_prev, double delta)
            : region_(Region<D>::whole(data.domain.grid()))
            , free_(dirichlet_free_nodes(data.domain))
            , u_prev_(std::move(u_prev))
            , f_(time_slice(data.f, k))
            , F_(time_slice(data.F, k))
            , bbar_(data.domain.grid())
            , p_(data.domain.grid().size())
            , tau_(data.tau)
            , delta_(delta)
            , w_(data.domain.grid().cell_volume())
            , q_(trapezoid_weights(data.domain.grid()))
        {
            require(law.exponent.grid() == space_time(data.time_grid(), data.domain.grid()),
                    "StepEnergy: law exponent must live on the space-time grid of the time nodes");
            require(k >= 0 && k <= data.steps(), "StepEnergy: time index out of range");
            const std::size_t S = p_.size();
            for (std::size_t n = 0; n < S; ++n)
            {
                p_[n] = law.exponent(static_cast<std::size_t>(k) * S + n);
            }
        }

        const std::vector<std::uint8_t>& free() const noexcept
        {
            return free_;
        }

        const Region<D>& region() const noexcept
        {
            return region_;
        }

        double weight() const noexcept
        {
            return w_;
        }

        void set_lower_order(Vec bbar)
        {
            bbar_ = std::move(bbar);
        }

        /// J(u). When `magnitude` is given it receives the sum of the
        /// absolute values of all summands, the scale of roundoff in J.
        double value(const Vec& u, double* magnitude = nullptr) const
        {
            const Sym e = sym_gradient(u, region_);
            const std::size_t S = u.nodes();
            std::vector<double> local(S), size(S);
            parallel_for(S, [&](std::size_t n) {
                double v = 0.0;
                double m = 0.0;
                for (int i = 0; i < Di; ++i)
                {
                    const double d = u(n, i) - u_prev_(n, i);
                    v += d * d / (2.0 * tau_) - f_(n, i) * u(n, i) + bbar_(n, i) * u(n, i);
                    m += d * d / (2.0 * tau_) + std::abs(f_(n, i) * u(n, i)) + std::abs(bbar_(n, i) * u(n, i));
                }
                const double phi = ConstitutiveLaw<D>::potential(e.norm_at(n), p_[n], delta_);
                const double work = SymTensor<Di>::dot(F_.node(n), e.node(n));
                local[n] = w_ * v + q_[n] * (phi - work);
                size[n] = w_ * m + q_[n] * (phi + std::abs(work));
            });
            double sum = 0.0;
            double total = 0.0;
            for (std::size_t n = 0; n < S; ++n)
            {
                sum += local[n];
                total += size[n];
            }
            if (magnitude)
            {
                *magnitude = total;
            }
            return sum;
        }

        /// dJ/du at every node; entries at held nodes are 0.
        Vec gradient(const Vec& u) const
        {
            const Sym e = sym_gradient(u, region_);
            Sym T(u.grid());
            parallel_for(u.nodes(), [&](std::size_t n) {
                const auto s = ConstitutiveLaw<D>::flux(e.node(n), p_[n], delta_);
                for (int c = 0; c < C; ++c)
                {
                    T(n, c) = q_[n] * (s[c] - F_(n, c));
                }
            });
            Vec g = sym_gradient_adjoint(T, region_);
            for (std::size_t n = 0; n < u.nodes(); ++n)
            {
                for (int i = 0; i < Di; ++i)
                {
                    g(n, i) = free_[n] ? g(n, i) + w_ * ((u(n, i) - u_prev_(n, i)) / tau_ - f_(n, i) + bbar_(n, i)) : 0.0;
                }
            }
            return g;
        }

        /// RMS over free nodes of the nodal residual gradient / weight.
        double residual(const Vec& g) const
        {
            double s = 0.0;
            std::size_t count = 0;
            for (std::size_t n = 0; n < g.nodes(); ++n)
            {
                if (free_[n])
                {
                    for (int i = 0; i < Di; ++i)
                    {
                        s += g(n, i) * g(n, i);
                    }
                    count += Di;
                }
            }
            return count == 0 ? 0.0 : std::sqrt(s / static_cast<double>(count)) / w_;
        }

        /// Size of the data entering one step, for the relative stopping rule.
        double data_scale() const
        {
            const auto rms = [&](const auto& fld, double scale) {
                double s = 0.0;
                for (double v : fld.values())
                {
                    s += v * v;
                }
                return fld.values().empty() ? 0.0 : scale * std::sqrt(s / static_cast<double>(fld.values().size()));
            };
            const double hmin = *std::min_element(region_.grid().spacing().begin(), region_.grid().spacing().end());
            return rms(u_prev_, 1.0 / tau_) + rms(f_, 1.0) + rms(F_, 1.0 / hmin) + rms(bbar_, 1.0);
        }

        /// Freezes the second derivative of the flux potential at u.
        void linearize(const Vec& u)
        {
            lin_e_ = sym_gradient(u, region_);
            lin_a_.assign(u.nodes(), 0.0);
            lin_b_.assign(u.nodes(), 0.0);
            parallel_for(u.nodes(), [&](std::size_t n) {
                const double s = lin_e_.norm_at(n);
                const double p = p_[n];
                lin_a_[n] = ConstitutiveLaw<D>::coefficient(s, p, delta_);
                lin_b_[n] = s > 0.0 ? (p - 2.0) * std::pow(delta_ + s, p - 3.0) / s : 0.0;
            });
        }

        /// Hessian of J at the last linearisation point applied to v.
        Vec hessian_apply(const Vec& v) const
        {
            const Sym ev = sym_gradient(v, region_);
            Sym T(v.grid());
            parallel_for(v.nodes(), [&](std::size_t n) {
                const double ab = SymTensor<Di>::dot(lin_e_.node(n), ev.node(n));
                for (int c = 0; c < C; ++c)
                {
                    T(n, c) = q_[n] * (lin_a_[n] * ev(n, c) + lin_b_[n] * ab * lin_e_(n, c));
                }
            });
            Vec h = sym_gradient_adjoint(T, region_);
            for (std::size_t n = 0; n < v.nodes(); ++n)
            {
                for (int i = 0; i < Di; ++i)
                {
                    h(n, i) = free_[n] ? h(n, i) + w_ * v(n, i) / tau_ : 0.0;
                }
            }
            return h;
        }

        double exponent_at(std::size_t n) const noexcept
        {
            return p_[n];
        }

      private:
        Region<D> region_;
        std::vector<std::uint8_t> free_;
        Vec u_prev_;
        Vec f_;
        Sym F_;
        Vec bbar_;
        std::vector<double> p_;
        double tau_;
        double delta_;
        double w_;
        std::vector<double> q_;
        Sym lin_e_;
        std::vector<double> lin_a_;
        std::vector<double> lin_b_;
    };

    namespace detail
    {
        template <std::size_t N, class Kind>
        double dot_all(const Field<N, Kind>& a, const Field<N, Kind>& b)
        {
            double s = 0.0;
            for (std::size_t i = 0; i < a.values().size(); ++i)
            {
                s += a.values()[i] * b.values()[i];
            }
            return s;
        }

        template <std::size_t N, class Kind>
        void axpy(Field<N, Kind>& y, double a, const Field<N, Kind>& x)
        {
            for (std::size_t i = 0; i < y.values().size(); ++i)
            {
                y.values()[i] += a * x.values()[i];
            }
        }

        /// Conjugate gradients for H d = rhs, started at d = 0.
        template <std::size_t D>
        VectorField<D, static_cast<int>(D)> conjugate_gradient(const StepEnergy<D>& E, const VectorField<D, static_cast<int>(D)>& rhs,
                                                              double tol, int max_iter)
        {
            using Vec = VectorField<D, static_cast<int>(D)>;
            Vec x(rhs.grid());
            Vec r = rhs;
            Vec p = r;
            double rr = dot_all(r, r);
            const double stop = tol * tol;
            for (int it = 0; it < max_iter && rr > stop; ++it)
            {
                const Vec q = E.hessian_apply(p);
                const double pq = dot_all(p, q);
                if (!(pq > 0.0))
                {
                    break;
                }
                const double a = rr / pq;
                axpy(x, a, p);
                axpy(r, -a, q);
                const double rr_new = dot_all(r, r);
                const double b = rr_new / rr;
                rr = rr_new;
                for (std::size_t i = 0; i < p.values().size(); ++i)
                {
                    p.values()[i] = r.values()[i] + b * p.values()[i];
                }
            }
            return x;
        }

        /// Newton-CG with Armijo backtracking on J, from the start value u.
        template <std::size_t D>
        int minimize_step(StepEnergy<D>& E, VectorField<D, static_cast<int>(D)>& u, double tol, const StepOptions& opt,
                          std::vector<double>& energies, double& residual)
        {
            using Vec = VectorField<D, static_cast<int>(D)>;
            double magnitude = 0.0;
            double J = E.value(u, &magnitude);
            energies.push_back(J);
            Vec g = E.gradient(u);
            residual = E.residual(g);
            const double res0 = std::max(residual, tol);
            const double w = E.weight();
            std::size_t free_dofs = 0;
            for (auto m : E.free())
            {
                free_dofs += m ? D : 0;
            }
            const double gscale = w * std::sqrt(static_cast<double>(std::max<std::size_t>(free_dofs, 1)));
            int it = 0;
            while (residual > tol)
            {
                if (it == opt.max_newton)
                {
                    throw convergence_error("energy_step: Newton iteration budget exhausted", residual);
                }
                ++it;
                E.linearize(u);
                Vec rhs = g;
                rhs *= -1.0;
                const double forcing = std::min(0.1, std::sqrt(residual / res0));
                const double cg_tol = std::max(forcing * residual, 0.05 * tol) * gscale;
                Vec d = conjugate_gradient(E, rhs, cg_tol, opt.max_cg);
                double slope = dot_all(g, d);
                if (!(slope < 0.0))
                {
                    d = rhs;
                    slope = dot_all(g, d);
                }
                double step = 1.0;
                bool accepted = false;
                Vec trial = u;
                for (int ls = 0; ls < 60; ++ls)
                {
                    trial = u;
                    axpy(trial, step, d);
                    const double Jt = E.value(trial);
                    if (Jt <= J + 1e-4 * step * slope)
                    {
                        accepted = true;
                        J = Jt;
                        break;
                    }
                    // Below roundoff in J the sufficient-decrease test cannot
                    // resolve progress; accept a non-increasing step that
                    // reduces the residual instead.
                    if (Jt <= J + 8.0 * std::numeric_limits<double>::epsilon() * magnitude)
                    {
                        const Vec gt = E.gradient(trial);
                        if (E.residual(gt) < residual)
                        {
                            accepted = true;
                            J = Jt;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if (!accepted)
                {
                    throw convergence_error("energy_step: line search failed", residual);
                }
                u = std::move(trial);
                J = E.value(u, &magnitude);
                energies.push_back(J);
                g = E.gradient(u);
                residual = E.residual(g);
            }
            return it;
        }

        template <std::size_t D>
        VectorField<D, static_cast<int>(D)> evaluate_lower_order(const LowerOrderLaw<D>& low, const VectorField<D, static_cast<int>(D)>& u)
        {
            VectorField<D, static_cast<int>(D)> out(u.grid());
            for (std::size_t n = 0; n < u.nodes(); ++n)
            {
                const auto b = low(u.node(n));
                for (std::size_t i = 0; i < D; ++i)
                {
                    out(n, static_cast<int>(i)) = b[i];
                }
            }
            return out;
        }

        template <std::size_t D>
        double effective_delta(const ConstitutiveLaw<D>& law, const StepOptions& opt)
        {
            return (law.delta == 0.0 && law.exponent.p_minus() < 2.0) ? opt.delta_reg : law.delta;
        }
    }

    /// One implicit Euler step at time node t_k: minimises the step energy,
    /// with b frozen inside a damped fixed-point loop when b is nonzero.
    template <std::size_t D>
    VectorField<D, static_cast<int>(D)> energy_step(const VectorField<D, static_cast<int>(D)>& u_prev, double t_k,
                                                    const ConstitutiveLaw<D>& law, const LowerOrderLaw<D>& low,
                                                    const ProblemData<D>& data, const StepOptions& opt = {},
                                                    StepReport* report = nullptr)
    {
        using Vec = VectorField<D, static_cast<int>(D)>;
        const int k = data.index_of(t_k);
        require(k >= 1, "energy_step: t_k must be a positive time node");
        require(u_prev.grid() == data.domain.grid(), "energy_step: u_prev grid does not match the domain grid");
        low.validate(law.exponent.p_minus());
        StepReport rep;
        rep.delta_used = detail::effective_delta(law, opt);
        rep.regularized = rep.delta_used != law.delta;

        StepEnergy<D> E(law, data, k, u_prev, rep.delta_used);
        for (std::size_t n = 0; n < u_prev.nodes(); ++n)
        {
            require(E.free()[n] || u_prev.norm_at(n) == 0.0, "energy_step: u_prev must vanish on held boundary nodes");
        }
        Vec u = u_prev;
        const double scale_base = E.data_scale();

        if (low.is_zero())
        {
            rep.tolerance = opt.rel_tol * (1.0 + scale_base);
            rep.iterations = detail::minimize_step(E, u, rep.tolerance, opt, rep.energies, rep.residual);
        }
        else
        {
            for (rep.picard = 1;; ++rep.picard)
            {
                E.set_lower_order(detail::evaluate_lower_order(low, u));
                rep.tolerance = opt.rel_tol * (1.0 + E.data_scale());
                Vec v = u;
                double inner = 0.0;
                rep.iterations += detail::minimize_step(E, v, 0.1 * rep.tolerance, opt, rep.energies, inner);
                const double a = opt.picard_damping;
                for (std::size_t i = 0; i < u.values().size(); ++i)
                {
                    u.values()[i] = a * v.values()[i] + (1.0 - a) * u.values()[i];
                }
                E.set_lower_order(detail::evaluate_lower_order(low, u));
                rep.residual = E.residual(E.gradient(u));
                if (rep.residual <= rep.tolerance)
                {
                    break;
                }
                if (rep.picard == opt.max_picard)
                {
                    if (report)
                    {
                        *report = rep;
                    }
                    throw convergence_error("energy_step: lower-order fixed-point loop did not converge", rep.residual);
                }
            }
        }
        if (report)
        {
            *report = std::move(rep);
        }
        return u;
    }

    struct StepDiagnostics
    {
        int k = 0;
        double t = 0.0;
        double energy = 0.0;       // step energy J at the computed iterate
        double l2norm = 0.0;
        double modular_eps = 0.0;  // modular of eps(u^k) for p(t_k, .)
        double residual = 0.0;
        int iters = 0;
        double defect = 0.0;       // <grad J, u^k> left by the stopping rule
    };

    template <std::size_t D>
    struct RotheResult
    {
        std::vector<VectorField<D, static_cast<int>(D)>> trajectory;
        std::vector<StepDiagnostics> diagnostics;
        double delta_used = 0.0;
        bool regularized = false;
    };

    template <std::size_t D>
    RotheResult<D> rothe_solve(const ProblemData<D>& data, const ConstitutiveLaw<D>& law, const LowerOrderLaw<D>& low,
                               const StepOptions& opt = {})
    {
        using Vec = VectorField<D, static_cast<int>(D)>;
        data.validate();
        const Region<D> region = Region<D>::whole(data.domain.grid());
        const auto free = dirichlet_free_nodes(data.domain);
        RotheResult<D> res;
        res.delta_used = detail::effective_delta(law, opt);
        res.regularized = res.delta_used != law.delta;

        Vec u = data.u0;
        for (std::size_t n = 0; n < u.nodes(); ++n)
        {
            if (!free[n])
            {
                for (int i = 0; i < static_cast<int>(D); ++i)
                {
                    u(n, i) = 0.0;
                }
            }
        }
        const auto l2 = [&](const Vec& v) { return std::sqrt(region.weight() * detail::dot_all(v, v)); };
        const auto q = trapezoid_weights(data.domain.grid());
        const auto rho_eps = [&](const Vec& v, const StepEnergy<D>& E) {
            const auto e = sym_gradient(v, region);
            double s = 0.0;
            for (std::size_t n = 0; n < v.nodes(); ++n)
            {
                const double a = e.norm_at(n);
                s += a == 0.0 ? 0.0 : q[n] * std::pow(a, E.exponent_at(n));
            }
            return s;
        };
        {
            StepEnergy<D> E0(law, data, 0, u, res.delta_used);
            StepDiagnostics d0;
            d0.l2norm = l2(u);
            d0.modular_eps = rho_eps(u, E0);
            d0.energy = E0.value(u);
            res.diagnostics.push_back(d0);
        }
        res.trajectory.push_back(u);
        for (int k = 1; k <= data.steps(); ++k)
        {
            StepReport rep;
            Vec next = energy_step(u, data.time(k), law, low, data, opt, &rep);
            StepEnergy<D> E(law, data, k, u, res.delta_used);
            if (!low.is_zero())
            {
                E.set_lower_order(detail::evaluate_lower_order(low, next));
            }
            StepDiagnostics d;
            d.k = k;
            d.t = data.time(k);
            d.energy = E.value(next);
            d.l2norm = l2(next);
            d.modular_eps = rho_eps(next, E);
            d.residual = rep.residual;
            d.iters = rep.iterations;
            d.defect = detail::dot_all(E.gradient(next), next);
            res.diagnostics.push_back(d);
            res.trajectory.push_back(next);
            u = std::move(next);
        }
        return res;
    }

    /// Columns k,t,energy,l2norm,modular_eps,residual,iters.
    inline void write_diagnostics_csv(const std::string& path, const std::vector<StepDiagnostics>& diag,
                                      const std::string& comment = "")
    {
        auto os = detail::open_out(path);
        if (!comment.empty())
        {
            os << "# " << comment << "\n";
        }
        os << "k,t,energy,l2norm,modular_eps,residual,iters\n";
        for (const auto& d : diag)
        {
            os << d.k << ',' << detail::fmt_g17(d.t) << ',' << detail::fmt_g17(d.energy) << ',' << detail::fmt_g17(d.l2norm) << ','
               << detail::fmt_g17(d.modular_eps) << ',' << detail::fmt_g17(d.residual) << ',' << d.iters << "\n";
        }
    }

    /// Writes u_<k>.field for every time node plus diagnostics.csv.
    template <std::size_t D>
    void write_trajectory(const std::string& dir, const RotheResult<D>& res, const std::string& comment = "")
    {
        for (std::size_t k = 0; k < res.trajectory.size(); ++k)
        {
            write_field(dir + "/u_" + std::to_string(k) + ".field", res.trajectory[k]);
        }
        write_diagnostics_csv(dir + "/diagnostics.csv", res.diagnostics, comment);
    }

    struct AprioriRow
    {
        int k = 0;
        double lhs = 0.0;
        double rhs = 0.0;
        bool holds = false;
    };

    /// Discrete energy inequality after every step K:
    ///   (1/2)|u^K|^2 + (c0/2) sum_k tau rho(eps(u^k))
    ///     <= (1/2)|u^0|^2 + sum_k tau (f^k.u^k + F^k:eps(u^k))
    ///        + sum_k tau (c0 rho(delta) + |c1|_1 + |c2|_1) + sum_k tau |defect_k|
    /// where defect_k = <grad J_k(u^k), u^k> is what the stopping rule leaves.
    template <std::size_t D>
    std::vector<AprioriRow> apriori_check(const RotheResult<D>& res, const ProblemData<D>& data, const ConstitutiveLaw<D>& law,
                                          const LowerOrderLaw<D>& low)
    {
        const Region<D> region = Region<D>::whole(data.domain.grid());
        const double w = region.weight();
        const double vol = region.measure();
        const auto q = trapezoid_weights(data.domain.grid());
        double qsum = 0.0;
        for (double v : q)
        {
            qsum += v;
        }
        const auto sq = [&](const auto& v) { return w * detail::dot_all(v, v); };
        const std::size_t S = data.domain.grid().size();
        std::vector<AprioriRow> rows;
        double dissipation = 0.0;
        double work = 0.0;
        double offsets = 0.0;
        double slack = 0.0;
        const double base = 0.5 * sq(res.trajectory.front());
        for (std::size_t k = 1; k < res.trajectory.size(); ++k)
        {
            const auto& u = res.trajectory[k];
            const auto e = sym_gradient(u, region);
            const auto fk = time_slice(data.f, static_cast<int>(k));
            const auto Fk = time_slice(data.F, static_cast<int>(k));
            double rho_e = 0.0;
            double rho_d = 0.0;
            double wk = 0.0;
            for (std::size_t n = 0; n < S; ++n)
            {
                const double p = law.exponent(k * S + n);
                const double a = e.norm_at(n);
                rho_e += a == 0.0 ? 0.0 : q[n] * std::pow(a, p);
                rho_d += res.delta_used == 0.0 ? 0.0 : q[n] * std::pow(res.delta_used, p);
                wk += w * Vector<static_cast<int>(D)>::dot(fk.node(n), u.node(n)) +
                      q[n] * SymTensor<static_cast<int>(D)>::dot(Fk.node(n), e.node(n));
            }
            dissipation += data.tau * 0.5 * law.c0 * rho_e;
            work += data.tau * wk;
            offsets += data.tau * (law.c0 * rho_d + std::abs(law.c1) * qsum + std::abs(low.c2) * vol);
            slack += data.tau * std::abs(res.diagnostics[k].defect);
            AprioriRow row;
            row.k = static_cast<int>(k);
            row.lhs = 0.5 * sq(u) + dissipation;
            row.rhs = base + work + offsets + slack;
            row.holds = row.lhs <= row.rhs;
            rows.push_back(row);
        }
        return rows;
    }

    /// |int (d_t u, v) dt - [(u, v)]_0^T + int (d_t v, u) dt| for space-time
    /// fields (time on axis 0) with second-order nodal time differences and
    /// the trapezoid rule in time; spatial products use `region`.
    template <std::size_t D, class Kind>
    double discrete_ibp_check(const Field<D + 1, Kind>& u, const Field<D + 1, Kind>& v, const Region<D>& region)
    {
        require(u.grid() == v.grid(), "discrete_ibp_check: grid mismatch");
        const Grid<1> time = time_axis(u.grid());
        require(space_axes(u.grid()) == region.grid(), "discrete_ibp_check: region grid does not match the spatial axes");
        const int K = time.dims()[0];
        require(K >= 3, "discrete_ibp_check: need at least three time nodes");
        const double tau = time.spacing()[0];
        const std::size_t S = region.grid().size();
        constexpr int C = Kind::components;
        const auto slice = [&](const Field<D + 1, Kind>& f, int k, std::size_t n, int c) { return f.values()[(k * S + n) * C + c]; };
        const auto dt = [&](const Field<D + 1, Kind>& f, int k, std::size_t n, int c) {
            if (k == 0)
            {
                return (-3.0 * slice(f, 0, n, c) + 4.0 * slice(f, 1, n, c) - slice(f, 2, n, c)) / (2.0 * tau);
            }
            if (k == K - 1)
            {
                return (3.0 * slice(f, K - 1, n, c) - 4.0 * slice(f, K - 2, n, c) + slice(f, K - 3, n, c)) / (2.0 * tau);
            }
            return (slice(f, k + 1, n, c) - slice(f, k - 1, n, c)) / (2.0 * tau);
        };
        const double w = region.weight();
        double lhs = 0.0;
        double rhs_int = 0.0;
        for (int k = 0; k < K; ++k)
        {
            const double tw = (k == 0 || k == K - 1) ? 0.5 * tau : tau;
            double a = 0.0;
            double b = 0.0;
            for (std::size_t n = 0; n < S; ++n)
            {
                if (!region.inside(n))
                {
                    continue;
                }
                for (int c = 0; c < C; ++c)
                {
                    a += dt(u, k, n, c) * slice(v, k, n, c);
                    b += dt(v, k, n, c) * slice(u, k, n, c);
                }
            }
            lhs += tw * w * a;
            rhs_int += tw * w * b;
        }
        double end = 0.0;
        double start = 0.0;
        for (std::size_t n = 0; n < S; ++n)
        {
            if (!region.inside(n))
            {
                continue;
            }
            for (int c = 0; c < C; ++c)
            {
                end += slice(u, K - 1, n, c) * slice(v, K - 1, n, c);
                start += slice(u, 0, n, c) * slice(v, 0, n, c);
            }
        }
        return std::abs(lhs - w * (end - start) + rhs_int);
    }

    /// Manufactured solution u*(t, x) = g(t) w(x) with a smooth exponent
    /// p(t, x), used to build forcing data with a known solution.
    template <std::size_t D>
    struct ManufacturedSolution
    {
        static constexpr int Di = static_cast<int>(D);
        static constexpr int C = SymTensor<Di>::components;

        std::function<double(double)> g;
        std::function<double(double)> dg;
        std::function<std::array<double, D>(const Point<D>&)> w;
        std::function<double(double, const Point<D>&)> p;
        std::function<std::array<double, C>(double, const Point<D>&)> F;  // may be empty
        double delta = 0.0;
        LowerOrderLaw<D> low;
    };

    /// Forcing evaluated from the continuous operator (finite differences of
    /// the closed-form fields) or from the same discrete operators the
    /// solver uses.
    enum class Forcing
    {
        continuous,
        discrete
    };

    namespace detail
    {
        template <std::size_t D>
        std::array<double, SymTensor<static_cast<int>(D)>::components> ms_strain(const ManufacturedSolution<D>& ms, const Point<D>& x)
        {
            constexpr double h = 1e-3;
            Matrix<static_cast<int>(D)> J{};
            for (std::size_t j = 0; j < D; ++j)
            {
                auto at = [&](double s) {
                    Point<D> y = x;
                    y[j] += s;
                    return ms.w(y);
                };
                const auto p2 = at(2 * h), p1 = at(h), m1 = at(-h), m2 = at(-2 * h);
                for (std::size_t i = 0; i < D; ++i)
                {
                    J[i][j] = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h);
                }
            }
            return to_sym<static_cast<int>(D)>(J);
        }

        template <std::size_t D, class Fn>
        std::array<double, D> ms_divergence(Fn&& tensor, const Point<D>& x)
        {
            constexpr double h = 2e-3;
            constexpr int Di = static_cast<int>(D);
            std::array<double, D> out{};
            for (std::size_t j = 0; j < D; ++j)
            {
                auto at = [&](double s) {
                    Point<D> y = x;
                    y[j] += s;
                    return tensor(y);
                };
                const auto p2 = at(2 * h), p1 = at(h), m1 = at(-h), m2 = at(-2 * h);
                for (int i = 0; i < Di; ++i)
                {
                    const int c = SymTensor<Di>::slot(i, static_cast<int>(j));
                    out[i] += (-p2[c] + 8.0 * p1[c] - 8.0 * m1[c] + m2[c]) / (12.0 * h);
                }
            }
            return out;
        }
    }

    template <std::size_t D>
    VectorField<D, static_cast<int>(D)> manufactured_exact(const ManufacturedSolution<D>& ms, double t, const Grid<D>& grid)
    {
        const double gt = ms.g(t);
        return VectorField<D, static_cast<int>(D)>::sample(grid, [&](const Point<D>& x) {
            auto v = ms.w(x);
            for (auto& c : v)
            {
                c *= gt;
            }
            return v;
        });
    }

    template <std::size_t D>
    ConstitutiveLaw<D> manufactured_law(const ManufacturedSolution<D>& ms, const ProblemData<D>& data)
    {
        const Grid<D + 1> st = space_time(data.time_grid(), data.domain.grid());
        auto p = ScalarField<D + 1>::sample(st, [&](const Point<D + 1>& tx) {
            Point<D> x{};
            for (std::size_t a = 0; a < D; ++a)
            {
                x[a] = tx[a + 1];
            }
            return ms.p(tx[0], x);
        });
        return ConstitutiveLaw<D>(ms.delta, ExponentField<D + 1>(std::move(p)));
    }

    /// f = d_t u* - div S(eps(u*)) + b(u*) + div F on every time node.
    template <std::size_t D>
    ProblemData<D> manufactured_problem(const ManufacturedSolution<D>& ms, const Domain<D>& domain, double T, double tau,
                                        Forcing mode = Forcing::continuous)
    {
        constexpr int Di = static_cast<int>(D);
        constexpr int C = SymTensor<Di>::components;
        ProblemData<D> data(domain, T, tau);
        const Grid<D>& grid = domain.grid();
        const std::size_t S = grid.size();
        const auto free = dirichlet_free_nodes(domain);
        data.u0 = masked(manufactured_exact(ms, 0.0, grid), domain);
        if (ms.F)
        {
            for (int k = 0; k <= data.steps(); ++k)
            {
                const double t = data.time(k);
                for (std::size_t n = 0; n < S; ++n)
                {
                    const auto v = ms.F(t, grid.point(n));
                    for (int c = 0; c < C; ++c)
                    {
                        data.F(k * S + n, c) = v[c];
                    }
                }
            }
        }
        const ConstitutiveLaw<D> law = manufactured_law(ms, data);
        const Region<D> region = Region<D>::whole(grid);
        const auto q = trapezoid_weights(grid);
        for (int k = 0; k <= data.steps(); ++k)
        {
            const double t = data.time(k);
            const double gt = ms.g(t);
            const double dgt = ms.dg(t);
            if (mode == Forcing::continuous)
            {
                parallel_for(S, [&](std::size_t n) {
                    const Point<D> x = grid.point(n);
                    const auto flux_at = [&](const Point<D>& y) {
                        auto e = detail::ms_strain(ms, y);
                        for (auto& c : e)
                        {
                            c *= gt;
                        }
                        return ConstitutiveLaw<D>::flux(e.data(), ms.p(t, y), ms.delta);
                    };
                    const auto divS = detail::ms_divergence<D>(flux_at, x);
                    std::array<double, D> divF{};
                    if (ms.F)
                    {
                        divF = detail::ms_divergence<D>([&](const Point<D>& y) { return ms.F(t, y); }, x);
                    }
                    auto wx = ms.w(x);
                    std::array<double, D> u{};
                    for (int i = 0; i < Di; ++i)
                    {
                        u[i] = gt * wx[i];
                    }
                    const auto b = ms.low(u.data());
                    for (int i = 0; i < Di; ++i)
                    {
                        data.f(k * S + n, i) = dgt * wx[i] - divS[i] + b[i] + divF[i];
                    }
                });
            }
            else
            {
                auto u = manufactured_exact(ms, t, grid);
                const auto e = sym_gradient(u, region);
                const auto Fk = time_slice(data.F, k);
                SymTensorField<D, Di> T(grid);
                for (std::size_t n = 0; n < S; ++n)
                {
                    const auto s = ConstitutiveLaw<D>::flux(e.node(n), law.exponent(k * S + n), ms.delta);
                    for (int c = 0; c < C; ++c)
                    {
                        T(n, c) = q[n] / grid.cell_volume() * (s[c] - Fk(n, c));
                    }
                }
                const auto div = sym_gradient_adjoint(T, region);
                const auto w0 = VectorField<D, Di>::sample(grid, ms.w);
                for (std::size_t n = 0; n < S; ++n)
                {
                    const auto b = ms.low(u.node(n));
                    for (int i = 0; i < Di; ++i)
                    {
                        data.f(k * S + n, i) = free[n] ? dgt * w0(n, i) + div(n, i) + b[i] : 0.0;
                    }
                }
            }
        }
        return data;
    }

    /// max over time nodes of the L^2 distance to u*.
    template <std::size_t D>
    double manufactured_error(const RotheResult<D>& res, const ManufacturedSolution<D>& ms, const ProblemData<D>& data)
    {
        const Grid<D>& grid = data.domain.grid();
        double worst = 0.0;
        for (std::size_t k = 0; k < res.trajectory.size(); ++k)
        {
            auto diff = res.trajectory[k] - manufactured_exact(ms, data.time(static_cast<int>(k)), grid);
            worst = std::max(worst, std::sqrt(grid.cell_volume() * detail::dot_all(diff, diff)));
        }
        return worst;
    }
}
