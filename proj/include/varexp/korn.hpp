// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "calculus.hpp"
#include "io.hpp"
#include "mollify.hpp"
#include "quadrature.hpp"

namespace varexp
{
    // Wet blanket construction in the plane, centred at the origin. The
    // velocity is u(x) = eta(|x|) A x with eta the mollified indicator of a
    // disc, so eps(u) lives on the annulus Omega_1 = {R - e < |x| < R + e}
    // and grad u = A on the inner disc G = B_{R - e}.

    struct WetBlanketConfig
    {
        double alpha = 1.1;
        double beta = 2.0;
        double eps = 0.2;  // separation scale around Omega_1
        std::array<double, 4> skew{0.0, -1.0, 1.0, 0.0};
        double eta_radius = 1.0;
        double eta_moll_eps = 0.4;

        double inner_radius() const noexcept
        {
            return eta_radius - eta_moll_eps;
        }

        double outer_radius() const noexcept
        {
            return eta_radius + eta_moll_eps;
        }

        /// alpha == beta is accepted and gives a constant exponent.
        void validate() const
        {
            require(alpha > 1.0 && beta >= alpha && std::isfinite(beta), "WetBlanketConfig: need 1 < alpha <= beta < inf");
            require(eps > 0.0 && eta_moll_eps > 0.0 && eta_radius > 0.0, "WetBlanketConfig: radii must be positive");
            require(inner_radius() - eps > 0.0, "WetBlanketConfig: Omega_2^eps misses the rigid disc; reduce eps or eta_moll_eps");
            require(skew[0] == 0.0 && skew[3] == 0.0 && skew[1] == -skew[2], "WetBlanketConfig: A must be skew symmetric");
            require(skew[1] != 0.0, "WetBlanketConfig: A must be nonzero");
        }
    };

    namespace detail
    {
        /// (omega_eps * chi_{B_R})(x) in 2-D for |x| = r.
        inline double mollified_disc(double r, double R, double eps)
        {
            if (R <= 0.0 || r - eps >= R)
            {
                return 0.0;
            }
            if (r + eps <= R)
            {
                return 1.0;
            }
            static const QuadratureRule rule = gauss_legendre(48);
            // Angular measure of {theta : |x - rho e_theta| < R}.
            const auto arc = [&](double rho) {
                if (r == 0.0 || rho == 0.0)
                {
                    return (rho < R && r < R) ? 2.0 * M_PI : 0.0;
                }
                const double c = (r * r + rho * rho - R * R) / (2.0 * r * rho);
                return 2.0 * std::acos(std::clamp(c, -1.0, 1.0));
            };
            const auto weight = [&](double rho) { return MollifierFamily<2>::bump(rho * rho / (eps * eps)) * rho; };
            // The arc has square-root kinks at rho = |R - r|; quadratic maps
            // towards the kink make both pieces smooth.
            const double k = std::clamp(std::abs(R - r), 0.0, eps);
            double num = 0.0;
            double den = 0.0;
            const auto piece = [&](double a, double b, bool kink_at_b) {
                if (b <= a)
                {
                    return;
                }
                const double len = b - a;
                for (int panel = 0; panel < 8; ++panel)
                {
                    const double s0 = panel / 8.0;
                    const double s1 = (panel + 1) / 8.0;
                    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
                    {
                        const double s = s0 + (s1 - s0) * 0.5 * (rule.nodes[i] + 1.0);
                        const double ws = (s1 - s0) * 0.5 * rule.weights[i];
                        const double rho = kink_at_b ? b - len * s * s : a + len * s * s;
                        const double jac = 2.0 * len * s * ws;
                        const double w = weight(rho) * jac;
                        num += w * arc(rho);
                        den += w * 2.0 * M_PI;
                    }
                }
            };
            piece(0.0, k, true);
            piece(k, eps, false);
            return den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
        }

        inline double radius_of(const Point<2>& x) noexcept
        {
            return std::hypot(x[0], x[1]);
        }

        inline void check_geometry(const WetBlanketConfig& cfg, const Domain<2>& domain)
        {
            cfg.validate();
            const auto& g = domain.grid();
            bool meets_rigid = false;
            for (std::size_t n = 0; n < g.size(); ++n)
            {
                const double r = radius_of(g.point(n));
                if (r < cfg.outer_radius() + cfg.eps)
                {
                    require(domain.inside(n), "wet blanket: Omega_1^eps is not compactly contained in the domain");
                }
                meets_rigid = meets_rigid || (domain.inside(n) && r < cfg.inner_radius() - cfg.eps);
            }
            require(meets_rigid, "wet blanket: no grid node of Omega_2^eps inside the rigid disc");
        }
    }

    /// Nodes of the annulus Omega_1 = int supp eps(u).
    inline Region<2> omega1_region(const WetBlanketConfig& cfg, const Domain<2>& domain)
    {
        const auto& g = domain.grid();
        std::vector<std::uint8_t> mask(g.size(), 0);
        for (std::size_t n = 0; n < g.size(); ++n)
        {
            const double r = detail::radius_of(g.point(n));
            mask[n] = domain.inside(n) && r > cfg.inner_radius() && r < cfg.outer_radius();
        }
        return Region<2>(g, std::move(mask));
    }

    /// Nodes of Omega_2^eps = Omega minus the closed eps-neighbourhood of Omega_1.
    inline Region<2> omega2_region(const WetBlanketConfig& cfg, const Domain<2>& domain)
    {
        const auto& g = domain.grid();
        std::vector<std::uint8_t> mask(g.size(), 0);
        for (std::size_t n = 0; n < g.size(); ++n)
        {
            const double r = detail::radius_of(g.point(n));
            mask[n] = domain.inside(n) && (r < cfg.inner_radius() - cfg.eps || r > cfg.outer_radius() + cfg.eps);
        }
        return Region<2>(g, std::move(mask));
    }

    /// p = alpha m + beta (1 - m), m = omega_{eps/2} * chi of the eps/2-neighbourhood of Omega_1.
    inline ExponentField<2> build_exponent(const WetBlanketConfig& cfg, const Domain<2>& domain)
    {
        detail::check_geometry(cfg, domain);
        const double h = 0.5 * cfg.eps;
        const double a = cfg.inner_radius() - h;
        const double b = cfg.outer_radius() + h;
        const auto v = ScalarField<2>::sample(domain.grid(), [&](const Point<2>& x) {
            const double r = detail::radius_of(x);
            const double m = detail::mollified_disc(r, b, h) - detail::mollified_disc(r, a, h);
            if (m >= 1.0)
            {
                return cfg.alpha;
            }
            if (m <= 0.0)
            {
                return cfg.beta;
            }
            return std::clamp(cfg.alpha * m + cfg.beta * (1.0 - m), cfg.alpha, cfg.beta);
        });
        return ExponentField<2>(v);
    }

    /// eta = chi_{B_R} * omega_e sampled on the grid.
    inline ScalarField<2> build_eta(const WetBlanketConfig& cfg, const Grid<2>& grid)
    {
        return ScalarField<2>::sample(grid, [&](const Point<2>& x) {
            return detail::mollified_disc(detail::radius_of(x), cfg.eta_radius, cfg.eta_moll_eps);
        });
    }

    /// u(x) = eta(x) A x, zero outside the domain.
    inline VectorField<2, 2> build_velocity(const WetBlanketConfig& cfg, const Domain<2>& domain)
    {
        detail::check_geometry(cfg, domain);
        const auto eta = build_eta(cfg, domain.grid());
        VectorField<2, 2> u(domain.grid());
        for (std::size_t n = 0; n < u.nodes(); ++n)
        {
            if (!domain.inside(n))
            {
                continue;
            }
            const auto x = domain.grid().point(n);
            u(n, 0) = eta(n) * (cfg.skew[0] * x[0] + cfg.skew[1] * x[1]);
            u(n, 1) = eta(n) * (cfg.skew[2] * x[0] + cfg.skew[3] * x[1]);
        }
        return u;
    }

    /// phi(t) = chi_{(-1,1)}(t) (|t|^{-1/2} - 1).
    inline double phi_profile(double t) noexcept
    {
        const double a = std::abs(t);
        return a < 1.0 ? 1.0 / std::sqrt(a) - 1.0 : 0.0;
    }

    /// (phi * omega_delta)(t) by Gauss-Legendre, with y = t +- s^2 on the
    /// pieces touching the singularity.
    inline double phi_mollified(double t, double delta)
    {
        require(delta > 0.0, "phi_mollified: delta must be positive");
        static const QuadratureRule rule = gauss_legendre(40);
        static const double c1 = MollifierFamily<1>().c_norm();
        const auto omega = [&](double y) { return c1 / delta * MollifierFamily<1>::bump(y * y / (delta * delta)); };
        std::vector<double> cuts{-delta, delta};
        for (double c : {t, t - 1.0, t + 1.0})
        {
            if (c > -delta && c < delta)
            {
                cuts.push_back(c);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        {
            const double a = cuts[k];
            const double b = cuts[k + 1];
            if (b <= a)
            {
                continue;
            }
            const bool sing_a = a == t;
            const bool sing_b = b == t;
            if (!sing_a && !sing_b)
            {
                total += integrate_gl_composite([&](double y) { return omega(y) * phi_profile(t - y); }, a, b, 4, rule);
                continue;
            }
            // |t - y| = s^2, dy = 2 s ds, and phi = 1/s - 1 while s < 1.
            const double root = std::sqrt(b - a);
            total += integrate_gl_composite(
                [&](double s) {
                    const double y = sing_a ? a + s * s : b - s * s;
                    return s < 1.0 ? omega(y) * (2.0 - 2.0 * s) : 0.0;
                },
                0.0, root, 4, rule);
        }
        return total;
    }

    /// Default time axis: 256 cell-centred nodes on (-1.5, 1.5), straddling t = 0.
    inline Grid<1> phi_time_grid(int nodes = 256)
    {
        require(nodes >= 2 && nodes % 2 == 0, "phi_time_grid: need an even node count so t = 0 is not a node");
        return Grid<1>::cell_centered({-1.5}, {1.5}, {nodes});
    }

    /// phi_n = phi * omega_{2^{-n}} sampled on the time grid.
    inline ScalarField<1> build_phi(int n, const Grid<1>& time)
    {
        require(n >= 1, "build_phi: n must be at least 1");
        const double delta = std::ldexp(1.0, -n);
        require(delta >= 2.0 * time.spacing()[0], "build_phi: time grid too coarse to resolve 2^-n; refine the time axis");
        return ScalarField<1>::sample(time, [&](const Point<1>& t) { return phi_mollified(t[0], delta); });
    }

    struct KornRatioRow
    {
        int n = 0;
        double norm_alpha = 0.0;  // ||phi_n||_{L^alpha(I)}
        double norm_beta = 0.0;   // ||phi_n||_{L^beta(I)}
        double num = 0.0;         // ||grad(phi_n u)||_{p}
        double den = 0.0;         // ||eps(phi_n u)||_{p}
        double ratio = 0.0;
        double lower_bound = 0.0;
        bool flagged = false;     // denominator below the quadrature floor
    };

    struct KornFigure
    {
        ExponentField<2> p;
        VectorField<2, 2> u;
        TensorField<2, 2> grad_u;
        SymTensorField<2, 2> sym_u;
        double grad_beta_omega2 = 0.0;   // ||grad u||_{L^beta(Omega_2^eps)}
        double sym_alpha_omega1 = 0.0;   // ||eps(u)||_{L^alpha(Omega_1)}
    };

    inline KornFigure build_korn_figure(const WetBlanketConfig& cfg, const Domain<2>& domain)
    {
        const auto region = Region<2>::of(domain);
        auto u = build_velocity(cfg, domain);
        auto grad_u = gradient(u, region);
        auto sym_u = symmetrize(grad_u);
        KornFigure fig{build_exponent(cfg, domain), std::move(u), std::move(grad_u), std::move(sym_u), 0.0, 0.0};
        fig.grad_beta_omega2 = lebesgue_norm(fig.grad_u, cfg.beta, omega2_region(cfg, domain));
        fig.sym_alpha_omega1 = lebesgue_norm(fig.sym_u, cfg.alpha, omega1_region(cfg, domain));
        return fig;
    }

    /// Ratios ||grad(phi_n u)|| / ||eps(phi_n u)|| on I x Omega for n = 1..n_max,
    /// with the exponent extended constantly in time.
    inline std::vector<KornRatioRow> korn_ratio_sequence(const WetBlanketConfig& cfg, const Domain<2>& domain, int n_max,
                                                         const Grid<1>& time = phi_time_grid())
    {
        require(n_max >= 1, "korn_ratio_sequence: n_max must be at least 1");
        const KornFigure fig = build_korn_figure(cfg, domain);
        const auto pst = extend_constant_in_time(fig.p, time);
        const auto cyl = Region<3>::cylinder(time, domain);
        const auto whole_t = Region<1>::whole(time);
        std::vector<KornRatioRow> rows;
        for (int n = 1; n <= n_max; ++n)
        {
            const auto phi = build_phi(n, time);
            KornRatioRow row;
            row.n = n;
            row.norm_alpha = lebesgue_norm(phi, cfg.alpha, whole_t);
            row.norm_beta = lebesgue_norm(phi, cfg.beta, whole_t);
            row.num = luxembourg_norm(separable_product(phi, fig.grad_u), pst, cyl);
            row.den = luxembourg_norm(separable_product(phi, fig.sym_u), pst, cyl);
            row.flagged = row.den <= 1e-12 * row.num;
            row.ratio = row.flagged ? std::numeric_limits<double>::infinity() : row.num / row.den;
            row.lower_bound = row.norm_beta * fig.grad_beta_omega2 / (row.norm_alpha * fig.sym_alpha_omega1);
            rows.push_back(row);
        }
        return rows;
    }

    inline void write_ratio_csv(const std::string& path, const std::vector<KornRatioRow>& rows, const std::string& comment = "")
    {
        auto os = detail::open_out(path);
        if (!comment.empty())
        {
            os << "# " << comment << "\n";
        }
        os << "n,norm_alpha,norm_beta,num,den,ratio,lower_bound\n";
        for (const auto& r : rows)
        {
            os << r.n << ',' << detail::fmt_g17(r.norm_alpha) << ',' << detail::fmt_g17(r.norm_beta) << ','
               << detail::fmt_g17(r.num) << ',' << detail::fmt_g17(r.den) << ',' << detail::fmt_g17(r.ratio) << ','
               << detail::fmt_g17(r.lower_bound) << "\n";
        }
    }

    /// Heatmaps of |grad u|, |eps(u)| and p, and the sampled profiles
    /// phi, phi_1..phi_{n_max} into `dir`.
    inline void write_korn_figure(const std::string& dir, const KornFigure& fig, const Grid<1>& time, int n_max,
                                  const std::string& comment = "")
    {
        std::filesystem::create_directories(dir);
        write_pgm(dir + "/grad_u.pgm", pointwise_norm(fig.grad_u));
        write_pgm(dir + "/sym_grad_u.pgm", pointwise_norm(fig.sym_u));
        write_pgm(dir + "/exponent.pgm", fig.p.values());
        std::vector<ScalarField<1>> phis;
        for (int n = 1; n <= n_max; ++n)
        {
            phis.push_back(build_phi(n, time));
        }
        auto os = detail::open_out(dir + "/phi.csv");
        if (!comment.empty())
        {
            os << "# " << comment << "\n";
        }
        os << "t,phi";
        for (int n = 1; n <= n_max; ++n)
        {
            os << ",phi_" << n;
        }
        os << "\n";
        for (std::size_t k = 0; k < time.size(); ++k)
        {
            const double t = time.point(k)[0];
            os << detail::fmt_g17(t) << ',' << detail::fmt_g17(phi_profile(t));
            for (const auto& f : phis)
            {
                os << ',' << detail::fmt_g17(f(k));
            }
            os << "\n";
        }
    }
}
