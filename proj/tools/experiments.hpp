// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <varexp/korn.hpp>
#include <varexp/mollify.hpp>
#include <varexp/poincare.hpp>
#include <varexp/rothe.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

// Experiment runners shared by the command-line driver and the acceptance
// binary. Each runner fills a Report with named checks and, when given an
// output directory, writes its tables there. Nothing here reads clocks, so
// outputs depend only on the options and the seed.

namespace varexp::cli
{
    struct Check
    {
        std::string name;
        bool pass = false;
        std::string detail;
    };

    struct Report
    {
        std::vector<Check> checks;

        void add(std::string name, bool pass, std::string detail)
        {
            checks.push_back({std::move(name), pass, std::move(detail)});
        }

        bool pass() const
        {
            return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
        }

        void append(const Report& other)
        {
            checks.insert(checks.end(), other.checks.begin(), other.checks.end());
        }
    };

    /// Small CSV table with a header row and an optional comment line.
    struct Table
    {
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;

        void write(const std::string& path, const std::string& comment) const
        {
            auto os = varexp::detail::open_out(path);
            if (!comment.empty())
            {
                os << "# " << comment << "\n";
            }
            for (std::size_t i = 0; i < header.size(); ++i)
            {
                os << (i ? "," : "") << header[i];
            }
            os << "\n";
            for (const auto& r : rows)
            {
                for (std::size_t i = 0; i < r.size(); ++i)
                {
                    os << (i ? "," : "") << r[i];
                }
                os << "\n";
            }
        }
    };

    inline std::string num(double v)
    {
        return varexp::detail::fmt_g17(v);
    }

    inline std::string short_num(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return buf;
    }

    /// Where and how runners write: empty dir means no files.
    struct Sink
    {
        std::string dir;
        std::string comment;

        bool enabled() const
        {
            return !dir.empty();
        }

        std::string path(const std::string& name) const
        {
            return (std::filesystem::path(dir) / name).string();
        }

        void table(const std::string& name, const Table& t) const
        {
            if (enabled())
            {
                t.write(path(name), comment);
            }
        }
    };

    /// Exponent choices shared by configs: constant, two half-planes split
    /// at x0 = split, or values read from a field file.
    struct ExponentSpec
    {
        std::string kind = "constant";
        double value = 2.0;
        double inside = 1.3;
        double outside = 2.6;
        double split = 0.5;
        std::string path;

        template <std::size_t D>
        ExponentField<D> build(const Grid<D>& grid) const
        {
            if (kind == "constant")
            {
                return ExponentField<D>::constant(grid, value);
            }
            if (kind == "two-region")
            {
                return ExponentField<D>(ScalarField<D>::sample(grid, [&](const Point<D>& x) { return x[0] < split ? inside : outside; }));
            }
            if (kind == "file")
            {
                auto f = read_field<D, Scalar>(path);
                require(f.grid() == grid, "exponent file '" + path + "' does not match the run grid");
                return ExponentField<D>(std::move(f));
            }
            throw invalid_input("unknown exponent kind '" + kind + "'");
        }
    };

    // ------------------------------------------------------------------
    // Random fields

    /// Sum of a few random Fourier modes with a random overall magnitude
    /// spanning six decades, plus small node noise.
    template <std::size_t N, class Kind>
    Field<N, Kind> random_field(const Grid<N>& grid, std::mt19937_64& rng)
    {
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        std::uniform_real_distribution<double> logm(std::log(1e-3), std::log(1e3));
        constexpr int C = Kind::components;
        const double mag = std::exp(logm(rng));
        struct Mode
        {
            Point<N> k;
            double phase;
            std::array<double, C> amp;
        };
        std::vector<Mode> modes(4);
        for (auto& m : modes)
        {
            for (auto& k : m.k)
            {
                k = 6.0 * U(rng);
            }
            m.phase = M_PI * U(rng);
            for (auto& a : m.amp)
            {
                a = U(rng);
            }
        }
        Field<N, Kind> f(grid);
        for (std::size_t n = 0; n < grid.size(); ++n)
        {
            const auto x = grid.point(n);
            for (const auto& m : modes)
            {
                double arg = m.phase;
                for (std::size_t a = 0; a < N; ++a)
                {
                    arg += m.k[a] * x[a];
                }
                const double s = std::sin(arg);
                for (int c = 0; c < C; ++c)
                {
                    f(n, c) += m.amp[c] * s;
                }
            }
            for (int c = 0; c < C; ++c)
            {
                f(n, c) = mag * (f(n, c) + 0.05 * U(rng));
            }
        }
        return f;
    }

    // ------------------------------------------------------------------
    // Norms: Luxembourg oracle, unit ball, Hoelder

    struct NormsOptions
    {
        int resolution = 64;
        int fields = 100;
        std::vector<double> exponents{1.1, 1.5, 2.0, 3.0};
        ExponentSpec variable{"two-region", 2.0, 1.3, 2.6, 0.5, ""};
        int holder_pairs = 1000;
        int holder_resolution = 32;
        double tol = 1e-8;
    };

    inline Report run_norms(const NormsOptions& o, std::uint64_t seed, const Sink& sink)
    {
        Report rep;
        std::mt19937_64 rng(seed);
        const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {o.resolution, o.resolution});
        const auto whole = Region<2>::whole(g);

        Table lux{{"field", "p", "luxembourg", "modular_root", "rel_err"}, {}};
        double worst = 0.0;
        for (int i = 0; i < o.fields; ++i)
        {
            const auto f = random_field<2, Vector<2>>(g, rng);
            for (double p : o.exponents)
            {
                const double norm = luxembourg_norm(f, ExponentField<2>::constant(g, p), whole, o.tol);
                double sum = 0.0;
                for (std::size_t n = 0; n < g.size(); ++n)
                {
                    sum += std::pow(f.norm_at(n), p);
                }
                const double oracle = std::pow(g.cell_volume() * sum, 1.0 / p);
                const double rel = std::abs(norm - oracle) / oracle;
                worst = std::max(worst, rel);
                lux.rows.push_back({std::to_string(i), num(p), num(norm), num(oracle), num(rel)});
            }
        }
        rep.add("luxembourg norm equals modular^(1/p) for constant p", worst <= 1e-6, "max rel err " + short_num(worst));
        sink.table("norms_luxembourg.csv", lux);

        const auto pv = o.variable.build(g);
        Table ball{{"field", "norm", "modular_of_normalised"}, {}};
        double ball_dev = 0.0;
        for (int i = 0; i < o.fields; ++i)
        {
            auto f = random_field<2, Vector<2>>(g, rng);
            const double norm = luxembourg_norm(f, pv, whole, o.tol);
            f *= 1.0 / norm;
            const double m = modular(f, pv, whole);
            ball_dev = std::max(ball_dev, std::abs(m - 1.0));
            ball.rows.push_back({std::to_string(i), num(norm), num(m)});
        }
        rep.add("modular(f/||f||) = 1 for a variable exponent", ball_dev <= 1e-6, "max |rho - 1| " + short_num(ball_dev));
        sink.table("norms_unit_ball.csv", ball);

        const auto gh = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {o.holder_resolution, o.holder_resolution});
        const auto wh = Region<2>::whole(gh);
        const auto ph = ExponentField<2>(ScalarField<2>::sample(gh, [](const Point<2>& x) { return 1.2 + 1.6 * x[0] * x[1] + 0.3 * x[1]; }));
        const auto qh = conjugate(ph);
        int violations = 0;
        double worst_ratio = 0.0;
        Table hold{{"pair", "pairing", "norm_p", "norm_conj", "ratio"}, {}};
        for (int i = 0; i < o.holder_pairs; ++i)
        {
            const auto f = random_field<2, Scalar>(gh, rng);
            const auto h = random_field<2, Scalar>(gh, rng);
            const double lhs = std::abs(holder_pairing(f, h, wh));
            const double nf = luxembourg_norm(f, ph, wh, o.tol);
            const double nh = luxembourg_norm(h, qh, wh, o.tol);
            const double bound = 2.0 * nf * nh;
            if (lhs > bound + 1e-6)
            {
                ++violations;
            }
            worst_ratio = std::max(worst_ratio, lhs / bound);
            hold.rows.push_back({std::to_string(i), num(lhs), num(nf), num(nh), num(lhs / (nf * nh))});
        }
        rep.add("Hoelder inequality with constant 2", violations == 0,
                std::to_string(violations) + " violations, max |fg|/(2|f||g|) " + short_num(worst_ratio));
        sink.table("norms_holder.csv", hold);
        return rep;
    }

    // ------------------------------------------------------------------
    // Mollification: domination, smoothing convergence, decomposition

    struct MollifyOptions
    {
        int domination_resolution = 128;
        int domination_fields = 20;
        int dyadic_levels = 5;      // eps = spacing * 2^k, k < levels
        int smoothing_resolution = 64;
        int smoothing_fields = 5;
        int decomposition_resolution = 32;
        double decomposition_h = 0.125;
        double decomposition_T = 0.5;
    };

    namespace detail
    {
        inline double bump(double s)
        {
            return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
        }

        struct SpaceTimeBump
        {
            Point<3> c;
            double radius;
            double tilt;

            double operator()(const Point<3>& x) const
            {
                double s = 0.0;
                for (int a = 0; a < 3; ++a)
                {
                    s += (x[a] - c[a]) * (x[a] - c[a]);
                }
                return bump(s / (radius * radius)) * (1.0 + tilt * x[1]);
            }
        };

        inline std::vector<SpaceTimeBump> smoothing_fields(int count)
        {
            std::vector<SpaceTimeBump> out;
            for (int i = 0; i < count; ++i)
            {
                const double a = 2.0 * M_PI * i / std::max(count, 1);
                out.push_back({{0.45 + 0.05 * std::cos(a), 0.5 + 0.06 * std::cos(a), 0.5 + 0.06 * std::sin(a)},
                               0.22 + 0.03 * std::sin(3 * a),
                               0.5 * std::cos(2 * a)});
            }
            return out;
        }

        /// Node values minus 3-point Gauss cell averages of fn.
        template <class Fn>
        ScalarField<3> cell_average_defect(const Grid<3>& g, Fn&& fn)
        {
            const auto rule = gauss_legendre(3);
            ScalarField<3> out(g);
            for (std::size_t n = 0; n < g.size(); ++n)
            {
                const auto x = g.point(n);
                double avg = 0.0;
                for (std::size_t i = 0; i < rule.nodes.size(); ++i)
                {
                    for (std::size_t j = 0; j < rule.nodes.size(); ++j)
                    {
                        for (std::size_t k = 0; k < rule.nodes.size(); ++k)
                        {
                            const Point<3> y{x[0] + 0.5 * g.spacing()[0] * rule.nodes[i], x[1] + 0.5 * g.spacing()[1] * rule.nodes[j],
                                             x[2] + 0.5 * g.spacing()[2] * rule.nodes[k]};
                            avg += rule.weights[i] * rule.weights[j] * rule.weights[k] * fn(y);
                        }
                    }
                }
                out(n) = fn(x) - avg / 8.0;
            }
            return out;
        }
    }

    inline Report run_mollify(const MollifyOptions& o, std::uint64_t seed, const Sink& sink)
    {
        Report rep;
        std::mt19937_64 rng(seed);

        // Domination of dyadic mollifications by twice the maximal function.
        {
            const int R = o.domination_resolution;
            const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {R, R});
            const double s = g.max_spacing();
            const double cap = s * std::pow(2.0, o.dyadic_levels - 1) * (1.0 + 1e-9);
            Table t{{"field", "max_ratio", "max_excess"}, {}};
            int bad = 0;
            double worst = -1e300;
            for (int i = 0; i < o.domination_fields; ++i)
            {
                const auto f = random_field<2, Scalar>(g, rng);
                const auto m = maximal(f, cap);
                std::vector<double> sup(g.size(), 0.0);
                for (int k = 0; k < o.dyadic_levels; ++k)
                {
                    const auto c = convolve(f, s * std::pow(2.0, k));
                    for (std::size_t n = 0; n < g.size(); ++n)
                    {
                        sup[n] = std::max(sup[n], std::abs(c(n)));
                    }
                }
                double ratio = 0.0;
                double excess = -1e300;
                for (std::size_t n = 0; n < g.size(); ++n)
                {
                    const double e = sup[n] - 2.0 * m(n);
                    excess = std::max(excess, e);
                    bad += e > 1e-6;
                    ratio = std::max(ratio, m(n) > 0.0 ? sup[n] / m(n) : 0.0);
                }
                worst = std::max(worst, excess);
                t.rows.push_back({std::to_string(i), num(ratio), num(excess)});
            }
            rep.add("sup_eps |omega_eps * f| <= 2 M f + 1e-6", bad == 0,
                    std::to_string(bad) + " violating nodes, max(sup - 2M) " + short_num(worst));
            sink.table("mollify_domination.csv", t);
        }

        // Smoothing operator: support and convergence along h = 2^-k.
        {
            const int R = o.smoothing_resolution;
            const auto space = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {R, R});
            const auto time = Grid<1>::cell_centered({0.0}, {1.0}, {R});
            const auto qt = space_time(time, space);
            const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, space);
            const auto pfun = [](const Point<3>& x) { return 1.5 + 0.5 * x[1]; };
            const auto pq = ExponentField<3>(ScalarField<3>::sample(qt, pfun), 0.0);
            Table t{{"field", "k", "h", "error", "floor"}, {}};
            bool monotone = true;
            bool below = true;
            bool support = true;
            std::string detail;
            const auto fields = detail::smoothing_fields(o.smoothing_fields);
            for (std::size_t i = 0; i < fields.size(); ++i)
            {
                const auto& fn = fields[i];
                const auto u = ScalarField<3>::sample(qt, fn);
                const double floor = luxembourg_norm(detail::cell_average_defect(qt, fn), pq, Region<3>::whole(qt));
                double prev = std::numeric_limits<double>::infinity();
                double last = 0.0;
                double before_last = 0.0;
                for (int k = 2; k <= 6; ++k)
                {
                    const Smoother<2> sm(qt, dom, std::pow(2.0, -k));
                    const auto r = sm.R(u);
                    const auto p = ExponentField<3>(ScalarField<3>::sample(sm.grid(), pfun), 0.0);
                    const double err = luxembourg_norm(r - sm.extend(u), p, Region<3>::whole(sm.grid()));
                    monotone = monotone && err < prev;
                    prev = err;
                    before_last = last;
                    last = err;
                    const double h = sm.h();
                    for (std::size_t n = 0; n < r.nodes(); ++n)
                    {
                        if (r(n) != 0.0)
                        {
                            const auto x = sm.grid().point(n);
                            const bool ok = dom.r(n % space.size()) > h && x[0] > -h && x[0] < 1.0 + h;
                            support = support && ok;
                        }
                    }
                    t.rows.push_back({std::to_string(i), std::to_string(k), num(h), num(err), num(floor)});
                }
                below = below && last < 3.0 * floor;
                detail += (i ? "; " : "") + short_num(before_last) + ", " + short_num(last) + " vs floor " + short_num(floor);
            }
            rep.add("R^h u supported in the shrunken cylinder", support, support ? "cell-exact" : "support leaks");
            rep.add("||R^h u - u|| decreases along h = 2^-k, k = 2..6", monotone, monotone ? "strictly decreasing" : "not monotone");
            rep.add("final smoothing error below 3x quadrature floor", below, "k = 5, 6 errors: " + detail);
            sink.table("mollify_smoothing.csv", t);
        }

        // Decomposition eps(R^h u) = R^h eps(u) + termB, at two resolutions.
        {
            const double h = o.decomposition_h;
            const double T = o.decomposition_T;
            const auto run = [&](int ns, double& termB_core) {
                const auto space = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {ns, ns});
                const int nt = static_cast<int>(std::lround(T * ns));
                const auto time = Grid<1>::cell_centered({0.0}, {T}, {nt});
                const auto qt = space_time(time, space);
                const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, space);
                const auto u = VectorField<3, 2>::sample(qt, [T](const Point<3>& x) {
                    const double s = (x[0] - T / 2) / (T / 2);
                    const double g = std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
                    return std::array<double, 2>{g * std::sin(2 * x[1] + x[2]), g * std::cos(x[1] - 3 * x[2])};
                });
                const Smoother<2> sm(qt, dom, h);
                const auto dec = sm.decompose(u);
                const auto e = sym_gradient(sm.R(u), Region<3>::whole(sm.grid()));
                const auto core = shrink(dom, 4 * sm.h());
                double res = 0.0;
                termB_core = 0.0;
                for (std::size_t n = 0; n < e.nodes(); ++n)
                {
                    for (int c = 0; c < 3; ++c)
                    {
                        res = std::max(res, std::abs(e(n, c) - dec.termA(n, c) - dec.termB(n, c)));
                        if (core.inside(n % space.size()))
                        {
                            termB_core = std::max(termB_core, std::abs(dec.termB(n, c)));
                        }
                    }
                }
                return res;
            };
            double b1 = 0.0, b2 = 0.0;
            const int n1 = o.decomposition_resolution;
            const double r1 = run(n1, b1);
            const double r2 = run(2 * n1, b2);
            const double ratio = r1 / r2;
            rep.add("decomposition residual ratio under spacing halving in [3.2, 4.8]", ratio >= 3.2 && ratio <= 4.8,
                    "ratio " + short_num(ratio) + " (" + short_num(r1) + " -> " + short_num(r2) + ")");
            rep.add("boundary term vanishes on the 4h-interior", b1 == 0.0 && b2 == 0.0, "max " + short_num(std::max(b1, b2)));
            sink.table("mollify_decomposition.csv",
                       Table{{"spacing", "residual", "termB_core"}, {{num(1.0 / n1), num(r1), num(b1)}, {num(0.5 / n1), num(r2), num(b2)}}});
        }
        return rep;
    }

    // ------------------------------------------------------------------
    // Korn figure

    struct KornOptions
    {
        WetBlanketConfig cfg;
        int space = 96;
        int time = 256;
        int n_max = 5;
        double extent = 3.0;
        double radius = 2.5;
        double contrast_exponent = 1.5;
        bool check_monotone = true;
        bool check_growth = true;
        bool check_lower_bound = true;
        bool check_contrast = true;
    };

    inline Report run_korn(const KornOptions& o, const Sink& sink)
    {
        Report rep;
        const auto g = Grid<2>::cell_centered({-o.extent, -o.extent}, {o.extent, o.extent}, {o.space, o.space});
        const auto dom = make_disc_domain<2>({0.0, 0.0}, o.radius, g);
        const auto time = phi_time_grid(o.time);
        const auto rows = korn_ratio_sequence(o.cfg, dom, o.n_max, time);
        bool inc = true;
        bool lb = true;
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            inc = inc && (i == 0 || rows[i].ratio > rows[i - 1].ratio);
            lb = lb && rows[i].ratio >= 0.95 * rows[i].lower_bound;
        }
        const double growth = rows.back().ratio / rows.front().ratio;
        std::ostringstream seq;
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            seq << (i ? " " : "") << short_num(rows[i].ratio);
        }
        if (o.check_monotone)
        {
            rep.add("Korn ratio strictly increasing in n", inc, seq.str());
        }
        if (o.check_growth)
        {
            rep.add("Korn ratio(n_max)/ratio(1) >= 2", growth >= 2.0, "observed " + short_num(growth));
        }
        if (o.check_lower_bound)
        {
            std::ostringstream lbs;
            for (std::size_t i = 0; i < rows.size(); ++i)
            {
                lbs << (i ? " " : "") << short_num(rows[i].lower_bound);
            }
            rep.add("Korn ratio >= analytic lower bound - 5%", lb, "bounds " + lbs.str());
        }
        if (o.check_contrast)
        {
            WetBlanketConfig flat = o.cfg;
            flat.alpha = flat.beta = o.contrast_exponent;
            const auto crow = korn_ratio_sequence(flat, dom, o.n_max, time);
            double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
            for (const auto& r : crow)
            {
                lo = std::min(lo, r.ratio);
                hi = std::max(hi, r.ratio);
            }
            rep.add("constant-exponent contrast run max/min <= 1.5", hi / lo <= 1.5, "max/min " + short_num(hi / lo));
            if (sink.enabled())
            {
                write_ratio_csv(sink.path("korn_contrast.csv"), crow, sink.comment);
            }
        }
        if (sink.enabled())
        {
            write_ratio_csv(sink.path("korn_ratios.csv"), rows, sink.comment);
            write_korn_figure(sink.path("korn_figure"), build_korn_figure(o.cfg, dom), time, o.n_max, sink.comment);
        }
        return rep;
    }

    // ------------------------------------------------------------------
    // Pointwise Poincare on the unit disc

    struct PoincareOptions
    {
        int coarse = 96;
        int fine = 192;
        int samples = 200;
        double stability = 0.2;
    };

    namespace detail
    {
        inline std::vector<VectorField<2, 2>> poincare_fields(const Grid<2>& g)
        {
            std::vector<VectorField<2, 2>> out;
            out.push_back(VectorField<2, 2>::sample(g, [](const Point<2>& x) {
                const double b = bump((x[0] * x[0] + x[1] * x[1]) / 0.81);
                return std::array<double, 2>{b * x[0], b * x[1]};
            }));
            out.push_back(VectorField<2, 2>::sample(g, [](const Point<2>& x) {
                const double e = varexp::detail::mollified_disc(std::hypot(x[0], x[1]), 0.7, 0.25);
                return std::array<double, 2>{-e * x[1], e * x[0]};
            }));
            out.push_back(VectorField<2, 2>::sample(g, [](const Point<2>& x) {
                const double dx = x[0] - 0.25, dy = x[1] - 0.15;
                const double b = bump((dx * dx + dy * dy) / (0.62 * 0.62));
                return std::array<double, 2>{b * std::sin(3 * x[1]), b * std::cos(2 * x[0])};
            }));
            return out;
        }
    }

    inline Report run_poincare(const PoincareOptions& o, const Sink& sink)
    {
        Report rep;
        std::vector<std::vector<double>> c0(2);
        bool budget_ok = true;
        std::vector<double> coarse_c0;
        int level = 0;
        for (int n : {o.coarse, o.fine})
        {
            const auto g = Grid<2>::cell_centered({-1.05, -1.05}, {1.05, 1.05}, {n, n});
            const auto dom = make_disc_domain<2>({0.0, 0.0}, 1.0, g);
            const auto cp = cone_params_for(dom);
            verify_cones(dom, cp);
            const auto samples = near_boundary_samples(dom, cp.h0(), static_cast<std::size_t>(o.samples));
            const auto fields = detail::poincare_fields(g);
            for (std::size_t i = 0; i < fields.size(); ++i)
            {
                // On the fine grid the coarse constant, widened by the
                // stability margin, is the budget every sample must meet.
                const double budget = level == 0 ? 0.0 : (1.0 + o.stability) * c0[0][i];
                const auto r = poincare_verify(fields[i], dom, samples, cp.h0(), budget);
                c0[level].push_back(r.c0);
                if (level == 1)
                {
                    budget_ok = budget_ok && r.pass;
                }
                if (sink.enabled())
                {
                    write_poincare_csv(sink.path("poincare_field" + std::to_string(i + 1) + "_n" + std::to_string(n) + ".csv"), r,
                                       sink.comment);
                }
            }
            if (level == 0)
            {
                const auto z = poincare_verify(VectorField<2, 2>(g), dom, samples, cp.h0());
                bool zero_ok = z.pass && z.c0 == 0.0;
                for (const auto& row : z.rows)
                {
                    zero_ok = zero_ok && row.lhs == 0.0;
                }
                rep.add("u = 0 passes the pointwise Poincare check", zero_ok, std::to_string(z.rows.size()) + " samples");
                rep.add("sample count with 0 < r <= h0", samples.size() >= static_cast<std::size_t>(o.samples) * 9 / 10,
                        std::to_string(samples.size()) + " samples, h0 " + short_num(cp.h0()));
            }
            ++level;
        }
        double drift = 0.0;
        std::ostringstream d;
        Table t{{"field", "c0_coarse", "c0_fine", "drift"}, {}};
        for (std::size_t i = 0; i < c0[0].size(); ++i)
        {
            const double rel = std::abs(c0[1][i] / c0[0][i] - 1.0);
            drift = std::max(drift, rel);
            d << (i ? "; " : "") << short_num(c0[0][i]) << " -> " << short_num(c0[1][i]);
            t.rows.push_back({std::to_string(i + 1), num(c0[0][i]), num(c0[1][i]), num(rel)});
        }
        rep.add("empirical c0 stable within 20% under refinement", drift <= o.stability, d.str());
        rep.add("lhs <= c0 * rhs at every fine-grid sample", budget_ok, "budget (1 + margin) * coarse c0");
        sink.table("poincare_c0.csv", t);
        return rep;
    }

    // ------------------------------------------------------------------
    // Phi map and cap geometry

    namespace detail
    {
        template <std::size_t D>
        double gram_det_fd(const std::array<double, D - 1>& eta0, double step)
        {
            std::array<Point<D>, D - 1> cols{};
            for (std::size_t j = 0; j + 1 < D; ++j)
            {
                auto ep = eta0, em = eta0;
                ep[j] += step;
                em[j] -= step;
                const auto a = phi_map<D>(static_cast<int>(D), ep);
                const auto b = phi_map<D>(static_cast<int>(D), em);
                for (std::size_t i = 0; i < D; ++i)
                {
                    cols[j][i] = (a[i] - b[i]) / (2 * step);
                }
            }
            std::array<Point<D - 1>, D - 1> G{};
            for (std::size_t a = 0; a + 1 < D; ++a)
            {
                for (std::size_t b = 0; b + 1 < D; ++b)
                {
                    double s = 0.0;
                    for (std::size_t i = 0; i < D; ++i)
                    {
                        s += cols[a][i] * cols[b][i];
                    }
                    G[a][b] = s;
                }
            }
            return determinant<D - 1>(G);
        }

        /// Cap area on the sphere of the given radius through the last chart
        /// parametrisation: integral of r^(d-1) (1 + |eta|^2)^(-d/2) over
        /// |eta| < tan(opening).
        inline double cap_area_by_quadrature(int d, double opening, double radius)
        {
            const double top = std::tan(opening);
            const auto rule = gauss_legendre(20);
            if (d == 2)
            {
                return radius * integrate_gl_composite([](double e) { return 1.0 / (1.0 + e * e); }, -top, top, 8, rule);
            }
            return radius * radius * 2.0 * M_PI *
                   integrate_gl_composite([](double r) { return r * std::pow(1.0 + r * r, -1.5); }, 0.0, top, 8, rule);
        }
    }

    inline Report run_geometry(std::uint64_t seed, const Sink& sink)
    {
        Report rep;
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(-3.0, 3.0);
        double unit_dev = 0.0;
        for (int s = 0; s < 1000; ++s)
        {
            const std::array<double, 1> e2{U(rng)};
            const std::array<double, 2> e3{U(rng), U(rng)};
            for (int i = 1; i <= 2; ++i)
            {
                const auto p = phi_map<2>(i, e2);
                unit_dev = std::max(unit_dev, std::abs(std::hypot(p[0], p[1]) - 1.0));
            }
            for (int i = 1; i <= 3; ++i)
            {
                const auto p = phi_map<3>(i, e3);
                unit_dev = std::max(unit_dev, std::abs(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - 1.0));
            }
        }
        rep.add("sphere charts map onto the unit sphere", unit_dev <= 1e-12, "max dev " + short_num(unit_dev));
        const double g2 = detail::gram_det_fd<2>({0.0}, 1e-4);
        const double g3 = detail::gram_det_fd<3>({0.0, 0.0}, 1e-4);
        rep.add("finite-difference Gram determinant of the last chart at 0 equals 1", std::abs(g2 - 1.0) <= 1e-6 && std::abs(g3 - 1.0) <= 1e-6,
                "d=2 " + short_num(g2) + ", d=3 " + short_num(g3));
        const double up = std::abs(upphi_det<2>({1.0}).det);
        rep.add("|det| of the d = 2 boundary chart map at eta = 1 equals 1", std::abs(up - 1.0) <= 1e-12, "value " + num(up));
        Table t{{"d", "radius", "cap_quadrature", "cap_closed_form"}, {}};
        std::ostringstream slopes;
        bool slope_ok = true;
        double agree = 0.0;
        for (int d : {2, 3})
        {
            // Least-squares slope of log area against log radius.
            std::vector<double> lx, ly;
            for (double r = 0.01; r <= 3.0 + 1e-12; r *= 1.8)
            {
                const double a = detail::cap_area_by_quadrature(d, 0.7, r);
                agree = std::max(agree, std::abs(a / cap_area(d, 0.7, r) - 1.0));
                lx.push_back(std::log(r));
                ly.push_back(std::log(a));
                t.rows.push_back({std::to_string(d), num(r), num(a), num(cap_area(d, 0.7, r))});
            }
            double mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < lx.size(); ++i)
            {
                mx += lx[i];
                my += ly[i];
            }
            mx /= static_cast<double>(lx.size());
            my /= static_cast<double>(ly.size());
            double sxy = 0.0, sxx = 0.0;
            for (std::size_t i = 0; i < lx.size(); ++i)
            {
                sxy += (lx[i] - mx) * (ly[i] - my);
                sxx += (lx[i] - mx) * (lx[i] - mx);
            }
            const double slope = sxy / sxx;
            slope_ok = slope_ok && std::abs(slope - (d - 1)) <= 1e-6;
            slopes << (d == 2 ? "" : ", ") << "d=" << d << " slope " << short_num(slope);
        }
        rep.add("cap area scales like radius^(d-1)", slope_ok && agree <= 1e-10,
                slopes.str() + ", quadrature vs closed form " + short_num(agree));
        sink.table("geometry_caps.csv", t);
        return rep;
    }

    // ------------------------------------------------------------------
    // Constitutive sampling

    inline Report run_structure(std::uint64_t seed, int samples, const Sink& sink)
    {
        Report rep;
        Table t{{"law", "samples", "growth", "coercivity", "monotonicity", "lower_growth", "lower_sign", "modular_coercivity"}, {}};
        bool ok = true;
        // r = 0.15 stays below (p-)_*/(p-)' = 0.2 for p- = 1.1 in the plane.
        const std::vector<std::pair<std::string, LowerOrderLaw<2>>> laws{{"b=0", LowerOrderLaw<2>::zero()},
                                                                          {"b=|a|^(r-1)a", LowerOrderLaw<2>::power(1.0, 0.15)}};
        int total = 0;
        for (std::size_t i = 0; i < laws.size(); ++i)
        {
            laws[i].second.validate(1.1);
            const auto s = sample_structure<2>(samples, seed + i, laws[i].second, 1.1, 4.0, 1.0, 1e-10);
            ok = ok && s.violations() == 0;
            total += s.violations();
            t.rows.push_back({laws[i].first, std::to_string(s.samples), std::to_string(s.growth), std::to_string(s.coercivity),
                              std::to_string(s.monotonicity), std::to_string(s.lower_growth), std::to_string(s.lower_sign),
                              std::to_string(s.modular_coercivity)});
        }
        rep.add("growth, coercivity and monotonicity of S, growth and sign of b on random tuples", ok,
                std::to_string(total) + " violations in " + std::to_string(2 * samples) + " tuples");
        sink.table("structure_sampling.csv", t);
        return rep;
    }

    // ------------------------------------------------------------------
    // Rothe solver experiments

    inline Domain<2> unit_square_domain(int cells)
    {
        const auto g = Grid<2>::vertex_centered({0.0, 0.0}, {1.0, 1.0}, {cells, cells});
        return make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, g);
    }

    /// Smooth data on the unit square with random phases; u0 vanishes on
    /// the boundary.
    inline ProblemData<2> random_rothe_data(const Domain<2>& dom, double T, double tau, std::uint64_t seed, double amp)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        const double a = U(rng), b = U(rng), c = U(rng), d = U(rng), e = U(rng), k = 1.0 + 2.0 * std::abs(U(rng));
        ProblemData<2> data(dom, T, tau);
        const auto bump = [](const Point<2>& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); };
        data.u0 = masked(VectorField<2, 2>::sample(dom.grid(),
                                                   [&](const Point<2>& x) {
                                                       return std::array<double, 2>{amp * a * bump(x) * std::cos(k * x[1] + b),
                                                                                    amp * c * bump(x) * x[0]};
                                                   }),
                         dom);
        data.f = VectorField<3, 2>::sample(data.f.grid(), [&](const Point<3>& tx) {
            return std::array<double, 2>{amp * d * std::cos(tx[0] + k * tx[1]), amp * e * std::sin(2 * tx[2] - tx[0])};
        });
        data.F = SymTensorField<3, 2>::sample(data.F.grid(), [&](const Point<3>& tx) {
            return std::array<double, 3>{amp * b * std::sin(tx[1] + tx[0]), amp * 0.5 * a * std::cos(k * tx[2]), amp * e * tx[1] * tx[2]};
        });
        return data;
    }

    inline ConstitutiveLaw<2> smooth_exponent_law(const ProblemData<2>& data, double delta, double p_lo, double p_hi)
    {
        const Grid<3> st = space_time(data.time_grid(), data.domain.grid());
        auto p = ScalarField<3>::sample(st, [&](const Point<3>& tx) {
            const double s = 0.5 + 0.5 * std::sin(3 * tx[1] + tx[0]) * std::cos(2 * tx[2]);
            return p_lo + (p_hi - p_lo) * s;
        });
        return ConstitutiveLaw<2>(delta, ExponentField<3>(std::move(p)));
    }

    inline ManufacturedSolution<2> manufactured(bool linear_in_time, bool variable, double delta = 1e-2)
    {
        ManufacturedSolution<2> ms;
        if (linear_in_time)
        {
            ms.g = [](double t) { return 1.0 + t; };
            ms.dg = [](double) { return 1.0; };
        }
        else
        {
            ms.g = [](double t) { return std::cos(3 * t); };
            ms.dg = [](double t) { return -3 * std::sin(3 * t); };
        }
        ms.w = [](const Point<2>& x) {
            const double s = std::sin(M_PI * x[0]);
            const double c = std::sin(M_PI * x[1]);
            return std::array<double, 2>{s * s * std::sin(2 * M_PI * x[1]), std::sin(2 * M_PI * x[0]) * c * c};
        };
        if (variable)
        {
            ms.p = [](double t, const Point<2>& x) { return 2.0 + 0.5 * std::sin(M_PI * x[0]) * std::cos(M_PI * x[1] + t); };
            ms.delta = delta;
        }
        else
        {
            ms.p = [](double, const Point<2>&) { return 2.0; };
        }
        return ms;
    }

    struct MmsOptions
    {
        int time_cells = 32;                 // fixed grid for the tau sweep
        std::vector<double> taus{1.0 / 8, 1.0 / 16, 1.0 / 32};
        double time_T = 1.0;
        std::vector<int> space_cells{16, 32, 64};  // spacing sweep
        double space_tau = 1.0 / 16;
        double space_T = 0.5;
        double variable_delta = 1e-2;
    };

    struct MmsSweep
    {
        std::vector<double> errors;
        std::vector<double> ratios;
    };

    inline double mms_run(const ManufacturedSolution<2>& ms, int cells, double T, double tau, Forcing mode,
                          RotheResult<2>* keep = nullptr)
    {
        const auto data = manufactured_problem(ms, unit_square_domain(cells), T, tau, mode);
        const auto law = manufactured_law(ms, data);
        auto res = rothe_solve(data, law, ms.low);
        const double e = manufactured_error(res, ms, data);
        if (keep)
        {
            *keep = std::move(res);
        }
        return e;
    }

    inline Report run_mms(const MmsOptions& o, const Sink& sink)
    {
        Report rep;
        Table t{{"exponent", "sweep", "cells", "tau", "error", "ratio"}, {}};
        for (bool variable : {false, true})
        {
            const std::string tag = variable ? "variable" : "p=2";
            MmsSweep ts, xs;
            const auto mt = manufactured(false, variable, o.variable_delta);
            for (double tau : o.taus)
            {
                // Discretely injected forcing isolates the time-stepping error.
                ts.errors.push_back(mms_run(mt, o.time_cells, o.time_T, tau, Forcing::discrete));
                ts.ratios.push_back(ts.errors.size() > 1 ? ts.errors[ts.errors.size() - 2] / ts.errors.back() : 0.0);
                t.rows.push_back({tag, "tau", std::to_string(o.time_cells), num(tau), num(ts.errors.back()),
                                  ts.errors.size() > 1 ? num(ts.ratios.back()) : ""});
            }
            const auto mx = manufactured(true, variable, o.variable_delta);
            for (int cells : o.space_cells)
            {
                // A solution linear in time is integrated exactly by backward
                // Euler, so only the spatial error remains.
                xs.errors.push_back(mms_run(mx, cells, o.space_T, o.space_tau, Forcing::continuous));
                xs.ratios.push_back(xs.errors.size() > 1 ? xs.errors[xs.errors.size() - 2] / xs.errors.back() : 0.0);
                t.rows.push_back({tag, "spacing", std::to_string(cells), num(o.space_tau), num(xs.errors.back()),
                                  xs.errors.size() > 1 ? num(xs.ratios.back()) : ""});
            }
            std::ostringstream tr, xr;
            bool t_ok = true, x_ok = true;
            for (std::size_t i = 1; i < ts.errors.size(); ++i)
            {
                tr << (i > 1 ? " " : "") << short_num(ts.ratios[i]);
                t_ok = t_ok && (variable ? ts.errors[i] < ts.errors[i - 1] : std::abs(ts.ratios[i] - 2.0) <= 0.6);
            }
            for (std::size_t i = 1; i < xs.errors.size(); ++i)
            {
                xr << (i > 1 ? " " : "") << short_num(xs.ratios[i]);
                x_ok = x_ok && (variable ? xs.errors[i] < xs.errors[i - 1] : std::abs(xs.ratios[i] - 4.0) <= 1.6);
            }
            if (variable)
            {
                rep.add("variable exponent: error decreases under tau halving", t_ok, "ratios " + tr.str());
                rep.add("variable exponent: error decreases under spacing halving", x_ok, "ratios " + xr.str());
            }
            else
            {
                rep.add("p = 2: tau halving error ratio 2 +- 30%", t_ok, "ratios " + tr.str());
                rep.add("p = 2: spacing halving error ratio 4 +- 40%", x_ok, "ratios " + xr.str());
            }
        }
        sink.table("mms_errors.csv", t);
        return rep;
    }

    struct AprioriOptions
    {
        int datasets = 5;
        int cells = 16;
        double T = 0.5;
        double tau = 0.05;
        double amp = 2.0;
    };

    inline Report run_apriori(const AprioriOptions& o, std::uint64_t seed, const Sink& sink)
    {
        Report rep;
        Table t{{"dataset", "k", "lhs", "rhs", "holds"}, {}};
        int failures = 0;
        int rows = 0;
        double tightest = std::numeric_limits<double>::infinity();
        for (int i = 0; i < o.datasets; ++i)
        {
            const auto data = random_rothe_data(unit_square_domain(o.cells), o.T, o.tau, seed * 1000 + static_cast<std::uint64_t>(i), o.amp);
            const auto law = smooth_exponent_law(data, i % 2 ? 1e-2 : 0.0, 1.4, 2.8);
            const auto low = i % 2 ? LowerOrderLaw<2>::power(0.5, 1.2) : LowerOrderLaw<2>::zero();
            const auto res = rothe_solve(data, law, low);
            for (const auto& r : apriori_check(res, data, law, low))
            {
                ++rows;
                failures += !r.holds;
                tightest = std::min(tightest, r.rhs / r.lhs);
                t.rows.push_back({std::to_string(i), std::to_string(r.k), num(r.lhs), num(r.rhs), r.holds ? "1" : "0"});
            }
        }
        rep.add("discrete a priori energy bound at every step", failures == 0 && rows > 0,
                std::to_string(failures) + " failures in " + std::to_string(rows) + " steps, min rhs/lhs " + short_num(tightest));
        sink.table("rothe_apriori.csv", t);
        return rep;
    }

    inline Report run_ibp(const Sink& sink)
    {
        Report rep;
        const auto g = Grid<2>::vertex_centered({0.0, 0.0}, {1.0, 1.0}, {12, 12});
        const auto region = Region<2>::whole(g);
        const auto field = [&](int K, auto&& fn) {
            const Grid<1> time({K + 1}, {1.0 / K}, {0.0});
            return VectorField<3, 2>::sample(space_time(time, g), [&](const Point<3>& tx) { return fn(tx[0], tx[1], tx[2]); });
        };
        const auto uf = [](double t, double x, double y) {
            return std::array<double, 2>{std::sin(3 * t + x) * std::cos(y), std::cos(2 * t) * std::sin(x * y)};
        };
        const auto vf = [](double t, double x, double y) {
            return std::array<double, 2>{std::cos(t - y) * x, std::sin(4 * t) * std::cos(x + y)};
        };
        std::vector<double> lx, ly;
        Table t{{"steps", "tau", "residual"}, {}};
        for (int K : {16, 32, 64, 128})
        {
            const double r = discrete_ibp_check<2>(field(K, uf), field(K, vf), region);
            lx.push_back(std::log(1.0 / K));
            ly.push_back(std::log(r));
            t.rows.push_back({std::to_string(K), num(1.0 / K), num(r)});
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i)
        {
            mx += lx[i] / static_cast<double>(lx.size());
            my += ly[i] / static_cast<double>(ly.size());
        }
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i)
        {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        const double order = sxy / sxx;
        rep.add("discrete integration by parts residual order 2 +- 0.3", std::abs(order - 2.0) <= 0.3, "fitted order " + short_num(order));
        sink.table("rothe_ibp.csv", t);
        return rep;
    }
}
