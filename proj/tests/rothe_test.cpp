// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#include <varexp/rothe.hpp>

#include "linear_oracle.hpp"
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace varexp;
using varexp::oracle::linear_oracle;

namespace
{
    using Vec = VectorField<2, 2>;

    Grid<2> unit_grid(int cells)
    {
        return Grid<2>::vertex_centered({0.0, 0.0}, {1.0, 1.0}, {cells, cells});
    }

    Domain<2> unit_square(const Grid<2>& g)
    {
        return make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, g);
    }

    std::array<double, 2> profile(const Point<2>& x)
    {
        const double s = std::sin(M_PI * x[0]);
        const double c = std::sin(M_PI * x[1]);
        return {s * s * std::sin(2 * M_PI * x[1]), std::sin(2 * M_PI * x[0]) * c * c};
    }

    // Smooth data vanishing on the square's boundary, with random phases.
    ProblemData<2> smooth_random_data(const Domain<2>& dom, double T, double tau, std::uint64_t seed, double amp = 1.0)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        const double a = U(rng), b = U(rng), c = U(rng), d = U(rng), e = U(rng);
        ProblemData<2> data(dom, T, tau);
        const auto bump = [](const Point<2>& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); };
        data.u0 = masked(Vec::sample(dom.grid(), [&](const Point<2>& x) {
                             return std::array<double, 2>{amp * a * bump(x) * std::cos(2 * x[1] + b), amp * c * bump(x) * x[0]};
                         }),
                         dom);
        data.f = VectorField<3, 2>::sample(data.f.grid(), [&](const Point<3>& tx) {
            return std::array<double, 2>{amp * d * std::cos(tx[0] + 3 * tx[1]), amp * e * std::sin(2 * tx[2] - tx[0])};
        });
        data.F = SymTensorField<3, 2>::sample(data.F.grid(), [&](const Point<3>& tx) {
            return std::array<double, 3>{amp * b * std::sin(tx[1] + tx[0]), amp * 0.5 * a * std::cos(tx[2]), amp * e * tx[1] * tx[2]};
        });
        return data;
    }

    ConstitutiveLaw<2> law_for(const ProblemData<2>& data, double delta, double p_lo, double p_hi)
    {
        const Grid<3> st = space_time(data.time_grid(), data.domain.grid());
        auto p = ScalarField<3>::sample(st, [&](const Point<3>& tx) {
            const double s = 0.5 + 0.5 * std::sin(3 * tx[1] + tx[0]) * std::cos(2 * tx[2]);
            return p_lo + (p_hi - p_lo) * s;
        });
        return ConstitutiveLaw<2>(delta, ExponentField<3>(std::move(p)));
    }

    ConstitutiveLaw<2> constant_law(const ProblemData<2>& data, double delta, double q)
    {
        return ConstitutiveLaw<2>::constant_in_time(delta, ExponentField<2>::constant(data.domain.grid(), q), data.time_grid());
    }

    double rel_diff(const Vec& a, const Vec& b)
    {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < a.values().size(); ++i)
        {
            num += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
            den += b.values()[i] * b.values()[i];
        }
        return std::sqrt(num / den);
    }

    ManufacturedSolution<2> mms(bool linear_in_time, bool variable)
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
        ms.w = profile;
        if (variable)
        {
            ms.p = [](double t, const Point<2>& x) { return 2.0 + 0.5 * std::sin(M_PI * x[0]) * std::cos(M_PI * x[1] + t); };
            ms.delta = 1e-2;
        }
        else
        {
            ms.p = [](double, const Point<2>&) { return 2.0; };
        }
        return ms;
    }

    double mms_error(const ManufacturedSolution<2>& ms, int cells, double T, double tau, Forcing mode)
    {
        const Grid<2> g = unit_grid(cells);
        const auto data = manufactured_problem(ms, unit_square(g), T, tau, mode);
        const auto law = manufactured_law(ms, data);
        const auto res = rothe_solve(data, law, ms.low);
        return manufactured_error(res, ms, data);
    }
}

TEST(RotheLaws, EmbeddingExponent)
{
    EXPECT_DOUBLE_EQ(parabolic_embedding_exponent(1.5, 2), 3.0);
    EXPECT_DOUBLE_EQ(parabolic_embedding_exponent(2.0, 2), 4.0);
    EXPECT_DOUBLE_EQ(parabolic_embedding_exponent(3.0, 2), 5.0);
    EXPECT_DOUBLE_EQ(parabolic_embedding_exponent(2.0, 3), 2.0 * 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(lower_order_growth_limit(2.0, 2), 2.0);
    EXPECT_THROW(parabolic_embedding_exponent(1.0, 2), invalid_input);
    EXPECT_THROW(LowerOrderLaw<2>::power(1.0, 2.0).validate(2.0), invalid_input);
    EXPECT_NO_THROW(LowerOrderLaw<2>::power(1.0, 1.9).validate(2.0));
}

TEST(RotheLaws, PotentialIsAntiderivativeOfFlux)
{
    for (double p : {1.3, 1.5, 2.0, 2.7, 4.0})
    {
        for (double delta : {0.0, 1e-2, 0.5})
        {
            for (double s : {1e-6, 1e-3, 0.1, 0.7, 3.0})
            {
                const double h = 1e-5 * s;
                const double fd = (ConstitutiveLaw<2>::potential(s + h, p, delta) - ConstitutiveLaw<2>::potential(s - h, p, delta)) / (2 * h);
                const double exact = std::pow(delta + s, p - 2.0) * s;
                EXPECT_NEAR(fd, exact, 1e-6 * exact) << p << ' ' << delta << ' ' << s;
            }
        }
    }
    // Both sides of the small-argument switch against a long-double Simpson
    // integral of (delta + t)^(p-2) t.
    const double d = 0.3, p = 1.7;
    for (double x : {0.05 * (1 - 1e-9), 0.05 * (1 + 1e-9), 1e-6, 1e-3, 0.5, 4.0})
    {
        const long double s = d * x;
        const int panels = 2000;
        const long double h = s / panels;
        long double sum = 0.0L;
        for (int i = 0; i <= panels; ++i)
        {
            const long double t = i * h;
            const long double v = std::pow(static_cast<long double>(d) + t, static_cast<long double>(p) - 2.0L) * t;
            sum += v * ((i == 0 || i == panels) ? 1 : (i % 2 ? 4 : 2));
        }
        const double ref = static_cast<double>(sum * h / 3.0L);
        EXPECT_NEAR(ConstitutiveLaw<2>::potential(d * x, p, d), ref, 1e-12 * ref) << x;
    }
    EXPECT_DOUBLE_EQ(ConstitutiveLaw<2>::potential(2.0, 3.0, 0.0), 8.0 / 3.0);
    EXPECT_EQ(ConstitutiveLaw<2>::potential(0.0, 1.5, 0.0), 0.0);
}

TEST(RotheLaws, StructureConditionsOnRandomTuples)
{
    for (double r : {0.5, 1.0, 1.4})
    {
        const auto rep = sample_structure<2>(10000, 7, LowerOrderLaw<2>::power(0.8, r));
        EXPECT_EQ(rep.samples, 10000);
        EXPECT_EQ(rep.violations(), 0) << "worst " << rep.worst;
    }
    const auto rep3 = sample_structure<3>(10000, 11, LowerOrderLaw<3>::zero());
    EXPECT_EQ(rep3.violations(), 0);
    // The check has teeth: a sign-violating b is caught.
    auto bad = LowerOrderLaw<2>::power(1.0, 1.0);
    bad.gamma = -1.0;
    EXPECT_GT(sample_structure<2>(1000, 3, bad).lower_sign, 0);
}

TEST(RotheStep, ZeroDataGivesZero)
{
    const Grid<2> g = unit_grid(12);
    ProblemData<2> data(unit_square(g), 0.5, 0.125);
    const auto law = law_for(data, 0.0, 1.5, 3.0);
    StepReport rep;
    const Vec u = energy_step(Vec(g), 0.125, law, LowerOrderLaw<2>::zero(), data, {}, &rep);
    EXPECT_EQ(u.max_norm(), 0.0);
    EXPECT_EQ(rep.iterations, 0);
    EXPECT_TRUE(rep.regularized);
    EXPECT_EQ(rep.delta_used, 1e-8);
}

TEST(RotheStep, LinearCaseMatchesAssembledOracle)
{
    for (int cells : {10, 24})
    {
        const Grid<2> g = unit_grid(cells);
        const auto data = smooth_random_data(unit_square(g), 0.5, 0.05, 100 + cells);
        const auto law = constant_law(data, 0.0, 2.0);
        StepReport rep;
        const Vec u = energy_step(data.u0, 0.05, law, LowerOrderLaw<2>::zero(), data, {}, &rep);
        EXPECT_FALSE(rep.regularized);
        const Vec ref = linear_oracle(data, data.u0, 1);
        EXPECT_LT(rel_diff(u, ref), 1e-6) << cells;
    }
}

TEST(RotheStep, EnergyDecreasesAcrossIterations)
{
    const Grid<2> g = unit_grid(20);
    const auto data = smooth_random_data(unit_square(g), 0.2, 0.1, 5, 3.0);
    for (double delta : {0.0, 1e-2, 1.0})
    {
        const auto law = law_for(data, delta, 1.3, 3.5);
        StepReport rep;
        const Vec u = energy_step(data.u0, 0.1, law, LowerOrderLaw<2>::zero(), data, {}, &rep);
        ASSERT_GE(rep.energies.size(), 2u);
        for (std::size_t i = 1; i < rep.energies.size(); ++i)
        {
            EXPECT_LE(rep.energies[i], rep.energies[i - 1] + 1e-14 * std::abs(rep.energies[i - 1])) << delta << ' ' << i;
        }
        StepEnergy<2> E(law, data, 1, data.u0, rep.delta_used);
        EXPECT_LE(E.value(u), E.value(data.u0));
        EXPECT_LE(rep.residual, rep.tolerance);
        EXPECT_LE(E.residual(E.gradient(u)), rep.tolerance);
    }
}

TEST(RotheStep, GradientMatchesFiniteDifferences)
{
    const Grid<2> g = unit_grid(14);
    const auto data = smooth_random_data(unit_square(g), 0.2, 0.1, 9, 2.0);
    const auto law = law_for(data, 0.1, 1.3, 2.6);
    StepEnergy<2> E(law, data, 1, data.u0, law.delta);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> N(0.0, 1.0);
    const auto free = E.free();
    Vec u = data.u0;
    for (std::size_t n = 0; n < u.nodes(); ++n)
    {
        if (free[n])
        {
            u(n, 0) += 0.3 * N(rng);
            u(n, 1) += 0.3 * N(rng);
        }
    }
    const Vec grad = E.gradient(u);
    for (int trial = 0; trial < 20; ++trial)
    {
        Vec d(g);
        for (std::size_t n = 0; n < d.nodes(); ++n)
        {
            if (free[n])
            {
                d(n, 0) = N(rng);
                d(n, 1) = N(rng);
            }
        }
        const double h = 1e-4;
        Vec up = u, um = u;
        for (std::size_t i = 0; i < u.values().size(); ++i)
        {
            up.values()[i] += h * d.values()[i];
            um.values()[i] -= h * d.values()[i];
        }
        const double fd = (E.value(up) - E.value(um)) / (2 * h);
        double an = 0.0;
        for (std::size_t i = 0; i < u.values().size(); ++i)
        {
            an += grad.values()[i] * d.values()[i];
        }
        EXPECT_NEAR(fd, an, 1e-5 * std::abs(an)) << trial;
    }
}

TEST(RotheStep, HessianMatchesGradientDifferences)
{
    const Grid<2> g = unit_grid(12);
    const auto data = smooth_random_data(unit_square(g), 0.2, 0.1, 13, 2.0);
    const auto law = law_for(data, 0.05, 1.4, 3.0);
    StepEnergy<2> E(law, data, 1, data.u0, law.delta);
    Vec u = data.u0;
    u *= 1.7;
    Vec d = masked(Vec::sample(g, [](const Point<2>& x) { return std::array<double, 2>{std::sin(5 * x[0] + x[1]), x[0] * x[1]}; }),
                   Region<2>(g, E.free()));
    E.linearize(u);
    const Vec Hd = E.hessian_apply(d);
    const double h = 1e-5;
    Vec up = u, um = u;
    for (std::size_t i = 0; i < u.values().size(); ++i)
    {
        up.values()[i] += h * d.values()[i];
        um.values()[i] -= h * d.values()[i];
    }
    const Vec fd = (1.0 / (2 * h)) * (E.gradient(up) - E.gradient(um));
    EXPECT_LT(rel_diff(Hd, fd), 1e-6);
}

TEST(RotheStep, LowerOrderFixedPoint)
{
    const Grid<2> g = unit_grid(16);
    const auto data = smooth_random_data(unit_square(g), 0.2, 0.1, 17, 2.0);
    const auto law = law_for(data, 1e-2, 1.6, 2.4);
    const auto low = LowerOrderLaw<2>::power(2.0, 1.5);
    StepReport rep;
    const Vec u = energy_step(data.u0, 0.1, law, low, data, {}, &rep);
    EXPECT_GE(rep.picard, 2);
    EXPECT_LE(rep.picard, 50);
    StepEnergy<2> E(law, data, 1, data.u0, rep.delta_used);
    Vec b(g);
    for (std::size_t n = 0; n < g.size(); ++n)
    {
        const auto v = low(u.node(n));
        b(n, 0) = v[0];
        b(n, 1) = v[1];
    }
    E.set_lower_order(b);
    EXPECT_LE(E.residual(E.gradient(u)), rep.tolerance);

    StepOptions tight;
    tight.max_picard = 2;
    EXPECT_THROW(energy_step(data.u0, 0.1, law, low, data, tight), convergence_error);
}

TEST(RotheStep, ReportsNonConvergence)
{
    const Grid<2> g = unit_grid(16);
    const auto data = smooth_random_data(unit_square(g), 0.2, 0.1, 19, 5.0);
    const auto law = law_for(data, 1e-3, 1.3, 3.0);
    StepOptions opt;
    opt.max_newton = 1;
    try
    {
        energy_step(data.u0, 0.1, law, LowerOrderLaw<2>::zero(), data, opt);
        FAIL() << "expected convergence_error";
    }
    catch (const convergence_error& e)
    {
        EXPECT_GT(e.residual(), 0.0);
        EXPECT_NE(std::string(e.what()).find("final residual"), std::string::npos);
    }
}

TEST(RotheStep, RejectsBadInput)
{
    const Grid<2> g = unit_grid(10);
    const Domain<2> dom = unit_square(g);
    EXPECT_THROW(ProblemData<2>(dom, 1.0, 0.3), invalid_input);
    ProblemData<2> data(dom, 1.0, 0.25);
    const auto law = constant_law(data, 0.0, 2.0);
    Vec bad(g);
    bad(0, 0) = 1.0;
    EXPECT_THROW(energy_step(bad, 0.25, law, LowerOrderLaw<2>::zero(), data), invalid_input);
    EXPECT_THROW(energy_step(Vec(g), 0.3, law, LowerOrderLaw<2>::zero(), data), invalid_input);
    EXPECT_THROW(energy_step(Vec(g), 0.0, law, LowerOrderLaw<2>::zero(), data), invalid_input);
    ProblemData<2> other(dom, 1.0, 0.5);
    EXPECT_THROW(energy_step(Vec(g), 0.5, law, LowerOrderLaw<2>::zero(), other), invalid_input);
    data.u0 = bad;
    EXPECT_THROW(data.validate(), invalid_input);
}

TEST(RotheSolve, ZeroDataGivesZeroTrajectory)
{
    const Grid<2> g = unit_grid(10);
    ProblemData<2> data(unit_square(g), 0.5, 0.1);
    const auto law = law_for(data, 0.0, 1.5, 2.5);
    const auto res = rothe_solve(data, law, LowerOrderLaw<2>::power(1.0, 1.2));
    ASSERT_EQ(res.trajectory.size(), 6u);
    for (const auto& u : res.trajectory)
    {
        EXPECT_EQ(u.max_norm(), 0.0);
    }
    EXPECT_EQ(res.diagnostics.back().k, 5);
    EXPECT_NEAR(res.diagnostics.back().t, 0.5, 1e-15);
}

TEST(RotheSolve, ConstantExponentReducesExactly)
{
    const Grid<2> g = unit_grid(14);
    const auto data = smooth_random_data(unit_square(g), 0.3, 0.1, 23, 2.0);
    const auto ref = rothe_solve(data, constant_law(data, 0.05, 1.7), LowerOrderLaw<2>::zero());
    // Same exponent built through the general space-time sampling path.
    const Grid<3> st = space_time(data.time_grid(), g);
    ConstitutiveLaw<2> general(0.05, ExponentField<3>(ScalarField<3>::sample(st, [](const Point<3>&) { return 1.7; })));
    const auto run = rothe_solve(data, general, LowerOrderLaw<2>::zero());
    ASSERT_EQ(ref.trajectory.size(), run.trajectory.size());
    for (std::size_t k = 0; k < ref.trajectory.size(); ++k)
    {
        EXPECT_EQ(ref.trajectory[k].values(), run.trajectory[k].values()) << k;
    }
}

TEST(RotheSolve, AprioriBoundHoldsAtEveryStep)
{
    const Grid<2> g = unit_grid(16);
    for (std::uint64_t seed = 0; seed < 5; ++seed)
    {
        const auto data = smooth_random_data(unit_square(g), 0.5, 0.05, 300 + seed, 2.0);
        const auto law = law_for(data, seed % 2 ? 1e-2 : 0.0, 1.4, 2.8);
        const auto low = seed % 2 ? LowerOrderLaw<2>::power(0.5, 1.2) : LowerOrderLaw<2>::zero();
        const auto res = rothe_solve(data, law, low);
        const auto rows = apriori_check(res, data, law, low);
        ASSERT_EQ(rows.size(), 10u);
        for (const auto& r : rows)
        {
            EXPECT_TRUE(r.holds) << seed << ' ' << r.k << ' ' << r.lhs << ' ' << r.rhs;
            EXPECT_GT(r.lhs, 0.0);
        }
    }
}

TEST(RotheSolve, ManufacturedConvergenceLinear)
{
    // tau refinement with discretely injected forcing: the error is the
    // time-stepping error alone.
    const auto ms_t = mms(false, false);
    const double e1 = mms_error(ms_t, 24, 1.0, 1.0 / 8, Forcing::discrete);
    const double e2 = mms_error(ms_t, 24, 1.0, 1.0 / 16, Forcing::discrete);
    EXPECT_NEAR(e1 / e2, 2.0, 0.6);
    // Spacing refinement with the continuous operator and a solution linear
    // in time, which backward Euler integrates exactly.
    const auto ms_x = mms(true, false);
    const double s1 = mms_error(ms_x, 16, 0.25, 1.0 / 16, Forcing::continuous);
    const double s2 = mms_error(ms_x, 32, 0.25, 1.0 / 16, Forcing::continuous);
    EXPECT_NEAR(s1 / s2, 4.0, 1.6);
}

TEST(RotheSolve, ManufacturedConvergenceVariableExponent)
{
    const auto ms_t = mms(false, true);
    const double e1 = mms_error(ms_t, 24, 1.0, 1.0 / 8, Forcing::discrete);
    const double e2 = mms_error(ms_t, 24, 1.0, 1.0 / 16, Forcing::discrete);
    EXPECT_LT(e2, e1);
    const auto ms_x = mms(true, true);
    const double s1 = mms_error(ms_x, 16, 0.25, 1.0 / 16, Forcing::continuous);
    const double s2 = mms_error(ms_x, 32, 0.25, 1.0 / 16, Forcing::continuous);
    EXPECT_LT(s2, s1);
}

TEST(RotheSolve, DiscreteForcingReproducesExactSolutionForLinearTime)
{
    const auto ms = mms(true, true);
    EXPECT_LT(mms_error(ms, 16, 0.25, 1.0 / 8, Forcing::discrete), 1e-7);
}

TEST(RotheSolve, WritesTrajectoryAndDiagnostics)
{
    const Grid<2> g = unit_grid(10);
    const auto data = smooth_random_data(unit_square(g), 0.2, 0.1, 31);
    const auto law = law_for(data, 1e-2, 1.5, 2.5);
    const auto res = rothe_solve(data, law, LowerOrderLaw<2>::zero());
    const auto dir = std::filesystem::temp_directory_path() / "varexp_rothe_test";
    std::filesystem::create_directories(dir);
    write_trajectory(dir.string(), res, "varexp test");
    for (int k = 0; k <= 2; ++k)
    {
        EXPECT_TRUE(std::filesystem::exists(dir / ("u_" + std::to_string(k) + ".field")));
    }
    std::ifstream is(dir / "diagnostics.csv");
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "# varexp test");
    std::getline(is, line);
    EXPECT_EQ(line, "k,t,energy,l2norm,modular_eps,residual,iters");
    int rows = 0;
    while (std::getline(is, line))
    {
        ++rows;
    }
    EXPECT_EQ(rows, 3);
    const auto back = read_field<2, Vector<2>>((dir / "u_2.field").string());
    EXPECT_EQ(back.values(), res.trajectory[2].values());
}

namespace
{
    VectorField<3, 2> space_time_field(int K, double T, const Grid<2>& g, auto&& fn)
    {
        const Grid<1> time({K + 1}, {T / K}, {0.0});
        return VectorField<3, 2>::sample(space_time(time, g), [&](const Point<3>& tx) { return fn(tx[0], Point<2>{tx[1], tx[2]}); });
    }
}

TEST(RotheIbp, IdentityCases)
{
    const Grid<2> g = unit_grid(16);
    const Region<2> region = Region<2>::whole(g);
    const auto w = [](double, const Point<2>& x) { return profile(x); };
    const auto tw = [](double t, const Point<2>& x) {
        auto v = profile(x);
        return std::array<double, 2>{t * v[0], t * v[1]};
    };
    const auto u = space_time_field(8, 1.5, g, tw);
    const auto v = space_time_field(8, 1.5, g, w);
    // Linear and constant in time: every difference is exact.
    EXPECT_LT(discrete_ibp_check<2>(u, v, region), 1e-13);

    const auto osc = [](double t, const Point<2>& x) {
        auto p = profile(x);
        return std::array<double, 2>{std::cos(2 * t) * p[0], std::sin(t) * p[1]};
    };
    const double r1 = discrete_ibp_check<2>(space_time_field(16, 1.0, g, osc), space_time_field(16, 1.0, g, osc), region);
    const double r2 = discrete_ibp_check<2>(space_time_field(32, 1.0, g, osc), space_time_field(32, 1.0, g, osc), region);
    EXPECT_LT(r1, 1e-2);
    EXPECT_LT(r2, r1);
}

TEST(RotheIbp, SecondOrderOnTrigonometricPair)
{
    const Grid<2> g = unit_grid(12);
    const Region<2> region = Region<2>::whole(g);
    const auto uf = [](double t, const Point<2>& x) {
        return std::array<double, 2>{std::sin(3 * t + x[0]) * std::cos(x[1]), std::cos(2 * t) * std::sin(x[0] * x[1])};
    };
    const auto vf = [](double t, const Point<2>& x) {
        return std::array<double, 2>{std::cos(t - x[1]) * x[0], std::sin(4 * t) * std::cos(x[0] + x[1])};
    };
    std::vector<double> res;
    for (int K : {16, 32, 64, 128})
    {
        res.push_back(discrete_ibp_check<2>(space_time_field(K, 1.0, g, uf), space_time_field(K, 1.0, g, vf), region));
    }
    for (std::size_t i = 1; i < res.size(); ++i)
    {
        const double order = std::log2(res[i - 1] / res[i]);
        EXPECT_NEAR(order, 2.0, 0.3) << i;
    }
    EXPECT_THROW(discrete_ibp_check<2>(space_time_field(1, 1.0, g, uf), space_time_field(1, 1.0, g, vf), region), invalid_input);
}
