// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "varexp/mollify.hpp"

using namespace varexp;

namespace
{
    // Trapezoid rule on [0, 1] for the unnormalised radial mass of the bump.
    double radial_mass(int dim)
    {
        const int n = 200000;
        double s = 0.0;
        for (int i = 1; i < n; ++i)
        {
            const double r = static_cast<double>(i) / n;
            s += std::exp(-1.0 / (1.0 - r * r)) * std::pow(r, dim - 1);
        }
        if (dim == 1)
        {
            s += 0.5 * std::exp(-1.0);
        }
        return s / n;
    }

    double bump3(const Point<3>& x, const Point<3>& c, double rad)
    {
        double s = 0.0;
        for (int a = 0; a < 3; ++a)
        {
            s += (x[a] - c[a]) * (x[a] - c[a]);
        }
        s /= rad * rad;
        return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
    }

    Grid<3> qt_grid(int n, double T)
    {
        const auto t = Grid<1>::cell_centered({0.0}, {T}, {static_cast<int>(std::lround(T * n))});
        return space_time(t, Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {n, n}));
    }
}

TEST(Mollifier, NormalisationConstants)
{
    // 1-D: integral of exp(-1/(1-x^2)) over (-1, 1).
    EXPECT_NEAR(1.0 / MollifierFamily<1>().c_norm(), 2.0 * radial_mass(1), 1e-9);
    EXPECT_NEAR(1.0 / MollifierFamily<2>().c_norm(), 2.0 * M_PI * radial_mass(2), 1e-9);
    EXPECT_NEAR(1.0 / MollifierFamily<3>().c_norm(), 4.0 * M_PI * radial_mass(3), 1e-9);
    EXPECT_NEAR(1.0 / MollifierFamily<1>().c_norm(), 0.443993816168079, 1e-12);
}

TEST(Mollifier, ScaledProfileSupportAndMass)
{
    const MollifierFamily<2> w;
    EXPECT_EQ(w.scaled({0.3, 0.0}, 0.3), 0.0);
    EXPECT_GT(w.scaled({0.29, 0.0}, 0.3), 0.0);
    // Midpoint mass of omega_eps on a fine grid.
    const double eps = 0.2;
    const auto g = Grid<2>::cell_centered({-0.25, -0.25}, {0.25, 0.25}, {500, 500});
    double mass = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n)
    {
        mass += w.scaled(g.point(n), eps) * g.cell_volume();
    }
    EXPECT_NEAR(mass, 1.0, 1e-6);
}

TEST(Kernel, WeightsSumToOneAndStayInsideBall)
{
    for (double eps : {0.05, 0.1, 0.137, 0.3})
    {
        const SampledKernel<3> k({0.02, 0.01, 0.01}, eps);
        EXPECT_NEAR(k.sum(), 1.0, 1e-12);
        for (const auto& row : k.rows())
        {
            for (std::size_t j = 0; j < row.w.size(); ++j)
            {
                const double x0 = row.lead[0] * 0.02;
                const double x1 = row.lead[1] * 0.01;
                const double x2 = (row.lo + static_cast<int>(j)) * 0.01;
                EXPECT_LT(x0 * x0 + x1 * x1 + x2 * x2, eps * eps);
                EXPECT_GE(row.w[j], 0.0);
            }
        }
    }
    EXPECT_TRUE(SampledKernel<2>({0.1, 0.1}, 0.1).is_delta());
}

TEST(Convolve, ConstantsReproducedAwayFromGridEdge)
{
    const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {40, 40});
    const ScalarField<2> f(g, 2.5);
    const double eps = 0.1;
    const auto out = convolve(f, eps);
    for (std::size_t n = 0; n < g.size(); ++n)
    {
        const auto x = g.point(n);
        if (x[0] > eps && x[0] < 1 - eps && x[1] > eps && x[1] < 1 - eps)
        {
            EXPECT_NEAR(out(n), 2.5, 1e-13);
        }
        EXPECT_LE(out(n), 2.5 + 1e-13);
    }
}

TEST(Convolve, RejectsScaleBelowSpacing)
{
    const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {10, 10});
    EXPECT_THROW(convolve(ScalarField<2>(g, 1.0), 0.05), invalid_input);
}

TEST(Convolve, HalfSpaceGivesMonotoneRampOfWidthTwoEps)
{
    const int n = 200;
    const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {n, n});
    const auto f = ScalarField<2>::sample(g, [](const Point<2>& x) { return x[0] > 0.5 ? 1.0 : 0.0; });
    const double eps = 0.1;
    const auto out = convolve(f, eps);
    // Continuous ramp: mass of omega_eps^2 in the half plane {y_0 < x_0 - 0.5}.
    const MollifierFamily<2> w;
    const auto ramp = [&](double x0) {
        const double t = (x0 - 0.5) / eps;
        if (t <= -1.0)
        {
            return 0.0;
        }
        if (t >= 1.0)
        {
            return 1.0;
        }
        const int m = 400;
        double s = 0.0;
        for (int i = 0; i < m; ++i)
        {
            const double a = -1.0 + (t + 1.0) * (i + 0.5) / m;
            for (int j = 0; j < m; ++j)
            {
                const double b = -1.0 + 2.0 * (j + 0.5) / m;
                s += w.profile({a, b});
            }
        }
        return s * (t + 1.0) / m * 2.0 / m;
    };
    const int row = n / 2;
    double prev = -1.0;
    for (int i = 0; i < n; ++i)
    {
        const std::size_t node = g.flat({i, row});
        const double x0 = g.point(node)[0];
        if (x0 < 1.0 - eps)
        {
            EXPECT_GE(out(node), prev - 1e-15);
            prev = out(node);
        }
        if (x0 < 0.5 - eps)
        {
            EXPECT_EQ(out(node), 0.0);
        }
        else if (x0 > 0.5 + eps && x0 < 1.0 - eps)
        {
            EXPECT_NEAR(out(node), 1.0, 1e-13);
        }
        else if (x0 < 1.0 - eps)
        {
            EXPECT_NEAR(out(node), ramp(x0), 0.03);
        }
    }
}

TEST(Convolve, ConvergesToSmoothField)
{
    double prev = 1e300;
    const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {128, 128});
    const auto f = ScalarField<2>::sample(g, [](const Point<2>& x) {
        const double s = ((x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.45) * (x[1] - 0.45)) / 0.09;
        return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) * (1.0 + x[0]) : 0.0;
    });
    const auto p = ExponentField<2>(ScalarField<2>::sample(g, [](const Point<2>& x) { return 1.3 + x[1]; }), 0.0);
    for (int k = 2; k <= 6; ++k)
    {
        const double err = luxembourg_norm(convolve(f, std::pow(2.0, -k)) - f, p, Region<2>::whole(g));
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(Maximal, ConstantAndBallIndicator)
{
    const auto g = Grid<2>::cell_centered({-1.0, -1.0}, {1.0, 1.0}, {24, 24});
    const auto m = maximal(ScalarField<2>(g, 1.5));
    for (double v : m.values())
    {
        EXPECT_NEAR(v, 1.5, 1e-13);
    }
    const auto gv = Grid<2>::vertex_centered({-1.0, -1.0}, {1.0, 1.0}, {24, 24});
    const auto ind = ScalarField<2>::sample(gv, [](const Point<2>& x) { return x[0] * x[0] + x[1] * x[1] < 0.25 ? 1.0 : 0.0; });
    EXPECT_NEAR(maximal(ind)(gv.flat({12, 12})), 1.0, 1e-14);
}

TEST(Maximal, DominatesMollificationsTwice)
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {40, 40});
    ScalarField<2> f(g);
    for (double& v : f.values())
    {
        v = nd(rng);
    }
    const auto m = maximal(f);
    for (int k = 0; k <= 4; ++k)
    {
        const auto c = convolve(f, g.max_spacing() * std::pow(2.0, k));
        for (std::size_t n = 0; n < g.size(); ++n)
        {
            EXPECT_LE(std::abs(c(n)), 2.0 * m(n) + 1e-12);
        }
    }
}

TEST(Maximal, RadiusCapLimitsScan)
{
    const auto g = Grid<1>::vertex_centered({0.0}, {1.0}, {10});
    ScalarField<1> f(g);
    f(0) = 1.0;
    // At node 10 only balls of radius >= 1 reach node 0.
    EXPECT_EQ(maximal(f, 0.5)(10), 0.0);
    EXPECT_NEAR(maximal(f)(10), 1.0 / 21.0, 1e-15);
}

TEST(Extension, ZeroExtendPreservesNormAndSupport)
{
    const auto small = Grid<2>({6, 5}, {0.1, 0.1}, {0.2, 0.3});
    const auto big = Grid<2>({12, 12}, {0.1, 0.1}, {0.0, 0.0});
    const auto u = ScalarField<2>::sample(small, [](const Point<2>& x) { return x[0] > 0.5 ? 1.0 : 0.0; });
    const auto e = zero_extend(u, big);
    const auto pe = ExponentField<2>::constant(big, 1.7);
    const auto pu = ExponentField<2>::constant(small, 1.7);
    EXPECT_DOUBLE_EQ(modular(e, pe, Region<2>::whole(big)), modular(u, pu, Region<2>::whole(small)));
    std::size_t support = 0;
    for (double v : e.values())
    {
        support += v != 0.0;
    }
    std::size_t support_u = 0;
    for (double v : u.values())
    {
        support_u += v != 0.0;
    }
    EXPECT_EQ(support, support_u);
    EXPECT_EQ(zero_extend(ScalarField<2>(small), big).max_norm(), 0.0);
    EXPECT_THROW(zero_extend(u, Grid<2>({12, 12}, {0.1, 0.1}, {0.05, 0.0})), invalid_input);
    EXPECT_EQ(restrict_to(e, small).values(), u.values());
}

TEST(Extension, ReflectionInTime)
{
    const auto t = Grid<1>::cell_centered({0.0}, {1.0}, {8});
    const auto s = Grid<1>::cell_centered({0.0}, {1.0}, {4});
    const auto g = space_time(t, s);
    const auto u = ScalarField<2>::sample(g, [](const Point<2>& x) { return x[0]; });
    const auto e = reflect_extend(u);
    EXPECT_EQ(e.grid().dims()[0], 24);
    EXPECT_NEAR(e.grid().origin()[0], -1.0 + 1.0 / 16.0, 1e-15);
    for (std::size_t n = 0; n < e.nodes(); ++n)
    {
        const double tt = e.grid().point(n)[0];
        const double expect = tt < 0.0 ? -tt : (tt < 1.0 ? tt : 2.0 - tt);
        EXPECT_NEAR(e(n), expect, 1e-14);
    }
    const auto p = ExponentField<2>(ScalarField<2>::sample(g, [](const Point<2>& x) { return 1.5 + 0.3 * x[0] * x[1]; }));
    const auto pe = reflect_extend(p);
    EXPECT_EQ(pe.clog(), p.clog());
    EXPECT_NEAR(ExponentField<2>(pe.values()).clog(), p.clog(), 1e-14);
    EXPECT_NEAR(modular(e, pe, Region<2>::whole(e.grid())), 3.0 * modular(u, p, Region<2>::whole(g)), 1e-13);

    const auto c = ScalarField<2>::sample(g, [](const Point<2>& x) { return std::sin(7 * x[1]); });
    const auto ce = reflect_extend(c);
    for (std::size_t n = 0; n < ce.nodes(); ++n)
    {
        EXPECT_EQ(ce(n), c(n % s.size()));
    }
    EXPECT_THROW(reflect_extend(ScalarField<2>(Grid<2>({4, 4}, {0.1, 0.1}, {0.0, 0.0}))), invalid_input);
}

TEST(Extension, ClampKeepsBounds)
{
    const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {10, 10});
    const auto p = ExponentField<2>(ScalarField<2>::sample(g, [](const Point<2>& x) { return 1.2 + x[0]; }));
    const auto big = Grid<2>({20, 20}, g.spacing(), {-0.45, -0.45});
    const auto q = clamp_extend(p, big);
    EXPECT_EQ(q.p_minus(), p.p_minus());
    EXPECT_EQ(q.p_plus(), p.p_plus());
}

TEST(Cutoff, PlateauSupportAndGradientBound)
{
    const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {96, 96});
    const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, g);
    std::vector<double> ceta;
    for (double h : {1.0 / 32, 1.0 / 16, 1.0 / 8})
    {
        const CutoffFamily<2> cut(dom, h);
        for (std::size_t n = 0; n < g.size(); ++n)
        {
            const double e = cut.eta()(n);
            EXPECT_GE(e, 0.0);
            EXPECT_LE(e, 1.0);
            if (dom.r(n) > 3 * h)
            {
                EXPECT_EQ(e, 1.0);
                EXPECT_EQ(cut.grad_eta().norm_at(n), 0.0);
            }
            if (dom.r(n) <= 2 * h)
            {
                EXPECT_EQ(e, 0.0);
            }
        }
        ceta.push_back(cut.c_eta());
    }
    for (double c : ceta)
    {
        EXPECT_GT(c, 0.5);
        EXPECT_LT(c, 4.0);
    }
}

TEST(Cutoff, KernelGradientMatchesDifferences)
{
    const auto g = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {128, 128});
    const auto dom = make_disc_domain<2>({0.5, 0.5}, 0.45, g);
    const CutoffFamily<2> cut(dom, 0.1);
    const auto fd = gradient_scalar<2>(cut.eta(), Region<2>::whole(g));
    double err = 0.0;
    double top = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n)
    {
        for (int a = 0; a < 2; ++a)
        {
            err = std::max(err, std::abs(fd(n, a) - cut.grad_eta()(n, a)));
            top = std::max(top, std::abs(fd(n, a)));
        }
    }
    EXPECT_LT(err, 0.1 * top);
}

TEST(Cutoff, TimeCutoffOnInterval)
{
    const auto t = Grid<1>::cell_centered({0.0}, {1.0}, {200});
    const auto I = make_rectangle_domain<1>({0.0}, {1.0}, t);
    const CutoffFamily<1> phi(I, 0.05);
    for (std::size_t n = 0; n < t.size(); ++n)
    {
        const double tt = t.point(n)[0];
        if (tt > 0.15 && tt < 0.85)
        {
            EXPECT_EQ(phi.eta()(n), 1.0);
        }
        if (tt <= 0.1 || tt >= 0.9)
        {
            EXPECT_EQ(phi.eta()(n), 0.0);
        }
    }
}

TEST(Smoother, SnapsScaleAndPadsTime)
{
    const auto qt = qt_grid(32, 0.5);
    const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, space_axes(qt));
    const Smoother<2> sm(qt, dom, 0.1);
    EXPECT_NEAR(sm.h(), 3.0 / 32.0, 1e-15);
    EXPECT_EQ(sm.grid().dims()[0], 16 + 2 * 3);
    EXPECT_THROW(Smoother<2>(qt, dom, 0.01), invalid_input);
    EXPECT_EQ(sm.R(VectorField<3, 2>(qt)).max_norm(), 0.0);
    EXPECT_EQ(sm.Rstar(ScalarField<3>(qt)).max_norm(), 0.0);
}

TEST(Smoother, SupportContainment)
{
    const auto qt = qt_grid(32, 0.5);
    const auto space = space_axes(qt);
    const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, space);
    const ScalarField<3> ind(qt, 1.0);
    const Smoother<2> sm(qt, dom, 0.125);
    const auto r = sm.R(ind);
    const auto rs = sm.Rstar(ind);
    const double h = sm.h();
    for (std::size_t n = 0; n < r.nodes(); ++n)
    {
        const auto x = sm.grid().point(n);
        const double rr = dom.r(n % space.size());
        if (r(n) != 0.0)
        {
            EXPECT_GT(rr, h);
            EXPECT_GT(x[0], -h);
            EXPECT_LT(x[0], 0.5 + h);
        }
        if (rs(n) != 0.0)
        {
            EXPECT_GT(rr, 2 * h);
        }
    }
}

TEST(Smoother, QuasiAdjointness)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    const auto qt = qt_grid(24, 0.5);
    const auto dom = make_disc_domain<2>({0.5, 0.5}, 0.45, space_axes(qt));
    const Smoother<2> sm(qt, dom, 0.125);
    ScalarField<3> u(qt);
    ScalarField<3> v(qt);
    for (std::size_t n = 0; n < qt.size(); ++n)
    {
        u(n) = nd(rng);
        v(n) = nd(rng);
    }
    const auto region = Region<3>::whole(qt);
    const double lhs = holder_pairing(restrict_to(sm.Rstar(u), qt), v, region);
    const double rhs = holder_pairing(u, restrict_to(sm.R(v), qt), region);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)));
}

TEST(Smoother, DominatedByMaximalFunction)
{
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const auto qt = qt_grid(16, 0.5);
    const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, space_axes(qt));
    const Smoother<2> sm(qt, dom, 0.125);
    ScalarField<3> u(qt);
    for (double& v : u.values())
    {
        v = ud(rng);
    }
    const auto r = sm.R(u);
    const auto m = maximal(sm.extend(u), 0.25);
    for (std::size_t n = 0; n < r.nodes(); ++n)
    {
        EXPECT_LE(std::abs(r(n)), 2.0 * m(n) + 1e-12);
    }
}

TEST(Smoother, ConvergesOnSmoothField)
{
    const auto qt = qt_grid(64, 1.0);
    const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, space_axes(qt));
    const auto u = ScalarField<3>::sample(qt, [](const Point<3>& x) { return bump3(x, {0.5, 0.5, 0.45}, 0.25); });
    double prev = 1e300;
    for (int k = 3; k <= 5; ++k)
    {
        const Smoother<2> sm(qt, dom, std::pow(2.0, -k));
        const auto p = ExponentField<3>::constant(sm.grid(), 1.5);
        const double err = luxembourg_norm(sm.R(u) - sm.extend(u), p, Region<3>::whole(sm.grid()));
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(Smoother, DecompositionIdentityAndTermBSupport)
{
    const auto qt = qt_grid(32, 0.5);
    const auto space = space_axes(qt);
    const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, space);
    const auto u = VectorField<3, 2>::sample(qt, [](const Point<3>& x) {
        return std::array<double, 2>{std::sin(3 * x[1] + x[2]) * x[0], std::cos(x[1] - 2 * x[2])};
    });
    const Smoother<2> sm(qt, dom, 0.125);
    const auto dec = sm.decompose(u);
    const auto core = shrink(dom, 4 * sm.h());
    for (std::size_t n = 0; n < dec.termB.nodes(); ++n)
    {
        if (core.inside(n % space.size()))
        {
            EXPECT_EQ(dec.termB.norm_at(n), 0.0);
        }
    }
    const auto e = sym_gradient(sm.R(u), Region<3>::whole(sm.grid()));
    double res = 0.0;
    double scale = 0.0;
    for (std::size_t n = 0; n < e.nodes(); ++n)
    {
        for (int c = 0; c < 3; ++c)
        {
            res = std::max(res, std::abs(e(n, c) - dec.termA(n, c) - dec.termB(n, c)));
            scale = std::max(scale, std::abs(e(n, c)));
        }
    }
    EXPECT_LT(res, 0.25 * scale);
}

TEST(Smoother, RigidFieldHasSmallTermAInside)
{
    // u = A x inside the domain: eps(u) = 0 away from the grid edge.
    const auto qt = qt_grid(32, 0.5);
    const auto space = space_axes(qt);
    const auto dom = make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, space);
    const auto u = VectorField<3, 2>::sample(qt, [](const Point<3>& x) { return std::array<double, 2>{-(x[2] - 0.5), x[1] - 0.5}; });
    const auto dec = sym_grad_smooth_decomposition(u, dom, 0.125);
    EXPECT_LT(dec.termA.max_norm(), 1e-12);
    EXPECT_GT(dec.termB.max_norm(), 0.1);
}
