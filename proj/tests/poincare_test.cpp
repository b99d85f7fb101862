// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "varexp/korn.hpp"
#include "varexp/poincare.hpp"

using namespace varexp;

namespace
{
    double bump(double s)
    {
        return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
    }

    Domain<2> unit_disc(int n)
    {
        const auto g = Grid<2>::cell_centered({-1.05, -1.05}, {1.05, 1.05}, {n, n});
        return make_disc_domain<2>({0.0, 0.0}, 1.0, g);
    }

    VectorField<2, 2> radial_bump(const Grid<2>& g)
    {
        return VectorField<2, 2>::sample(g, [](const Point<2>& x) {
            const double b = bump((x[0] * x[0] + x[1] * x[1]) / 0.81);
            return std::array<double, 2>{b * x[0], b * x[1]};
        });
    }

    VectorField<2, 2> rigid_core(const Grid<2>& g)
    {
        return VectorField<2, 2>::sample(g, [](const Point<2>& x) {
            const double e = detail::mollified_disc(std::hypot(x[0], x[1]), 0.7, 0.25);
            return std::array<double, 2>{-e * x[1], e * x[0]};
        });
    }

    VectorField<2, 2> shifted_wave(const Grid<2>& g)
    {
        return VectorField<2, 2>::sample(g, [](const Point<2>& x) {
            const double b = bump(((x[0] - 0.25) * (x[0] - 0.25) + (x[1] - 0.15) * (x[1] - 0.15)) / 0.3844);
            return std::array<double, 2>{b * std::sin(3.0 * x[1]), b * std::cos(2.0 * x[0])};
        });
    }

    // Central-difference Jacobian of Phi_i at eta.
    template <std::size_t D>
    std::array<std::array<double, D - 1>, D> jacobian(int i, std::array<double, D - 1> eta)
    {
        std::array<std::array<double, D - 1>, D> J{};
        const double h = 1e-6;
        for (std::size_t k = 0; k + 1 < D; ++k)
        {
            auto ep = eta;
            auto em = eta;
            ep[k] += h;
            em[k] -= h;
            const auto fp = phi_map<D>(i, ep);
            const auto fm = phi_map<D>(i, em);
            for (std::size_t r = 0; r < D; ++r)
            {
                J[r][k] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        return J;
    }

    template <std::size_t D>
    double gram_det(const std::array<std::array<double, D - 1>, D>& J)
    {
        std::array<Point<D - 1>, D - 1> G{};
        for (std::size_t a = 0; a + 1 < D; ++a)
        {
            for (std::size_t b = 0; b + 1 < D; ++b)
            {
                for (std::size_t r = 0; r < D; ++r)
                {
                    G[a][b] += J[r][a] * J[r][b];
                }
            }
        }
        return determinant<D - 1>(G);
    }
}

TEST(Cones, DiscSquareAndPolygon)
{
    const auto g = Grid<2>::cell_centered({-3.0, -3.0}, {3.0, 3.0}, {96, 96});
    const auto cp = cone_params_for(make_disc_domain<2>({0.0, 0.0}, 2.5, g));
    EXPECT_EQ(cp.theta, M_PI / 4);
    EXPECT_EQ(cp.h, 1.0);
    EXPECT_EQ(cp.h0(), 0.25);
    EXPECT_EQ(cp.h1(), 0.0625);
    for (std::size_t k = 0; k < cp.points.size(); ++k)
    {
        EXPECT_NEAR(distance(cp.points[k], Point<2>{0.0, 0.0}), 2.5, 1e-12);
        EXPECT_NEAR(cp.points[k][0] * cp.axes[k][0] + cp.points[k][1] * cp.axes[k][1], 2.5, 1e-12);
    }

    const auto gs = Grid<2>::cell_centered({0.0, 0.0}, {1.0, 1.0}, {32, 32});
    const auto sq = cone_params_for(make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, gs));
    EXPECT_EQ(sq.h, 0.5);
    EXPECT_EQ(sq.points.size(), 4u * 5u + 4u);

    const auto gp = Grid<2>::cell_centered({-1.2, -1.2}, {1.2, 1.2}, {80, 80});
    std::vector<Point<2>> hex;
    for (int k = 0; k < 6; ++k)
    {
        hex.push_back({std::cos(M_PI * k / 3.0), std::sin(M_PI * k / 3.0)});
    }
    EXPECT_NO_THROW(cone_params_for(make_convex_polygon_domain(hex, gp), M_PI / 6));

    const auto g3 = Grid<3>::cell_centered({-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}, {16, 16, 16});
    EXPECT_NO_THROW(cone_params_for(make_disc_domain<3>({0.0, 0.0, 0.0}, 0.8, g3)));
    EXPECT_NO_THROW(cone_params_for(make_rectangle_domain<3>({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}, g3)));
}

TEST(Cones, RejectsBadAnglesAndInwardAxes)
{
    const auto g = Grid<2>::cell_centered({-3.0, -3.0}, {3.0, 3.0}, {48, 48});
    const auto dom = make_disc_domain<2>({0.0, 0.0}, 2.5, g);
    EXPECT_THROW(cone_params_for(dom, M_PI / 2), invalid_input);
    EXPECT_THROW(cone_params_for(dom, 0.0), invalid_input);
    auto cp = cone_params_for(dom);
    cp.axes[3] = {-cp.axes[3][0], -cp.axes[3][1]};
    EXPECT_THROW(verify_cones(dom, cp), invalid_input);
}

TEST(CapArea, ExamplesAndScaling)
{
    EXPECT_NEAR(cap_area(2, M_PI, 1.0), 2.0 * M_PI, 1e-15);
    EXPECT_NEAR(cap_area(3, M_PI / 2, 1.0), 2.0 * M_PI, 1e-15);
    EXPECT_NEAR(cap_area(3, M_PI, 1.0), 4.0 * M_PI, 1e-15);
    EXPECT_THROW(cap_area(4, 1.0, 1.0), invalid_input);
    EXPECT_THROW(cap_area(2, 0.0, 1.0), invalid_input);
    for (int d : {2, 3})
    {
        const double slope = std::log(cap_area(d, 0.7, 2.0 * 3.0) / cap_area(d, 0.7, 2.0 * 0.01)) / std::log(300.0);
        EXPECT_NEAR(slope, d - 1.0, 1e-12);
        for (double r : {0.1, 0.5, 4.0})
        {
            EXPECT_NEAR(cap_area(d, 0.7, 2.0 * r) / std::pow(2.0 * r, d - 1), cap_area(d, 0.7, 2.0) / std::pow(2.0, d - 1), 1e-12);
        }
    }
}

TEST(PhiMap, UnitSphereAndReflections)
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (int trial = 0; trial < 200; ++trial)
    {
        const std::array<double, 2> eta{nd(rng), nd(rng)};
        const auto last = phi_map<3>(3, eta);
        for (int i = 1; i <= 3; ++i)
        {
            const auto v = phi_map<3>(i, eta);
            EXPECT_NEAR(v[0] * v[0] + v[1] * v[1] + v[2] * v[2], 1.0, 1e-12);
            for (int j = 0; j < 3; ++j)
            {
                EXPECT_EQ(v[j], j == i - 1 && i < 3 ? -last[j] : last[j]);
            }
        }
    }
    const auto e = phi_map<2>(2, {0.0});
    EXPECT_EQ(e[0], 0.0);
    EXPECT_EQ(e[1], 1.0);
    const auto p1 = phi_map<2>(1, {1.0});
    const auto p2 = phi_map<2>(2, {1.0});
    EXPECT_NEAR(p1[0], -1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(p1[1], 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(p2[0], 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(p2[1], 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(phi_map<2>(3, {1.0}), invalid_input);
}

TEST(PhiMap, JacobianGramDeterminantAtOrigin)
{
    for (int i = 1; i <= 2; ++i)
    {
        EXPECT_NEAR(gram_det<2>(jacobian<2>(i, {0.0})), 1.0, 1e-6);
    }
    for (int i = 1; i <= 3; ++i)
    {
        EXPECT_NEAR(gram_det<3>(jacobian<3>(i, {0.0, 0.0})), 1.0, 1e-6);
    }
    // Away from the origin the Gram determinant is (|eta|^2 + 1)^{-d}.
    const std::array<double, 2> eta{0.4, -0.3};
    EXPECT_NEAR(gram_det<3>(jacobian<3>(3, eta)), std::pow(1.25, -3.0), 1e-8);
}

TEST(Upphi, DeterminantClosedFormAndMuAlpha)
{
    EXPECT_NEAR(std::abs(upphi_det<2>({1.0}).det), 1.0, 1e-12);
    for (double eta : {-2.0, -0.3, 0.1, 0.7, 5.0})
    {
        EXPECT_NEAR(upphi_det<2>({eta}).det, -2.0 * eta / (1.0 + eta * eta), 1e-14);
        EXPECT_FALSE(upphi_det<2>({eta}).flagged);
    }
    EXPECT_TRUE(upphi_det<2>({0.0}).flagged);
    EXPECT_TRUE(upphi_det<3>({0.5, 0.0}).flagged);
    EXPECT_NE(upphi_det<3>({0.5, -0.2}).det, 0.0);

    const double mu2 = mu_alpha<2>(0.5, 400);
    const double exact = 2.0 * 0.125 / (1.0 + 0.125 * 0.125);
    EXPECT_GE(mu2, exact);
    EXPECT_NEAR(mu2, exact, 0.01);
    EXPECT_GT(mu_alpha<3>(0.5), 0.0);
}

TEST(Riesz, SingularCellIntegral)
{
    // Integral of 1/|y| over [-a, a] x [-b, b].
    for (auto [a, b] : {std::pair{0.5, 0.5}, std::pair{0.01, 0.03}})
    {
        const double exact = 4.0 * (a * std::asinh(b / a) + b * std::asinh(a / b));
        EXPECT_NEAR(detail::singular_cell_integral<2>({a, b}), exact, 1e-10 * exact);
    }
    // Cube between the inscribed and circumscribed balls: 4 pi a <= I <= 4 pi sqrt(3) a.
    const double a = 0.2;
    const double I3 = detail::singular_cell_integral<3>({a, a, a});
    EXPECT_GT(I3, 4.0 * M_PI * a);
    EXPECT_LT(I3, 4.0 * M_PI * std::sqrt(3.0) * a);
    EXPECT_NEAR(detail::singular_cell_integral<3>({2 * a, 2 * a, 2 * a}), 2.0 * I3, 1e-10);
}

TEST(Riesz, UnitTensorOnInteriorBall)
{
    // Lattice-ball counts fluctuate, so the error is bounded rather than monotone.
    for (int n : {64, 128, 256})
    {
        const auto dom = unit_disc(n);
        const auto E = SymTensorField<2, 2>::sample(dom.grid(), [](const Point<2>&) { return std::array<double, 3>{1.0, 0.0, 0.0}; });
        const std::size_t centre = dom.grid().flat(dom.grid().nearest({0.0, 0.0}));
        const double R = 0.5;
        const double err = std::abs(riesz_integral(E, dom, centre, R) / (2.0 * M_PI * R) - 1.0);
        EXPECT_LT(err, 0.01) << n;
    }
    const auto dom = unit_disc(32);
    EXPECT_EQ(riesz_rhs(VectorField<2, 2>(dom.grid()), dom, dom.grid().flat({3, 16})), 0.0);
}

TEST(Riesz, MonotoneInSymmetricGradientMagnitude)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const auto dom = unit_disc(48);
    SymTensorField<2, 2> big(dom.grid());
    SymTensorField<2, 2> small(dom.grid());
    for (std::size_t n = 0; n < big.nodes(); ++n)
    {
        for (int c = 0; c < 3; ++c)
        {
            big(n, c) = ud(rng) - 0.5;
        }
        const double s = ud(rng);
        for (int c = 0; c < 3; ++c)
        {
            small(n, c) = s * big(n, c);
        }
    }
    for (std::size_t n : near_boundary_samples(dom, 0.25, 50))
    {
        EXPECT_LE(riesz_integral(small, dom, n, 2.0 * dom.r(n)), riesz_integral(big, dom, n, 2.0 * dom.r(n)));
    }
}

TEST(Poincare, ZeroFieldAndHomogeneity)
{
    const auto dom = unit_disc(64);
    const auto cp = cone_params_for(dom);
    const auto samples = near_boundary_samples(dom, cp.h0(), 200);
    EXPECT_EQ(samples.size(), 200u);
    for (std::size_t n : samples)
    {
        EXPECT_GT(dom.r(n), 0.0);
        EXPECT_LE(dom.r(n), cp.h0());
    }
    const auto zero = poincare_verify(VectorField<2, 2>(dom.grid()), dom, samples, cp.h0(), 1.0);
    EXPECT_TRUE(zero.pass);
    EXPECT_EQ(zero.c0, 0.0);

    const auto u = radial_bump(dom.grid());
    const auto a = poincare_verify(u, dom, samples, cp.h0());
    const auto b = poincare_verify(-7.5 * u, dom, samples, cp.h0());
    EXPECT_TRUE(a.pass);
    EXPECT_GT(a.c0, 0.0);
    EXPECT_NEAR(b.c0, a.c0, 1e-12 * a.c0);
    EXPECT_FALSE(poincare_verify(u, dom, samples, cp.h0(), 0.5 * a.c0).pass);
}

TEST(Poincare, RejectsBoundarySupportAndFarSamples)
{
    const auto dom = unit_disc(64);
    const VectorField<2, 2> ones(dom.grid(), 1.0);
    EXPECT_THROW(poincare_verify(masked(ones, dom), dom, {}, 0.25), invalid_input);
    const auto centre = dom.grid().flat(dom.grid().nearest({0.0, 0.0}));
    EXPECT_THROW(poincare_verify(radial_bump(dom.grid()), dom, {centre}, 0.25), invalid_input);
}

TEST(Poincare, EmpiricalConstantStableUnderRefinement)
{
    for (auto field : {radial_bump, rigid_core, shifted_wave})
    {
        std::vector<double> c0;
        for (int n : {64, 128})
        {
            const auto dom = unit_disc(n);
            const auto cp = cone_params_for(dom);
            const auto rep = poincare_verify(field(dom.grid()), dom, near_boundary_samples(dom, cp.h0(), 200), cp.h0());
            EXPECT_TRUE(rep.pass);
            c0.push_back(rep.c0);
        }
        EXPECT_GT(c0[0], 0.0);
        EXPECT_NEAR(c0[1] / c0[0], 1.0, 0.2);
    }
}
