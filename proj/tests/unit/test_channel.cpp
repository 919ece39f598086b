// SPDX-License-Identifier: Apache-2.0
//
// cfisac: cooperative ISAC multistatic sensing toolkit
// Copyright (C) 2026 The cfisac authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <doctest.h>

#include <cmath>

#include "cfisac/channel.hpp"
#include "cfisac/errors.hpp"
#include "cfisac/units.hpp"
#include "oracles.hpp"

using namespace cfisac;
using cfisac::testing::desk_config;

namespace
{

double wrap(double a)
{
    return std::remainder(a, kTwoPi);
}

} // namespace

TEST_CASE("pathloss examples")
{
    SensingParams p;
    CHECK(pathloss(1.0, p) == doctest::Approx(1e-6).epsilon(1e-15));
    CHECK(pathloss(10.0, p) == doctest::Approx(1e-8).epsilon(1e-14));
    CHECK(pathloss(111.8034, p) == doctest::Approx(8.0e-11).epsilon(1e-6));
    CHECK_THROWS_AS(pathloss(0.0, p), Error);
}

TEST_CASE("sensing channel: single target structure")
{
    auto cfg = desk_config();
    const auto smp = generate_sample(cfg, 4, 0, false);
    const auto &sc = smp.scene;
    const auto G = sensing_channel(0, 0, 1, 0, sc, cfg.sensing, smp.draw);
    const auto geo = bistatic_geometry(sc, 0, 1, 0);
    const double amp = std::abs(smp.draw.beta(0, 1, 0)) * std::sqrt(pathloss(geo.d_bistatic, cfg.sensing));
    CHECK(G.norm() == doctest::Approx(amp).epsilon(1e-12));

    const double lambda = sc.wavelength();
    const Eigen::MatrixXcd outer = smp.draw.beta(0, 1, 0) * std::sqrt(pathloss(geo.d_bistatic, cfg.sensing)) *
                                   steering_vector_cos(sc.rx_aps[1].array, geo.rx_look.cos, lambda) *
                                   steering_vector_cos(sc.tx_aps[0].array, geo.tx_look.cos, lambda).adjoint();
    CHECK((G - outer).norm() <= 1e-12 * G.norm());

    for (std::size_t i : {1ul, 17ul, 63ul})
        for (std::size_t t : {0ul, 5ul, 40ul})
        {
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sensing_channel(i, 1, 0, t, sc, cfg.sensing, smp.draw));
            const auto s = svd.singularValues();
            CHECK(s(1) <= 1e-12 * s(0));
        }
}

TEST_CASE("sensing channel matches the scalar-loop oracle")
{
    auto cfg = desk_config();
    cfg.num_targets = 2;
    for (std::uint64_t s = 0; s < 5; ++s)
    {
        const auto smp = generate_sample(cfg, 21, s, false);
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t m = 0; m < 2; ++m)
            {
                const auto G = sensing_channel(3, n, m, 7, smp.scene, cfg.sensing, smp.draw);
                const auto R = testing::scalar_channel(3, n, m, 7, smp.scene, cfg.sensing, smp.draw.beta);
                CHECK((G - R).norm() <= 1e-12 * R.norm());
            }
    }
}

TEST_CASE("clutter channel: empty, static, variance scaling")
{
    auto cfg = desk_config();
    auto smp = generate_sample(cfg, 2, 0, false);
    CHECK(clutter_channel(4, 0, 0, 9, smp.scene, cfg.sensing, smp.draw).norm() == 0.0);

    cfg.sensing.num_scatterers = 1;
    const auto d1 = draw_reflections(smp.scene, cfg.sensing, 2, 0);
    const auto G0 = clutter_channel(5, 1, 0, 0, smp.scene, cfg.sensing, d1);
    for (std::size_t t : {1ul, 13ul, 63ul})
        CHECK((clutter_channel(5, 1, 0, t, smp.scene, cfg.sensing, d1) - G0).norm() <= 1e-15 * G0.norm());

    // E||G~||^2 is linear in the clutter variance; the same positions and
    // unit draws are reused so only the variance differs
    auto mean_power = [&](double chi2) {
        SensingParams p = cfg.sensing;
        p.clutter_chi2 = chi2;
        double acc = 0.0;
        for (std::uint64_t k = 0; k < 10000; ++k)
        {
            const auto d = draw_reflections(smp.scene, p, 77, k);
            acc += clutter_channel(0, 0, 0, 0, smp.scene, p, d).squaredNorm();
        }
        return acc / 10000.0;
    };
    const double base = mean_power(0.1);
    const double quad = mean_power(0.4);
    CHECK(quad / base == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("apply_async: identity cases and norm preservation")
{
    auto cfg = desk_config();
    const auto smp = generate_sample(cfg, 6, 0, false);
    const auto G = sensing_channel(9, 0, 0, 11, smp.scene, cfg.sensing, smp.draw);
    CHECK((apply_async(G, 9, 11, 0.0, 0.0, cfg.sensing) - G).norm() == 0.0);
    CHECK((apply_async(G, 0, 0, 3e-9, 40.0, cfg.sensing) - G).norm() == 0.0);
    Rng rng(1);
    for (int k = 0; k < 100; ++k)
    {
        const auto H = apply_async(G, rng.below(64), rng.below(64), 1e-9 * rng.normal(), 10 * rng.normal(),
                                   cfg.sensing);
        CHECK(H.norm() == doctest::Approx(G.norm()).epsilon(1e-14));
    }
}

TEST_CASE("synthesize_rx: zero transmit, single term, loop oracle")
{
    auto cfg = desk_config();
    cfg.sensing.noise_var = 0.0;
    auto smp = generate_sample(cfg, 3, 1, false);

    TransmitBlock zero = smp.transmit;
    for (auto &z : zero.x.values())
        z = 0.0;
    for (const auto &c : synthesize_rx(smp.scene, cfg.sensing, zero, smp.draw, 3, 1))
        for (const auto &z : c.y.values())
            CHECK(z == std::complex<double>(0.0, 0.0));

    // only tx 0 active: y_{0,m}[0] = beta sqrt(PL) a_r (a_t^H x)
    TransmitBlock one = smp.transmit;
    for (std::size_t a = 0; a < one.num_antennas(); ++a)
        for (std::size_t i = 0; i < one.num_subcarriers(); ++i)
            for (std::size_t t = 0; t < one.num_symbols(); ++t)
                one.x(1, a, i, t) = 0.0;
    const auto cubes = synthesize_rx(smp.scene, cfg.sensing, one, smp.draw, 3, 1);
    const auto geo = bistatic_geometry(smp.scene, 0, 1, 0);
    const double lambda = smp.scene.wavelength();
    const auto ar = steering_vector_cos(smp.scene.rx_aps[1].array, geo.rx_look.cos, lambda);
    const auto at = steering_vector_cos(smp.scene.tx_aps[0].array, geo.tx_look.cos, lambda);
    const auto expected = smp.draw.beta(0, 1, 0) * std::sqrt(pathloss(geo.d_bistatic, cfg.sensing)) *
                          at.dot(one.x_vec(0, 0, 0)) * ar;
    for (Eigen::Index a = 0; a < ar.size(); ++a)
        CHECK(std::abs(cubes[1].y(static_cast<std::size_t>(a), 0, 0) - expected(a)) <= 1e-12 * expected.norm());

    const auto full = synthesize_rx(smp.scene, cfg.sensing, smp.transmit, smp.draw, 3, 1);
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t i : {0ul, 31ul, 63ul})
            for (std::size_t t : {0ul, 2ul, 63ul})
            {
                const auto ref = testing::scalar_rx(i, m, t, smp.scene, cfg.sensing, smp.transmit, smp.draw.beta);
                for (Eigen::Index a = 0; a < ref.size(); ++a)
                    CHECK(std::abs(full[m].y(static_cast<std::size_t>(a), i, t) - ref(a)) <= 1e-12 * ref.norm());
            }
}

TEST_CASE("synthesize_rx: noise power and linearity")
{
    auto cfg = desk_config();
    auto smp = generate_sample(cfg, 5, 0, false);
    TransmitBlock zero = smp.transmit;
    for (auto &z : zero.x.values())
        z = 0.0;
    const auto noise = synthesize_rx(smp.scene, cfg.sensing, zero, smp.draw, 5, 0);
    for (const auto &c : noise)
    {
        double e = 0.0;
        for (const auto &z : c.y.values())
            e += std::norm(z);
        CHECK(e == doctest::Approx(cfg.sensing.noise_var * 8 * 64 * 64).epsilon(0.02));
    }

    // y(x1 + x2) - noise = (y(x1) - noise) + (y(x2) - noise)
    auto smp2 = generate_sample(cfg, 5, 1, false);
    TransmitBlock sum = smp.transmit;
    for (std::size_t k = 0; k < sum.x.size(); ++k)
        sum.x.values()[k] += smp2.transmit.x.values()[k];
    const auto y1 = synthesize_rx(smp.scene, cfg.sensing, smp.transmit, smp.draw, 5, 0);
    const auto y2 = synthesize_rx(smp.scene, cfg.sensing, smp2.transmit, smp.draw, 5, 0);
    const auto y12 = synthesize_rx(smp.scene, cfg.sensing, sum, smp.draw, 5, 0);
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t k = 0; k < y12[m].y.size(); ++k)
        {
            const auto n0 = noise[m].y.values()[k];
            const auto lhs = y12[m].y.values()[k] - n0;
            const auto rhs = (y1[m].y.values()[k] - n0) + (y2[m].y.values()[k] - n0);
            err = std::max(err, std::abs(lhs - rhs));
            ref = std::max(ref, std::abs(lhs));
        }
    CHECK(err <= 1e-12 * ref);
}

TEST_CASE("synthesize_rx: delay and Doppler phase ramps")
{
    auto cfg = desk_config();
    cfg.sensing.noise_var = 0.0;
    const auto smp = generate_sample(cfg, 12, 0, false);
    const double lambda = smp.scene.wavelength();
    const double dT = cfg.sensing.symbol_duration();
    for (std::size_t n = 0; n < 2; ++n)
    {
        TransmitBlock tb = testing::constant_transmit(2, 8, 64, 64, 99);
        for (std::size_t a = 0; a < 8; ++a)
            for (std::size_t i = 0; i < 64; ++i)
                for (std::size_t t = 0; t < 64; ++t)
                    tb.x(1 - n, a, i, t) = 0.0;
        const auto cubes = synthesize_rx(smp.scene, cfg.sensing, tb, smp.draw, 12, 0);
        for (std::size_t m = 0; m < 2; ++m)
        {
            const auto geo = bistatic_geometry(smp.scene, n, m, 0);
            const auto dd = delay_doppler(smp.scene, n, m, 0);
            const auto ar = steering_vector_cos(smp.scene.rx_aps[m].array, geo.rx_look.cos, lambda);
            auto bf = [&](std::size_t i, std::size_t t) {
                std::complex<double> s = 0.0;
                for (std::size_t a = 0; a < 8; ++a)
                    s += std::conj(ar(static_cast<Eigen::Index>(a))) * cubes[m].y(a, i, t);
                return s;
            };
            for (std::size_t i : {0ul, 10ul, 62ul})
                CHECK(std::abs(wrap(std::arg(bf(i + 1, 3) / bf(i, 3)) + kTwoPi * dd.tau * cfg.sensing.subcarrier_spacing)) <
                      1e-9);
            for (std::size_t t : {0ul, 20ul, 62ul})
                CHECK(std::abs(wrap(std::arg(bf(5, t + 1) / bf(5, t)) - kTwoPi * dd.doppler * dT)) < 1e-9);
        }
    }
}

TEST_CASE("synthesize_rx: identical cubes for any thread count")
{
    auto cfg = desk_config();
    cfg.sensing.num_scatterers = 3;
    cfg.sensing.async = true;
    const auto smp = generate_sample(cfg, 8, 2, false);
    const auto a = synthesize_rx(smp.scene, cfg.sensing, smp.transmit, smp.draw, 8, 2, 1);
    const auto b = synthesize_rx(smp.scene, cfg.sensing, smp.transmit, smp.draw, 8, 2, 4);
    for (std::size_t m = 0; m < 2; ++m)
        CHECK(a[m].y.values() == b[m].y.values());
}

TEST_CASE("synthesize_rx: shape mismatch")
{
    auto cfg = desk_config();
    const auto smp = generate_sample(cfg, 1, 0, false);
    SensingParams p = cfg.sensing;
    p.num_subcarriers = 32;
    CHECK_THROWS_AS(synthesize_rx(smp.scene, p, smp.transmit, smp.draw, 1, 0), Error);
}
