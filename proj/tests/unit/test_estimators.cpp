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

#include <algorithm>
#include <cmath>

#include "cfisac/errors.hpp"
#include "cfisac/estimators.hpp"
#include "cfisac/units.hpp"
#include "oracles.hpp"

using namespace cfisac;
using cfisac::testing::desk_config;

namespace
{

constexpr double kLambda = kSpeedOfLight / 30e9;

const ArraySpec kRx{8, kLambda / 2, ArrayAxis::plus_x};

// Plane waves from the given angles with independent random envelopes.
SensingCube plane_waves(const std::vector<double> &angles, std::uint64_t seed, std::complex<double> rot = 1.0,
                        double noise = 0.0)
{
    SensingCube c{CTensor3({8, 16, 16}), 0};
    Rng rng(seed);
    if (noise > 0.0)
    {
        Rng floor(seed + 1000);
        for (auto &z : c.y.values())
            z = rot * floor.complex_normal(noise);
    }
    for (const double ang : angles)
    {
        const auto a = steering_vector(kRx, ang, kLambda);
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t t = 0; t < 16; ++t)
            {
                const auto s = rng.complex_normal(1.0);
                for (std::size_t k = 0; k < 8; ++k)
                    c.y(k, i, t) += rot * s * a(static_cast<Eigen::Index>(k));
            }
    }
    return c;
}

Scene desk_layout()
{
    Scene sc = desk_config().layout;
    sc.targets = {{{50, 50}, {0, 0}}};
    return sc;
}

} // namespace

TEST_CASE("angle grid stays strictly inside (0, pi)")
{
    const auto g = angle_grid(0.002);
    CHECK(g.front() == doctest::Approx(0.002));
    CHECK(g.back() < kPi);
    CHECK_THROWS_AS(angle_grid(0.0), Error);
}

TEST_CASE("MUSIC: on-grid angle is recovered exactly, off-grid within half a step")
{
    const double step = 0.002;
    const auto grid = angle_grid(step);
    const double on = grid[600];
    CHECK(music_angles(plane_waves({on}, 1), kRx, kLambda, 1, step)[0] == on);

    Rng rng(4);
    for (int k = 0; k < 20; ++k)
    {
        const double off = rng.uniform(0.3, kPi - 0.3);
        const double got = music_angles(plane_waves({off}, 10 + k), kRx, kLambda, 1, step)[0];
        CHECK(std::abs(got - off) <= step / 2 + 1e-12);
    }
}

TEST_CASE("MUSIC: two well separated sources")
{
    const double step = 0.002;
    const auto grid = angle_grid(step);
    const double a = grid[400];
    const double b = a + 5 * (2.0 / 8.0);
    auto got = music_angles(plane_waves({a, b}, 3), kRx, kLambda, 2, step);
    std::sort(got.begin(), got.end());
    CHECK(std::abs(got[0] - a) <= step);
    CHECK(std::abs(got[1] - b) <= step);
}

TEST_CASE("MUSIC pseudospectrum is invariant to a global phase")
{
    const auto s0 = music_spectrum(plane_waves({1.1}, 5, 1.0, 1e-3), kRx, kLambda, 1, 0.01);
    const auto s1 = music_spectrum(plane_waves({1.1}, 5, std::polar(1.0, 2.3), 1e-3), kRx, kLambda, 1, 0.01);
    REQUIRE(s0.size() == s1.size());
    for (std::size_t k = 0; k < s0.size(); ++k)
        CHECK(s1[k] == doctest::Approx(s0[k]).epsilon(1e-8));
}

TEST_CASE("delay-Doppler peak sits on the generating bin")
{
    SensingParams p;
    p.num_subcarriers = 64;
    p.num_symbols = 64;
    for (const auto &[k, l] : std::vector<std::pair<int, int>>{{0, 0}, {5, 3}, {17, 30}, {40, 1}})
    {
        Eigen::MatrixXcd h(64, 64);
        for (int i = 0; i < 64; ++i)
            for (int t = 0; t < 64; ++t)
                h(i, t) = std::polar(0.3, -kTwoPi * i * k / 64.0 + kTwoPi * t * l / 64.0 + 0.4);
        for (const auto refine : {PeakRefinement::None, PeakRefinement::Parabolic, PeakRefinement::Dtft})
        {
            const auto e = delay_doppler_from_ratio(h, p, refine);
            CHECK(e.delay_bin == static_cast<std::size_t>(k));
            CHECK(e.doppler_bin == static_cast<std::size_t>(l));
            CHECK(std::abs(e.tau * 64 * p.subcarrier_spacing - k) < 1e-6);
            CHECK(std::abs(e.doppler * 64 * p.symbol_duration() - l) < 1e-6);
            CHECK(e.map.minCoeff() >= 0.0);
            CHECK(e.map(k, l) > 0.0);
        }
    }
}

TEST_CASE("delay-Doppler DTFT refinement recovers off-bin paths")
{
    SensingParams p;
    p.num_subcarriers = 64;
    p.num_symbols = 64;
    const double kf = 12.37, lf = -7.61;
    Eigen::MatrixXcd h(64, 64);
    for (int i = 0; i < 64; ++i)
        for (int t = 0; t < 64; ++t)
            h(i, t) = std::polar(1.0, -kTwoPi * i * kf / 64.0 + kTwoPi * t * lf / 64.0);
    const auto e = delay_doppler_from_ratio(h, p, PeakRefinement::Dtft);
    CHECK(e.tau * 64 * p.subcarrier_spacing == doctest::Approx(kf).epsilon(1e-5));
    CHECK(e.doppler * 64 * p.symbol_duration() == doctest::Approx(lf).epsilon(1e-5));
}

TEST_CASE("reciprocal filter rejects a silent reference")
{
    auto cfg = desk_config();
    const auto smp = generate_sample(cfg, 1, 0);
    TransmitBlock silent = smp.transmit;
    for (auto &z : silent.x.values())
        z = 0.0;
    try
    {
        (void)reciprocal_filter(smp.cubes[0].y, smp.scene.rx_aps[0].array, silent, 0, smp.scene.tx_aps[0].array,
                                1.0, 1.0, smp.scene.wavelength());
        FAIL("expected WeakReference");
    }
    catch (const Error &e)
    {
        CHECK(e.kind() == ErrorKind::WeakReference);
    }
}

TEST_CASE("rays: intersection and closest point")
{
    const Scene sc = desk_layout();
    const Vec2 g{40, 60};
    const double t0 = bistatic_geometry(sc.tx_aps[0], sc.rx_aps[0], g).aoa;
    const double t1 = bistatic_geometry(sc.tx_aps[0], sc.rx_aps[1], g).aoa;
    Vec2 p;
    REQUIRE(intersect_rays(make_ray(sc.rx_aps[0], t0, sc.region), make_ray(sc.rx_aps[1], t1, sc.region), p));
    CHECK((p - g).norm() < 1e-9);
    const Vec2 c = closest_point({make_ray(sc.rx_aps[0], t0, sc.region), make_ray(sc.rx_aps[1], t1, sc.region)},
                                 sc.region.center());
    CHECK((c - g).norm() < 1e-9);
}

TEST_CASE("association: single target, true pairing, order invariance")
{
    const Scene sc = desk_layout();
    auto aoa = [&](std::size_t m, Vec2 g) { return bistatic_geometry(sc.tx_aps[0], sc.rx_aps[m], g).aoa; };

    const Vec2 g0{50, 50};
    const auto one = associate({{aoa(0, g0)}, {aoa(1, g0)}}, sc.rx_aps, sc.region);
    REQUIRE(one.groups.size() == 1);
    CHECK(one.groups[0] == std::vector<std::size_t>{0, 0});

    const Vec2 ga{20, 30};
    const Vec2 gb{70, 80};
    const auto two = associate({{aoa(0, ga), aoa(0, gb)}, {aoa(1, gb), aoa(1, ga)}}, sc.rx_aps, sc.region);
    REQUIRE(two.groups.size() == 2);
    CHECK(two.groups[0] == std::vector<std::size_t>{0, 1});
    CHECK(two.groups[1] == std::vector<std::size_t>{1, 0});
    CHECK_FALSE(two.ambiguous);

    // swap detection order at rx 1: same physical pairing
    const auto swapped = associate({{aoa(0, ga), aoa(0, gb)}, {aoa(1, ga), aoa(1, gb)}}, sc.rx_aps, sc.region);
    CHECK(swapped.groups[0] == std::vector<std::size_t>{0, 0});
    CHECK(swapped.groups[1] == std::vector<std::size_t>{1, 1});
}

TEST_CASE("association: exact ties are flagged or rejected")
{
    const Scene sc = desk_layout();
    // identical detections at both APs make both pairings equally good
    const double a = 1.2;
    const auto soft = associate({{a, a}, {2.0, 2.0}}, sc.rx_aps, sc.region);
    CHECK(soft.ambiguous);
    CHECK_THROWS_AS(associate({{a, a}, {2.0, 2.0}}, sc.rx_aps, sc.region, {}, true), Error);
}

TEST_CASE("localize: exact measurements, angles only, permutation, sensitivity")
{
    const Scene sc = desk_layout();
    Rng rng(13);
    for (int k = 0; k < 50; ++k)
    {
        const Vec2 g{rng.uniform(5, 95), rng.uniform(5, 95)};
        std::vector<AngleMeasurement> angles;
        std::vector<RangeMeasurement> ranges;
        for (std::size_t m = 0; m < 2; ++m)
        {
            angles.push_back({m, bistatic_geometry(sc.tx_aps[0], sc.rx_aps[m], g).aoa});
            for (std::size_t n = 0; n < 2; ++n)
                ranges.push_back({n, m, bistatic_geometry(sc.tx_aps[n], sc.rx_aps[m], g).d_bistatic});
        }
        const auto full = localize(angles, ranges, sc);
        CHECK(full.converged);
        CHECK((full.position - g).norm() < 1e-6);

        CHECK((localize(angles, {}, sc).position - g).norm() < 1e-6);

        auto rev_a = angles;
        auto rev_r = ranges;
        std::reverse(rev_a.begin(), rev_a.end());
        std::reverse(rev_r.begin(), rev_r.end());
        CHECK((localize(rev_a, rev_r, sc).position - full.position).norm() < 1e-9);

        auto bumped = ranges;
        bumped[1].range += 1.0;
        CHECK((localize(angles, bumped, sc).position - g).norm() < 2.0);
    }
}

TEST_CASE("velocity least squares")
{
    const Scene sc = desk_layout();
    Rng rng(17);
    for (int k = 0; k < 50; ++k)
    {
        Target tg{{rng.uniform(5, 95), rng.uniform(5, 95)}, {rng.uniform(-20, 20), rng.uniform(-20, 20)}};
        if (k == 0)
            tg.velocity = {0, 0};
        std::vector<DopplerMeasurement> dm;
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t m = 0; m < 2; ++m)
                dm.push_back({n, m,
                              delay_doppler(sc.tx_aps[n], sc.rx_aps[m], tg, sc.carrier_freq_hz, sc.light_speed)
                                  .doppler});
        const Vec2 v = velocity_ls(dm, tg.position, sc);
        CHECK((v - tg.velocity).norm() < 1e-9);
    }

    // a single bistatic pair only constrains one velocity component
    Target tg{{50, 50}, {3, 4}};
    const double fd = delay_doppler(sc.tx_aps[0], sc.rx_aps[0], tg, sc.carrier_freq_hz, sc.light_speed).doppler;
    CHECK_THROWS_AS(velocity_ls({{0, 0, fd}}, tg.position, sc), Error);
}

TEST_CASE("classical pipeline on noiseless on-grid scenes")
{
    auto cfg = desk_config();
    const double c = kSpeedOfLight;
    const double loc_res = c / (2 * 64 * cfg.sensing.subcarrier_spacing);
    const double vel_res = c / (2 * cfg.layout.carrier_freq_hz * 64 * cfg.sensing.symbol_duration());
    for (std::uint64_t s = 0; s < 5; ++s)
    {
        const auto g = testing::on_grid_scene(cfg, 31, s);
        const auto est = classical_estimate(g.cubes, g.transmit, g.scene, cfg.sensing, 1,
                                            pipeline_options(cfg.estimator));
        const auto &tg = g.scene.targets[0];
        double dmax = 0.0;
        for (const auto &rx : g.scene.rx_aps)
            dmax = std::max(dmax, (tg.position - rx.position).norm());
        CHECK((est.positions[0] - tg.position).norm() <= loc_res + cfg.estimator.grid_step / 2 * dmax);
        CHECK(std::abs(est.velocities[0].x - tg.velocity.x) <= vel_res);
        CHECK(std::abs(est.velocities[0].y - tg.velocity.y) <= vel_res);
        CHECK(est.converged);
    }
}
