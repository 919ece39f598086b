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
#include <numbers>

#include "cfisac/errors.hpp"
#include "cfisac/rng.hpp"
#include "cfisac/scene.hpp"
#include "cfisac/units.hpp"

using namespace cfisac;

namespace
{

ApSite tx_at(double x, double y, std::size_t n = 16)
{
    return {{x, y}, {n, 0.005, ArrayAxis::minus_x}};
}

ApSite rx_at(double x, double y, std::size_t n = 16)
{
    return {{x, y}, {n, 0.005, ArrayAxis::plus_x}};
}

} // namespace

TEST_CASE("steering vector: single element and broadside")
{
    const ArraySpec one{1, 0.005, ArrayAxis::plus_x};
    const auto a = steering_vector(one, 0.7, 0.01);
    REQUIRE(a.size() == 1);
    CHECK(std::abs(a(0) - std::complex<double>(1.0, 0.0)) < 1e-15);

    const ArraySpec eight{8, 0.005, ArrayAxis::plus_x};
    const auto b = steering_vector(eight, kPi / 2, 0.01);
    for (Eigen::Index k = 0; k < b.size(); ++k)
        CHECK(std::abs(b(k) - std::complex<double>(1.0 / std::sqrt(8.0), 0.0)) < 1e-15);
}

TEST_CASE("steering vector: element 1 phase at pi/3 with half-wavelength spacing")
{
    const double lambda = 0.01;
    const ArraySpec a{16, lambda / 2, ArrayAxis::plus_x};
    const auto v = steering_vector(a, kPi / 3, lambda);
    CHECK(std::arg(v(1)) == doctest::Approx(-kPi / 2).epsilon(1e-12));
}

TEST_CASE("steering vector: unit norm for random arrays and angles")
{
    Rng rng(3);
    for (int k = 0; k < 200; ++k)
    {
        const ArraySpec a{1 + rng.below(32), rng.uniform(0.001, 0.02), ArrayAxis::plus_x};
        CHECK(steering_vector(a, rng.uniform(0.0, kPi), 0.01).norm() == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("bistatic geometry: distances")
{
    // 3-4-5 triangles with collocated tx and rx
    const auto g0 = bistatic_geometry(tx_at(0, 0), rx_at(0, 0), {3, 4});
    CHECK(g0.d_bistatic == doctest::Approx(10.0).epsilon(1e-15));

    const auto g1 = bistatic_geometry(tx_at(25, 0), rx_at(25, 100), {25, 50});
    CHECK(g1.d_bistatic == doctest::Approx(100.0).epsilon(1e-15));

    const auto g2 = bistatic_geometry(tx_at(25, 0), rx_at(25, 100), {50, 50});
    CHECK(g2.d_bistatic == doctest::Approx(2.0 * std::sqrt(3125.0)).epsilon(1e-14));
    CHECK(g2.d_bistatic == doctest::Approx(111.8034).epsilon(1e-6));
}

TEST_CASE("bistatic geometry: collocated target is degenerate")
{
    try
    {
        (void)bistatic_geometry(tx_at(25, 0), rx_at(25, 100), {25, 0});
        FAIL("expected DegenerateGeometry");
    }
    catch (const Error &e)
    {
        CHECK(e.kind() == ErrorKind::DegenerateGeometry);
    }
}

TEST_CASE("bistatic geometry: triangle inequality and mirror symmetry")
{
    Rng rng(5);
    for (int k = 0; k < 500; ++k)
    {
        const ApSite tx = tx_at(rng.uniform(0, 100), 0);
        const ApSite rx = rx_at(rng.uniform(0, 100), 100);
        const Vec2 g{rng.uniform(1, 99), rng.uniform(1, 99)};
        const auto geo = bistatic_geometry(tx, rx, g);
        CHECK(geo.d_bistatic >= (tx.position - rx.position).norm() - 1e-12);

        // reflect about y = 50: tx and rx swap rows
        const ApSite tx_m = tx_at(tx.position.x, 100 - tx.position.y);
        const ApSite rx_m = rx_at(rx.position.x, 100 - rx.position.y);
        const auto mirrored = bistatic_geometry(tx_m, rx_m, {g.x, 100 - g.y});
        CHECK(mirrored.d_bistatic == doctest::Approx(geo.d_bistatic).epsilon(1e-13));
    }
}

TEST_CASE("radial velocities: closed-form examples")
{
    CHECK(radial_velocity_tx(kPi / 2, {0, 10}) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(radial_velocity_tx(0.4, {0, 0}) == 0.0);
    CHECK(radial_velocity_rx(0.4, {0, 0}) == 0.0);
    CHECK(radial_velocity_tx(kPi / 3, {5, -2}) == doctest::Approx(-5 * 0.5 - 2 * std::sqrt(3.0) / 2).epsilon(1e-14));
    CHECK(radial_velocity_tx(kPi / 3, {5, -2}) == doctest::Approx(-4.2321).epsilon(1e-4));
}

TEST_CASE("radial velocities match the numerical range rate")
{
    Rng rng(8);
    for (int k = 0; k < 300; ++k)
    {
        const ApSite tx = tx_at(rng.uniform(0, 100), 0);
        const ApSite rx = rx_at(rng.uniform(0, 100), 100);
        const Target tg{{rng.uniform(2, 98), rng.uniform(2, 98)}, {rng.uniform(-20, 20), rng.uniform(-20, 20)}};
        const auto rv = radial_velocities(tx, rx, tg);
        const double h = 1e-4;
        auto dist = [&](const ApSite &ap, double dt) {
            return (tg.position + tg.velocity * dt - ap.position).norm();
        };
        const double num_tx = (dist(tx, h) - dist(tx, -h)) / (2 * h);
        const double num_rx = (dist(rx, h) - dist(rx, -h)) / (2 * h);
        CHECK(rv.v_tx == doctest::Approx(num_tx).epsilon(1e-6).scale(1e-6));
        CHECK(rv.v_rx == doctest::Approx(num_rx).epsilon(1e-6).scale(1e-6));
    }
}

TEST_CASE("radial velocity along the tx-target line equals the speed")
{
    const ApSite tx = tx_at(25, 0);
    const ApSite rx = rx_at(75, 100);
    const Vec2 g{40, 30};
    const Vec2 u = (g - tx.position) * (1.0 / (g - tx.position).norm());
    const auto rv = radial_velocities(tx, rx, {g, u * 7.0});
    CHECK(rv.v_tx == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("radial velocities reject unsupported orientation pairs")
{
    const ApSite tx{{25, 0}, {16, 0.005, ArrayAxis::plus_x}};
    try
    {
        (void)radial_velocities(tx, rx_at(25, 100), {{50, 50}, {1, 1}});
        FAIL("expected UnsupportedOrientation");
    }
    catch (const Error &e)
    {
        CHECK(e.kind() == ErrorKind::UnsupportedOrientation);
    }
}

TEST_CASE("delay and Doppler examples")
{
    // bistatic range of c * 1 us
    const ApSite tx = tx_at(0, 0);
    const ApSite rx = rx_at(0, 299.792458);
    const Target tg{{0, 149.896229}, {0, 0}};
    const auto dd = delay_doppler(tx, rx, tg, 30e9, kSpeedOfLight);
    CHECK(dd.tau == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(dd.doppler == 0.0);

    // v_tx + v_rx = 10 m/s along the symmetric bisector
    const ApSite t2 = tx_at(50, 0);
    const ApSite r2 = rx_at(50, 100);
    Target mover{{50, 50}, {0, 0}};
    mover.velocity = {0, 0};
    const auto rv0 = radial_velocities(t2, r2, mover);
    CHECK(rv0.v_tx + rv0.v_rx == 0.0);

    const ApSite t3 = tx_at(0, 0);
    const ApSite r3 = rx_at(100, 100);
    Target diag{{50, 20}, {0, 0}};
    // choose v so that v_tx + v_rx = 10
    const auto g3 = bistatic_geometry(t3, r3, diag.position);
    const Vec2 ut = (diag.position - t3.position) * (1.0 / g3.d_tx);
    const Vec2 ur = (diag.position - r3.position) * (1.0 / g3.d_rx);
    const Vec2 s = ut + ur;
    diag.velocity = s * (10.0 / s.dot(s));
    const auto dd3 = delay_doppler(t3, r3, diag, 30e9, kSpeedOfLight);
    CHECK(dd3.doppler == doctest::Approx(1000.692).epsilon(1e-6));
}

TEST_CASE("scene validation")
{
    Scene sc;
    sc.tx_aps = {tx_at(25, 0)};
    sc.rx_aps = {rx_at(25, 100)};
    sc.region = {0, 0, 100, 100};
    sc.targets = {{{50, 50}, {1, 1}}};
    CHECK_NOTHROW(sc.validate());
    sc.targets[0].velocity = {30, 0};
    CHECK_THROWS_AS(sc.validate(), Error);
}
