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

#include "cfisac/scene.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "cfisac/errors.hpp"

namespace cfisac
{

std::string to_string(ArrayAxis axis)
{
    return axis == ArrayAxis::plus_x ? "plus_x" : "minus_x";
}

ArrayAxis parse_array_axis(const std::string &name)
{
    if (name == "plus_x")
        return ArrayAxis::plus_x;
    if (name == "minus_x")
        return ArrayAxis::minus_x;
    fail(ErrorKind::ConfigInvalid, "unknown array orientation '" + name + "'");
}

void Scene::validate() const
{
    if (tx_aps.empty() || rx_aps.empty())
        fail(ErrorKind::InvalidArgument, "scene needs at least one transmit and one receive AP");
    if (targets.empty())
        fail(ErrorKind::InvalidArgument, "scene needs at least one target");
    if (!(carrier_freq_hz > 0.0) || !(light_speed > 0.0))
        fail(ErrorKind::InvalidArgument, "carrier frequency and light speed must be positive");
    auto check_array = [](const ApSite &ap) {
        if (ap.array.num_elements < 1 || !(ap.array.spacing > 0.0))
            fail(ErrorKind::InvalidArgument, "array needs >= 1 element and positive spacing");
        if (!std::isfinite(ap.position.x) || !std::isfinite(ap.position.y))
            fail(ErrorKind::InvalidArgument, "AP position must be finite");
    };
    std::for_each(tx_aps.begin(), tx_aps.end(), check_array);
    std::for_each(rx_aps.begin(), rx_aps.end(), check_array);
    for (const auto &t : targets)
    {
        if (!std::isfinite(t.position.x) || !std::isfinite(t.position.y) || !std::isfinite(t.velocity.x) ||
            !std::isfinite(t.velocity.y))
            fail(ErrorKind::InvalidArgument, "target state must be finite");
        if (!region.contains(t.position))
            fail(ErrorKind::InvalidArgument, "target outside the configured region");
        if (std::abs(t.velocity.x) > v_max || std::abs(t.velocity.y) > v_max)
            fail(ErrorKind::InvalidArgument, "target velocity exceeds v_max");
    }
}

LookAngle look_angle(const ApSite &ap, const Vec2 &point)
{
    const Vec2 delta = point - ap.position;
    const double d = delta.norm();
    if (d < kCollocationThreshold)
        fail(ErrorKind::DegenerateGeometry, "point collocated with an AP");
    return {ap.array.axis_sign() * delta.x / d, std::abs(delta.y) / d, d};
}

Eigen::VectorXcd steering_vector_cos(const ArraySpec &spec, double cos_angle, double wavelength)
{
    const auto n = static_cast<Eigen::Index>(spec.num_elements);
    Eigen::VectorXcd a(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    const double step = -kTwoPi * spec.spacing / wavelength * cos_angle;
    for (Eigen::Index k = 0; k < n; ++k)
        a(k) = std::polar(scale, step * static_cast<double>(k));
    return a;
}

Eigen::VectorXcd steering_vector(const ArraySpec &spec, double angle, double wavelength)
{
    if (!(wavelength > 0.0))
        fail(ErrorKind::InvalidArgument, "wavelength must be positive");
    return steering_vector_cos(spec, std::cos(angle), wavelength);
}

BistaticGeometry bistatic_geometry(const ApSite &tx, const ApSite &rx, const Vec2 &point)
{
    BistaticGeometry g;
    g.tx_look = look_angle(tx, point);
    g.rx_look = look_angle(rx, point);
    g.d_tx = g.tx_look.distance;
    g.d_rx = g.rx_look.distance;
    g.d_bistatic = g.d_tx + g.d_rx;
    g.aod = g.tx_look.radians();
    g.aoa = g.rx_look.radians();
    return g;
}

BistaticGeometry bistatic_geometry(const Scene &scene, std::size_t n, std::size_t m, std::size_t q)
{
    if (n >= scene.tx_aps.size() || m >= scene.rx_aps.size() || q >= scene.targets.size())
        fail(ErrorKind::InvalidArgument, "bistatic_geometry index out of range");
    return bistatic_geometry(scene.tx_aps[n], scene.rx_aps[m], scene.targets[q].position);
}

double radial_velocity_tx(double aod, const Vec2 &velocity)
{
    return -velocity.x * std::cos(aod) + velocity.y * std::sin(aod);
}

double radial_velocity_rx(double aoa, const Vec2 &velocity)
{
    return velocity.x * std::cos(aoa) - velocity.y * std::sin(aoa);
}

void check_supported_pair(const ApSite &tx, const ApSite &rx, const Vec2 &point)
{
    if (tx.array.orientation != ArrayAxis::minus_x || rx.array.orientation != ArrayAxis::plus_x)
        fail(ErrorKind::UnsupportedOrientation, "radial velocities need a minus_x transmit and plus_x receive array");
    if (!(point.y > tx.position.y) || !(point.y < rx.position.y))
        fail(ErrorKind::UnsupportedOrientation, "target must lie above the transmit array and below the receive array");
}

RadialVelocities radial_velocities(const ApSite &tx, const ApSite &rx, const Target &target)
{
    check_supported_pair(tx, rx, target.position);
    const auto geo = bistatic_geometry(tx, rx, target.position);
    return {radial_velocity_tx(geo.aod, target.velocity), radial_velocity_rx(geo.aoa, target.velocity)};
}

RadialVelocities radial_velocities(const Scene &scene, std::size_t n, std::size_t m, std::size_t q)
{
    if (n >= scene.tx_aps.size() || m >= scene.rx_aps.size() || q >= scene.targets.size())
        fail(ErrorKind::InvalidArgument, "radial_velocities index out of range");
    return radial_velocities(scene.tx_aps[n], scene.rx_aps[m], scene.targets[q]);
}

DelayDoppler delay_doppler(const ApSite &tx, const ApSite &rx, const Target &target, double carrier_freq_hz,
                           double light_speed)
{
    const auto geo = bistatic_geometry(tx, rx, target.position);
    const auto rv = radial_velocities(tx, rx, target);
    return {geo.d_bistatic / light_speed, (rv.v_tx + rv.v_rx) * carrier_freq_hz / light_speed};
}

DelayDoppler delay_doppler(const Scene &scene, std::size_t n, std::size_t m, std::size_t q)
{
    if (n >= scene.tx_aps.size() || m >= scene.rx_aps.size() || q >= scene.targets.size())
        fail(ErrorKind::InvalidArgument, "delay_doppler index out of range");
    return delay_doppler(scene.tx_aps[n], scene.rx_aps[m], scene.targets[q], scene.carrier_freq_hz,
                         scene.light_speed);
}

Vec2 ray_direction(const ApSite &ap, double angle, const Region &region)
{
    const double side = region.center().y >= ap.position.y ? 1.0 : -1.0;
    return {ap.array.axis_sign() * std::cos(angle), side * std::sin(angle)};
}

} // namespace cfisac
