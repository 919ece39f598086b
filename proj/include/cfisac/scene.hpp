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

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfisac/units.hpp"

namespace cfisac
{

/*!
 * Planar geometry of the cooperative sensing deployment.
 *
 * Angle convention: every AP carries a ULA lying along the x-axis. The axis
 * direction (plus_x or minus_x) fixes the sign of the cosine, the sine is
 * taken nonnegative. For a point p seen from an AP at a with axis sign k:
 *
 *     cos(angle) = k * (p.x - a.x) / |p - a|,   sin(angle) = |p.y - a.y| / |p - a|
 *
 * The supported deployment pairs minus_x transmit arrays below the region with
 * plus_x receive arrays above it (opposite orientations). With this pairing
 * the radial velocity expressions below equal the range rates d|t - g|/dt and
 * d|g - r|/dt.
 */

struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2 &o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2 &o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Vec2 &o) const = default;
    double dot(const Vec2 &o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

enum class ArrayAxis
{
    plus_x,
    minus_x
};

std::string to_string(ArrayAxis axis);
ArrayAxis parse_array_axis(const std::string &name);

struct ArraySpec
{
    std::size_t num_elements = 1;
    double spacing = 0.005; // meters
    ArrayAxis orientation = ArrayAxis::plus_x;

    double axis_sign() const { return orientation == ArrayAxis::plus_x ? 1.0 : -1.0; }
};

struct ApSite
{
    Vec2 position;
    ArraySpec array;
};

struct Target
{
    Vec2 position;
    Vec2 velocity;
};

struct Region
{
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 100.0;
    double y_max = 100.0;

    bool contains(const Vec2 &p, double margin = 0.0) const
    {
        return p.x >= x_min - margin && p.x <= x_max + margin && p.y >= y_min - margin && p.y <= y_max + margin;
    }
    Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
};

struct Scene
{
    std::vector<ApSite> tx_aps;
    std::vector<ApSite> rx_aps;
    std::vector<Target> targets;
    std::vector<Vec2> users;
    double carrier_freq_hz = 30e9;
    double light_speed = kSpeedOfLight;
    Region region;
    double v_max = 20.0;

    double wavelength() const { return light_speed / carrier_freq_hz; }

    // Checks counts, array specs, and target region/velocity bounds.
    void validate() const;
};

// Distance below which a point is treated as collocated with an AP.
inline constexpr double kCollocationThreshold = 1e-6;

// Direction cosines of a point as seen from an AP, plus the distance.
struct LookAngle
{
    double cos = 0.0;
    double sin = 0.0;
    double distance = 0.0;

    double radians() const { return std::atan2(sin, cos); }
};

LookAngle look_angle(const ApSite &ap, const Vec2 &point);

// Unit-norm ULA response; element k has phase -2*pi*k*(spacing/wavelength)*cos(angle).
Eigen::VectorXcd steering_vector(const ArraySpec &spec, double angle, double wavelength);
Eigen::VectorXcd steering_vector_cos(const ArraySpec &spec, double cos_angle, double wavelength);

struct BistaticGeometry
{
    double d_tx = 0.0;       // |t_n - g_q|
    double d_rx = 0.0;       // |g_q - r_m|
    double d_bistatic = 0.0; // d_tx + d_rx
    double aod = 0.0;
    double aoa = 0.0;
    LookAngle tx_look;
    LookAngle rx_look;
};

BistaticGeometry bistatic_geometry(const Scene &scene, std::size_t n, std::size_t m, std::size_t q);
BistaticGeometry bistatic_geometry(const ApSite &tx, const ApSite &rx, const Vec2 &point);

struct RadialVelocities
{
    double v_tx = 0.0;
    double v_rx = 0.0;
};

// Closed-form radial velocities for the opposite-orientation deployment.
double radial_velocity_tx(double aod, const Vec2 &velocity);
double radial_velocity_rx(double aoa, const Vec2 &velocity);

// Throws UnsupportedOrientation unless tx is minus_x, rx is plus_x and the
// target lies above the transmit array and below the receive array.
RadialVelocities radial_velocities(const Scene &scene, std::size_t n, std::size_t m, std::size_t q);
RadialVelocities radial_velocities(const ApSite &tx, const ApSite &rx, const Target &target);
void check_supported_pair(const ApSite &tx, const ApSite &rx, const Vec2 &point);

struct DelayDoppler
{
    double tau = 0.0;     // seconds
    double doppler = 0.0; // Hz
};

DelayDoppler delay_doppler(const Scene &scene, std::size_t n, std::size_t m, std::size_t q);
DelayDoppler delay_doppler(const ApSite &tx, const ApSite &rx, const Target &target, double carrier_freq_hz,
                           double light_speed);

// Unit vector from the AP towards a point at the given angle, on the side of
// the AP that faces the region.
Vec2 ray_direction(const ApSite &ap, double angle, const Region &region);

} // namespace cfisac
