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

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cfisac/channel.hpp"
#include "cfisac/config.hpp"
#include "cfisac/scene.hpp"
#include "cfisac/waveform.hpp"

namespace cfisac
{

// Angle grid k * step, k = 1, 2, ... strictly inside (0, pi).
std::vector<double> angle_grid(double grid_step);

// MUSIC pseudospectrum 1 / ||E_n^H a_r(angle)||^2 over angle_grid(grid_step).
std::vector<double> music_spectrum(const SensingCube &cube, const ArraySpec &rx_array, double wavelength,
                                   std::size_t num_targets, double grid_step);

// Q highest local maxima of the pseudospectrum, in decreasing peak order.
std::vector<double> music_angles(const SensingCube &cube, const ArraySpec &rx_array, double wavelength,
                                 std::size_t num_targets, double grid_step);

struct DelayDopplerEstimate
{
    double tau = 0.0;          // s
    double doppler = 0.0;      // Hz
    std::size_t delay_bin = 0; // peak bin along the subcarrier axis
    std::size_t doppler_bin = 0;
    Eigen::MatrixXd map; // |2D transform|, [N_s x T_s]
};

enum class PeakRefinement
{
    None,      // bin centre
    Parabolic, // 3-point parabola per axis
    Dtft       // parabolic start, then continuous DTFT maximization
};

// Peak search on reciprocal-filtered samples h[i][t] (N_s x T_s).
DelayDopplerEstimate delay_doppler_from_ratio(const Eigen::MatrixXcd &h, const SensingParams &params,
                                              PeakRefinement refine = PeakRefinement::Dtft);

// Reciprocal-filtered samples: (a_r(aoa)^H y_{i,m}[t]) / (a_t(aod)^H x_{i,n}[t]).
// Throws WeakReference if more than 1% of references are below 1e-9 in
// magnitude; those cells are zeroed.
Eigen::MatrixXcd reciprocal_filter(const CTensor3 &y, const ArraySpec &rx_array, const TransmitBlock &transmit,
                                   std::size_t tx_index, const ArraySpec &tx_array, double aoa, double aod,
                                   double wavelength);

DelayDopplerEstimate delay_doppler_map(const SensingCube &cube, const ArraySpec &rx_array,
                                       const TransmitBlock &transmit, std::size_t tx_index, const ArraySpec &tx_array,
                                       double aoa, double aod, const SensingParams &params, double wavelength,
                                       PeakRefinement refine = PeakRefinement::Dtft);

// Ray from an AP at a measured angle, on the region side of the array.
struct Ray
{
    Vec2 origin;
    Vec2 direction;
};

Ray make_ray(const ApSite &ap, double angle, const Region &region);

// Intersection of two rays; false if parallel or behind either origin.
bool intersect_rays(const Ray &a, const Ray &b, Vec2 &out);

// Least-squares point closest to all lines; falls back to `fallback` if singular.
Vec2 closest_point(const std::vector<Ray> &rays, const Vec2 &fallback);

struct Association
{
    // groups[q][m] = index of the detection at receive AP m assigned to target q.
    std::vector<std::vector<std::size_t>> groups;
    double cost = 0.0;
    bool ambiguous = false;
};

using GroupCost = std::function<double(const std::vector<std::size_t> &group)>;

// Exhaustive minimum-cost assignment. Group cost is the sum of squared
// distances between the pairwise ray intersections, plus a penalty for
// intersections outside the region expanded by 20%, plus `extra` if given.
// Ties within 1e-9 keep the lexicographically first assignment and set
// `ambiguous`; with `strict` they throw AmbiguousAssociation instead.
Association associate(const std::vector<std::vector<double>> &angles, const std::vector<ApSite> &rx_aps,
                      const Region &region, const GroupCost &extra = {}, bool strict = false);

struct AngleMeasurement
{
    std::size_t rx = 0;
    double angle = 0.0;
};

struct RangeMeasurement
{
    std::size_t tx = 0;
    std::size_t rx = 0;
    double range = 0.0; // bistatic range c * tau, m
};

struct LocalizeOptions
{
    double angle_weight = 1.0 / (0.002 * 0.002);
    double range_weight = 1.0;
    std::size_t max_iterations = 100;
};

struct LocalizeResult
{
    Vec2 position;
    bool converged = false;
    std::size_t iterations = 0;
    double cost = 0.0;
};

// Weighted Gauss-Newton over angle and bistatic range residuals, started at
// the ray intersection of the angle measurements (region centre if fewer
// than two). Returns the best iterate; `converged` is false after
// max_iterations.
LocalizeResult localize(const std::vector<AngleMeasurement> &angles, const std::vector<RangeMeasurement> &ranges,
                        const Scene &layout, const LocalizeOptions &options = {});

struct DopplerMeasurement
{
    std::size_t tx = 0;
    std::size_t rx = 0;
    double doppler = 0.0; // Hz
};

// Least-squares velocity from bistatic Dopplers at a known position.
// Throws SingularGeometry if the 2-column design has condition > 1e8.
Vec2 velocity_ls(const std::vector<DopplerMeasurement> &dopplers, const Vec2 &position, const Scene &layout);

struct ApDetections
{
    std::size_t rx_index = 0;
    std::vector<double> angles;
    // Per detection and transmit AP: bistatic delay (s) and Doppler (Hz).
    std::vector<std::vector<DelayDoppler>> paths;
};

struct FusedEstimate
{
    std::vector<Vec2> positions;
    std::vector<Vec2> velocities;
    std::vector<double> residuals;
    std::vector<ApDetections> detections;
    bool converged = true; // false when any fit stalled or left the region / velocity bounds
    bool ambiguous = false;
};

struct PipelineOptions
{
    double grid_step = 0.002;
    std::size_t sic_sweeps = 3; // successive interference cancellation passes
    std::size_t refine_passes = 2;
    PeakRefinement refine = PeakRefinement::Dtft;
};

PipelineOptions pipeline_options(const EstimatorConfig &config);

// MUSIC per receive AP, association, reciprocal-filtered delay/Doppler with
// interference cancellation across (tx, target) paths, then geometric fusion.
FusedEstimate classical_estimate(const std::vector<SensingCube> &cubes, const TransmitBlock &transmit,
                                 const Scene &layout, const SensingParams &params, std::size_t num_targets,
                                 const PipelineOptions &options = {});

} // namespace cfisac
