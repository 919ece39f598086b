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

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cfisac/pathloss.hpp"
#include "cfisac/scene.hpp"
#include "cfisac/tensor.hpp"
#include "cfisac/waveform.hpp"

namespace cfisac
{

struct SensingParams
{
    double subcarrier_spacing = 240e3; // Hz
    std::size_t num_subcarriers = 256;
    std::size_t num_symbols = 256;
    double cyclic_prefix = 1.04e-6; // seconds
    PathlossModel pathloss;
    double chi2 = 1.0;         // reflection coefficient variance
    double clutter_chi2 = 0.1; // clutter coefficient variance
    double noise_var = 1e-12;  // W (-90 dBm)
    std::size_t num_scatterers = 0;
    bool async = false;     // apply residual timing / frequency offsets
    double sigma_tau = 0.0; // s
    double sigma_f = 0.0;   // Hz

    double symbol_duration() const { return 1.0 / subcarrier_spacing + cyclic_prefix; }
    void validate() const;
};

double pathloss(double d, const SensingParams &params);

// Random quantities of one channel realization.
struct ReflectionDraw
{
    CTensor3 beta;                  // [N][M][Q] ~ CN(0, chi2)
    CTensor3 clutter_beta;          // [N][M][S] ~ CN(0, clutter_chi2)
    std::vector<Vec2> scatterers;   // static clutter positions
    Tensor<double, 3> timing_offset; // [N][M][T_s], empty unless async
    Tensor<double, 3> freq_offset;   // [N][M][T_s], empty unless async
};

ReflectionDraw draw_reflections(const Scene &scene, const SensingParams &params, std::uint64_t seed,
                                std::uint64_t sample = 0, double placement_margin = 1.0);

struct SensingCube
{
    CTensor3 y; // [M_r][N_s][T_s]
    std::size_t rx_index = 0;
};

// LoS target channel G_{i,n,m}[t], M_r x N_t.
Eigen::MatrixXcd sensing_channel(std::size_t i, std::size_t n, std::size_t m, std::size_t t, const Scene &scene,
                                 const SensingParams &params, const ReflectionDraw &draw);

// Static-scatterer multipath channel with the same functional form.
Eigen::MatrixXcd clutter_channel(std::size_t i, std::size_t n, std::size_t m, std::size_t t, const Scene &scene,
                                 const SensingParams &params, const ReflectionDraw &draw);

// exp(-j 2 pi i tau_o df) * exp(j 2 pi f_o t dT) * G.
Eigen::MatrixXcd apply_async(const Eigen::MatrixXcd &G, std::size_t i, std::size_t t, double timing_offset,
                             double freq_offset, const SensingParams &params);

// Received cubes y_{i,m}[t] = sum_n Gbar_{i,n,m}[t] x_{i,n}[t] + z_{i,m}[t], one per receive AP.
// Clutter and offsets are included when present in the draw.
std::vector<SensingCube> synthesize_rx(const Scene &scene, const SensingParams &params,
                                       const TransmitBlock &transmit, const ReflectionDraw &draw, std::uint64_t seed,
                                       std::uint64_t sample = 0, std::size_t threads = 1);

} // namespace cfisac
