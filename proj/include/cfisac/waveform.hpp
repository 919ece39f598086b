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

#include <Eigen/Dense>

#include "cfisac/pathloss.hpp"
#include "cfisac/scene.hpp"
#include "cfisac/tensor.hpp"

namespace cfisac
{

// Frequency-domain OFDM transmit block.
//   x          [N][N_t][N_s][T_s]  precoded symbols x_{i,n}[t]
//   s          [K][N_s][T_s]       payload s_i[t]
//   precoders  [N][N_t][K][N_s]    W_{i,n}
struct TransmitBlock
{
    CTensor4 x;
    CTensor3 s;
    CTensor4 precoders;

    std::size_t num_tx() const { return x.dim(0); }
    std::size_t num_antennas() const { return x.dim(1); }
    std::size_t num_subcarriers() const { return x.dim(2); }
    std::size_t num_symbols() const { return x.dim(3); }

    // x_{i,n}[t] as an N_t vector.
    Eigen::VectorXcd x_vec(std::size_t n, std::size_t i, std::size_t t) const;

    // Per-AP transmit power sum_i ||W_{i,n}||_F^2.
    double ap_power(std::size_t n) const;

    // Copy with every amplitude multiplied by `factor` (power scales by factor^2).
    TransmitBlock scaled(double factor) const;
};

// Communication channels h_{i,n,k}, stored [K][N][N_t][N_s].
struct CommChannels
{
    CTensor4 h;
};

// Unit-power 16-QAM payload drawn i.i.d. from {+-1, +-3}^2 / sqrt(10).
CTensor3 gen_qam16(std::size_t num_users, std::size_t num_subcarriers, std::size_t num_symbols, std::uint64_t seed,
                   std::uint64_t sample = 0);

// Pure LoS channel: h = sqrt(PL(d)) * exp(-j 2 pi i df d / c) * a_t(theta) * sqrt(N_t).
CommChannels gen_comm_channels(const Scene &scene, const PathlossModel &pathloss, double subcarrier_spacing,
                               std::size_t num_subcarriers);

// Centralized regularized MMSE precoder per subcarrier with an exact per-AP
// power normalization to `power_w` watts.
CTensor4 mmse_precode(const CommChannels &channels, double noise_var, double power_w);

// x_{i,n}[t] = W_{i,n} s_i[t].
TransmitBlock assemble_transmit(const CTensor4 &precoders, const CTensor3 &payload);

} // namespace cfisac
