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
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cfisac
{

// Codewords are the columns of a D x N_c matrix.
struct Codebook
{
    Eigen::MatrixXd codewords;          // D x N_c
    Eigen::VectorXd ema_counts;         // N_c
    Eigen::MatrixXd ema_sums;           // D x N_c
    double gamma = 0.99;
    std::vector<std::size_t> idle_runs; // consecutive updates without assignments
    std::uint64_t updates = 0;

    std::size_t dim() const { return static_cast<std::size_t>(codewords.rows()); }
    std::size_t size() const { return static_cast<std::size_t>(codewords.cols()); }
    void validate() const;
};

// Codewords ~ 0.02 * N(0, 1), accumulators zero.
Codebook init_codebook(std::size_t dim, std::size_t num_codewords, std::uint64_t seed, double gamma = 0.99);

// Codebook with the given codewords and zeroed accumulators.
Codebook make_codebook(const Eigen::MatrixXd &codewords, double gamma = 0.99);

struct QuantizeResult
{
    std::vector<std::uint32_t> indices;
    Eigen::MatrixXd quantized; // D x L
};

// Nearest codeword per column of Z (D x L); ties resolve to the lowest index.
QuantizeResult quantize(const Eigen::MatrixXd &Z, const Codebook &book, std::size_t threads = 1);

struct EmaOptions
{
    std::size_t idle_limit = 50; // reseed after this many consecutive idle updates
    std::uint64_t seed = 0;      // drives the column picked on reseed
};

struct EmaLog
{
    std::vector<std::size_t> reseeded;
};

// counts <- g counts + (1 - g) N_j, sums <- g sums + (1 - g) sum z;
// codewords with N_j > 0 become sums / counts, the others stay unchanged.
Codebook ema_update(const Codebook &book, const Eigen::MatrixXd &Z, const std::vector<std::uint32_t> &indices,
                    const EmaOptions &options = {}, EmaLog *log = nullptr);

// omega * sum_l ||z_l - q_l||^2.
double commitment_loss(const Eigen::MatrixXd &Z, const Eigen::MatrixXd &quantized, double omega = 0.25);

// Sum of squared distances to the assigned codewords.
double distortion(const Eigen::MatrixXd &Z, const Codebook &book, const std::vector<std::uint32_t> &indices);

// log2(num_codewords); NotPowerOfTwo unless num_codewords is 2^k with k >= 1.
std::uint32_t index_bits(std::size_t num_codewords);

// One header byte holding N_b, then the indices as N_b-bit big-endian fields
// in stream order, zero padded to a byte boundary.
std::vector<std::uint8_t> pack_indices(const std::vector<std::uint32_t> &indices, std::size_t num_codewords);
std::vector<std::uint32_t> unpack_indices(const std::vector<std::uint8_t> &packed, std::size_t count);

enum class OverheadScheme
{
    Distributed,
    Centralized,
    Proposed
};

OverheadScheme parse_overhead_scheme(const std::string &name);

struct OverheadParams
{
    std::size_t num_targets = 0;        // Q (distributed)
    std::size_t num_antennas = 0;       // M_r (centralized)
    std::size_t num_subcarriers = 0;    // N_s (centralized)
    std::size_t num_symbols = 0;        // T_s (centralized)
    std::optional<std::uint32_t> bits;  // N_b (proposed)
    std::optional<std::size_t> num_codewords; // N_c (proposed, used when bits is unset)
    std::size_t num_features = 0;       // L (proposed)
};

// Fronthaul bits per update and receive AP.
std::uint64_t overhead_bits(OverheadScheme scheme, const OverheadParams &params);

// "VQCB" container: magic, u16 version, u32 D, u32 N_c, 2 reserved bytes,
// then little-endian f32 codewords row-major [D x N_c].
void save_codebook(const std::string &path, const Codebook &book);
Codebook load_codebook(const std::string &path, double gamma = 0.99);

} // namespace cfisac
