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
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cfisac/config.hpp"
#include "cfisac/simulation.hpp"
#include "cfisac/tensor.hpp"

namespace cfisac
{

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 24;

// "CFIS" shard header: magic, u16 version, u16 M, u32 M_r, N_s, T_s, Q.
struct CubeHeader
{
    std::uint16_t version = kDatasetVersion;
    std::uint16_t num_rx = 0;
    std::uint32_t num_antennas = 0;
    std::uint32_t num_subcarriers = 0;
    std::uint32_t num_symbols = 0;
    std::uint32_t num_targets = 0;

    std::size_t label_floats() const { return 4 * std::size_t{num_targets}; }
    std::size_t record_bytes() const;
};

// "CFTX" companion header: magic, u16 version, u16 N, u32 N_t, N_s, T_s, K.
struct TransmitHeader
{
    std::uint16_t version = kDatasetVersion;
    std::uint16_t num_tx = 0;
    std::uint32_t num_antennas = 0;
    std::uint32_t num_subcarriers = 0;
    std::uint32_t num_symbols = 0;
    std::uint32_t num_users = 0;

    std::size_t record_bytes() const;
};

CubeHeader cube_header(const ExperimentConfig &config);
TransmitHeader transmit_header(const ExperimentConfig &config);

// Label layout [g_1x, g_1y, ..., g_Qx, g_Qy, v_1x, v_1y, ..., v_Qx, v_Qy].
std::vector<float> sample_label(const Scene &scene);

// Record payloads, little-endian f32 with (re, im) interleaved.
std::vector<std::uint8_t> encode_cube_record(const std::vector<float> &label, const std::vector<SensingCube> &cubes);
std::vector<std::uint8_t> encode_transmit_record(const TransmitBlock &transmit);

struct DatasetRecord
{
    std::vector<float> label;
    std::vector<CTensor3> cubes; // [M_r][N_s][T_s] per receive AP
};

class CubeReader
{
public:
    explicit CubeReader(const std::string &path);

    const CubeHeader &header() const { return header_; }
    std::size_t size() const { return count_; }
    DatasetRecord read(std::size_t index);

private:
    std::string path_;
    std::ifstream in_;
    CubeHeader header_;
    std::size_t count_ = 0;
};

class TransmitReader
{
public:
    explicit TransmitReader(const std::string &path);

    const TransmitHeader &header() const { return header_; }
    std::size_t size() const { return count_; }
    CTensor4 read(std::size_t index); // [N][N_t][N_s][T_s]

private:
    std::string path_;
    std::ifstream in_;
    TransmitHeader header_;
    std::size_t count_ = 0;
};

// Divide by the largest |re| or |im| over the cube; all-zero cubes pass through.
CTensor3 normalize_cube(const CTensor3 &cube);

// Normalized cube flattened to (re, im) pairs in storage order and cut into
// consecutive columns of `dim` reals; a trailing partial column is dropped.
Eigen::MatrixXd cube_features(const CTensor3 &cube, std::size_t dim);

struct ShardSummary
{
    std::string cube_path;
    std::string transmit_path;
    std::uint64_t first_sample = 0;
    std::size_t count = 0;
};

struct DatasetSummary
{
    ShardSummary train;
    ShardSummary test;
    std::string sidecar_path;
    std::vector<float> label_min; // training shard
    std::vector<float> label_max;
};

// Writes train.cfis/train.cftx, test.cfis/test.cftx and dataset.json into
// `out_dir`. Train samples use ids [0, train), test ids [train, train + test).
// File contents depend only on the configuration and seed.
DatasetSummary export_dataset(const ExperimentConfig &config, const std::string &out_dir, std::size_t threads = 1);

nlohmann::json load_sidecar(const std::string &path);

} // namespace cfisac
