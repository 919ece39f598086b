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
#include <string>

#include <json.hpp>

#include "cfisac/channel.hpp"
#include "cfisac/scene.hpp"

namespace cfisac
{

struct CodecConfig
{
    std::size_t dim = 512;
    std::size_t num_codewords = 32;
    double gamma = 0.99;
    double omega = 0.25;
};

struct EstimatorConfig
{
    double grid_step = 0.002; // rad
    std::size_t sic_sweeps = 3;
};

// Everything needed to draw a reproducible experiment.
struct ExperimentConfig
{
    Scene layout; // APs, region, carrier, v_max; targets and users are drawn per sample
    std::size_t num_targets = 1;
    std::size_t num_users = 4;
    double target_margin = 5.0; // m, keeps drawn targets away from the region border
    SensingParams sensing;
    double power_dbm = 30.0;
    double comm_noise_dbm = -90.0;
    std::size_t train_count = 2000;
    std::size_t test_count = 500;
    std::uint64_t seed = 1;
    CodecConfig codec;
    EstimatorConfig estimator;
    std::size_t threads = 0; // 0 = hardware concurrency

    double power_w() const;
    double comm_noise_w() const;
    void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json &j);
nlohmann::json config_to_json(const ExperimentConfig &config);
ExperimentConfig load_config(const std::string &path);

} // namespace cfisac
