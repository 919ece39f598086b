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

#include "cfisac/channel.hpp"
#include "cfisac/config.hpp"
#include "cfisac/scene.hpp"
#include "cfisac/waveform.hpp"

namespace cfisac
{

// One fully realized sample: geometry, transmit block, random draws and cubes.
struct Sample
{
    Scene scene;
    TransmitBlock transmit;
    ReflectionDraw draw;
    std::vector<SensingCube> cubes;
};

// Targets uniform inside the region shrunk by target_margin, velocities
// uniform in [-v_max, v_max]^2, sorted by x then y. Users uniform in the region.
Scene draw_scene(const ExperimentConfig &config, std::uint64_t seed, std::uint64_t sample);

// MMSE-precoded 16-QAM block for the users of `scene`.
TransmitBlock build_transmit(const ExperimentConfig &config, const Scene &scene, std::uint64_t seed,
                             std::uint64_t sample);

// Draws everything for sample index `sample`; cubes are skipped when
// `with_cubes` is false.
Sample generate_sample(const ExperimentConfig &config, std::uint64_t seed, std::uint64_t sample,
                       bool with_cubes = true, std::size_t threads = 1);

} // namespace cfisac
