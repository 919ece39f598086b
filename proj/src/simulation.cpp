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

#include "cfisac/simulation.hpp"

#include <algorithm>

#include "cfisac/rng.hpp"

namespace cfisac
{

Scene draw_scene(const ExperimentConfig &config, std::uint64_t seed, std::uint64_t sample)
{
    Scene scene = config.layout;
    scene.targets.clear();
    scene.users.clear();
    const Region &r = scene.region;
    const double m = config.target_margin;

    Rng trng(seed, sample, Stream::Targets);
    for (std::size_t q = 0; q < config.num_targets; ++q)
    {
        Target t;
        t.position = {trng.uniform(r.x_min + m, r.x_max - m), trng.uniform(r.y_min + m, r.y_max - m)};
        t.velocity = {trng.uniform(-scene.v_max, scene.v_max), trng.uniform(-scene.v_max, scene.v_max)};
        scene.targets.push_back(t);
    }
    std::sort(scene.targets.begin(), scene.targets.end(), [](const Target &a, const Target &b) {
        return a.position.x != b.position.x ? a.position.x < b.position.x : a.position.y < b.position.y;
    });

    Rng urng(seed, sample, Stream::Users);
    for (std::size_t k = 0; k < config.num_users; ++k)
        scene.users.push_back({urng.uniform(r.x_min, r.x_max), urng.uniform(r.y_min, r.y_max)});
    return scene;
}

TransmitBlock build_transmit(const ExperimentConfig &config, const Scene &scene, std::uint64_t seed,
                             std::uint64_t sample)
{
    const auto &p = config.sensing;
    const CommChannels channels = gen_comm_channels(scene, p.pathloss, p.subcarrier_spacing, p.num_subcarriers);
    const CTensor4 precoders = mmse_precode(channels, config.comm_noise_w(), config.power_w());
    const CTensor3 payload = gen_qam16(scene.users.size(), p.num_subcarriers, p.num_symbols, seed, sample);
    return assemble_transmit(precoders, payload);
}

Sample generate_sample(const ExperimentConfig &config, std::uint64_t seed, std::uint64_t sample, bool with_cubes,
                       std::size_t threads)
{
    Sample s;
    s.scene = draw_scene(config, seed, sample);
    s.transmit = build_transmit(config, s.scene, seed, sample);
    s.draw = draw_reflections(s.scene, config.sensing, seed, sample);
    if (with_cubes)
        s.cubes = synthesize_rx(s.scene, config.sensing, s.transmit, s.draw, seed, sample, threads);
    return s;
}

} // namespace cfisac
