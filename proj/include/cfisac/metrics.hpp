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
#include <vector>

#include "cfisac/scene.hpp"

namespace cfisac
{

struct TargetEstimate
{
    std::vector<Vec2> positions;
    std::vector<Vec2> velocities;
};

struct RmseResult
{
    double loc_rmse = 0.0; // m
    double vel_rmse = 0.0; // m/s
    std::size_t samples = 0;
};

// Permutation minimizing the summed squared position error; perm[q] is the
// estimate matched to truth q.
std::vector<std::size_t> match_targets(const std::vector<Vec2> &estimated, const std::vector<Vec2> &truth);

// Per-sample targets are matched by position before scoring.
RmseResult rmse(const std::vector<TargetEstimate> &estimates, const std::vector<TargetEstimate> &labels);

} // namespace cfisac
