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

#include "cfisac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cfisac/errors.hpp"

namespace cfisac
{

namespace
{

double sq(Vec2 a, Vec2 b)
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

} // namespace

std::vector<std::size_t> match_targets(const std::vector<Vec2> &estimated, const std::vector<Vec2> &truth)
{
    if (estimated.size() != truth.size())
        fail(ErrorKind::LengthMismatch, "estimate has " + std::to_string(estimated.size()) + " targets, label has " +
                                            std::to_string(truth.size()));
    if (truth.size() > 8)
        fail(ErrorKind::InvalidArgument, "exhaustive matching limited to 8 targets");
    std::vector<std::size_t> perm(truth.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do
    {
        double cost = 0.0;
        for (std::size_t q = 0; q < truth.size(); ++q)
            cost += sq(estimated[perm[q]], truth[q]);
        if (cost < best_cost)
        {
            best_cost = cost;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

RmseResult rmse(const std::vector<TargetEstimate> &estimates, const std::vector<TargetEstimate> &labels)
{
    if (estimates.size() != labels.size())
        fail(ErrorKind::LengthMismatch, std::to_string(estimates.size()) + " estimates vs " +
                                            std::to_string(labels.size()) + " labels");
    RmseResult out;
    out.samples = labels.size();
    double loc = 0.0;
    double vel = 0.0;
    std::size_t terms = 0;
    for (std::size_t s = 0; s < labels.size(); ++s)
    {
        const auto &e = estimates[s];
        const auto &l = labels[s];
        if (e.velocities.size() != e.positions.size() || l.velocities.size() != l.positions.size())
            fail(ErrorKind::LengthMismatch, "sample " + std::to_string(s) + ": positions and velocities differ");
        const auto perm = match_targets(e.positions, l.positions);
        for (std::size_t q = 0; q < perm.size(); ++q)
        {
            loc += sq(e.positions[perm[q]], l.positions[q]);
            vel += sq(e.velocities[perm[q]], l.velocities[q]);
        }
        terms += perm.size();
    }
    if (terms > 0)
    {
        out.loc_rmse = std::sqrt(loc / static_cast<double>(terms));
        out.vel_rmse = std::sqrt(vel / static_cast<double>(terms));
    }
    return out;
}

} // namespace cfisac
