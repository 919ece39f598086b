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

#include <cmath>

#include "cfisac/errors.hpp"

namespace cfisac
{

// Large-scale LoS pathloss PL(d) = alpha0 * (d / d0)^(-zeta).
struct PathlossModel
{
    double alpha0 = 1e-6; // linear gain at d0 (-60 dB)
    double d0 = 1.0;      // meters
    double zeta = 2.0;

    double gain(double d) const
    {
        if (!(d > 0.0))
            fail(ErrorKind::DegenerateGeometry, "pathloss distance must be positive");
        return alpha0 * std::pow(d / d0, -zeta);
    }
};

} // namespace cfisac
