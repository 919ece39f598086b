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

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfisac
{

enum class ErrorKind
{
    DegenerateGeometry,
    UnsupportedOrientation,
    SingularChannel,
    ShapeMismatch,
    RankDeficient,
    WeakReference,
    AmbiguousAssociation,
    SingularGeometry,
    SingularNuisanceBlock,
    EmptyCodebook,
    NotPowerOfTwo,
    IoError,
    ConfigInvalid,
    LengthMismatch,
    InvalidArgument
};

inline std::string_view error_kind_name(ErrorKind kind);

// All library failures are reported through this type; callers switch on kind().
class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what)
{
    throw Error(kind, what);
}

inline std::string_view error_kind_name(ErrorKind kind)
{
    switch (kind)
    {
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::UnsupportedOrientation: return "UnsupportedOrientation";
    case ErrorKind::SingularChannel: return "SingularChannel";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::WeakReference: return "WeakReference";
    case ErrorKind::AmbiguousAssociation: return "AmbiguousAssociation";
    case ErrorKind::SingularGeometry: return "SingularGeometry";
    case ErrorKind::SingularNuisanceBlock: return "SingularNuisanceBlock";
    case ErrorKind::EmptyCodebook: return "EmptyCodebook";
    case ErrorKind::NotPowerOfTwo: return "NotPowerOfTwo";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace cfisac
