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

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <utility>

#include "cfisac/errors.hpp"

namespace cfisac::binio
{

// Little-endian scalar encoding independent of the host byte order.
template <typename T>
void put_le(std::ostream &out, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    out.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream &in)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char *>(bytes), sizeof(T)))
        fail(ErrorKind::IoError, "unexpected end of file");
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

inline void put_magic(std::ostream &out, const char (&magic)[5])
{
    out.write(magic, 4);
}

inline void expect_magic(std::istream &in, const char (&magic)[5], const std::string &what)
{
    char got[4];
    if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        fail(ErrorKind::IoError, what + ": bad magic, expected '" + std::string(magic) + "'");
}

} // namespace cfisac::binio
