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

#include <array>
#include <complex>
#include <cstddef>
#include <numeric>
#include <vector>

#include "cfisac/errors.hpp"

namespace cfisac
{

using cd = std::complex<double>;

// Dense row-major tensor with a fixed rank. Last index varies fastest.
template <typename T, std::size_t Rank>
class Tensor
{
public:
    using Shape = std::array<std::size_t, Rank>;

    Tensor() { shape_.fill(0); }

    explicit Tensor(Shape shape, T fill = T{})
        : shape_(shape), data_(count(shape), fill)
    {
        strides_[Rank - 1] = 1;
        for (std::size_t r = Rank - 1; r > 0; --r)
            strides_[r - 1] = strides_[r] * shape_[r];
    }

    const Shape &shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t r) const noexcept { return shape_[r]; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t stride(std::size_t r) const noexcept { return strides_[r]; }

    T *data() noexcept { return data_.data(); }
    const T *data() const noexcept { return data_.data(); }
    std::vector<T> &values() noexcept { return data_; }
    const std::vector<T> &values() const noexcept { return data_; }

    template <typename... I>
    T &operator()(I... idx) noexcept
    {
        static_assert(sizeof...(I) == Rank);
        return data_[offset(idx...)];
    }

    template <typename... I>
    const T &operator()(I... idx) const noexcept
    {
        static_assert(sizeof...(I) == Rank);
        return data_[offset(idx...)];
    }

    template <typename... I>
    std::size_t offset(I... idx) const noexcept
    {
        const std::array<std::size_t, Rank> ix{static_cast<std::size_t>(idx)...};
        std::size_t o = 0;
        for (std::size_t r = 0; r < Rank; ++r)
            o += ix[r] * strides_[r];
        return o;
    }

    bool same_shape(const Tensor &other) const noexcept { return shape_ == other.shape_; }

private:
    static std::size_t count(const Shape &s)
    {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    Shape shape_{};
    Shape strides_{};
    std::vector<T> data_;
};

using CTensor3 = Tensor<cd, 3>;
using CTensor4 = Tensor<cd, 4>;

} // namespace cfisac
