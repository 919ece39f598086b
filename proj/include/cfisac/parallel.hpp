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

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cfisac
{

inline std::size_t resolve_threads(std::size_t requested)
{
    if (requested > 0)
        return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers with a static
// interleaved partition. The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn &&fn)
{
    const std::size_t workers = std::min(resolve_threads(threads), std::max<std::size_t>(n, 1));
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
    {
        pool.emplace_back([&, w] {
            try
            {
                for (std::size_t i = w; i < n; i += workers)
                    fn(i);
            }
            catch (...)
            {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        });
    }
    for (auto &t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

// Deterministic pairwise-tree sum; the summation order depends only on the
// number of terms.
template <typename T>
T tree_reduce(std::vector<T> terms)
{
    if (terms.empty())
        return T{};
    std::size_t n = terms.size();
    while (n > 1)
    {
        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i)
            terms[i] = terms[i] + terms[i + half];
        n = half;
    }
    return terms.front();
}

} // namespace cfisac
