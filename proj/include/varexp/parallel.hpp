// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace varexp
{
    /// Worker count: hardware concurrency, capped by VAREXP_THREADS when set.
    inline unsigned thread_count()
    {
        unsigned n = std::max(1u, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("VAREXP_THREADS"))
        {
            try
            {
                const long cap = std::stol(env);
                if (cap >= 1)
                {
                    n = std::min<unsigned>(n, static_cast<unsigned>(cap));
                }
            }
            catch (const std::exception&)
            {
                // Unparseable values leave the default in place.
            }
        }
        return n;
    }

    /// Runs body(i) for i in [0, count) in contiguous chunks. Each index is
    /// visited exactly once, so per-index writes stay deterministic.
    template <class Body>
    void parallel_for(std::size_t count, Body&& body, std::size_t min_chunk = 4096)
    {
        const std::size_t workers = std::min<std::size_t>(thread_count(), std::max<std::size_t>(1, count / min_chunk));
        if (workers <= 1)
        {
            for (std::size_t i = 0; i < count; ++i)
            {
                body(i);
            }
            return;
        }
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (count + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w)
        {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(count, lo + chunk);
            pool.emplace_back([lo, hi, &body] {
                for (std::size_t i = lo; i < hi; ++i)
                {
                    body(i);
                }
            });
        }
        for (auto& t : pool)
        {
            t.join();
        }
    }
}
