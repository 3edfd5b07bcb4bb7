// SPDX-License-Identifier: Apache-2.0
//
// channelnet: deep-learning OFDM channel estimation with classical baselines
// Copyright (C) 2026 The channelnet authors
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

#include "channelnet/common.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

namespace channelnet
{
    namespace
    {
        std::mutex warning_mutex;
        WarningHandler warning_handler;
    }

    std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) noexcept
    {
        for (unsigned char c : bytes)
        {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    void set_warning_handler(WarningHandler handler)
    {
        std::lock_guard lock(warning_mutex);
        warning_handler = std::move(handler);
    }

    void warn(const std::string &message)
    {
        std::lock_guard lock(warning_mutex);
        if (warning_handler)
            warning_handler(message);
        else
            std::cerr << "warning: " << message << '\n';
    }

    double noise_variance_from_snr_db(double snr_db)
    {
        if (std::isnan(snr_db))
            throw std::invalid_argument("snr_db is NaN");
        if (std::isinf(snr_db))
        {
            if (snr_db < 0)
                throw std::invalid_argument("snr_db of -inf gives infinite noise");
            return 0.0;
        }
        return std::pow(10.0, -snr_db / 10.0);
    }
}
