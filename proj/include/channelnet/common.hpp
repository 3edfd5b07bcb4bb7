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

#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace channelnet
{
    using cdouble = std::complex<double>;
    using CMatrix = Eigen::MatrixXcd;
    using CVector = Eigen::VectorXcd;
    using RMatrix = Eigen::MatrixXd;

    /// Raised when a binary or text artifact cannot be decoded.
    class FormatError : public std::runtime_error
    {
    public:
        enum class Kind
        {
            bad_magic,
            version_mismatch,
            truncated,
            malformed
        };

        FormatError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
        Kind kind() const noexcept { return kind_; }

    private:
        Kind kind_;
    };

    /// SplitMix64 finalizer; used to derive independent per-item seeds from a base seed.
    constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) noexcept
    {
        return mix_seed(mix_seed(mix_seed(base) ^ stream) ^ index);
    }

    /// 64-bit FNV-1a, used for config and pattern fingerprints.
    std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;

    // Warnings go to stderr unless a handler is installed (tests capture them).
    using WarningHandler = std::function<void(const std::string &)>;
    void set_warning_handler(WarningHandler handler);
    void warn(const std::string &message);

    /// Noise variance for unit-power symbols and unit-mean channel power; +inf dB gives 0.
    double noise_variance_from_snr_db(double snr_db);
}
