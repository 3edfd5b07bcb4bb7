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

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "channelnet/mmse.hpp"

namespace channelnet
{
    inline constexpr std::uint32_t cgrd_version = 1;
    inline constexpr std::uint32_t corr_version = 1;

    /// CGRD: "CGRD", u32 version, u32 N_S, u32 N_D, u64 count, then per grid N_S*N_D
    /// interleaved (re f32, im f32) in subcarrier-major order. All little-endian.
    void write_dataset(std::ostream &os, const OfdmGridSpec &spec, const std::vector<ChannelGrid> &grids);
    std::vector<ChannelGrid> read_dataset(std::istream &is, OfdmGridSpec spec = {});
    void write_dataset(const std::filesystem::path &path, const OfdmGridSpec &spec, const std::vector<ChannelGrid> &grids);
    std::vector<ChannelGrid> read_dataset(const std::filesystem::path &path, OfdmGridSpec spec = {});

    /// CORR: "CORR", u32 version, u32 n_cells, u32 n_pilots, u8 source, then r_dp (row-major)
    /// and r_pp as interleaved f32 complex.
    void write_correlation(std::ostream &os, const CorrelationModel &model);
    CorrelationModel read_correlation(std::istream &is);
    void write_correlation(const std::filesystem::path &path, const CorrelationModel &model);
    CorrelationModel read_correlation(const std::filesystem::path &path);
}
