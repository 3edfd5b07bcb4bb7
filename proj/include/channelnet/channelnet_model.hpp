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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "channelnet/nn/network.hpp"
#include "channelnet/pilots.hpp"

namespace channelnet
{
    /// SRCNN on the interpolated pilot image: conv 9x9 (1->64) + ReLU, conv 1x1 (64->32) + ReLU,
    /// conv 5x5 (32->1), added to its input. He init; the last conv starts at zero.
    nn::Network<float> make_srcnn(std::uint64_t seed);

    /// DnCNN: conv 3x3 (1->64) + ReLU, (depth - 2) x [conv 3x3 (64->64) + BN + ReLU], conv 3x3 (64->1);
    /// output = input - predicted residual. He init; the last conv starts at zero.
    nn::Network<float> make_dncnn(std::uint64_t seed, std::size_t depth = 20, std::size_t features = 64);

    struct ModelMetadata
    {
        std::uint64_t seed = 0;
        std::string dataset_id;
    };

    /// Cascaded super-resolution and denoising networks, shared by the real and imaginary planes.
    struct ChannelNetModel
    {
        nn::Network<float> sr;
        nn::Network<float> ir;
        OfdmGridSpec spec;
        std::uint64_t pattern_hash = 0;
        float trained_snr_db = 0.0f;
        ModelMetadata metadata;
    };

    ChannelNetModel make_channelnet(const PilotPattern &pattern, std::uint64_t seed, float trained_snr_db = 0.0f);

    /// Stacks the real planes then the imaginary planes of `grids` as (2 * count, 1, N_S, N_D).
    nn::Tensor4<float> grids_to_planes(std::span<const CMatrix> grids);
    std::vector<CMatrix> planes_to_grids(const nn::Tensor4<float> &planes);

    /// Interpolate -> SRCNN -> DnCNN on both planes. Throws if the pilot layout differs from training.
    ChannelGrid estimate(const ChannelNetModel &model, const PilotObservation &obs);
    std::vector<ChannelGrid> estimate_batch(const ChannelNetModel &model, std::span<const PilotObservation> obs);
    /// Same pipeline stopped after the SRCNN stage.
    std::vector<ChannelGrid> estimate_batch_sr_only(const ChannelNetModel &model, std::span<const PilotObservation> obs);

    /// Runs a network in eval mode over planes in chunks.
    nn::Tensor4<float> predict_chunked(const nn::Network<float> &net, const nn::Tensor4<float> &planes,
                                       std::size_t chunk = 64);

    /// CHNT: "CHNT", u32 version, u32 N_S, u32 N_D, u64 pattern hash, f32 trained SNR, u64 seed,
    /// u32-prefixed dataset id, then the SRCNN and DnCNN as CNET blocks.
    inline constexpr std::uint32_t chnt_version = 1;
    void save_model(std::ostream &os, const ChannelNetModel &model);
    ChannelNetModel load_model(std::istream &is);
    void save_model(const std::filesystem::path &path, const ChannelNetModel &model);
    ChannelNetModel load_model(const std::filesystem::path &path);

    /// SNR regions with closed upper bounds; the first bound >= snr selects the model.
    struct SnrSwitchPolicy
    {
        struct Entry
        {
            double upper_bound_db;
            std::string model;
        };
        std::vector<Entry> entries;

        void validate() const;
        /// Above every bound the last model is returned and a warning is logged.
        const std::string &select(double snr_db) const;
    };

    inline const std::string &select_network(const SnrSwitchPolicy &policy, double snr_db)
    {
        return policy.select(snr_db);
    }

    /// Text lines "upper_bound_db,model_path"; "inf" is accepted.
    void write_policy(std::ostream &os, const SnrSwitchPolicy &policy);
    SnrSwitchPolicy read_policy(std::istream &is);
}
