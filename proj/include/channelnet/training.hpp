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

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "channelnet/channelnet_model.hpp"

namespace channelnet
{
    /// Input/target plane pairs, (count, 1, N_S, N_D) each. Real and imaginary planes are
    /// separate samples.
    struct PlaneDataset
    {
        nn::Tensor4<float> inputs;
        nn::Tensor4<float> targets;

        std::size_t size() const noexcept { return inputs.shape().n; }
        bool empty() const noexcept { return size() == 0; }
        void validate() const;
    };

    /// Noisy LS at the pilots of each grid, interpolated to the full grid, paired with the true
    /// grid. Grid g draws its noise from derive_seed(noise_seed, 0x4E, g).
    PlaneDataset make_plane_dataset(std::span<const ChannelGrid> grids, const PilotPattern &pattern,
                                    const NoiseSpec &noise, std::uint64_t noise_seed);

    struct EpochLog
    {
        std::size_t epoch = 0;
        double train_loss = 0.0;
        double val_loss = 0.0;
        double seconds = 0.0;
    };

    struct TrainConfig
    {
        std::size_t max_epochs = 500;
        std::size_t patience = 20;
        std::size_t batch_size = 128;
        double learning_rate = 1e-3;
        std::uint64_t seed = 1;
        /// Mini-batches per epoch; 0 means one full pass over the training planes.
        std::size_t steps_per_epoch = 0;
        std::function<void(const EpochLog &)> on_epoch;
    };

    struct TrainResult
    {
        std::vector<EpochLog> epochs;
        double initial_val_loss = 0.0;
        double best_val_loss = 0.0;
        std::size_t best_epoch = 0; // 0: the initial weights were never beaten
        bool stopped_early = false;
    };

    class TrainingDiverged : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Adam on the MSE loss with early stopping on the validation loss. The network ends with the
    /// weights of the best validation epoch.
    TrainResult train_network(nn::Network<float> &net, const PlaneDataset &train, const PlaneDataset &val,
                              const TrainConfig &config);

    /// Stage 1: fit the SRCNN to (interpolated pilots -> true channel).
    TrainResult train_stage1(ChannelNetModel &model, const PlaneDataset &train, const PlaneDataset &val,
                             const TrainConfig &config);

    /// Stage 2: the SRCNN is frozen; the DnCNN is fit to (SRCNN output -> true channel).
    TrainResult train_stage2(ChannelNetModel &model, const PlaneDataset &train, const PlaneDataset &val,
                             const TrainConfig &config);

    /// Mean squared error of the network over a plane set, eval mode.
    double evaluate_loss(const nn::Network<float> &net, const PlaneDataset &data);
}
