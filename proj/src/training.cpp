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

#include "channelnet/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace channelnet
{
    void PlaneDataset::validate() const
    {
        if (inputs.shape() != targets.shape())
            throw std::invalid_argument("PlaneDataset: inputs " + inputs.shape().str() + " and targets " +
                                        targets.shape().str() + " differ");
        if (!inputs.empty() && inputs.shape().c != 1)
            throw std::invalid_argument("PlaneDataset: expected single-channel planes");
    }

    PlaneDataset make_plane_dataset(std::span<const ChannelGrid> grids, const PilotPattern &pattern,
                                    const NoiseSpec &noise, std::uint64_t noise_seed)
    {
        const CVector symbols = unit_pilot_symbols(pattern);
        std::vector<CMatrix> interp, truth;
        interp.reserve(grids.size());
        truth.reserve(grids.size());
        for (std::size_t g = 0; g < grids.size(); ++g)
        {
            const auto obs = ls_estimate(grids[g], pattern, symbols, noise, derive_seed(noise_seed, 0x4E, g));
            interp.push_back(interpolate_pilots(obs, pattern.spec()));
            truth.push_back(grids[g].values);
        }
        return {grids_to_planes(interp), grids_to_planes(truth)};
    }

    double evaluate_loss(const nn::Network<float> &net, const PlaneDataset &data)
    {
        data.validate();
        if (data.empty())
            throw std::invalid_argument("evaluate_loss: empty dataset");
        const auto pred = predict_chunked(net, data.inputs);
        double acc = 0.0;
        const float *p = pred.data();
        const float *t = data.targets.data();
        for (std::size_t j = 0; j < pred.size(); ++j)
        {
            const double d = double(p[j]) - double(t[j]);
            acc += d * d;
        }
        return acc / double(pred.size());
    }

    namespace
    {
        nn::Tensor4<float> gather(const nn::Tensor4<float> &src, std::span<const std::size_t> idx)
        {
            const auto &s = src.shape();
            const std::size_t per = s.c * s.plane();
            nn::Tensor4<float> out({idx.size(), s.c, s.h, s.w});
            for (std::size_t j = 0; j < idx.size(); ++j)
                std::copy(src.item(idx[j]), src.item(idx[j]) + per, out.item(j));
            return out;
        }
    }

    TrainResult train_network(nn::Network<float> &net, const PlaneDataset &train, const PlaneDataset &val,
                              const TrainConfig &config)
    {
        train.validate();
        val.validate();
        if (train.empty() || val.empty())
            throw std::invalid_argument("train_network: empty training or validation set");
        if (config.batch_size == 0)
            throw std::invalid_argument("train_network: batch_size must be positive");

        TrainResult result;
        result.initial_val_loss = evaluate_loss(net, val);
        result.best_val_loss = result.initial_val_loss;
        nn::Network<float> best = net;

        nn::AdamState<float> adam;
        adam.lr = config.learning_rate;
        auto params = net.parameters();

        std::mt19937_64 rng(derive_seed(config.seed, 0x7A));
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::size_t cursor = order.size(); // reshuffle on first use

        const std::size_t full_pass = (train.size() + config.batch_size - 1) / config.batch_size;
        const std::size_t steps = config.steps_per_epoch ? config.steps_per_epoch : full_pass;
        std::size_t since_best = 0;

        for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch)
        {
            const auto t0 = std::chrono::steady_clock::now();
            double loss_sum = 0.0;
            std::size_t loss_count = 0;
            for (std::size_t step = 0; step < steps; ++step)
            {
                if (cursor >= order.size())
                {
                    std::shuffle(order.begin(), order.end(), rng);
                    cursor = 0;
                }
                // batch norm needs two samples; a lone leftover joins the next pass
                std::size_t take = std::min(config.batch_size, order.size() - cursor);
                if (take == 1 && order.size() > 1)
                {
                    std::shuffle(order.begin(), order.end(), rng);
                    cursor = 0;
                    take = std::min(config.batch_size, order.size());
                }
                const std::span<const std::size_t> idx(order.data() + cursor, take);
                cursor += take;

                const auto x = gather(train.inputs, idx);
                const auto y = gather(train.targets, idx);
                net.zero_grad();
                const auto pred = net.forward(x, nn::Mode::train);
                const auto loss = nn::mse_loss(pred, y);
                if (!std::isfinite(loss.loss))
                {
                    std::ostringstream msg;
                    msg << "training diverged: loss " << loss.loss << " at epoch " << epoch << ", step " << step + 1;
                    throw TrainingDiverged(msg.str());
                }
                net.backward(loss.grad, false);
                net.clear_cache();
                nn::adam_step(params, adam);
                loss_sum += loss.loss * double(take);
                loss_count += take;
            }

            EpochLog log;
            log.epoch = epoch;
            log.train_loss = loss_sum / double(loss_count);
            log.val_loss = evaluate_loss(net, val);
            log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (!std::isfinite(log.val_loss))
                throw TrainingDiverged("training diverged: validation loss is not finite at epoch " + std::to_string(epoch));
            result.epochs.push_back(log);
            if (config.on_epoch)
                config.on_epoch(log);

            if (log.val_loss < result.best_val_loss)
            {
                result.best_val_loss = log.val_loss;
                result.best_epoch = epoch;
                best = net;
                since_best = 0;
            }
            else if (++since_best >= config.patience)
            {
                result.stopped_early = true;
                break;
            }
        }
        net = std::move(best);
        return result;
    }

    TrainResult train_stage1(ChannelNetModel &model, const PlaneDataset &train, const PlaneDataset &val,
                             const TrainConfig &config)
    {
        return train_network(model.sr, train, val, config);
    }

    TrainResult train_stage2(ChannelNetModel &model, const PlaneDataset &train, const PlaneDataset &val,
                             const TrainConfig &config)
    {
        train.validate();
        val.validate();
        if (train.empty() || val.empty())
            throw std::invalid_argument("train_stage2: empty training or validation set");
        const nn::Network<float> &sr = model.sr;
        const PlaneDataset sr_train{predict_chunked(sr, train.inputs), train.targets};
        const PlaneDataset sr_val{predict_chunked(sr, val.inputs), val.targets};
        return train_network(model.ir, sr_train, sr_val, config);
    }
}
