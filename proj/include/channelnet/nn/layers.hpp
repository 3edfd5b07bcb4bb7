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
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "channelnet/nn/tensor.hpp"

namespace channelnet::nn
{
    enum class Mode
    {
        train,
        eval
    };

    enum class LayerKind : std::uint8_t
    {
        conv = 1,
        batchnorm = 2,
        relu = 3
    };

    /// A trainable tensor and its gradient accumulator.
    template <typename T>
    struct ParamView
    {
        std::span<T> value;
        std::span<T> grad;
    };

    template <typename T>
    class Layer
    {
    public:
        virtual ~Layer() = default;

        virtual LayerKind kind() const = 0;
        /// With keep_cache, stores what backward() needs.
        virtual Tensor4<T> forward(const Tensor4<T> &x, Mode mode, bool keep_cache = true) = 0;
        /// Accumulates parameter gradients and returns the gradient w.r.t. the cached input.
        virtual Tensor4<T> backward(const Tensor4<T> &grad_out) = 0;
        virtual std::vector<ParamView<T>> parameters() { return {}; }
        virtual void zero_grad() {}
        virtual void clear_cache() = 0;
        virtual std::unique_ptr<Layer> clone() const = 0;
        /// With false, backward() may skip the input gradient and return an empty tensor.
        virtual void set_input_grad(bool) {}
    };

    /// Same-padded, stride-1 2D cross-correlation.
    template <typename T>
    class Conv2d : public Layer<T>
    {
    public:
        Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h, std::size_t kernel_w);

        LayerKind kind() const override { return LayerKind::conv; }
        Tensor4<T> forward(const Tensor4<T> &x, Mode mode, bool keep_cache = true) override;
        Tensor4<T> backward(const Tensor4<T> &grad_out) override;
        std::vector<ParamView<T>> parameters() override;
        void zero_grad() override;
        void clear_cache() override { cache_.reset(); }
        std::unique_ptr<Layer<T>> clone() const override;
        void set_input_grad(bool on) override { input_grad_ = on; }

        /// He-normal weights, zero bias.
        void init_he(std::mt19937_64 &rng);

        std::size_t in_channels() const noexcept { return in_; }
        std::size_t out_channels() const noexcept { return out_; }
        std::size_t kernel_h() const noexcept { return kh_; }
        std::size_t kernel_w() const noexcept { return kw_; }

        /// (out, in, kh, kw) row-major.
        std::vector<T> &weight() noexcept { return weight_; }
        const std::vector<T> &weight() const noexcept { return weight_; }
        std::vector<T> &bias() noexcept { return bias_; }
        const std::vector<T> &bias() const noexcept { return bias_; }
        const std::vector<T> &weight_grad() const noexcept { return weight_grad_; }
        const std::vector<T> &bias_grad() const noexcept { return bias_grad_; }

    protected:
        std::size_t in_, out_, kh_, kw_;
        std::vector<T> weight_, bias_, weight_grad_, bias_grad_;
        std::optional<Tensor4<T>> cache_;
        bool input_grad_ = true;
    };

    /// Per-channel batch normalization over (N, H, W) with running statistics.
    template <typename T>
    class BatchNorm2d : public Layer<T>
    {
    public:
        explicit BatchNorm2d(std::size_t channels, double epsilon = 1e-5, double momentum = 0.9);

        LayerKind kind() const override { return LayerKind::batchnorm; }
        Tensor4<T> forward(const Tensor4<T> &x, Mode mode, bool keep_cache = true) override;
        Tensor4<T> backward(const Tensor4<T> &grad_out) override;
        std::vector<ParamView<T>> parameters() override;
        void zero_grad() override;
        void clear_cache() override;
        std::unique_ptr<Layer<T>> clone() const override;

        std::size_t channels() const noexcept { return gamma_.size(); }
        std::vector<T> &gamma() noexcept { return gamma_; }
        std::vector<T> &beta() noexcept { return beta_; }
        std::vector<T> &running_mean() noexcept { return running_mean_; }
        std::vector<T> &running_var() noexcept { return running_var_; }
        const std::vector<T> &gamma() const noexcept { return gamma_; }
        const std::vector<T> &beta() const noexcept { return beta_; }
        const std::vector<T> &running_mean() const noexcept { return running_mean_; }
        const std::vector<T> &running_var() const noexcept { return running_var_; }
        double epsilon() const noexcept { return epsilon_; }
        double momentum() const noexcept { return momentum_; }

    private:
        double epsilon_, momentum_;
        std::vector<T> gamma_, beta_, running_mean_, running_var_;
        std::vector<T> gamma_grad_, beta_grad_;
        // backward cache
        std::optional<Tensor4<T>> x_hat_;
        std::vector<double> inv_std_;
        Mode cached_mode_ = Mode::train;
    };

    template <typename T>
    class ReLU : public Layer<T>
    {
    public:
        LayerKind kind() const override { return LayerKind::relu; }
        Tensor4<T> forward(const Tensor4<T> &x, Mode mode, bool keep_cache = true) override;
        Tensor4<T> backward(const Tensor4<T> &grad_out) override;
        void clear_cache() override { output_.reset(); }
        std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(); }

    private:
        std::optional<Tensor4<T>> output_;
    };

    /// Mean squared elementwise error and its gradient w.r.t. pred.
    template <typename T>
    struct LossResult
    {
        double loss = 0.0;
        Tensor4<T> grad;
    };

    template <typename T>
    LossResult<T> mse_loss(const Tensor4<T> &pred, const Tensor4<T> &target);
}
