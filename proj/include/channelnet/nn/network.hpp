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
#include <iosfwd>
#include <memory>
#include <vector>

#include "channelnet/nn/layers.hpp"

namespace channelnet::nn
{
    /// Global skip around the layer stack.
    enum class Residual : std::uint8_t
    {
        none = 0,
        add_input = 1,          // y = x + body(x)
        subtract_from_input = 2 // y = x - body(x)
    };

    /// Ordered layer stack with an optional global skip connection.
    template <typename T>
    class Network
    {
    public:
        Network() = default;
        explicit Network(Residual residual) : residual_(residual) {}
        Network(const Network &other);
        Network &operator=(const Network &other);
        Network(Network &&) noexcept = default;
        Network &operator=(Network &&) noexcept = default;

        template <typename L, typename... Args>
        L &add(Args &&...args)
        {
            auto layer = std::make_unique<L>(std::forward<Args>(args)...);
            L &ref = *layer;
            layers_.push_back(std::move(layer));
            return ref;
        }
        void push_back(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

        Tensor4<T> forward(const Tensor4<T> &x, Mode mode);
        /// Eval-mode forward without caches.
        Tensor4<T> predict(const Tensor4<T> &x) const;
        /// Returns the gradient w.r.t. the network input, or an empty tensor when input_grad is false
        /// (parameter gradients only).
        Tensor4<T> backward(const Tensor4<T> &grad_out, bool input_grad = true);

        void zero_grad();
        void clear_cache();
        std::vector<ParamView<T>> parameters();
        std::size_t parameter_count() const;

        std::size_t size() const noexcept { return layers_.size(); }
        Layer<T> &layer(std::size_t i) { return *layers_.at(i); }
        const Layer<T> &layer(std::size_t i) const { return *layers_.at(i); }
        Residual residual() const noexcept { return residual_; }
        void set_residual(Residual r) noexcept { residual_ = r; }

        /// Same architecture and parameters in another scalar type (running stats included).
        template <typename U>
        Network<U> convert() const;

        /// FNV-1a over every parameter and running statistic, bit-exact.
        std::uint64_t checksum() const;

    private:
        Residual residual_ = Residual::none;
        std::vector<std::unique_ptr<Layer<T>>> layers_;
    };

    template <typename T>
    struct AdamState
    {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        std::uint64_t step = 0;
        std::vector<std::vector<T>> m, v;
    };

    /// Bias-corrected Adam update over the parameters' accumulated gradients.
    template <typename T>
    void adam_step(const std::vector<ParamView<T>> &params, AdamState<T> &state);

    struct GradcheckReport
    {
        double max_relative_error = 0.0;
        std::size_t n_checked = 0;
        std::size_t worst_index = 0;
        bool passed = false;
    };

    /// Backprop vs central differences (h = 1e-5) of the MSE loss on a random subset of at least
    /// `min_params` parameters (all if fewer) plus a few input entries.
    GradcheckReport gradcheck(Network<double> &net, const Tensor4<double> &input, const Tensor4<double> &target,
                              double tolerance, Mode mode = Mode::train, std::size_t min_params = 200,
                              std::uint64_t seed = 1);

    /// CNET weights file: magic, version, layer count, then per layer a kind byte, its shape as
    /// u32s and f32 parameters. The global skip is stored as a trailing record of kind 4.
    inline constexpr std::uint32_t cnet_version = 1;
    template <typename T>
    void write_network(std::ostream &os, const Network<T> &net);
    template <typename T>
    Network<T> read_network(std::istream &is);
}
