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

#include "channelnet/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "channelnet/binary_io.hpp"

namespace channelnet::nn
{
    template <typename T>
    Network<T>::Network(const Network &other) : residual_(other.residual_)
    {
        for (const auto &l : other.layers_)
            layers_.push_back(l->clone());
    }

    template <typename T>
    Network<T> &Network<T>::operator=(const Network &other)
    {
        if (this != &other)
        {
            Network copy(other);
            *this = std::move(copy);
        }
        return *this;
    }

    namespace
    {
        template <typename T>
        void apply_skip(Residual residual, const Tensor4<T> &x, Tensor4<T> &y)
        {
            if (residual == Residual::none)
                return;
            if (x.shape() != y.shape())
                throw std::invalid_argument("Network: skip connection needs matching input and output shapes, got " +
                                            x.shape().str() + " and " + y.shape().str());
            if (residual == Residual::add_input)
                for (std::size_t j = 0; j < y.size(); ++j)
                    y[j] = x[j] + y[j];
            else
                for (std::size_t j = 0; j < y.size(); ++j)
                    y[j] = x[j] - y[j];
        }
    }

    template <typename T>
    Tensor4<T> Network<T>::forward(const Tensor4<T> &x, Mode mode)
    {
        Tensor4<T> h = x;
        for (auto &l : layers_)
            h = l->forward(h, mode, true);
        apply_skip(residual_, x, h);
        return h;
    }

    template <typename T>
    Tensor4<T> Network<T>::predict(const Tensor4<T> &x) const
    {
        Tensor4<T> h = x;
        for (const auto &l : layers_)
            h = l->forward(h, Mode::eval, false);
        apply_skip(residual_, x, h);
        return h;
    }

    template <typename T>
    Tensor4<T> Network<T>::backward(const Tensor4<T> &grad_out, bool input_grad)
    {
        Tensor4<T> g = grad_out;
        if (residual_ == Residual::subtract_from_input)
            for (std::size_t j = 0; j < g.size(); ++j)
                g[j] = -g[j];
        if (!layers_.empty())
            layers_.front()->set_input_grad(input_grad);
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
            g = (*it)->backward(g);
        if (!layers_.empty())
            layers_.front()->set_input_grad(true);
        if (!input_grad)
            return {};
        if (residual_ != Residual::none)
            for (std::size_t j = 0; j < g.size(); ++j)
                g[j] += grad_out[j];
        return g;
    }

    template <typename T>
    void Network<T>::zero_grad()
    {
        for (auto &l : layers_)
            l->zero_grad();
    }

    template <typename T>
    void Network<T>::clear_cache()
    {
        for (auto &l : layers_)
            l->clear_cache();
    }

    template <typename T>
    std::vector<ParamView<T>> Network<T>::parameters()
    {
        std::vector<ParamView<T>> out;
        for (auto &l : layers_)
            for (auto &p : l->parameters())
                out.push_back(p);
        return out;
    }

    template <typename T>
    std::size_t Network<T>::parameter_count() const
    {
        std::size_t n = 0;
        for (const auto &l : layers_)
            for (const auto &p : const_cast<Layer<T> &>(*l).parameters())
                n += p.value.size();
        return n;
    }

    template <typename T>
    template <typename U>
    Network<U> Network<T>::convert() const
    {
        Network<U> out(residual_);
        auto copy = [](const std::vector<T> &src, std::vector<U> &dst) {
            dst.assign(src.begin(), src.end());
        };
        for (const auto &l : layers_)
        {
            switch (l->kind())
            {
            case LayerKind::conv:
            {
                const auto &c = static_cast<const Conv2d<T> &>(*l);
                auto &d = out.template add<Conv2d<U>>(c.in_channels(), c.out_channels(), c.kernel_h(), c.kernel_w());
                copy(c.weight(), d.weight());
                copy(c.bias(), d.bias());
                break;
            }
            case LayerKind::batchnorm:
            {
                const auto &b = static_cast<const BatchNorm2d<T> &>(*l);
                auto &d = out.template add<BatchNorm2d<U>>(b.channels(), b.epsilon(), b.momentum());
                copy(b.gamma(), d.gamma());
                copy(b.beta(), d.beta());
                copy(b.running_mean(), d.running_mean());
                copy(b.running_var(), d.running_var());
                break;
            }
            case LayerKind::relu:
                out.template add<ReLU<U>>();
                break;
            }
        }
        return out;
    }

    template <typename T>
    std::uint64_t Network<T>::checksum() const
    {
        std::uint64_t h = fnv1a(std::string_view(reinterpret_cast<const char *>(&residual_), 1));
        auto mix = [&h](const std::vector<T> &v) {
            h = fnv1a(std::string_view(reinterpret_cast<const char *>(v.data()), v.size() * sizeof(T)), h);
        };
        for (const auto &l : layers_)
        {
            const auto kind = l->kind();
            h = fnv1a(std::string_view(reinterpret_cast<const char *>(&kind), 1), h);
            if (kind == LayerKind::conv)
            {
                const auto &c = static_cast<const Conv2d<T> &>(*l);
                mix(c.weight());
                mix(c.bias());
            }
            else if (kind == LayerKind::batchnorm)
            {
                const auto &b = static_cast<const BatchNorm2d<T> &>(*l);
                mix(b.gamma());
                mix(b.beta());
                mix(b.running_mean());
                mix(b.running_var());
            }
        }
        return h;
    }

    template <typename T>
    void adam_step(const std::vector<ParamView<T>> &params, AdamState<T> &state)
    {
        if (state.m.empty())
        {
            for (const auto &p : params)
            {
                state.m.emplace_back(p.value.size(), T(0));
                state.v.emplace_back(p.value.size(), T(0));
            }
        }
        if (state.m.size() != params.size())
            throw std::invalid_argument("adam_step: parameter count differs from optimizer state");
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].value.size() != state.m[i].size() || params[i].grad.size() != params[i].value.size())
                throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " shape mismatch");

        ++state.step;
        const double b1 = state.beta1, b2 = state.beta2;
        const double c1 = 1.0 - std::pow(b1, double(state.step));
        const double c2 = 1.0 - std::pow(b2, double(state.step));
        for (std::size_t i = 0; i < params.size(); ++i)
        {
            auto &m = state.m[i];
            auto &v = state.v[i];
            const auto &p = params[i];
            for (std::size_t j = 0; j < m.size(); ++j)
            {
                const double g = double(p.grad[j]);
                const double mj = b1 * double(m[j]) + (1.0 - b1) * g;
                const double vj = b2 * double(v[j]) + (1.0 - b2) * g * g;
                m[j] = T(mj);
                v[j] = T(vj);
                p.value[j] = T(double(p.value[j]) - state.lr * (mj / c1) / (std::sqrt(vj / c2) + state.eps));
            }
        }
    }

    GradcheckReport gradcheck(Network<double> &net, const Tensor4<double> &input, const Tensor4<double> &target,
                              double tolerance, Mode mode, std::size_t min_params, std::uint64_t seed)
    {
        constexpr double h = 1e-5;
        constexpr double floor = 1e-6;
        auto loss_at = [&](const Tensor4<double> &x) {
            auto y = net.forward(x, mode);
            return mse_loss(y, target).loss;
        };

        net.zero_grad();
        const auto y = net.forward(input, mode);
        const auto grad_in = net.backward(mse_loss(y, target).grad);

        auto params = net.parameters();
        std::vector<std::pair<std::size_t, std::size_t>> all; // (param tensor, element)
        for (std::size_t i = 0; i < params.size(); ++i)
            for (std::size_t j = 0; j < params[i].value.size(); ++j)
                all.emplace_back(i, j);
        std::mt19937_64 rng(seed);
        std::shuffle(all.begin(), all.end(), rng);
        if (all.size() > min_params)
            all.resize(min_params);

        // Analytic gradients are read before any perturbation runs another forward pass.
        std::vector<double> analytic;
        for (const auto &[i, j] : all)
            analytic.push_back(params[i].grad[j]);

        GradcheckReport report;
        auto record = [&](double a, double n) {
            const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
            if (err > report.max_relative_error)
            {
                report.max_relative_error = err;
                report.worst_index = report.n_checked;
            }
            ++report.n_checked;
        };

        for (std::size_t q = 0; q < all.size(); ++q)
        {
            auto &value = params[all[q].first].value[all[q].second];
            const double saved = value;
            value = saved + h;
            const double up = loss_at(input);
            value = saved - h;
            const double down = loss_at(input);
            value = saved;
            record(analytic[q], (up - down) / (2 * h));
        }

        std::vector<std::size_t> inputs(input.size());
        std::iota(inputs.begin(), inputs.end(), 0);
        std::shuffle(inputs.begin(), inputs.end(), rng);
        inputs.resize(std::min<std::size_t>(inputs.size(), 32));
        Tensor4<double> x = input;
        for (auto j : inputs)
        {
            const double saved = x[j];
            x[j] = saved + h;
            const double up = loss_at(x);
            x[j] = saved - h;
            const double down = loss_at(x);
            x[j] = saved;
            record(grad_in[j], (up - down) / (2 * h));
        }
        net.clear_cache();
        report.passed = report.max_relative_error < tolerance;
        return report;
    }

    namespace
    {
        constexpr std::uint8_t skip_record = 4;

        template <typename T>
        void put_floats(std::ostream &os, const std::vector<T> &v)
        {
            for (T x : v)
                binary::put<float>(os, float(x));
        }

        template <typename T>
        void get_floats(binary::Reader &r, std::vector<T> &v)
        {
            for (auto &x : v)
                x = T(r.get<float>());
        }
    }

    template <typename T>
    void write_network(std::ostream &os, const Network<T> &net)
    {
        binary::put_magic(os, "CNET");
        binary::put<std::uint32_t>(os, cnet_version);
        binary::put<std::uint32_t>(os, std::uint32_t(net.size() + (net.residual() != Residual::none ? 1 : 0)));
        for (std::size_t i = 0; i < net.size(); ++i)
        {
            const auto &l = net.layer(i);
            binary::put<std::uint8_t>(os, std::uint8_t(l.kind()));
            if (l.kind() == LayerKind::conv)
            {
                const auto &c = static_cast<const Conv2d<T> &>(l);
                for (auto d : {c.out_channels(), c.in_channels(), c.kernel_h(), c.kernel_w()})
                    binary::put<std::uint32_t>(os, std::uint32_t(d));
                put_floats(os, c.weight());
                put_floats(os, c.bias());
            }
            else if (l.kind() == LayerKind::batchnorm)
            {
                const auto &b = static_cast<const BatchNorm2d<T> &>(l);
                binary::put<std::uint32_t>(os, std::uint32_t(b.channels()));
                put_floats(os, b.gamma());
                put_floats(os, b.beta());
                put_floats(os, b.running_mean());
                put_floats(os, b.running_var());
            }
        }
        if (net.residual() != Residual::none)
        {
            binary::put<std::uint8_t>(os, skip_record);
            binary::put<std::uint32_t>(os, std::uint32_t(net.residual()));
        }
    }

    template <typename T>
    Network<T> read_network(std::istream &is)
    {
        binary::Reader r(is);
        r.set_context("CNET header");
        r.expect_magic("CNET");
        r.expect_version(cnet_version);
        const auto count = r.get<std::uint32_t>();
        Network<T> net;
        for (std::uint32_t i = 0; i < count; ++i)
        {
            r.set_context("layer " + std::to_string(i));
            const auto kind = r.get<std::uint8_t>();
            switch (kind)
            {
            case std::uint8_t(LayerKind::conv):
            {
                const auto out = r.get<std::uint32_t>(), in = r.get<std::uint32_t>();
                const auto kh = r.get<std::uint32_t>(), kw = r.get<std::uint32_t>();
                if (out == 0 || in == 0 || kh % 2 == 0 || kw % 2 == 0 || std::uint64_t(out) * in * kh * kw > (1ULL << 28))
                    throw FormatError(FormatError::Kind::malformed, "layer " + std::to_string(i) + ": invalid conv shape");
                auto &c = net.template add<Conv2d<T>>(in, out, kh, kw);
                get_floats(r, c.weight());
                get_floats(r, c.bias());
                break;
            }
            case std::uint8_t(LayerKind::batchnorm):
            {
                const auto ch = r.get<std::uint32_t>();
                if (ch == 0 || ch > (1U << 20))
                    throw FormatError(FormatError::Kind::malformed, "layer " + std::to_string(i) + ": invalid batchnorm shape");
                auto &b = net.template add<BatchNorm2d<T>>(ch);
                get_floats(r, b.gamma());
                get_floats(r, b.beta());
                get_floats(r, b.running_mean());
                get_floats(r, b.running_var());
                break;
            }
            case std::uint8_t(LayerKind::relu):
                net.template add<ReLU<T>>();
                break;
            case skip_record:
            {
                const auto mode = r.get<std::uint32_t>();
                if (mode > 2 || i + 1 != count)
                    throw FormatError(FormatError::Kind::malformed, "layer " + std::to_string(i) + ": invalid skip record");
                net.set_residual(Residual(mode));
                break;
            }
            default:
                throw FormatError(FormatError::Kind::malformed,
                                  "layer " + std::to_string(i) + ": unknown layer kind " + std::to_string(kind));
            }
        }
        return net;
    }

    template class Network<float>;
    template class Network<double>;
    template Network<double> Network<float>::convert<double>() const;
    template Network<float> Network<double>::convert<float>() const;
    template Network<float> Network<float>::convert<float>() const;
    template Network<double> Network<double>::convert<double>() const;
    template void adam_step(const std::vector<ParamView<float>> &, AdamState<float> &);
    template void adam_step(const std::vector<ParamView<double>> &, AdamState<double> &);
    template void write_network(std::ostream &, const Network<float> &);
    template void write_network(std::ostream &, const Network<double> &);
    template Network<float> read_network(std::istream &);
    template Network<double> read_network(std::istream &);
}
