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

// Reference implementations shared by the unit and acceptance tests. Deliberately naive.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "channelnet/nn/layers.hpp"

namespace channelnet::testing
{
    using nn::Conv2d;
    using nn::Shape4;
    using nn::Tensor4;

    // J0(x) = (1/pi) int_0^pi cos(x sin t) dt, midpoint rule; independent of std::cyl_bessel_j
    inline double bessel_j0_quadrature(double x)
    {
        constexpr int n = 4000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
        {
            const double t = (i + 0.5) * std::numbers::pi / n;
            acc += std::cos(x * std::sin(t));
        }
        return acc / n;
    }

    template <typename T = double>
    Tensor4<T> random_tensor(Shape4 s, std::mt19937_64 &rng, double scale = 1.0)
    {
        std::normal_distribution<double> g(0.0, scale);
        Tensor4<T> t(s);
        for (auto &x : t.span())
            x = T(g(rng));
        return t;
    }

    inline void randomize(Conv2d<double> &conv, std::mt19937_64 &rng, double scale = 0.3)
    {
        std::normal_distribution<double> g(0.0, scale);
        for (auto &w : conv.weight())
            w = g(rng);
        for (auto &b : conv.bias())
            b = g(rng);
    }

    // Six nested loops, zero padding, cross-correlation.
    inline Tensor4<double> brute_conv(const Tensor4<double> &x, const Conv2d<double> &conv)
    {
        const auto s = x.shape();
        const std::size_t kh = conv.kernel_h(), kw = conv.kernel_w(), in = conv.in_channels(), out = conv.out_channels();
        const long ph = long(kh / 2), pw = long(kw / 2);
        Tensor4<double> y({s.n, out, s.h, s.w});
        for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t o = 0; o < out; ++o)
                for (std::size_t r = 0; r < s.h; ++r)
                    for (std::size_t c = 0; c < s.w; ++c)
                    {
                        double acc = conv.bias()[o];
                        for (std::size_t i = 0; i < in; ++i)
                            for (std::size_t a = 0; a < kh; ++a)
                                for (std::size_t b = 0; b < kw; ++b)
                                {
                                    const long rr = long(r) + long(a) - ph, cc = long(c) + long(b) - pw;
                                    if (rr < 0 || cc < 0 || rr >= long(s.h) || cc >= long(s.w))
                                        continue;
                                    acc += conv.weight()[((o * in + i) * kh + a) * kw + b] * x.at(n, i, std::size_t(rr), std::size_t(cc));
                                }
                        y.at(n, o, r, c) = acc;
                    }
        return y;
    }

    // Gradients of sum(g .* conv(x)) by the same loops.
    struct BruteGrads
    {
        Tensor4<double> gx;
        std::vector<double> gw, gb;
    };

    inline BruteGrads brute_conv_grads(const Tensor4<double> &x, const Conv2d<double> &conv, const Tensor4<double> &g)
    {
        const auto s = x.shape();
        const std::size_t kh = conv.kernel_h(), kw = conv.kernel_w(), in = conv.in_channels(), out = conv.out_channels();
        const long ph = long(kh / 2), pw = long(kw / 2);
        BruteGrads r{Tensor4<double>(s), std::vector<double>(conv.weight().size(), 0.0), std::vector<double>(out, 0.0)};
        for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t o = 0; o < out; ++o)
                for (std::size_t y = 0; y < s.h; ++y)
                    for (std::size_t c = 0; c < s.w; ++c)
                    {
                        const double go = g.at(n, o, y, c);
                        r.gb[o] += go;
                        for (std::size_t i = 0; i < in; ++i)
                            for (std::size_t a = 0; a < kh; ++a)
                                for (std::size_t b = 0; b < kw; ++b)
                                {
                                    const long yy = long(y) + long(a) - ph, cc = long(c) + long(b) - pw;
                                    if (yy < 0 || cc < 0 || yy >= long(s.h) || cc >= long(s.w))
                                        continue;
                                    const std::size_t wi = ((o * in + i) * kh + a) * kw + b;
                                    r.gw[wi] += go * x.at(n, i, std::size_t(yy), std::size_t(cc));
                                    r.gx.at(n, i, std::size_t(yy), std::size_t(cc)) += go * conv.weight()[wi];
                                }
                    }
        return r;
    }
}
