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

#include "channelnet/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace channelnet::nn
{
    namespace
    {
        template <typename T>
        using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        template <typename T>
        using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

        // Valid output range of one tap: rows [y0, y1), columns [x0, x1) read (y + dy, x + dx).
        struct TapRange
        {
            long off;
            std::size_t y0, y1, x0, x1;
            bool empty() const noexcept { return y1 <= y0 || x1 <= x0; }
        };

        inline TapRange tap_range(long dy, long dx, std::size_t h, std::size_t w)
        {
            TapRange r;
            r.off = dy * long(w) + dx;
            r.y0 = dy < 0 ? std::min(h, std::size_t(-dy)) : 0;
            r.y1 = dy > 0 ? h - std::min(h, std::size_t(dy)) : h;
            r.x0 = dx < 0 ? std::min(w, std::size_t(-dx)) : 0;
            r.x1 = dx > 0 ? w - std::min(w, std::size_t(dx)) : w;
            return r;
        }

        // Rows indexed (c, ky, kx), columns (y, x): cols[(c,t), p] = image[c, p + sign * d_t], zero outside.
        // Each tap is one contiguous shifted copy; the columns that wrapped across a row edge are
        // zeroed afterwards.
        template <typename T>
        void im2col(const T *image, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                    T *cols, long sign = 1)
        {
            const long ph = long(kh / 2), pw = long(kw / 2);
            const std::size_t hw = h * w;
            for (std::size_t c = 0; c < channels; ++c)
            {
                const T *src = image + c * hw;
                for (std::size_t ky = 0; ky < kh; ++ky)
                    for (std::size_t kx = 0; kx < kw; ++kx)
                    {
                        T *row = cols + ((c * kh + ky) * kw + kx) * hw;
                        const auto r = tap_range(sign * (long(ky) - ph), sign * (long(kx) - pw), h, w);
                        if (r.empty())
                        {
                            std::fill(row, row + hw, T(0));
                            continue;
                        }
                        const std::size_t p0 = r.y0 * w + r.x0, p1 = (r.y1 - 1) * w + r.x1;
                        std::fill(row, row + p0, T(0));
                        std::copy(src + long(p0) + r.off, src + long(p1) + r.off, row + p0);
                        std::fill(row + p1, row + hw, T(0));
                        if (r.x0 > 0 || r.x1 < w)
                            for (std::size_t y = r.y0; y < r.y1; ++y)
                            {
                                T *line = row + y * w;
                                std::fill(line, line + r.x0, T(0));
                                std::fill(line + r.x1, line + w, T(0));
                            }
                    }
            }
        }

        // Adjoint of im2col: image[c, p + sign * d_t] += cols[(c,t), p]. `cols` is scratch; its
        // entries outside each tap's valid range are overwritten with zeros.
        template <typename T>
        void col2im_add(T *cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                        T *image, long sign = 1)
        {
            using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
            const long ph = long(kh / 2), pw = long(kw / 2);
            const std::size_t hw = h * w;
            for (std::size_t c = 0; c < channels; ++c)
            {
                T *dst = image + c * hw;
                for (std::size_t ky = 0; ky < kh; ++ky)
                    for (std::size_t kx = 0; kx < kw; ++kx)
                    {
                        T *row = cols + ((c * kh + ky) * kw + kx) * hw;
                        const auto r = tap_range(sign * (long(ky) - ph), sign * (long(kx) - pw), h, w);
                        if (r.empty())
                            continue;
                        if (r.x0 > 0 || r.x1 < w)
                            for (std::size_t y = r.y0; y < r.y1; ++y)
                            {
                                T *line = row + y * w;
                                std::fill(line, line + r.x0, T(0));
                                std::fill(line + r.x1, line + w, T(0));
                            }
                        const std::size_t p0 = r.y0 * w + r.x0, p1 = (r.y1 - 1) * w + r.x1;
                        Eigen::Map<Arr>(dst + long(p0) + r.off, Eigen::Index(p1 - p0)) +=
                            Eigen::Map<const Arr>(row + p0, Eigen::Index(p1 - p0));
                    }
            }
        }

        // (out, in, taps) -> (out * taps, in)
        template <typename T>
        RowMat<T> tap_major(const std::vector<T> &weight, std::size_t out, std::size_t in, std::size_t taps)
        {
            RowMat<T> m(Eigen::Index(out * taps), Eigen::Index(in));
            for (std::size_t o = 0; o < out; ++o)
                for (std::size_t c = 0; c < in; ++c)
                    for (std::size_t t = 0; t < taps; ++t)
                        m(Eigen::Index(o * taps + t), Eigen::Index(c)) = weight[(o * in + c) * taps + t];
            return m;
        }
    }

    // ---- Conv2d ----------------------------------------------------------

    template <typename T>
    Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h, std::size_t kernel_w)
        : in_(in_channels), out_(out_channels), kh_(kernel_h), kw_(kernel_w),
          weight_(out_channels * in_channels * kernel_h * kernel_w, T(0)), bias_(out_channels, T(0)),
          weight_grad_(weight_.size(), T(0)), bias_grad_(out_channels, T(0))
    {
        if (in_ == 0 || out_ == 0)
            throw std::invalid_argument("Conv2d: channel counts must be positive");
        if (kh_ % 2 == 0 || kw_ % 2 == 0)
            throw std::invalid_argument("Conv2d: kernel sizes must be odd for same padding");
    }

    template <typename T>
    void Conv2d<T>::init_he(std::mt19937_64 &rng)
    {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / double(in_ * kh_ * kw_)));
        for (auto &w : weight_)
            w = T(normal(rng));
        std::fill(bias_.begin(), bias_.end(), T(0));
    }

    // Channel-reducing kernels take the output-side route: multiply first, then shift-add the
    // out*taps partial planes, so the patch matrix never holds in*taps rows.
    template <typename T>
    Tensor4<T> Conv2d<T>::forward(const Tensor4<T> &x, Mode, bool keep_cache)
    {
        const auto &s = x.shape();
        if (s.c != in_)
            throw std::invalid_argument("Conv2d: input has " + std::to_string(s.c) + " channels, layer expects " +
                                        std::to_string(in_));
        const std::size_t hw = s.plane(), taps = kh_ * kw_, k = in_ * taps;
        Tensor4<T> y({s.n, out_, s.h, s.w});
        const Eigen::Map<const Vec<T>> b(bias_.data(), Eigen::Index(out_));
        const bool pointwise = taps == 1;
        const bool output_side = !pointwise && out_ < in_;
        if (output_side)
        {
            const RowMat<T> wt = tap_major(weight_, out_, in_, taps);
            RowMat<T> z(Eigen::Index(out_ * taps), Eigen::Index(hw));
            for (std::size_t n = 0; n < s.n; ++n)
            {
                const Eigen::Map<const RowMat<T>> xm(x.item(n), Eigen::Index(in_), Eigen::Index(hw));
                z.noalias() = wt * xm;
                col2im_add(z.data(), out_, s.h, s.w, kh_, kw_, y.item(n), -1);
                Eigen::Map<RowMat<T>> out(y.item(n), Eigen::Index(out_), Eigen::Index(hw));
                out.colwise() += b;
            }
        }
        else
        {
            const Eigen::Map<const RowMat<T>> wm(weight_.data(), Eigen::Index(out_), Eigen::Index(k));
            AlignedVector<T> cols(pointwise ? 0 : k * hw);
            for (std::size_t n = 0; n < s.n; ++n)
            {
                const T *src = x.item(n);
                if (!pointwise)
                {
                    im2col(src, in_, s.h, s.w, kh_, kw_, cols.data());
                    src = cols.data();
                }
                const Eigen::Map<const RowMat<T>> cm(src, Eigen::Index(k), Eigen::Index(hw));
                Eigen::Map<RowMat<T>> out(y.item(n), Eigen::Index(out_), Eigen::Index(hw));
                out.noalias() = wm * cm;
                out.colwise() += b;
            }
        }
        if (keep_cache)
            cache_ = x;
        return y;
    }

    template <typename T>
    Tensor4<T> Conv2d<T>::backward(const Tensor4<T> &grad_out)
    {
        if (!cache_)
            throw std::logic_error("Conv2d::backward called without a cached forward pass");
        const Tensor4<T> &x = *cache_;
        const auto &s = x.shape();
        if (grad_out.shape() != Shape4{s.n, out_, s.h, s.w})
            throw std::invalid_argument("Conv2d::backward: gradient shape " + grad_out.shape().str() +
                                        " does not match forward output");
        const std::size_t hw = s.plane(), taps = kh_ * kw_, k = in_ * taps;
        Eigen::Map<Vec<T>> gb(bias_grad_.data(), Eigen::Index(out_));
        Tensor4<T> gx;
        if (input_grad_)
            gx = Tensor4<T>(s);
        const bool pointwise = taps == 1;
        const bool output_side = !pointwise && out_ < in_;

        if (output_side)
        {
            // gcols[(o,t), p] = g[o, p - d_t]
            const RowMat<T> wt = tap_major(weight_, out_, in_, taps);
            RowMat<T> gwt = RowMat<T>::Zero(Eigen::Index(out_ * taps), Eigen::Index(in_));
            RowMat<T> gcols(Eigen::Index(out_ * taps), Eigen::Index(hw));
            for (std::size_t n = 0; n < s.n; ++n)
            {
                const Eigen::Map<const RowMat<T>> go(grad_out.item(n), Eigen::Index(out_), Eigen::Index(hw));
                gb += go.rowwise().sum();
                im2col(grad_out.item(n), out_, s.h, s.w, kh_, kw_, gcols.data(), -1);
                const Eigen::Map<const RowMat<T>> xm(x.item(n), Eigen::Index(in_), Eigen::Index(hw));
                gwt.noalias() += gcols * xm.transpose();
                if (input_grad_)
                {
                    Eigen::Map<RowMat<T>> gxm(gx.item(n), Eigen::Index(in_), Eigen::Index(hw));
                    gxm.noalias() = wt.transpose() * gcols;
                }
            }
            for (std::size_t o = 0; o < out_; ++o)
                for (std::size_t c = 0; c < in_; ++c)
                    for (std::size_t t = 0; t < taps; ++t)
                        weight_grad_[(o * in_ + c) * taps + t] += gwt(Eigen::Index(o * taps + t), Eigen::Index(c));
            return gx;
        }

        const Eigen::Map<const RowMat<T>> wm(weight_.data(), Eigen::Index(out_), Eigen::Index(k));
        Eigen::Map<RowMat<T>> gw(weight_grad_.data(), Eigen::Index(out_), Eigen::Index(k));
        AlignedVector<T> cols(pointwise ? 0 : k * hw), gcols(pointwise || !input_grad_ ? 0 : k * hw);
        for (std::size_t n = 0; n < s.n; ++n)
        {
            const T *src = x.item(n);
            if (!pointwise)
            {
                im2col(src, in_, s.h, s.w, kh_, kw_, cols.data());
                src = cols.data();
            }
            const Eigen::Map<const RowMat<T>> cm(src, Eigen::Index(k), Eigen::Index(hw));
            const Eigen::Map<const RowMat<T>> go(grad_out.item(n), Eigen::Index(out_), Eigen::Index(hw));
            gw.noalias() += go * cm.transpose();
            gb += go.rowwise().sum();
            if (!input_grad_)
                continue;
            if (pointwise)
            {
                Eigen::Map<RowMat<T>> gxm(gx.item(n), Eigen::Index(k), Eigen::Index(hw));
                gxm.noalias() = wm.transpose() * go;
            }
            else
            {
                Eigen::Map<RowMat<T>> gc(gcols.data(), Eigen::Index(k), Eigen::Index(hw));
                gc.noalias() = wm.transpose() * go;
                col2im_add(gcols.data(), in_, s.h, s.w, kh_, kw_, gx.item(n));
            }
        }
        return gx;
    }

    template <typename T>
    std::vector<ParamView<T>> Conv2d<T>::parameters()
    {
        return {{weight_, weight_grad_}, {bias_, bias_grad_}};
    }

    template <typename T>
    void Conv2d<T>::zero_grad()
    {
        std::fill(weight_grad_.begin(), weight_grad_.end(), T(0));
        std::fill(bias_grad_.begin(), bias_grad_.end(), T(0));
    }

    template <typename T>
    std::unique_ptr<Layer<T>> Conv2d<T>::clone() const
    {
        auto copy = std::make_unique<Conv2d<T>>(*this);
        copy->cache_.reset();
        return copy;
    }

    // ---- BatchNorm2d -----------------------------------------------------

    template <typename T>
    BatchNorm2d<T>::BatchNorm2d(std::size_t channels, double epsilon, double momentum)
        : epsilon_(epsilon), momentum_(momentum), gamma_(channels, T(1)), beta_(channels, T(0)),
          running_mean_(channels, T(0)), running_var_(channels, T(1)), gamma_grad_(channels, T(0)),
          beta_grad_(channels, T(0))
    {
        if (channels == 0)
            throw std::invalid_argument("BatchNorm2d: channel count must be positive");
    }

    template <typename T>
    Tensor4<T> BatchNorm2d<T>::forward(const Tensor4<T> &x, Mode mode, bool keep_cache)
    {
        const auto &s = x.shape();
        if (s.c != channels())
            throw std::invalid_argument("BatchNorm2d: channel mismatch");
        const std::size_t hw = s.plane();
        Tensor4<T> y(s);
        Tensor4<T> x_hat = keep_cache ? Tensor4<T>(s) : Tensor4<T>();
        std::vector<double> inv_std(s.c);

        if (mode == Mode::train)
        {
            if (s.n < 2)
                throw std::invalid_argument("BatchNorm2d: train mode requires a batch of at least 2");
            const double m = double(s.n * hw);
            for (std::size_t c = 0; c < s.c; ++c)
            {
                double sum = 0.0;
                for (std::size_t n = 0; n < s.n; ++n)
                {
                    const T *p = x.item(n) + c * hw;
                    for (std::size_t j = 0; j < hw; ++j)
                        sum += double(p[j]);
                }
                const double mean = sum / m;
                double sq = 0.0;
                for (std::size_t n = 0; n < s.n; ++n)
                {
                    const T *p = x.item(n) + c * hw;
                    for (std::size_t j = 0; j < hw; ++j)
                    {
                        const double d = double(p[j]) - mean;
                        sq += d * d;
                    }
                }
                const double var = sq / m;
                inv_std[c] = 1.0 / std::sqrt(var + epsilon_);
                const double g = double(gamma_[c]), b = double(beta_[c]);
                for (std::size_t n = 0; n < s.n; ++n)
                {
                    const T *p = x.item(n) + c * hw;
                    T *q = y.item(n) + c * hw;
                    T *xh = keep_cache ? x_hat.item(n) + c * hw : nullptr;
                    for (std::size_t j = 0; j < hw; ++j)
                    {
                        const double v = (double(p[j]) - mean) * inv_std[c];
                        if (xh)
                            xh[j] = T(v);
                        q[j] = T(g * v + b);
                    }
                }
                running_mean_[c] = T(momentum_ * double(running_mean_[c]) + (1.0 - momentum_) * mean);
                running_var_[c] = T(momentum_ * double(running_var_[c]) + (1.0 - momentum_) * var * m / (m - 1.0));
            }
        }
        else
        {
            for (std::size_t c = 0; c < s.c; ++c)
            {
                inv_std[c] = 1.0 / std::sqrt(double(running_var_[c]) + epsilon_);
                const double mean = double(running_mean_[c]), g = double(gamma_[c]), b = double(beta_[c]);
                for (std::size_t n = 0; n < s.n; ++n)
                {
                    const T *p = x.item(n) + c * hw;
                    T *q = y.item(n) + c * hw;
                    T *xh = keep_cache ? x_hat.item(n) + c * hw : nullptr;
                    for (std::size_t j = 0; j < hw; ++j)
                    {
                        const double v = (double(p[j]) - mean) * inv_std[c];
                        if (xh)
                            xh[j] = T(v);
                        q[j] = T(g * v + b);
                    }
                }
            }
        }
        if (keep_cache)
        {
            x_hat_ = std::move(x_hat);
            inv_std_ = std::move(inv_std);
            cached_mode_ = mode;
        }
        return y;
    }

    template <typename T>
    Tensor4<T> BatchNorm2d<T>::backward(const Tensor4<T> &grad_out)
    {
        if (!x_hat_)
            throw std::logic_error("BatchNorm2d::backward called without a cached forward pass");
        const Tensor4<T> &xh = *x_hat_;
        const auto &s = xh.shape();
        if (grad_out.shape() != s)
            throw std::invalid_argument("BatchNorm2d::backward: gradient shape mismatch");
        const std::size_t hw = s.plane();
        const double m = double(s.n * hw);
        Tensor4<T> gx(s);
        for (std::size_t c = 0; c < s.c; ++c)
        {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t n = 0; n < s.n; ++n)
            {
                const T *g = grad_out.item(n) + c * hw;
                const T *v = xh.item(n) + c * hw;
                for (std::size_t j = 0; j < hw; ++j)
                {
                    sum_g += double(g[j]);
                    sum_gx += double(g[j]) * double(v[j]);
                }
            }
            gamma_grad_[c] += T(sum_gx);
            beta_grad_[c] += T(sum_g);
            const double gamma = double(gamma_[c]);
            const double scale = gamma * inv_std_[c];
            for (std::size_t n = 0; n < s.n; ++n)
            {
                const T *g = grad_out.item(n) + c * hw;
                const T *v = xh.item(n) + c * hw;
                T *out = gx.item(n) + c * hw;
                if (cached_mode_ == Mode::train)
                    for (std::size_t j = 0; j < hw; ++j)
                        out[j] = T(scale * (double(g[j]) - sum_g / m - double(v[j]) * sum_gx / m));
                else
                    for (std::size_t j = 0; j < hw; ++j)
                        out[j] = T(scale * double(g[j]));
            }
        }
        return gx;
    }

    template <typename T>
    std::vector<ParamView<T>> BatchNorm2d<T>::parameters()
    {
        return {{gamma_, gamma_grad_}, {beta_, beta_grad_}};
    }

    template <typename T>
    void BatchNorm2d<T>::zero_grad()
    {
        std::fill(gamma_grad_.begin(), gamma_grad_.end(), T(0));
        std::fill(beta_grad_.begin(), beta_grad_.end(), T(0));
    }

    template <typename T>
    void BatchNorm2d<T>::clear_cache()
    {
        x_hat_.reset();
        inv_std_.clear();
    }

    template <typename T>
    std::unique_ptr<Layer<T>> BatchNorm2d<T>::clone() const
    {
        auto copy = std::make_unique<BatchNorm2d<T>>(*this);
        copy->clear_cache();
        return copy;
    }

    // ---- ReLU ------------------------------------------------------------

    template <typename T>
    Tensor4<T> ReLU<T>::forward(const Tensor4<T> &x, Mode, bool keep_cache)
    {
        Tensor4<T> y(x.shape());
        for (std::size_t j = 0; j < x.size(); ++j)
            y[j] = x[j] > T(0) ? x[j] : T(0);
        if (keep_cache)
            output_ = y;
        return y;
    }

    template <typename T>
    Tensor4<T> ReLU<T>::backward(const Tensor4<T> &grad_out)
    {
        if (!output_)
            throw std::logic_error("ReLU::backward called without a cached forward pass");
        if (grad_out.shape() != output_->shape())
            throw std::invalid_argument("ReLU::backward: gradient shape mismatch");
        Tensor4<T> gx(grad_out.shape());
        for (std::size_t j = 0; j < gx.size(); ++j)
            gx[j] = (*output_)[j] > T(0) ? grad_out[j] : T(0);
        return gx;
    }

    // ---- loss ------------------------------------------------------------

    template <typename T>
    LossResult<T> mse_loss(const Tensor4<T> &pred, const Tensor4<T> &target)
    {
        if (pred.shape() != target.shape())
            throw std::invalid_argument("mse_loss: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
        if (pred.empty())
            throw std::invalid_argument("mse_loss: empty tensors");
        LossResult<T> r{0.0, Tensor4<T>(pred.shape())};
        const double inv_n = 1.0 / double(pred.size());
        for (std::size_t j = 0; j < pred.size(); ++j)
        {
            const double d = double(pred[j]) - double(target[j]);
            r.loss += d * d;
            r.grad[j] = T(2.0 * d * inv_n);
        }
        r.loss *= inv_n;
        return r;
    }

    template class Conv2d<float>;
    template class Conv2d<double>;
    template class BatchNorm2d<float>;
    template class BatchNorm2d<double>;
    template class ReLU<float>;
    template class ReLU<double>;
    template LossResult<float> mse_loss(const Tensor4<float> &, const Tensor4<float> &);
    template LossResult<double> mse_loss(const Tensor4<double> &, const Tensor4<double> &);
}
