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

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace channelnet::nn
{
    /// (batch, channels, height, width)
    struct Shape4
    {
        std::size_t n = 0, c = 0, h = 0, w = 0;

        std::size_t numel() const noexcept { return n * c * h * w; }
        std::size_t plane() const noexcept { return h * w; }
        bool operator==(const Shape4 &) const = default;
        std::string str() const
        {
            return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
        }
    };

    /// Storage aligned to the widest vector width, so reductions do not depend on where the heap put it.
    template <typename T>
    using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

    /// Dense NCHW tensor, row-major.
    template <typename T>
    class Tensor4
    {
    public:
        Tensor4() = default;
        explicit Tensor4(Shape4 shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}
        Tensor4(Shape4 shape, const std::vector<T> &data) : shape_(shape), data_(data.begin(), data.end())
        {
            if (data_.size() != shape_.numel())
                throw std::invalid_argument("Tensor4: data length " + std::to_string(data_.size()) +
                                            " does not match shape " + shape_.str());
        }

        const Shape4 &shape() const noexcept { return shape_; }
        std::size_t size() const noexcept { return data_.size(); }
        bool empty() const noexcept { return data_.empty(); }

        T *data() noexcept { return data_.data(); }
        const T *data() const noexcept { return data_.data(); }
        std::span<T> span() noexcept { return data_; }
        std::span<const T> span() const noexcept { return data_; }
        std::vector<T> vector() const { return {data_.begin(), data_.end()}; }

        T &operator[](std::size_t idx) noexcept { return data_[idx]; }
        const T &operator[](std::size_t idx) const noexcept { return data_[idx]; }

        std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept
        {
            return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
        }
        T &at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept { return data_[offset(n, c, y, x)]; }
        const T &at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept
        {
            return data_[offset(n, c, y, x)];
        }

        /// Pointer to the C x H x W block of batch item n.
        T *item(std::size_t n) noexcept { return data_.data() + n * shape_.c * shape_.plane(); }
        const T *item(std::size_t n) const noexcept { return data_.data() + n * shape_.c * shape_.plane(); }

        void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

        template <typename U>
        Tensor4<U> cast() const
        {
            Tensor4<U> out(shape_);
            std::copy(data_.begin(), data_.end(), out.data());
            return out;
        }

        bool operator==(const Tensor4 &) const = default;

    private:
        Shape4 shape_;
        AlignedVector<T> data_;
    };
}
