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

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "channelnet/common.hpp"

// Little-endian primitive encoding shared by the CGRD, CORR, CNET and CHNT formats.
namespace channelnet::binary
{
    static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

    template <typename T>
    void put(std::ostream &os, T value)
    {
        os.write(reinterpret_cast<const char *>(&value), sizeof(T));
    }

    inline void put_magic(std::ostream &os, std::string_view magic)
    {
        os.write(magic.data(), std::streamsize(magic.size()));
    }

    /// Reads primitives and reports truncation with a caller-supplied context label.
    class Reader
    {
    public:
        explicit Reader(std::istream &is) : is_(is) {}

        void set_context(std::string context) { context_ = std::move(context); }

        template <typename T>
        T get()
        {
            T value{};
            read_raw(reinterpret_cast<char *>(&value), sizeof(T));
            return value;
        }

        void read_raw(char *dst, std::size_t n)
        {
            is_.read(dst, std::streamsize(n));
            if (std::size_t(is_.gcount()) != n)
                throw FormatError(FormatError::Kind::truncated,
                                  "file truncated" + (context_.empty() ? std::string() : " in " + context_));
        }

        void expect_magic(std::string_view magic)
        {
            char buf[8] = {};
            is_.read(buf, std::streamsize(magic.size()));
            if (std::size_t(is_.gcount()) != magic.size() || std::string_view(buf, magic.size()) != magic)
                throw FormatError(FormatError::Kind::bad_magic, "bad magic: expected '" + std::string(magic) + "'");
        }

        void expect_version(std::uint32_t expected)
        {
            const auto v = get<std::uint32_t>();
            if (v != expected)
                throw FormatError(FormatError::Kind::version_mismatch, "unsupported version " + std::to_string(v) +
                                                                           " (expected " + std::to_string(expected) + ")");
        }

    private:
        std::istream &is_;
        std::string context_;
    };
}
