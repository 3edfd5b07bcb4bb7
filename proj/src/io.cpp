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

#include "channelnet/io.hpp"

#include <fstream>

#include "channelnet/binary_io.hpp"

namespace channelnet
{
    namespace
    {
        std::ofstream open_out(const std::filesystem::path &path)
        {
            std::ofstream os(path, std::ios::binary | std::ios::trunc);
            if (!os)
                throw std::runtime_error("cannot open '" + path.string() + "' for writing");
            return os;
        }

        std::ifstream open_in(const std::filesystem::path &path)
        {
            std::ifstream is(path, std::ios::binary);
            if (!is)
                throw std::runtime_error("cannot open '" + path.string() + "' for reading");
            return is;
        }

        void put_complex(std::ostream &os, cdouble z)
        {
            binary::put<float>(os, float(z.real()));
            binary::put<float>(os, float(z.imag()));
        }

        cdouble get_complex(binary::Reader &r)
        {
            const float re = r.get<float>();
            const float im = r.get<float>();
            return {double(re), double(im)};
        }
    }

    void write_dataset(std::ostream &os, const OfdmGridSpec &spec, const std::vector<ChannelGrid> &grids)
    {
        binary::put_magic(os, "CGRD");
        binary::put<std::uint32_t>(os, cgrd_version);
        binary::put<std::uint32_t>(os, std::uint32_t(spec.n_subcarriers));
        binary::put<std::uint32_t>(os, std::uint32_t(spec.n_timeslots));
        binary::put<std::uint64_t>(os, grids.size());
        for (const auto &g : grids)
        {
            if (g.spec.n_subcarriers != spec.n_subcarriers || g.spec.n_timeslots != spec.n_timeslots)
                throw std::invalid_argument("write_dataset: grid shape differs from dataset spec");
            for (std::size_t i = 0; i < spec.n_subcarriers; ++i)
                for (std::size_t k = 0; k < spec.n_timeslots; ++k)
                    put_complex(os, g(i, k));
        }
        if (!os)
            throw std::runtime_error("write_dataset: stream error");
    }

    std::vector<ChannelGrid> read_dataset(std::istream &is, OfdmGridSpec spec)
    {
        binary::Reader r(is);
        r.set_context("CGRD header");
        r.expect_magic("CGRD");
        r.expect_version(cgrd_version);
        spec.n_subcarriers = r.get<std::uint32_t>();
        spec.n_timeslots = r.get<std::uint32_t>();
        const auto count = r.get<std::uint64_t>();
        if (spec.n_subcarriers == 0 || spec.n_timeslots == 0)
            throw FormatError(FormatError::Kind::malformed, "CGRD: empty grid dimensions");
        std::vector<ChannelGrid> grids;
        grids.reserve(std::size_t(std::min<std::uint64_t>(count, 1u << 20)));
        for (std::uint64_t g = 0; g < count; ++g)
        {
            r.set_context("grid " + std::to_string(g));
            CMatrix m(Eigen::Index(spec.n_subcarriers), Eigen::Index(spec.n_timeslots));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index k = 0; k < m.cols(); ++k)
                    m(i, k) = get_complex(r);
            grids.emplace_back(spec, std::move(m));
        }
        return grids;
    }

    void write_dataset(const std::filesystem::path &path, const OfdmGridSpec &spec, const std::vector<ChannelGrid> &grids)
    {
        auto os = open_out(path);
        write_dataset(os, spec, grids);
    }

    std::vector<ChannelGrid> read_dataset(const std::filesystem::path &path, OfdmGridSpec spec)
    {
        auto is = open_in(path);
        return read_dataset(is, spec);
    }

    void write_correlation(std::ostream &os, const CorrelationModel &model)
    {
        binary::put_magic(os, "CORR");
        binary::put<std::uint32_t>(os, corr_version);
        binary::put<std::uint32_t>(os, std::uint32_t(model.r_dp.rows()));
        binary::put<std::uint32_t>(os, std::uint32_t(model.r_dp.cols()));
        binary::put<std::uint8_t>(os, std::uint8_t(model.source));
        for (Eigen::Index a = 0; a < model.r_dp.rows(); ++a)
            for (Eigen::Index b = 0; b < model.r_dp.cols(); ++b)
                put_complex(os, model.r_dp(a, b));
        for (Eigen::Index a = 0; a < model.r_pp.rows(); ++a)
            for (Eigen::Index b = 0; b < model.r_pp.cols(); ++b)
                put_complex(os, model.r_pp(a, b));
        if (!os)
            throw std::runtime_error("write_correlation: stream error");
    }

    CorrelationModel read_correlation(std::istream &is)
    {
        binary::Reader r(is);
        r.set_context("CORR header");
        r.expect_magic("CORR");
        r.expect_version(corr_version);
        const auto n_l = r.get<std::uint32_t>();
        const auto n_p = r.get<std::uint32_t>();
        const auto source = r.get<std::uint8_t>();
        if (source > 2)
            throw FormatError(FormatError::Kind::malformed, "CORR: unknown source tag");
        CorrelationModel model{CMatrix(n_l, n_p), CMatrix(n_p, n_p), CorrelationSource(source)};
        r.set_context("r_dp");
        for (Eigen::Index a = 0; a < model.r_dp.rows(); ++a)
            for (Eigen::Index b = 0; b < model.r_dp.cols(); ++b)
                model.r_dp(a, b) = get_complex(r);
        r.set_context("r_pp");
        for (Eigen::Index a = 0; a < model.r_pp.rows(); ++a)
            for (Eigen::Index b = 0; b < model.r_pp.cols(); ++b)
                model.r_pp(a, b) = get_complex(r);
        return model;
    }

    void write_correlation(const std::filesystem::path &path, const CorrelationModel &model)
    {
        auto os = open_out(path);
        write_correlation(os, model);
    }

    CorrelationModel read_correlation(const std::filesystem::path &path)
    {
        auto is = open_in(path);
        return read_correlation(is);
    }
}
