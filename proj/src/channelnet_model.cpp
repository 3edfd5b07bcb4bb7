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

#include "channelnet/channelnet_model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "channelnet/binary_io.hpp"

namespace channelnet
{
    using nn::BatchNorm2d;
    using nn::Conv2d;
    using nn::ReLU;
    using nn::Residual;

    nn::Network<float> make_srcnn(std::uint64_t seed)
    {
        std::mt19937_64 rng(derive_seed(seed, 0x5C));
        nn::Network<float> net(Residual::add_input);
        net.add<Conv2d<float>>(1, 64, 9, 9).init_he(rng);
        net.add<ReLU<float>>();
        net.add<Conv2d<float>>(64, 32, 1, 1).init_he(rng);
        net.add<ReLU<float>>();
        net.add<Conv2d<float>>(32, 1, 5, 5); // zero: untrained SR passes the interpolation through
        return net;
    }

    nn::Network<float> make_dncnn(std::uint64_t seed, std::size_t depth, std::size_t features)
    {
        if (depth < 2)
            throw std::invalid_argument("make_dncnn: depth must be at least 2");
        std::mt19937_64 rng(derive_seed(seed, 0xD7));
        nn::Network<float> net(Residual::subtract_from_input);
        net.add<Conv2d<float>>(1, features, 3, 3).init_he(rng);
        net.add<ReLU<float>>();
        for (std::size_t l = 0; l + 2 < depth; ++l)
        {
            net.add<Conv2d<float>>(features, features, 3, 3).init_he(rng);
            net.add<BatchNorm2d<float>>(features);
            net.add<ReLU<float>>();
        }
        net.add<Conv2d<float>>(features, 1, 3, 3); // zero: untrained residual is 0
        return net;
    }

    ChannelNetModel make_channelnet(const PilotPattern &pattern, std::uint64_t seed, float trained_snr_db)
    {
        return {make_srcnn(seed), make_dncnn(seed), pattern.spec(), pattern.hash(), trained_snr_db, {seed, ""}};
    }

    nn::Tensor4<float> grids_to_planes(std::span<const CMatrix> grids)
    {
        if (grids.empty())
            return {};
        const std::size_t h = std::size_t(grids[0].rows()), w = std::size_t(grids[0].cols());
        const std::size_t count = grids.size();
        nn::Tensor4<float> planes({2 * count, 1, h, w});
        for (std::size_t g = 0; g < count; ++g)
        {
            if (std::size_t(grids[g].rows()) != h || std::size_t(grids[g].cols()) != w)
                throw std::invalid_argument("grids_to_planes: grids differ in shape");
            float *re = planes.item(g);
            float *im = planes.item(count + g);
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t k = 0; k < w; ++k)
                {
                    const cdouble z = grids[g](Eigen::Index(i), Eigen::Index(k));
                    re[i * w + k] = float(z.real());
                    im[i * w + k] = float(z.imag());
                }
        }
        return planes;
    }

    std::vector<CMatrix> planes_to_grids(const nn::Tensor4<float> &planes)
    {
        const auto &s = planes.shape();
        if (s.c != 1 || s.n % 2 != 0)
            throw std::invalid_argument("planes_to_grids: expected (2 * count, 1, H, W) planes");
        const std::size_t count = s.n / 2;
        std::vector<CMatrix> grids;
        grids.reserve(count);
        for (std::size_t g = 0; g < count; ++g)
        {
            CMatrix m(Eigen::Index(s.h), Eigen::Index(s.w));
            const float *re = planes.item(g);
            const float *im = planes.item(count + g);
            for (std::size_t i = 0; i < s.h; ++i)
                for (std::size_t k = 0; k < s.w; ++k)
                    m(Eigen::Index(i), Eigen::Index(k)) = {double(re[i * s.w + k]), double(im[i * s.w + k])};
            grids.push_back(std::move(m));
        }
        return grids;
    }

    nn::Tensor4<float> predict_chunked(const nn::Network<float> &net, const nn::Tensor4<float> &planes, std::size_t chunk)
    {
        const auto &s = planes.shape();
        nn::Tensor4<float> out(s);
        const std::size_t per = s.c * s.plane();
        for (std::size_t start = 0; start < s.n; start += chunk)
        {
            const std::size_t count = std::min(chunk, s.n - start);
            nn::Tensor4<float> part({count, s.c, s.h, s.w},
                                    std::vector<float>(planes.item(start), planes.item(start) + count * per));
            const auto y = net.predict(part);
            if (y.shape() != part.shape())
                throw std::invalid_argument("predict_chunked: network changes the plane shape");
            std::copy(y.data(), y.data() + y.size(), out.item(start));
        }
        return out;
    }

    namespace
    {
        void check_observations(const ChannelNetModel &model, std::span<const PilotObservation> obs)
        {
            for (const auto &o : obs)
            {
                if (o.pattern.hash() != model.pattern_hash)
                    throw std::invalid_argument("ChannelNet estimate: pilot pattern differs from the one the model was trained with");
                if (!(o.pattern.spec().n_subcarriers == model.spec.n_subcarriers &&
                      o.pattern.spec().n_timeslots == model.spec.n_timeslots))
                    throw std::invalid_argument("ChannelNet estimate: grid shape differs from the model's");
            }
        }

        std::vector<ChannelGrid> run_pipeline(const ChannelNetModel &model, std::span<const PilotObservation> obs,
                                              bool with_ir)
        {
            check_observations(model, obs);
            std::vector<ChannelGrid> out;
            constexpr std::size_t batch = 32;
            for (std::size_t start = 0; start < obs.size(); start += batch)
            {
                const std::size_t count = std::min(batch, obs.size() - start);
                std::vector<CMatrix> interp;
                for (std::size_t j = 0; j < count; ++j)
                    interp.push_back(interpolate_pilots(obs[start + j], model.spec));
                auto planes = model.sr.predict(grids_to_planes(interp));
                if (with_ir)
                    planes = model.ir.predict(planes);
                for (auto &m : planes_to_grids(planes))
                    out.emplace_back(model.spec, std::move(m));
            }
            return out;
        }
    }

    ChannelGrid estimate(const ChannelNetModel &model, const PilotObservation &obs)
    {
        return std::move(run_pipeline(model, std::span(&obs, 1), true).front());
    }

    std::vector<ChannelGrid> estimate_batch(const ChannelNetModel &model, std::span<const PilotObservation> obs)
    {
        return run_pipeline(model, obs, true);
    }

    std::vector<ChannelGrid> estimate_batch_sr_only(const ChannelNetModel &model, std::span<const PilotObservation> obs)
    {
        return run_pipeline(model, obs, false);
    }

    void save_model(std::ostream &os, const ChannelNetModel &model)
    {
        binary::put_magic(os, "CHNT");
        binary::put<std::uint32_t>(os, chnt_version);
        binary::put<std::uint32_t>(os, std::uint32_t(model.spec.n_subcarriers));
        binary::put<std::uint32_t>(os, std::uint32_t(model.spec.n_timeslots));
        binary::put<std::uint64_t>(os, model.pattern_hash);
        binary::put<float>(os, model.trained_snr_db);
        binary::put<std::uint64_t>(os, model.metadata.seed);
        binary::put<std::uint32_t>(os, std::uint32_t(model.metadata.dataset_id.size()));
        os.write(model.metadata.dataset_id.data(), std::streamsize(model.metadata.dataset_id.size()));
        nn::write_network(os, model.sr);
        nn::write_network(os, model.ir);
        if (!os)
            throw std::runtime_error("save_model: stream error");
    }

    ChannelNetModel load_model(std::istream &is)
    {
        binary::Reader r(is);
        r.set_context("CHNT header");
        r.expect_magic("CHNT");
        r.expect_version(chnt_version);
        ChannelNetModel model;
        model.spec.n_subcarriers = r.get<std::uint32_t>();
        model.spec.n_timeslots = r.get<std::uint32_t>();
        model.pattern_hash = r.get<std::uint64_t>();
        model.trained_snr_db = r.get<float>();
        model.metadata.seed = r.get<std::uint64_t>();
        const auto len = r.get<std::uint32_t>();
        if (len > (1u << 16))
            throw FormatError(FormatError::Kind::malformed, "CHNT: dataset id too long");
        model.metadata.dataset_id.resize(len);
        r.read_raw(model.metadata.dataset_id.data(), len);

        auto read_part = [&is](const char *label) {
            try
            {
                return nn::read_network<float>(is);
            }
            catch (const FormatError &e)
            {
                throw FormatError(e.kind(), std::string(label) + " network: " + e.what());
            }
        };
        model.sr = read_part("SR");
        model.ir = read_part("IR");
        return model;
    }

    void save_model(const std::filesystem::path &path, const ChannelNetModel &model)
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        save_model(os, model);
    }

    ChannelNetModel load_model(const std::filesystem::path &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw std::runtime_error("cannot open '" + path.string() + "' for reading");
        return load_model(is);
    }

    void SnrSwitchPolicy::validate() const
    {
        if (entries.empty())
            throw std::invalid_argument("SnrSwitchPolicy: no entries");
        for (std::size_t j = 1; j < entries.size(); ++j)
            if (!(entries[j].upper_bound_db > entries[j - 1].upper_bound_db))
                throw std::invalid_argument("SnrSwitchPolicy: bounds must be strictly increasing");
    }

    const std::string &SnrSwitchPolicy::select(double snr_db) const
    {
        validate();
        for (const auto &e : entries)
            if (snr_db <= e.upper_bound_db)
                return e.model;
        std::ostringstream msg;
        msg << "SNR " << snr_db << " dB is above every policy bound; using '" << entries.back().model
            << "' outside its trained range";
        warn(msg.str());
        return entries.back().model;
    }

    void write_policy(std::ostream &os, const SnrSwitchPolicy &policy)
    {
        policy.validate();
        for (const auto &e : policy.entries)
        {
            if (std::isinf(e.upper_bound_db))
                os << "inf";
            else
                os << std::setprecision(17) << e.upper_bound_db;
            os << ',' << e.model << '\n';
        }
    }

    SnrSwitchPolicy read_policy(std::istream &is)
    {
        SnrSwitchPolicy policy;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line))
        {
            ++line_no;
            if (line.empty() || line[0] == '#')
                continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos || comma + 1 >= line.size())
                throw FormatError(FormatError::Kind::malformed,
                                  "policy line " + std::to_string(line_no) + ": expected 'upper_bound_db,model_path'");
            double bound = 0.0;
            try
            {
                std::size_t used = 0;
                bound = std::stod(line.substr(0, comma), &used);
                if (used != comma)
                    throw std::invalid_argument("trailing characters");
            }
            catch (const std::exception &)
            {
                throw FormatError(FormatError::Kind::malformed, "policy line " + std::to_string(line_no) + ": bad bound");
            }
            policy.entries.push_back({bound, line.substr(comma + 1)});
        }
        policy.validate();
        return policy;
    }
}
