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

#include <doctest.h>

#include <random>
#include <sstream>

#include "channelnet/training.hpp"

using namespace channelnet;
using nn::BatchNorm2d;
using nn::Conv2d;
using nn::LayerKind;

namespace
{
    void jitter(Conv2d<float> &conv, std::mt19937_64 &rng, double scale)
    {
        std::normal_distribution<double> g(0.0, scale);
        for (auto &w : conv.weight())
            w = float(g(rng));
        for (auto &b : conv.bias())
            b = float(g(rng));
    }

    // Gives the zero-initialized output layers some weight so the pipeline does something.
    ChannelNetModel perturbed_model(const PilotPattern &pattern, std::uint64_t seed)
    {
        auto model = make_channelnet(pattern, seed, 12.0f);
        model.ir = make_dncnn(seed, 4, 8);
        std::mt19937_64 rng(seed);
        jitter(static_cast<Conv2d<float> &>(model.sr.layer(4)), rng, 0.01);
        jitter(static_cast<Conv2d<float> &>(model.ir.layer(model.ir.size() - 1)), rng, 0.02);
        return model;
    }

    std::vector<PilotObservation> observations(const PilotPattern &pattern, std::size_t n, double snr, std::uint64_t seed)
    {
        std::vector<PilotObservation> obs;
        for (std::size_t g = 0; g < n; ++g)
        {
            const auto h = generate_channel_grid(ChannelConfig{}, derive_seed(seed, 1, g));
            obs.push_back(ls_estimate(h, pattern, unit_pilot_symbols(pattern), NoiseSpec{snr}, derive_seed(seed, 2, g)));
        }
        return obs;
    }

    std::vector<ChannelGrid> grids(std::size_t n, std::uint64_t seed, const ChannelConfig &cfg = {})
    {
        std::vector<ChannelGrid> out;
        for (std::size_t g = 0; g < n; ++g)
            out.push_back(generate_channel_grid(cfg, derive_seed(seed, 1, g)));
        return out;
    }

    std::string saved(const ChannelNetModel &m)
    {
        std::ostringstream os;
        save_model(os, m);
        return os.str();
    }
}

TEST_CASE("architecture audit")
{
    const auto sr = make_srcnn(1);
    REQUIRE(sr.size() == 5);
    CHECK(sr.residual() == nn::Residual::add_input);
    const std::size_t sr_geom[3][3] = {{64, 9, 9}, {32, 1, 1}, {1, 5, 5}};
    std::size_t convs = 0;
    for (std::size_t l = 0; l < sr.size(); ++l)
    {
        if (sr.layer(l).kind() != LayerKind::conv)
        {
            CHECK(sr.layer(l).kind() == LayerKind::relu);
            continue;
        }
        const auto &c = static_cast<const Conv2d<float> &>(sr.layer(l));
        CHECK(c.out_channels() == sr_geom[convs][0]);
        CHECK(c.kernel_h() == sr_geom[convs][1]);
        CHECK(c.kernel_w() == sr_geom[convs][2]);
        ++convs;
    }
    CHECK(convs == 3);
    CHECK(static_cast<const Conv2d<float> &>(sr.layer(0)).in_channels() == 1);

    const auto dn = make_dncnn(1);
    CHECK(dn.residual() == nn::Residual::subtract_from_input);
    std::vector<std::size_t> bn_after; // conv ordinal (1-based) followed by batch norm
    convs = 0;
    for (std::size_t l = 0; l < dn.size(); ++l)
    {
        if (dn.layer(l).kind() == LayerKind::conv)
        {
            ++convs;
            const auto &c = static_cast<const Conv2d<float> &>(dn.layer(l));
            CHECK(c.kernel_h() == 3);
            CHECK(c.kernel_w() == 3);
            CHECK(c.in_channels() == (convs == 1 ? 1u : 64u));
            CHECK(c.out_channels() == (convs == 20 ? 1u : 64u));
        }
        else if (dn.layer(l).kind() == LayerKind::batchnorm)
            bn_after.push_back(convs);
    }
    CHECK(convs == 20);
    REQUIRE(bn_after.size() == 18);
    for (std::size_t j = 0; j < 18; ++j)
        CHECK(bn_after[j] == j + 2);
    CHECK(dn.layer(dn.size() - 1).kind() == LayerKind::conv);
    CHECK_THROWS_AS(make_dncnn(1, 1), std::invalid_argument);

    // zeroed last conv: the denoiser is the identity
    std::mt19937_64 rng(3);
    nn::Tensor4<float> x({3, 1, 72, 14});
    std::normal_distribution<float> g;
    for (auto &v : x.span())
        v = g(rng);
    CHECK(dn.predict(x) == x);
    CHECK(sr.predict(x) == x);
}

TEST_CASE("plane packing")
{
    const auto gs = grids(3, 4);
    std::vector<CMatrix> m;
    for (const auto &g : gs)
        m.push_back(g.values);
    const auto planes = grids_to_planes(m);
    CHECK(planes.shape() == nn::Shape4{6, 1, 72, 14});
    CHECK(planes.at(1, 0, 5, 2) == float(m[1](5, 2).real()));
    CHECK(planes.at(4, 0, 5, 2) == float(m[1](5, 2).imag()));
    const auto back = planes_to_grids(planes);
    REQUIRE(back.size() == 3);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK((back[j] - m[j]).cwiseAbs().maxCoeff() < 1e-6);
    CHECK_THROWS_AS(planes_to_grids(nn::Tensor4<float>({3, 1, 72, 14})), std::invalid_argument);
}

TEST_CASE("untrained pipeline returns the interpolated input")
{
    const auto pattern = default_lte_pattern();
    const auto model = make_channelnet(pattern, 7);
    for (const auto &o : observations(pattern, 3, 12.0, 5))
    {
        const CMatrix interp = interpolate_pilots(o, pattern.spec());
        const auto est = estimate(model, o);
        CHECK(est.values == interp.cast<std::complex<float>>().cast<cdouble>());
    }
}

TEST_CASE("estimate is deterministic, batch-consistent and swap-symmetric")
{
    const auto pattern = default_lte_pattern();
    const auto model = perturbed_model(pattern, 11);
    const auto obs = observations(pattern, 5, 12.0, 9);

    const auto a = estimate(model, obs[0]);
    const auto b = estimate(model, obs[0]);
    CHECK(a.values == b.values);
    CHECK(a.values != interpolate_pilots(obs[0], pattern.spec())); // the layers are live

    const auto batch = estimate_batch(model, obs);
    REQUIRE(batch.size() == 5);
    for (std::size_t j = 0; j < 5; ++j)
        CHECK((batch[j].values - estimate(model, obs[j]).values).cwiseAbs().maxCoeff() < 1e-6);

    // i * conj(h) swaps the real and imaginary planes; shared weights commute with the swap
    const cdouble i1(0.0, 1.0);
    for (const auto &o : obs)
    {
        PilotObservation swapped = o;
        swapped.values = (i1 * o.values.conjugate()).eval();
        const auto e = estimate(model, o);
        const auto s = estimate(model, swapped);
        CHECK((s.values - (i1 * e.values.conjugate()).eval()).cwiseAbs().maxCoeff() < 1e-9);
    }

    const auto other = lattice_pattern_for_count(pattern.spec(), 36);
    const PilotObservation wrong{other, CVector::Ones(36), 12.0};
    CHECK_THROWS_AS(estimate(model, wrong), std::invalid_argument);
}

TEST_CASE("model files")
{
    const auto pattern = default_lte_pattern();
    auto model = perturbed_model(pattern, 13);
    model.metadata.dataset_id = "veha:00ff";
    const std::string bytes = saved(model);

    std::istringstream is(bytes);
    const auto back = load_model(is);
    CHECK(back.sr.checksum() == model.sr.checksum());
    CHECK(back.ir.checksum() == model.ir.checksum());
    CHECK(back.pattern_hash == pattern.hash());
    CHECK(back.trained_snr_db == 12.0f);
    CHECK(back.metadata.seed == 13);
    CHECK(back.metadata.dataset_id == "veha:00ff");
    CHECK(back.spec.n_subcarriers == 72);
    CHECK(saved(back) == bytes);

    auto expect = [](const std::string &data, FormatError::Kind kind, const std::string &needle) {
        std::istringstream in(data);
        try
        {
            load_model(in);
            FAIL("accepted a bad model file");
        }
        catch (const FormatError &e)
        {
            CHECK(e.kind() == kind);
            INFO(e.what());
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect("CHNX" + bytes.substr(4), FormatError::Kind::bad_magic, "magic");
    auto v = bytes;
    v[4] = 2;
    expect(v, FormatError::Kind::version_mismatch, "version");
    expect(bytes.substr(0, 20), FormatError::Kind::truncated, "CHNT header");
    // cut inside the first SR layer's weights
    const std::size_t header = 4 + 4 + 4 + 4 + 8 + 4 + 8 + 4 + 9;
    expect(bytes.substr(0, header + 12 + 1 + 16 + 100), FormatError::Kind::truncated, "SR network");
    expect(bytes.substr(0, header + 12 + 1 + 16 + 100), FormatError::Kind::truncated, "layer 0");
    expect(bytes.substr(0, bytes.size() - 1000), FormatError::Kind::truncated, "IR network");
}

TEST_CASE("snr switch policy")
{
    SnrSwitchPolicy p{{{17.0, "low"}, {std::numeric_limits<double>::infinity(), "high"}}};
    CHECK(select_network(p, 12.0) == "low");
    CHECK(select_network(p, 22.0) == "high");
    CHECK(select_network(p, 17.0) == "low");

    std::vector<std::string> warnings;
    set_warning_handler([&](const std::string &m) { warnings.push_back(m); });
    SnrSwitchPolicy bounded{{{17.0, "low"}, {25.0, "high"}}};
    CHECK(bounded.select(24.0) == "high");
    CHECK(warnings.empty());
    CHECK(bounded.select(30.0) == "high");
    CHECK(warnings.size() == 1);
    set_warning_handler(nullptr);

    CHECK_THROWS_AS((SnrSwitchPolicy{{{17.0, "a"}, {17.0, "b"}}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS(SnrSwitchPolicy{}.validate(), std::invalid_argument);

    std::stringstream ss;
    write_policy(ss, p);
    CHECK(ss.str() == "17,low\ninf,high\n");
    const auto back = read_policy(ss);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[1].model == "high");
    CHECK(std::isinf(back.entries[1].upper_bound_db));

    std::istringstream commented("# switch\n16.5,a.chnt\n\ninf,b.chnt\n");
    CHECK(read_policy(commented).entries[0].upper_bound_db == 16.5);
    std::istringstream bad("x,a\n");
    CHECK_THROWS_AS(read_policy(bad), FormatError);
    std::istringstream backwards("20,a\n10,b\n");
    CHECK_THROWS_AS(read_policy(backwards), std::invalid_argument);
}

TEST_CASE("training stages")
{
    const auto pattern = default_lte_pattern();
    const auto train_grids = grids(24, 100), val_grids = grids(8, 200);
    const NoiseSpec noise{12.0};
    const auto train = make_plane_dataset(train_grids, pattern, noise, 1);
    const auto val = make_plane_dataset(val_grids, pattern, noise, 2);
    CHECK(train.size() == 48);
    CHECK(train.inputs.shape() == nn::Shape4{48, 1, 72, 14});

    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.batch_size = 16;
    cfg.steps_per_epoch = 2;
    cfg.seed = 5;

    SUBCASE("stage 1 is deterministic and keeps the best epoch")
    {
        auto m1 = make_channelnet(pattern, 3);
        auto m2 = make_channelnet(pattern, 3);
        std::vector<EpochLog> logs;
        auto c = cfg;
        c.on_epoch = [&](const EpochLog &l) { logs.push_back(l); };
        const auto r1 = train_stage1(m1, train, val, c);
        const auto r2 = train_stage1(m2, train, val, cfg);
        CHECK(m1.sr.checksum() == m2.sr.checksum());
        CHECK(r1.best_val_loss == r2.best_val_loss);
        CHECK(logs.size() == 2);
        CHECK(r1.best_val_loss <= r1.initial_val_loss);
        CHECK(evaluate_loss(m1.sr, val) == doctest::Approx(r1.best_val_loss).epsilon(1e-12));
    }

    SUBCASE("zero learning rate leaves the parameters alone")
    {
        auto m = make_channelnet(pattern, 3);
        const auto before = m.sr.checksum();
        auto c = cfg;
        c.learning_rate = 0.0;
        train_stage1(m, train, val, c);
        CHECK(m.sr.checksum() == before);
    }

    SUBCASE("stage 2 freezes the super-resolution network")
    {
        auto m = perturbed_model(pattern, 4);
        const auto before = m.sr.checksum();
        const auto ir_before = m.ir.checksum();
        auto c = cfg;
        c.learning_rate = 1e-4;
        const auto r = train_stage2(m, train, val, c);
        CHECK(m.sr.checksum() == before);
        if (r.best_epoch > 0)
            CHECK(m.ir.checksum() != ir_before);
        CHECK(r.best_val_loss <= r.initial_val_loss);
    }

    SUBCASE("non-finite loss aborts")
    {
        auto m = make_channelnet(pattern, 3);
        auto poisoned = train;
        poisoned.targets[10] = std::numeric_limits<float>::quiet_NaN();
        auto c = cfg;
        c.steps_per_epoch = 3;
        c.batch_size = 48;
        CHECK_THROWS_AS(train_stage1(m, poisoned, val, c), TrainingDiverged);
    }

    SUBCASE("rejects empty and mismatched datasets")
    {
        auto m = make_channelnet(pattern, 3);
        CHECK_THROWS_AS(train_stage1(m, PlaneDataset{}, val, cfg), std::invalid_argument);
        PlaneDataset odd{train.inputs, val.targets};
        CHECK_THROWS_AS(train_stage1(m, odd, val, cfg), std::invalid_argument);
    }
}

TEST_CASE("identity task is learnable")
{
    // static flat channel: the interpolated pilot image is already the channel
    ChannelConfig still;
    still.pdp = PowerDelayProfile::flat();
    still.doppler.speed = 0.0;
    const auto pattern = default_lte_pattern();
    const auto train = make_plane_dataset(grids(16, 1, still), pattern, NoiseSpec::noiseless(), 1);
    const auto val = make_plane_dataset(grids(4, 2, still), pattern, NoiseSpec::noiseless(), 2);
    auto m = make_channelnet(pattern, 1);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.batch_size = 16;
    const auto r1 = train_stage1(m, train, val, cfg);
    CHECK(r1.best_val_loss < 1e-4);
    m.ir = make_dncnn(1, 4, 8);
    const auto r2 = train_stage2(m, train, val, cfg);
    CHECK(r2.best_val_loss <= r1.best_val_loss);
}
