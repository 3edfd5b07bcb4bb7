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

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "channelnet/experiment.hpp"

using namespace channelnet;
namespace fs = std::filesystem;

namespace
{
    ExperimentConfig parse(const std::string &text)
    {
        std::istringstream is(text);
        return ExperimentConfig::parse(is);
    }

    std::string slurp(const fs::path &p)
    {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        return os.str();
    }

    // Fresh scratch directory, removed on scope exit.
    struct Scratch
    {
        fs::path dir;
        explicit Scratch(const std::string &tag)
        {
            dir = fs::temp_directory_path() / ("channelnet_unit_" + tag + "_" + std::to_string(::getpid()));
            fs::remove_all(dir);
            fs::create_directories(dir);
        }
        ~Scratch() { fs::remove_all(dir); }
    };

    const char *small_config = R"(
[experiment]
name = small
seed = 99
threads = 1

[dataset]
train = 10
val = 2
test = 30

[baselines]
correlation_samples = 2000

[evaluate]
snr_db = 0:10:20
estimators = perfect,ls-interp,mmse-oracle
)";
}

TEST_CASE("config parsing")
{
    const auto c = parse(small_config);
    CHECK(c.name == "small");
    CHECK(c.seed == 99);
    CHECK(c.n_train == 10);
    CHECK(c.eval_snrs_db == std::vector<double>{0.0, 10.0, 20.0});
    CHECK(c.estimators == std::vector<std::string>{"perfect", "ls-interp", "mmse-oracle"});
    CHECK(c.channel.pdp.name == "VehA");
    CHECK(c.pattern() == default_lte_pattern());
    CHECK(c.stage1.learning_rate == 1e-3);
    CHECK(c.stage1.batch_size == 128);
    CHECK(c.paired);

    CHECK_THROWS_AS(parse("[experiment]\nname = x\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("[experiment]\nseed = 1\ncolour = red\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("[experiment]\nseed = -1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("[experiment]\nseed = 1\n[dataset]\ntrain = 0\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("[experiment]\nseed = 1\n[channel]\nprofile = nowhere\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("[experiment]\nseed = 1\n[evaluate]\nsnr_db = 5,abc\n"), std::invalid_argument);

    const auto sui = parse("[experiment]\nseed = 1\n[channel]\nprofile = sui5\nspeed_kmh = 100\n[pilots]\ncount = 24\n"
                           "[models]\ndeep-low = a.chnt\n");
    CHECK(sui.channel.pdp.name == "SUI5");
    CHECK(sui.channel.doppler.max_doppler() == doctest::Approx(2 * 97.2).epsilon(2e-3));
    CHECK(sui.pattern().size() == 24);
    CHECK(sui.models.at("deep-low") == "a.chnt");

    const auto lattice = parse("[experiment]\nseed = 1\n[pilots]\nsymbols = 0,7\nspacing = 6\noffsets = 0,3\n");
    CHECK(lattice.pattern().size() == 24);

    // every shipped config parses
    for (const char *name : {"default.ini", "quick.ini", "full-scale.ini"})
        CHECK_NOTHROW(ExperimentConfig::load(fs::path(CHANNELNET_SOURCE_DIR) / "configs" / name));
    CHECK(ExperimentConfig::load(fs::path(CHANNELNET_SOURCE_DIR) / "configs" / "full-scale.ini").n_train == 32000);
}

TEST_CASE("config hash follows the resolved settings")
{
    const auto a = parse(small_config);
    const auto b = parse(small_config);
    CHECK(a.hash() == b.hash());
    auto c = a;
    c.seed = 100;
    CHECK(c.hash() != a.hash());
    c = a;
    c.eval_snrs_db.push_back(25.0);
    CHECK(c.hash() != a.hash());
}

TEST_CASE("output paths")
{
    auto c = parse(small_config);
    c.output_dir = "results";
    CHECK(c.dataset_path("test") == fs::path("results") / "veha_test.cgrd");
    CHECK(c.model_path(12.0, 48) == fs::path("results") / "channelnet_veha_12dB_p48.chnt");
    CHECK(c.model_path(2.5, 24).filename() == "channelnet_veha_2.5dB_p24.chnt");
    ::setenv("CHANNELNET_OUT", "/tmp/elsewhere", 1);
    CHECK(c.out_dir() == fs::path("/tmp/elsewhere"));
    ::unsetenv("CHANNELNET_OUT");
    CHECK(c.out_dir() == fs::path("results"));
    CHECK(split_stream("val") == 2);
    CHECK_THROWS_AS(split_stream("holdout"), std::invalid_argument);
}

TEST_CASE("dataset files")
{
    const auto c = parse(small_config);
    const auto grids = generate_split(c, "train", 5);
    std::stringstream ss;
    write_dataset(ss, c.channel.grid, grids);
    const std::string bytes = ss.str();
    CHECK(bytes.size() == 4 + 4 + 4 + 4 + 8 + 5 * 72 * 14 * 8);
    const auto back = read_dataset(ss);
    REQUIRE(back.size() == 5);
    for (std::size_t g = 0; g < 5; ++g)
        CHECK((back[g].values - grids[g].values).cwiseAbs().maxCoeff() < 1e-6);
    std::stringstream again;
    write_dataset(again, c.channel.grid, back);
    CHECK(again.str() == bytes);

    auto expect = [](const std::string &data, FormatError::Kind kind) {
        std::istringstream is(data);
        try
        {
            read_dataset(is);
            FAIL("accepted a bad dataset");
        }
        catch (const FormatError &e)
        {
            CHECK(e.kind() == kind);
        }
    };
    expect("XGRD" + bytes.substr(4), FormatError::Kind::bad_magic);
    auto v = bytes;
    v[4] = 7;
    expect(v, FormatError::Kind::version_mismatch);
    expect(bytes.substr(0, bytes.size() - 3), FormatError::Kind::truncated);
}

TEST_CASE("generate command")
{
    Scratch a("gen_a"), b("gen_b");
    auto c = parse(small_config);
    c.n_train = 10;
    c.n_val = 2;
    c.n_test = 2;
    c.output_dir = a.dir;
    CommandOptions opt;
    cmd_generate(c, opt);
    CHECK(read_dataset(c.dataset_path("train")).size() == 10);
    CHECK(read_dataset(c.dataset_path("val")).size() == 2);
    CHECK(read_dataset(c.dataset_path("test")).size() == 2);
    const auto manifest = nlohmann::json::parse(slurp(a.dir / "veha_manifest.json"));
    CHECK(manifest["seed"] == 99);
    CHECK(manifest["splits"]["train"]["count"] == 10);
    CHECK(manifest["config"] == c.canonical());

    CHECK_THROWS_AS(cmd_generate(c, opt), std::runtime_error);
    opt.overwrite = true;
    CHECK_NOTHROW(cmd_generate(c, opt));

    auto c2 = c;
    c2.output_dir = b.dir;
    c2.threads = 3;
    cmd_generate(c2, {});
    for (const char *split : {"train", "val", "test"})
        CHECK(slurp(c.dataset_path(split)) == slurp(c2.dataset_path(split)));

    CommandOptions seeded;
    seeded.seed = 1234;
    seeded.overwrite = true;
    cmd_generate(c2, seeded);
    CHECK(slurp(c.dataset_path("train")) != slurp(c2.dataset_path("train")));
}

TEST_CASE("evaluation")
{
    const auto c = parse(small_config);
    const auto pattern = c.pattern();
    const auto grids = generate_split(c, "test", 30);
    BaselineInputs in{&c, pattern, oracle_correlations(c, pattern), {}};
    const std::vector<NamedEstimator> ests{make_builtin_estimator("perfect", in), make_builtin_estimator("ls-interp", in),
                                           make_builtin_estimator("mmse-oracle", in), make_builtin_estimator("almmse", in)};
    const std::vector<double> snrs{0.0, 10.0, 20.0};
    const auto r = evaluate_estimators(grids, pattern, ests, snrs, {"veha", 5, true, 1});
    CHECK(r.series.size() == 12);
    for (double s : snrs)
    {
        CHECK(r.find("perfect", s).record.mse == 0.0);
        CHECK(r.find("perfect", s).record.stderr_ == 0.0);
        CHECK(r.find("ls-interp", s).record.n == 30);
        CHECK(r.find("ls-interp", s).record.n_pilots == 48);
        CHECK(r.find("ls-interp", s).record.model == "veha");
    }
    CHECK(r.find("ls-interp", 0.0).record.mse > r.find("ls-interp", 10.0).record.mse);
    CHECK(r.find("ls-interp", 10.0).record.mse > r.find("ls-interp", 20.0).record.mse);
    CHECK(r.find("mmse-oracle", 10.0).record.mse < r.find("ls-interp", 10.0).record.mse);
    CHECK_THROWS_AS(r.find("ls-interp", 5.0), std::out_of_range);
    CHECK_THROWS_AS(make_builtin_estimator("kalman", in), std::invalid_argument);
    CHECK_THROWS_AS(make_builtin_estimator("mmse-estimated", in), std::invalid_argument);

    // threads do not change results; the seed does
    const auto t = evaluate_estimators(grids, pattern, ests, snrs, {"veha", 5, true, 3});
    std::ostringstream ca, cb;
    write_result_csv(ca, r);
    write_result_csv(cb, t);
    CHECK(ca.str() == cb.str());
    CHECK(ca.str().rfind(std::string(result_csv_header) + "\n", 0) == 0);
    const auto other = evaluate_estimators(grids, pattern, ests, snrs, {"veha", 6, true, 1});
    CHECK(other.find("ls-interp", 10.0).record.mse != r.find("ls-interp", 10.0).record.mse);

    // paired estimators see the same noise, unpaired ones do not
    const std::vector<NamedEstimator> twins{make_builtin_estimator("ls-interp", in), make_builtin_estimator("ls-interp", in)};
    const double ten[] = {10.0};
    const auto paired = evaluate_estimators(grids, pattern, twins, ten, {"veha", 5, true, 1});
    CHECK(paired.series[0].per_grid == paired.series[1].per_grid);
    CHECK(paired.series[0].per_grid == r.find("ls-interp", 10.0).per_grid);
    const auto unpaired = evaluate_estimators(grids, pattern, twins, ten, {"veha", 5, false, 1});
    CHECK(unpaired.series[0].per_grid != unpaired.series[1].per_grid);

    std::ostringstream js;
    write_result_json(js, r);
    const auto doc = nlohmann::json::parse(js.str());
    CHECK(doc["series"].size() == 4);
    CHECK(doc["series"][1]["estimator"] == "ls-interp");
    CHECK(doc["series"][1]["points"].size() == 3);
}

TEST_CASE("estimated correlations track the oracle at high snr")
{
    auto c = parse(small_config);
    c.estimated_frames = 2000;
    const auto pattern = c.pattern();
    const auto train = generate_split(c, "train", 2000);
    c.correlation_samples = 20000;
    const auto oracle = oracle_correlations(c, pattern);
    CHECK(relative_frobenius_distance(estimated_correlations(c, pattern, train, 40.0), oracle) < 0.15);
}

TEST_CASE("commands check their inputs")
{
    Scratch s("cmds");
    auto c = parse(small_config);
    c.output_dir = s.dir;
    c.n_train = 8;
    c.n_val = 4;
    c.n_test = 6;
    c.sweep_counts = {24, 48};
    c.sweep_snr_db = 20.0;
    c.sweep_estimators = {"ls-interp", "mmse-oracle"};
    c.eval_snrs_db = {20.0};

    CHECK_THROWS_AS(cmd_evaluate(c, {}), std::runtime_error); // no datasets yet
    cmd_generate(c, {});
    CHECK_THROWS_AS(cmd_evaluate(c, {}), std::runtime_error); // no oracle correlations yet

    CommandOptions ir;
    ir.stage = "ir";
    CHECK_THROWS_AS(cmd_train(c, ir), std::runtime_error);
    CommandOptions bogus;
    bogus.stage = "all";
    CHECK_THROWS_AS(cmd_train(c, bogus), std::invalid_argument);
    CommandOptions policy;
    policy.stage = "policy";
    CHECK_THROWS_AS(cmd_train(c, policy), std::runtime_error);

    cmd_baseline(c, {});
    CHECK(fs::exists(s.dir / "corr_oracle_veha_p48.corr"));
    CHECK(fs::exists(s.dir / "corr_analytic_veha_p48.corr"));
    CHECK(fs::exists(s.dir / "corr_estimated_veha_p48_20dB.corr"));
    CHECK_THROWS_AS(cmd_baseline(c, {}), std::runtime_error);

    c.estimators = {"perfect", "ls-interp", "mmse-oracle"};
    const auto ev = cmd_evaluate(c, {});
    CHECK(fs::exists(s.dir / "small_evaluate.csv"));
    CHECK(fs::exists(s.dir / "small_evaluate.json"));
    CHECK(ev.config_hash == c.hash());

    // the 48-pilot point of the sweep is the evaluate point
    const auto sw = cmd_pilot_sweep(c, {});
    CHECK(fs::exists(s.dir / "small_pilot_sweep.csv"));
    for (const char *e : {"ls-interp", "mmse-oracle"})
    {
        CHECK(sw.find(e, 20.0, 48).per_grid == ev.find(e, 20.0).per_grid);
        CHECK(sw.find(e, 20.0, 24).record.n_pilots == 24);
    }

    c.sweep_counts = {47};
    CHECK_THROWS_AS(cmd_pilot_sweep(c, {}), std::invalid_argument);
}
