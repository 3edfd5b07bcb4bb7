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

#include <iostream>

#include <CLI11.hpp>

#include "channelnet/experiment.hpp"

int main(int argc, char **argv)
{
    using namespace channelnet;

    CLI::App app{"channelnet: OFDM channel estimation with ChannelNet and classical baselines"};
    app.require_subcommand(1);

    std::string config_path;
    CommandOptions opt;
    opt.log = &std::cerr;
    std::uint64_t seed = 0;
    double snr = 0.0;

    auto common = [&](CLI::App *sub) {
        sub->add_option("--config", config_path, "INI experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override experiment.seed");
        sub->add_flag("--single-thread", opt.single_thread, "deterministic single-threaded mode");
        sub->add_flag("--overwrite", opt.overwrite, "replace existing outputs");
    };

    auto *gen = app.add_subcommand("generate", "draw train/val/test channel datasets");
    auto *train = app.add_subcommand("train", "train ChannelNet (or calibrate the SNR switch policy)");
    auto *eval = app.add_subcommand("evaluate", "MSE of each estimator over the SNR sweep");
    auto *sweep = app.add_subcommand("pilot-sweep", "MSE against pilot count at one SNR");
    auto *base = app.add_subcommand("baseline", "write oracle, analytic and estimated correlation files");
    for (auto *sub : {gen, train, eval, sweep, base})
        common(sub);
    train->add_option("--stage", opt.stage, "sr, ir, both or policy")
        ->check(CLI::IsMember({"sr", "ir", "both", "policy"}));
    train->add_option("--snr", snr, "training SNR in dB (default: train.snr_db)");
    sweep->add_option("--snr", snr, "sweep SNR in dB (default: pilot_sweep.snr_db)");

    CLI11_PARSE(app, argc, argv);

    set_warning_handler([](const std::string &msg) { std::cerr << "warning: " << msg << '\n'; });
    try
    {
        auto cfg = ExperimentConfig::load(config_path);
        for (auto *sub : {gen, train, eval, sweep, base})
            if (sub->count("--seed"))
                opt.seed = seed;
        if (train->count("--snr") || sweep->count("--snr"))
            opt.snr_db = snr;

        if (*gen)
            cmd_generate(cfg, opt);
        else if (*train)
            cmd_train(cfg, opt);
        else if (*eval)
            cmd_evaluate(cfg, opt);
        else if (*sweep)
            cmd_pilot_sweep(cfg, opt);
        else if (*base)
            cmd_baseline(cfg, opt);
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
