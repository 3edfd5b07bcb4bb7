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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "channelnet/io.hpp"
#include "channelnet/training.hpp"

namespace channelnet
{
    /// Everything a run needs, read from an INI file. See configs/default.ini for every key.
    struct ExperimentConfig
    {
        std::string name = "default";
        std::uint64_t seed = 2026;
        std::filesystem::path output_dir = "out";
        std::size_t threads = 1;
        bool paired = true;

        ChannelConfig channel;

        // pilot layout: an explicit file, an explicit lattice, or a count
        std::filesystem::path pilot_file;
        std::vector<std::size_t> pilot_symbols;
        std::size_t pilot_spacing = 0;
        std::vector<std::size_t> pilot_offsets;
        std::size_t pilot_count = 48;

        std::size_t n_train = 4000, n_val = 500, n_test = 500;

        double train_snr_db = 12.0;
        TrainConfig stage1;
        TrainConfig stage2;
        std::size_t dncnn_depth = 20;

        std::size_t correlation_samples = 100000;
        std::size_t estimated_frames = 500;
        std::size_t almmse_rank_time = 4;
        std::size_t almmse_rank_freq = 16;

        std::vector<double> eval_snrs_db;
        std::vector<std::string> estimators;
        std::map<std::string, std::filesystem::path> models; // estimator name -> CHNT file
        std::filesystem::path policy_file;
        std::vector<double> policy_sweep_db;

        std::vector<std::size_t> sweep_counts{24, 36, 48};
        double sweep_snr_db = 20.0;
        std::vector<std::string> sweep_estimators;

        /// Canonical text of the resolved configuration; hashed into every manifest and result.
        std::string canonical() const;
        std::uint64_t hash() const { return fnv1a(canonical()); }
        void validate() const;

        static ExperimentConfig parse(std::istream &is);
        static ExperimentConfig load(const std::filesystem::path &path);

        PilotPattern pattern() const;
        /// Output dir, overridden by CHANNELNET_OUT when set.
        std::filesystem::path out_dir() const;
        std::filesystem::path dataset_path(const std::string &split) const;
        std::filesystem::path model_path(double snr_db, std::size_t n_pilots) const;
    };

    /// Split seeds: grid g of split s comes from derive_seed(seed, split_stream(s), g).
    std::uint64_t split_stream(const std::string &split);
    std::vector<ChannelGrid> generate_split(const ExperimentConfig &cfg, const std::string &split, std::size_t count);

    struct ResultRecord
    {
        std::string estimator;
        std::string model; // channel model (power delay profile) name
        double snr_db = 0.0;
        std::size_t n_pilots = 0;
        double mse = 0.0;
        double stderr_ = 0.0;
        std::size_t n = 0;
    };

    /// A record plus the per-grid squared errors it summarizes.
    struct Series
    {
        ResultRecord record;
        std::vector<double> per_grid;
    };

    struct ExperimentResult
    {
        std::vector<Series> series;
        std::uint64_t config_hash = 0;

        const Series &find(const std::string &estimator, double snr_db, std::size_t n_pilots = 0) const;
    };

    inline constexpr const char *result_csv_header = "estimator,model,snr_db,n_pilots,mse,stderr,n";
    void write_result_csv(std::ostream &os, const ExperimentResult &result);
    void write_result_json(std::ostream &os, const ExperimentResult &result);

    /// Full-grid estimates for a batch of observations at one SNR. `truth` is only for "perfect".
    using BatchEstimator =
        std::function<std::vector<CMatrix>(std::span<const PilotObservation> obs, std::span<const ChannelGrid> truth)>;

    struct NamedEstimator
    {
        std::string name;
        std::function<BatchEstimator(double snr_db)> at_snr;
    };

    struct EvaluationSetup
    {
        std::string model_name;
        std::uint64_t seed = 0;
        bool paired = true;
        std::size_t threads = 1;
    };

    /// Fresh noise per (SNR, grid) and, unpaired, per estimator. Grid g at SNR s draws noise from
    /// derive_seed(seed, snr stream, g), so runs with the same seed are reproducible bit-for-bit.
    ExperimentResult evaluate_estimators(std::span<const ChannelGrid> grids, const PilotPattern &pattern,
                                         std::span<const NamedEstimator> estimators, std::span<const double> snrs_db,
                                         const EvaluationSetup &setup);

    /// Built-in estimators: perfect, ls-interp, mmse-oracle, mmse-analytic, mmse-estimated, almmse.
    /// `oracle` feeds mmse-oracle and almmse; `train_grids` feed mmse-estimated.
    struct BaselineInputs
    {
        const ExperimentConfig *config = nullptr;
        PilotPattern pattern;
        std::optional<CorrelationModel> oracle;
        std::span<const ChannelGrid> train_grids;
    };
    NamedEstimator make_builtin_estimator(const std::string &name, const BaselineInputs &inputs);
    NamedEstimator make_channelnet_estimator(const std::string &name, std::shared_ptr<const ChannelNetModel> model);
    NamedEstimator make_policy_estimator(const std::string &name, const SnrSwitchPolicy &policy,
                                         std::map<std::string, std::shared_ptr<const ChannelNetModel>> models);

    /// Empirical correlations from the first `frames` training grids observed at snr_db.
    CorrelationModel estimated_correlations(const ExperimentConfig &cfg, const PilotPattern &pattern,
                                            std::span<const ChannelGrid> train_grids, double snr_db);
    CorrelationModel oracle_correlations(const ExperimentConfig &cfg, const PilotPattern &pattern);

    /// Trains stage 1 and/or 2 on the config's train/val grids at snr_db.
    struct TrainOutcome
    {
        ChannelNetModel model;
        std::optional<TrainResult> stage1, stage2;
    };
    enum class Stage
    {
        sr,
        ir,
        both
    };
    TrainOutcome train_channelnet(const ExperimentConfig &cfg, std::span<const ChannelGrid> train_grids,
                                  std::span<const ChannelGrid> val_grids, const PilotPattern &pattern, double snr_db,
                                  Stage stage, std::optional<ChannelNetModel> start = std::nullopt,
                                  std::ostream *log_csv = nullptr);

    /// Places the switch at the first sweep SNR where the high-SNR model's validation MSE drops
    /// below the low-SNR model's: bound = midpoint between that SNR and the previous one.
    SnrSwitchPolicy calibrate_policy(const ChannelNetModel &low, const std::string &low_path, const ChannelNetModel &high,
                                     const std::string &high_path, std::span<const ChannelGrid> val_grids,
                                     const PilotPattern &pattern, std::span<const double> sweep_db, std::uint64_t seed);

    // ---- commands ----------------------------------------------------------

    struct CommandOptions
    {
        bool overwrite = false;
        std::optional<std::uint64_t> seed;
        bool single_thread = false;
        std::string stage = "both"; // train: sr | ir | both | policy
        std::optional<double> snr_db;
        std::ostream *log = nullptr; // progress lines
    };

    void cmd_generate(ExperimentConfig cfg, const CommandOptions &opt);
    void cmd_train(ExperimentConfig cfg, const CommandOptions &opt);
    void cmd_baseline(ExperimentConfig cfg, const CommandOptions &opt);
    ExperimentResult cmd_evaluate(ExperimentConfig cfg, const CommandOptions &opt);
    ExperimentResult cmd_pilot_sweep(ExperimentConfig cfg, const CommandOptions &opt);
}
