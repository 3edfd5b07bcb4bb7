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

#include "channelnet/experiment.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

namespace channelnet
{
    namespace pt = boost::property_tree;

    namespace
    {
        template <typename F>
        void parallel_for(std::size_t n, std::size_t threads, F &&fn)
        {
            threads = std::max<std::size_t>(1, std::min(threads, n));
            if (threads == 1)
            {
                fn(std::size_t{0}, n);
                return;
            }
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(threads);
            const std::size_t chunk = (n + threads - 1) / threads;
            for (std::size_t t = 0; t < threads; ++t)
                pool.emplace_back([&, t] {
                    try
                    {
                        const std::size_t b = t * chunk, e = std::min(n, b + chunk);
                        if (b < e)
                            fn(b, e);
                    }
                    catch (...)
                    {
                        errors[t] = std::current_exception();
                    }
                });
            for (auto &th : pool)
                th.join();
            for (auto &e : errors)
                if (e)
                    std::rethrow_exception(e);
        }

        std::string fmt_double(double v)
        {
            if (std::isinf(v))
                return v > 0 ? "inf" : "-inf";
            std::ostringstream os;
            os << std::setprecision(17) << v;
            return os.str();
        }

        // Short form for file names: 12, 2.5, -3
        std::string snr_tag(double v)
        {
            std::ostringstream os;
            os << std::setprecision(6) << v;
            return os.str();
        }

        std::string hex64(std::uint64_t v)
        {
            std::ostringstream os;
            os << std::hex << std::setw(16) << std::setfill('0') << v;
            return os.str();
        }

        std::string lower(std::string s)
        {
            for (auto &c : s)
                c = char(std::tolower(static_cast<unsigned char>(c)));
            return s;
        }

        std::uint64_t snr_stream(double snr_db) { return mix_seed(std::bit_cast<std::uint64_t>(snr_db) ^ 0x5E5E); }

        std::vector<std::string> split_list(const std::string &text)
        {
            std::vector<std::string> out;
            std::string item;
            std::istringstream is(text);
            while (std::getline(is, item, ','))
            {
                const auto b = item.find_first_not_of(" \t");
                const auto e = item.find_last_not_of(" \t");
                if (b != std::string::npos)
                    out.push_back(item.substr(b, e - b + 1));
            }
            return out;
        }

        double parse_double(const std::string &key, const std::string &text)
        {
            try
            {
                std::size_t used = 0;
                const double v = std::stod(text, &used);
                if (used != text.size())
                    throw std::invalid_argument("trailing characters");
                return v;
            }
            catch (const std::exception &)
            {
                throw std::invalid_argument("config: '" + key + "' expects a number, got '" + text + "'");
            }
        }

        std::uint64_t parse_uint(const std::string &key, const std::string &text)
        {
            if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
                throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + text + "'");
            return std::stoull(text);
        }

        bool parse_bool(const std::string &key, const std::string &text)
        {
            const auto t = lower(text);
            if (t == "true" || t == "1" || t == "yes" || t == "on")
                return true;
            if (t == "false" || t == "0" || t == "no" || t == "off")
                return false;
            throw std::invalid_argument("config: '" + key + "' expects true/false, got '" + text + "'");
        }

        std::vector<double> parse_double_list(const std::string &key, const std::string &text)
        {
            std::vector<double> out;
            for (const auto &item : split_list(text))
            {
                // a:b:c expands to a range with step b
                if (const auto parts = std::count(item.begin(), item.end(), ':'); parts == 2)
                {
                    const auto c1 = item.find(':'), c2 = item.rfind(':');
                    const double a = parse_double(key, item.substr(0, c1));
                    const double step = parse_double(key, item.substr(c1 + 1, c2 - c1 - 1));
                    const double b = parse_double(key, item.substr(c2 + 1));
                    if (!(step > 0))
                        throw std::invalid_argument("config: '" + key + "' range step must be positive");
                    for (std::size_t j = 0;; ++j)
                    {
                        const double v = a + double(j) * step;
                        if (v > b + 1e-9 * step)
                            break;
                        out.push_back(v);
                    }
                }
                else
                    out.push_back(parse_double(key, item));
            }
            return out;
        }

        std::vector<std::size_t> parse_uint_list(const std::string &key, const std::string &text)
        {
            std::vector<std::size_t> out;
            for (const auto &item : split_list(text))
                out.push_back(std::size_t(parse_uint(key, item)));
            return out;
        }

        template <typename T>
        std::string join(const std::vector<T> &v)
        {
            std::ostringstream os;
            for (std::size_t j = 0; j < v.size(); ++j)
            {
                if (j)
                    os << ',';
                if constexpr (std::is_floating_point_v<T>)
                    os << fmt_double(v[j]);
                else
                    os << v[j];
            }
            return os.str();
        }

        const std::set<std::string> known_keys = {
            "experiment.name", "experiment.seed", "experiment.output_dir", "experiment.threads", "experiment.paired",
            "channel.profile", "channel.speed_kmh", "channel.carrier_hz", "channel.n_sinusoids",
            "grid.subcarriers", "grid.timeslots", "grid.subcarrier_spacing_hz", "grid.symbol_duration_s",
            "pilots.file", "pilots.symbols", "pilots.spacing", "pilots.offsets", "pilots.count",
            "dataset.train", "dataset.val", "dataset.test",
            "train.snr_db", "train.max_epochs", "train.patience", "train.batch_size", "train.learning_rate",
            "train.steps_per_epoch", "train.stage2_max_epochs", "train.stage2_patience",
            "train.stage2_steps_per_epoch", "train.dncnn_depth",
            "baselines.correlation_samples", "baselines.estimated_frames", "baselines.almmse_rank_time",
            "baselines.almmse_rank_freq",
            "evaluate.snr_db", "evaluate.estimators", "evaluate.policy",
            "policy.sweep_db",
            "pilot_sweep.counts", "pilot_sweep.snr_db", "pilot_sweep.estimators"};

        std::ofstream open_text_out(const std::filesystem::path &path)
        {
            std::ofstream os(path);
            if (!os)
                throw std::runtime_error("cannot open '" + path.string() + "' for writing");
            return os;
        }

        void progress(const CommandOptions &opt, const std::string &line)
        {
            if (opt.log)
                *opt.log << line << std::endl;
        }

        std::vector<ChannelGrid> load_split(const ExperimentConfig &cfg, const std::string &split)
        {
            const auto path = cfg.dataset_path(split);
            if (!std::filesystem::exists(path))
                throw std::runtime_error("dataset '" + path.string() + "' not found; run 'channelnet generate' first");
            auto grids = read_dataset(path, cfg.channel.grid);
            for (const auto &g : grids)
                if (g.spec.n_subcarriers != cfg.channel.grid.n_subcarriers ||
                    g.spec.n_timeslots != cfg.channel.grid.n_timeslots)
                    throw std::runtime_error("dataset '" + path.string() + "' does not match the configured grid");
            // keep the configured spacings, the file only stores the shape
            for (auto &g : grids)
                g.spec = cfg.channel.grid;
            return grids;
        }

        std::filesystem::path resolve(const ExperimentConfig &cfg, const std::filesystem::path &p)
        {
            return p.is_absolute() ? p : cfg.out_dir() / p;
        }

        std::shared_ptr<const ChannelNetModel> load_model_checked(const std::filesystem::path &path,
                                                                  const PilotPattern &pattern)
        {
            if (!std::filesystem::exists(path))
                throw std::runtime_error("model '" + path.string() + "' not found; run 'channelnet train' first");
            auto model = std::make_shared<ChannelNetModel>(load_model(path));
            if (model->pattern_hash != pattern.hash())
                throw std::runtime_error("model '" + path.string() + "' was trained with a different pilot pattern");
            return model;
        }

        std::vector<CMatrix> estimate_all(const ChannelNetModel &model, std::span<const PilotObservation> obs)
        {
            std::vector<CMatrix> out;
            out.reserve(obs.size());
            for (auto &g : estimate_batch(model, obs))
                out.push_back(std::move(g.values));
            return out;
        }
    }

    // ---- config --------------------------------------------------------------

    ExperimentConfig ExperimentConfig::parse(std::istream &is)
    {
        pt::ptree tree;
        try
        {
            pt::read_ini(is, tree);
        }
        catch (const pt::ini_parser_error &e)
        {
            throw std::invalid_argument(std::string("config: ") + e.what());
        }

        std::map<std::string, std::string> kv;
        for (const auto &[section, body] : tree)
        {
            if (body.empty() && !body.data().empty())
                throw std::invalid_argument("config: key '" + section + "' outside a section");
            for (const auto &[key, value] : body)
            {
                const std::string full = section + "." + key;
                if (section != "models" && !known_keys.contains(full))
                    throw std::invalid_argument("config: unknown key '" + full + "'");
                kv[full] = value.data();
            }
        }

        ExperimentConfig c;
        auto get = [&kv](const std::string &key) -> std::optional<std::string> {
            const auto it = kv.find(key);
            if (it == kv.end())
                return std::nullopt;
            return it->second;
        };

        if (auto v = get("experiment.name"))
            c.name = *v;
        if (auto v = get("experiment.seed"))
            c.seed = parse_uint("experiment.seed", *v);
        else
            throw std::invalid_argument("config: experiment.seed is required");
        if (auto v = get("experiment.output_dir"))
            c.output_dir = *v;
        if (auto v = get("experiment.threads"))
            c.threads = std::size_t(parse_uint("experiment.threads", *v));
        if (auto v = get("experiment.paired"))
            c.paired = parse_bool("experiment.paired", *v);

        if (auto v = get("channel.profile"))
            c.channel.pdp = PowerDelayProfile::by_name(*v);
        if (auto v = get("channel.carrier_hz"))
            c.channel.doppler.carrier_frequency = parse_double("channel.carrier_hz", *v);
        if (auto v = get("channel.speed_kmh"))
            c.channel.doppler.speed = parse_double("channel.speed_kmh", *v) / 3.6;
        if (auto v = get("channel.n_sinusoids"))
            c.channel.doppler.n_sinusoids = std::size_t(parse_uint("channel.n_sinusoids", *v));

        if (auto v = get("grid.subcarriers"))
            c.channel.grid.n_subcarriers = std::size_t(parse_uint("grid.subcarriers", *v));
        if (auto v = get("grid.timeslots"))
            c.channel.grid.n_timeslots = std::size_t(parse_uint("grid.timeslots", *v));
        if (auto v = get("grid.subcarrier_spacing_hz"))
            c.channel.grid.subcarrier_spacing = parse_double("grid.subcarrier_spacing_hz", *v);
        if (auto v = get("grid.symbol_duration_s"))
            c.channel.grid.symbol_duration = parse_double("grid.symbol_duration_s", *v);

        if (auto v = get("pilots.file"))
            c.pilot_file = *v;
        if (auto v = get("pilots.symbols"))
            c.pilot_symbols = parse_uint_list("pilots.symbols", *v);
        if (auto v = get("pilots.spacing"))
            c.pilot_spacing = std::size_t(parse_uint("pilots.spacing", *v));
        if (auto v = get("pilots.offsets"))
            c.pilot_offsets = parse_uint_list("pilots.offsets", *v);
        if (auto v = get("pilots.count"))
            c.pilot_count = std::size_t(parse_uint("pilots.count", *v));

        if (auto v = get("dataset.train"))
            c.n_train = std::size_t(parse_uint("dataset.train", *v));
        if (auto v = get("dataset.val"))
            c.n_val = std::size_t(parse_uint("dataset.val", *v));
        if (auto v = get("dataset.test"))
            c.n_test = std::size_t(parse_uint("dataset.test", *v));

        if (auto v = get("train.snr_db"))
            c.train_snr_db = parse_double("train.snr_db", *v);
        if (auto v = get("train.max_epochs"))
            c.stage1.max_epochs = c.stage2.max_epochs = std::size_t(parse_uint("train.max_epochs", *v));
        if (auto v = get("train.patience"))
            c.stage1.patience = c.stage2.patience = std::size_t(parse_uint("train.patience", *v));
        if (auto v = get("train.batch_size"))
            c.stage1.batch_size = c.stage2.batch_size = std::size_t(parse_uint("train.batch_size", *v));
        if (auto v = get("train.learning_rate"))
            c.stage1.learning_rate = c.stage2.learning_rate = parse_double("train.learning_rate", *v);
        if (auto v = get("train.steps_per_epoch"))
            c.stage1.steps_per_epoch = c.stage2.steps_per_epoch = std::size_t(parse_uint("train.steps_per_epoch", *v));
        if (auto v = get("train.stage2_max_epochs"))
            c.stage2.max_epochs = std::size_t(parse_uint("train.stage2_max_epochs", *v));
        if (auto v = get("train.stage2_patience"))
            c.stage2.patience = std::size_t(parse_uint("train.stage2_patience", *v));
        if (auto v = get("train.stage2_steps_per_epoch"))
            c.stage2.steps_per_epoch = std::size_t(parse_uint("train.stage2_steps_per_epoch", *v));
        if (auto v = get("train.dncnn_depth"))
            c.dncnn_depth = std::size_t(parse_uint("train.dncnn_depth", *v));

        if (auto v = get("baselines.correlation_samples"))
            c.correlation_samples = std::size_t(parse_uint("baselines.correlation_samples", *v));
        if (auto v = get("baselines.estimated_frames"))
            c.estimated_frames = std::size_t(parse_uint("baselines.estimated_frames", *v));
        if (auto v = get("baselines.almmse_rank_time"))
            c.almmse_rank_time = std::size_t(parse_uint("baselines.almmse_rank_time", *v));
        if (auto v = get("baselines.almmse_rank_freq"))
            c.almmse_rank_freq = std::size_t(parse_uint("baselines.almmse_rank_freq", *v));

        c.eval_snrs_db = parse_double_list("evaluate.snr_db", get("evaluate.snr_db").value_or("0:2.5:25"));
        c.estimators = split_list(get("evaluate.estimators").value_or("perfect,ls-interp,mmse-oracle,mmse-estimated,almmse"));
        if (auto v = get("evaluate.policy"))
            c.policy_file = *v;
        c.policy_sweep_db = parse_double_list("policy.sweep_db", get("policy.sweep_db").value_or("0:2.5:25"));

        if (auto v = get("pilot_sweep.counts"))
            c.sweep_counts = parse_uint_list("pilot_sweep.counts", *v);
        if (auto v = get("pilot_sweep.snr_db"))
            c.sweep_snr_db = parse_double("pilot_sweep.snr_db", *v);
        c.sweep_estimators =
            split_list(get("pilot_sweep.estimators").value_or("ls-interp,mmse-oracle,mmse-estimated,almmse,channelnet"));

        for (const auto &[key, value] : kv)
            if (key.rfind("models.", 0) == 0)
                c.models[key.substr(7)] = value;

        c.validate();
        return c;
    }

    ExperimentConfig ExperimentConfig::load(const std::filesystem::path &path)
    {
        std::ifstream is(path);
        if (!is)
            throw std::runtime_error("cannot open config '" + path.string() + "'");
        return parse(is);
    }

    void ExperimentConfig::validate() const
    {
        channel.validate();
        if (eval_snrs_db.empty())
            throw std::invalid_argument("config: evaluate.snr_db must list at least one SNR");
        for (double s : eval_snrs_db)
            if (!std::isfinite(s))
                throw std::invalid_argument("config: evaluate.snr_db entries must be finite");
        if (n_train == 0 || n_val == 0 || n_test == 0)
            throw std::invalid_argument("config: dataset sizes must be positive");
        if (stage1.batch_size < 2 || stage2.batch_size < 2)
            throw std::invalid_argument("config: train.batch_size must be at least 2");
        if (!(stage1.learning_rate >= 0.0))
            throw std::invalid_argument("config: train.learning_rate must be non-negative");
        if (dncnn_depth < 2)
            throw std::invalid_argument("config: train.dncnn_depth must be at least 2");
        if (threads == 0)
            throw std::invalid_argument("config: experiment.threads must be positive");
        if (pilot_spacing != 0 && pilot_symbols.empty())
            throw std::invalid_argument("config: pilots.spacing needs pilots.symbols");
        if (sweep_counts.empty())
            throw std::invalid_argument("config: pilot_sweep.counts must not be empty");
    }

    std::string ExperimentConfig::canonical() const
    {
        std::ostringstream os;
        const auto &g = channel.grid;
        const auto &d = channel.doppler;
        os << "seed=" << seed << '\n'
           << "paired=" << paired << '\n'
           << "profile=" << channel.pdp.name << '\n'
           << "tap_delays=" << join(channel.pdp.tap_delays) << '\n'
           << "tap_powers=" << join(channel.pdp.tap_powers) << '\n'
           << "carrier_hz=" << fmt_double(d.carrier_frequency) << '\n'
           << "speed_mps=" << fmt_double(d.speed) << '\n'
           << "n_sinusoids=" << d.n_sinusoids << '\n'
           << "grid=" << g.n_subcarriers << 'x' << g.n_timeslots << '\n'
           << "subcarrier_spacing=" << fmt_double(g.subcarrier_spacing) << '\n'
           << "symbol_duration=" << fmt_double(g.symbol_duration) << '\n'
           << "pilot_file=" << pilot_file.string() << '\n'
           << "pilot_symbols=" << join(pilot_symbols) << '\n'
           << "pilot_spacing=" << pilot_spacing << '\n'
           << "pilot_offsets=" << join(pilot_offsets) << '\n'
           << "pilot_count=" << pilot_count << '\n'
           << "sizes=" << n_train << ',' << n_val << ',' << n_test << '\n'
           << "train_snr_db=" << fmt_double(train_snr_db) << '\n';
        for (const auto *st : {&stage1, &stage2})
            os << "stage=" << st->max_epochs << ',' << st->patience << ',' << st->batch_size << ','
               << fmt_double(st->learning_rate) << ',' << st->steps_per_epoch << '\n';
        os << "dncnn_depth=" << dncnn_depth << '\n'
           << "correlation_samples=" << correlation_samples << '\n'
           << "estimated_frames=" << estimated_frames << '\n'
           << "almmse_ranks=" << almmse_rank_time << ',' << almmse_rank_freq << '\n'
           << "eval_snr_db=" << join(eval_snrs_db) << '\n'
           << "estimators=" << join(estimators) << '\n'
           << "policy=" << policy_file.string() << '\n'
           << "policy_sweep_db=" << join(policy_sweep_db) << '\n'
           << "sweep_counts=" << join(sweep_counts) << '\n'
           << "sweep_snr_db=" << fmt_double(sweep_snr_db) << '\n'
           << "sweep_estimators=" << join(sweep_estimators) << '\n';
        for (const auto &[name, path] : models)
            os << "model." << name << '=' << path.string() << '\n';
        return os.str();
    }

    PilotPattern ExperimentConfig::pattern() const
    {
        if (!pilot_file.empty())
        {
            std::ifstream is(pilot_file);
            if (!is)
                throw std::runtime_error("cannot open pilot file '" + pilot_file.string() + "'");
            return read_pattern(is, channel.grid);
        }
        if (!pilot_symbols.empty())
        {
            auto offsets = pilot_offsets;
            if (offsets.empty())
                offsets.assign(pilot_symbols.size(), 0);
            return lte_lattice_pattern(channel.grid, pilot_symbols, pilot_spacing ? pilot_spacing : 6, offsets);
        }
        return lattice_pattern_for_count(channel.grid, pilot_count);
    }

    std::filesystem::path ExperimentConfig::out_dir() const
    {
        if (const char *env = std::getenv("CHANNELNET_OUT"); env && *env)
            return env;
        return output_dir;
    }

    std::filesystem::path ExperimentConfig::dataset_path(const std::string &split) const
    {
        return out_dir() / (lower(channel.pdp.name) + "_" + split + ".cgrd");
    }

    std::filesystem::path ExperimentConfig::model_path(double snr_db, std::size_t n_pilots) const
    {
        return out_dir() /
               ("channelnet_" + lower(channel.pdp.name) + "_" + snr_tag(snr_db) + "dB_p" + std::to_string(n_pilots) + ".chnt");
    }

    std::uint64_t split_stream(const std::string &split)
    {
        if (split == "train")
            return 1;
        if (split == "val")
            return 2;
        if (split == "test")
            return 3;
        throw std::invalid_argument("unknown split '" + split + "'");
    }

    std::vector<ChannelGrid> generate_split(const ExperimentConfig &cfg, const std::string &split, std::size_t count)
    {
        const auto stream = split_stream(split);
        std::vector<ChannelGrid> grids(count);
        parallel_for(count, cfg.threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t g = b; g < e; ++g)
                grids[g] = generate_channel_grid(cfg.channel, derive_seed(cfg.seed, stream, g));
        });
        return grids;
    }

    // ---- results -------------------------------------------------------------

    const Series &ExperimentResult::find(const std::string &estimator, double snr_db, std::size_t n_pilots) const
    {
        for (const auto &s : series)
            if (s.record.estimator == estimator && s.record.snr_db == snr_db &&
                (n_pilots == 0 || s.record.n_pilots == n_pilots))
                return s;
        throw std::out_of_range("no result for estimator '" + estimator + "' at " + fmt_double(snr_db) + " dB");
    }

    void write_result_csv(std::ostream &os, const ExperimentResult &result)
    {
        os << result_csv_header << '\n';
        for (const auto &s : result.series)
        {
            const auto &r = s.record;
            os << r.estimator << ',' << r.model << ',' << fmt_double(r.snr_db) << ',' << r.n_pilots << ','
               << fmt_double(r.mse) << ',' << fmt_double(r.stderr_) << ',' << r.n << '\n';
        }
    }

    void write_result_json(std::ostream &os, const ExperimentResult &result)
    {
        nlohmann::ordered_json doc;
        doc["config_hash"] = hex64(result.config_hash);
        doc["columns"] = {"snr_db", "n_pilots", "mse", "stderr", "n"};
        nlohmann::ordered_json series = nlohmann::ordered_json::array();
        std::map<std::pair<std::string, std::string>, std::size_t> index;
        for (const auto &s : result.series)
        {
            const auto &r = s.record;
            const auto key = std::make_pair(r.estimator, r.model);
            auto it = index.find(key);
            if (it == index.end())
            {
                it = index.emplace(key, series.size()).first;
                series.push_back({{"estimator", r.estimator}, {"model", r.model}, {"points", nlohmann::ordered_json::array()}});
            }
            series[it->second]["points"].push_back({r.snr_db, r.n_pilots, r.mse, r.stderr_, r.n});
        }
        doc["series"] = std::move(series);
        os << doc.dump(2) << '\n';
    }

    // ---- evaluation ----------------------------------------------------------

    ExperimentResult evaluate_estimators(std::span<const ChannelGrid> grids, const PilotPattern &pattern,
                                         std::span<const NamedEstimator> estimators, std::span<const double> snrs_db,
                                         const EvaluationSetup &setup)
    {
        if (grids.empty())
            throw std::invalid_argument("evaluate_estimators: no grids");
        const CVector symbols = unit_pilot_symbols(pattern);
        const double cells = double(pattern.spec().n_cells());
        ExperimentResult result;

        auto observe = [&](double snr, std::uint64_t base) {
            std::vector<PilotObservation> obs;
            obs.reserve(grids.size());
            const NoiseSpec noise{snr};
            for (std::size_t g = 0; g < grids.size(); ++g)
                obs.push_back(ls_estimate(grids[g], pattern, symbols, noise, derive_seed(base, snr_stream(snr), g)));
            return obs;
        };

        for (double snr : snrs_db)
        {
            std::vector<PilotObservation> shared;
            if (setup.paired)
                shared = observe(snr, setup.seed);
            for (std::size_t e = 0; e < estimators.size(); ++e)
            {
                const auto &est = estimators[e];
                const auto obs = setup.paired ? std::vector<PilotObservation>{} : observe(snr, derive_seed(setup.seed, 0xE0, e + 1));
                const auto &use = setup.paired ? shared : obs;
                const BatchEstimator run = est.at_snr(snr);
                std::vector<double> err(grids.size());
                parallel_for(grids.size(), setup.threads, [&](std::size_t b, std::size_t end) {
                    constexpr std::size_t chunk = 64;
                    for (std::size_t s = b; s < end; s += chunk)
                    {
                        const std::size_t n = std::min(chunk, end - s);
                        const auto out = run(std::span(use).subspan(s, n), grids.subspan(s, n));
                        if (out.size() != n)
                            throw std::logic_error("estimator '" + est.name + "' returned the wrong batch size");
                        for (std::size_t j = 0; j < n; ++j)
                            err[s + j] = (out[j] - grids[s + j].values).squaredNorm() / cells;
                    }
                });
                Series series;
                auto &r = series.record;
                r.estimator = est.name;
                r.model = setup.model_name;
                r.snr_db = snr;
                r.n_pilots = pattern.size();
                r.n = err.size();
                double sum = 0.0;
                for (double v : err)
                    sum += v;
                r.mse = sum / double(r.n);
                if (r.n > 1)
                {
                    double ss = 0.0;
                    for (double v : err)
                        ss += (v - r.mse) * (v - r.mse);
                    r.stderr_ = std::sqrt(ss / double(r.n - 1) / double(r.n));
                }
                series.per_grid = std::move(err);
                result.series.push_back(std::move(series));
            }
        }
        return result;
    }

    CorrelationModel oracle_correlations(const ExperimentConfig &cfg, const PilotPattern &pattern)
    {
        return estimate_correlations_oracle(cfg.channel, pattern, cfg.correlation_samples, derive_seed(cfg.seed, 0xC0));
    }

    CorrelationModel estimated_correlations(const ExperimentConfig &cfg, const PilotPattern &pattern,
                                            std::span<const ChannelGrid> train_grids, double snr_db)
    {
        const std::size_t n = std::min(cfg.estimated_frames, train_grids.size());
        if (n == 0)
            throw std::invalid_argument("estimated correlations need training grids");
        const NoiseSpec noise{snr_db};
        const CVector symbols = unit_pilot_symbols(pattern);
        std::vector<ReceivedFrame> frames;
        frames.reserve(n);
        for (std::size_t g = 0; g < n; ++g)
        {
            const auto seed = derive_seed(cfg.seed, 0xE5 ^ snr_stream(snr_db), g);
            frames.push_back({ls_estimate(train_grids[g], pattern, symbols, noise, seed),
                              ls_full_grid(train_grids[g], noise, seed)});
        }
        return estimate_correlations_empirical(frames, pattern, noise.noise_variance());
    }

    NamedEstimator make_builtin_estimator(const std::string &name, const BaselineInputs &in)
    {
        const auto pattern = in.pattern;
        const auto spec = pattern.spec();
        if (name == "perfect")
            return {name, [](double) -> BatchEstimator {
                        return [](std::span<const PilotObservation>, std::span<const ChannelGrid> truth) {
                            std::vector<CMatrix> out;
                            for (const auto &g : truth)
                                out.push_back(g.values);
                            return out;
                        };
                    }};
        if (name == "ls-interp")
            return {name, [spec](double) -> BatchEstimator {
                        return [spec](std::span<const PilotObservation> obs, std::span<const ChannelGrid>) {
                            std::vector<CMatrix> out;
                            for (const auto &o : obs)
                                out.push_back(interpolate_pilots(o, spec));
                            return out;
                        };
                    }};

        auto linear = [name](std::function<CorrelationModel(double)> corr_at, CVector symbols) {
            return NamedEstimator{name, [corr_at, symbols](double snr) -> BatchEstimator {
                                      auto filter = std::make_shared<const MmseFilter>(
                                          build_mmse_filter(corr_at(snr), NoiseSpec{snr}, symbols));
                                      return [filter](std::span<const PilotObservation> obs, std::span<const ChannelGrid>) {
                                          std::vector<CMatrix> out;
                                          for (const auto &o : obs)
                                              out.push_back(apply_mmse(*filter, o).values);
                                          return out;
                                      };
                                  }};
        };
        const CVector symbols = unit_pilot_symbols(pattern);
        if (name == "mmse-oracle" || name == "almmse")
        {
            if (!in.oracle)
                throw std::invalid_argument("estimator '" + name + "' needs oracle correlations");
            auto corr = std::make_shared<const CorrelationModel>(*in.oracle);
            if (name == "mmse-oracle")
                return linear([corr](double) { return *corr; }, symbols);
            const std::size_t rt = in.config->almmse_rank_time, rf = in.config->almmse_rank_freq;
            return {name, [corr, rt, rf](double snr) -> BatchEstimator {
                        return [corr, rt, rf, snr](std::span<const PilotObservation> obs, std::span<const ChannelGrid>) {
                            std::vector<CMatrix> out;
                            for (const auto &o : obs)
                                out.push_back(almmse_estimate(o, *corr, NoiseSpec{snr}, rt, rf).values);
                            return out;
                        };
                    }};
        }
        if (name == "mmse-analytic")
        {
            auto corr = std::make_shared<const CorrelationModel>(analytic_correlations(in.config->channel, pattern));
            return linear([corr](double) { return *corr; }, symbols);
        }
        if (name == "mmse-estimated")
        {
            if (!in.config || in.train_grids.empty())
                throw std::invalid_argument("estimator 'mmse-estimated' needs training grids");
            const ExperimentConfig *cfg = in.config;
            const auto train = in.train_grids;
            return linear([cfg, pattern, train](double snr) { return estimated_correlations(*cfg, pattern, train, snr); },
                          symbols);
        }
        throw std::invalid_argument("unknown estimator '" + name + "'");
    }

    NamedEstimator make_channelnet_estimator(const std::string &name, std::shared_ptr<const ChannelNetModel> model)
    {
        return {name, [model](double) -> BatchEstimator {
                    return [model](std::span<const PilotObservation> obs, std::span<const ChannelGrid>) {
                        return estimate_all(*model, obs);
                    };
                }};
    }

    NamedEstimator make_policy_estimator(const std::string &name, const SnrSwitchPolicy &policy,
                                         std::map<std::string, std::shared_ptr<const ChannelNetModel>> models)
    {
        policy.validate();
        return {name, [policy, models](double snr) -> BatchEstimator {
                    const auto it = models.find(policy.select(snr));
                    if (it == models.end())
                        throw std::runtime_error("policy names a model that was not loaded");
                    auto model = it->second;
                    return [model](std::span<const PilotObservation> obs, std::span<const ChannelGrid>) {
                        return estimate_all(*model, obs);
                    };
                }};
    }

    // ---- training ------------------------------------------------------------

    TrainOutcome train_channelnet(const ExperimentConfig &cfg, std::span<const ChannelGrid> train_grids,
                                  std::span<const ChannelGrid> val_grids, const PilotPattern &pattern, double snr_db,
                                  Stage stage, std::optional<ChannelNetModel> start, std::ostream *log_csv)
    {
        if (train_grids.empty() || val_grids.empty())
            throw std::invalid_argument("train_channelnet: empty training or validation set");
        const NoiseSpec noise{snr_db};
        const auto train = make_plane_dataset(train_grids, pattern, noise, derive_seed(cfg.seed, 0x71, snr_stream(snr_db)));
        const auto val = make_plane_dataset(val_grids, pattern, noise, derive_seed(cfg.seed, 0x72, snr_stream(snr_db)));

        TrainOutcome out;
        if (start)
        {
            if (start->pattern_hash != pattern.hash())
                throw std::invalid_argument("train_channelnet: starting model uses a different pilot pattern");
            out.model = std::move(*start);
        }
        else
        {
            if (stage == Stage::ir)
                throw std::invalid_argument("train_channelnet: stage ir needs a trained stage-1 model");
            out.model = make_channelnet(pattern, cfg.seed, float(snr_db));
            out.model.ir = make_dncnn(cfg.seed, cfg.dncnn_depth);
        }
        out.model.trained_snr_db = float(snr_db);
        out.model.metadata.seed = cfg.seed;
        out.model.metadata.dataset_id = cfg.name + ":" + hex64(cfg.hash());

        auto with_log = [log_csv](TrainConfig tc, const char *label) {
            auto user = tc.on_epoch;
            tc.on_epoch = [log_csv, label, user](const EpochLog &l) {
                if (log_csv)
                    *log_csv << label << ',' << l.epoch << ',' << fmt_double(l.train_loss) << ','
                             << fmt_double(l.val_loss) << ',' << l.seconds << std::endl;
                if (user)
                    user(l);
            };
            return tc;
        };
        if (stage != Stage::ir)
        {
            auto tc = with_log(cfg.stage1, "sr");
            tc.seed = derive_seed(cfg.seed, 0x51, snr_stream(snr_db));
            out.stage1 = train_stage1(out.model, train, val, tc);
        }
        if (stage != Stage::sr)
        {
            auto tc = with_log(cfg.stage2, "ir");
            tc.seed = derive_seed(cfg.seed, 0x52, snr_stream(snr_db));
            out.stage2 = train_stage2(out.model, train, val, tc);
        }
        return out;
    }

    SnrSwitchPolicy calibrate_policy(const ChannelNetModel &low, const std::string &low_path, const ChannelNetModel &high,
                                     const std::string &high_path, std::span<const ChannelGrid> val_grids,
                                     const PilotPattern &pattern, std::span<const double> sweep_db, std::uint64_t seed)
    {
        if (sweep_db.empty())
            throw std::invalid_argument("calibrate_policy: empty SNR sweep");
        std::vector<double> sweep(sweep_db.begin(), sweep_db.end());
        std::sort(sweep.begin(), sweep.end());
        const NamedEstimator ests[] = {make_channelnet_estimator("low", std::make_shared<const ChannelNetModel>(low)),
                                       make_channelnet_estimator("high", std::make_shared<const ChannelNetModel>(high))};
        const auto res = evaluate_estimators(val_grids, pattern, ests, sweep, {"", derive_seed(seed, 0xCA), true, 1});

        SnrSwitchPolicy policy;
        for (std::size_t j = 0; j < sweep.size(); ++j)
            if (res.find("high", sweep[j]).record.mse < res.find("low", sweep[j]).record.mse)
            {
                const double bound = j == 0 ? -std::numeric_limits<double>::infinity() : 0.5 * (sweep[j - 1] + sweep[j]);
                if (j > 0)
                    policy.entries.push_back({bound, low_path});
                policy.entries.push_back({std::numeric_limits<double>::infinity(), high_path});
                return policy;
            }
        warn("calibrate_policy: the high-SNR model never beats the low-SNR model on the sweep");
        policy.entries.push_back({std::numeric_limits<double>::infinity(), low_path});
        return policy;
    }

    // ---- commands ------------------------------------------------------------

    namespace
    {
        ExperimentConfig apply_options(ExperimentConfig cfg, const CommandOptions &opt)
        {
            if (opt.seed)
                cfg.seed = *opt.seed;
            if (opt.single_thread)
                cfg.threads = 1;
            return cfg;
        }

        void ensure_out_dir(const ExperimentConfig &cfg)
        {
            std::error_code ec;
            std::filesystem::create_directories(cfg.out_dir(), ec);
            if (ec)
                throw std::runtime_error("cannot create output directory '" + cfg.out_dir().string() + "': " + ec.message());
        }

        void check_overwrite(const std::filesystem::path &path, bool overwrite)
        {
            if (!overwrite && std::filesystem::exists(path))
                throw std::runtime_error("'" + path.string() + "' exists; pass --overwrite to replace it");
        }

        std::uint64_t file_hash(const std::filesystem::path &path)
        {
            std::ifstream is(path, std::ios::binary);
            std::ostringstream buf;
            buf << is.rdbuf();
            return fnv1a(buf.str());
        }

        std::filesystem::path corr_path(const ExperimentConfig &cfg, const std::string &kind, std::size_t n_pilots,
                                        std::optional<double> snr = std::nullopt)
        {
            std::string name = "corr_" + kind + "_" + lower(cfg.channel.pdp.name) + "_p" + std::to_string(n_pilots);
            if (snr)
                name += "_" + snr_tag(*snr) + "dB";
            return cfg.out_dir() / (name + ".corr");
        }

        struct Artifacts
        {
            std::vector<ChannelGrid> train;
            std::optional<CorrelationModel> oracle;
        };

        std::vector<NamedEstimator> build_estimators(const ExperimentConfig &cfg, const std::vector<std::string> &names,
                                                     const PilotPattern &pattern, Artifacts &art,
                                                     std::shared_ptr<const ChannelNetModel> channelnet)
        {
            std::vector<NamedEstimator> out;
            BaselineInputs in{&cfg, pattern, art.oracle, art.train};
            for (const auto &name : names)
            {
                if (name == "channelnet")
                {
                    if (channelnet)
                    {
                        out.push_back(make_channelnet_estimator(name, channelnet));
                        continue;
                    }
                    if (cfg.policy_file.empty())
                        throw std::runtime_error("estimator 'channelnet' needs evaluate.policy");
                    const auto ppath = resolve(cfg, cfg.policy_file);
                    std::ifstream is(ppath);
                    if (!is)
                        throw std::runtime_error("policy '" + ppath.string() + "' not found; run 'channelnet train --stage policy'");
                    const auto policy = read_policy(is);
                    std::map<std::string, std::shared_ptr<const ChannelNetModel>> models;
                    for (const auto &e : policy.entries)
                        if (!models.contains(e.model))
                            models[e.model] = load_model_checked(resolve(cfg, e.model), pattern);
                    out.push_back(make_policy_estimator(name, policy, std::move(models)));
                }
                else if (const auto it = cfg.models.find(name); it != cfg.models.end())
                    out.push_back(make_channelnet_estimator(name, load_model_checked(resolve(cfg, it->second), pattern)));
                else
                    out.push_back(make_builtin_estimator(name, in));
            }
            return out;
        }

        void write_results(const ExperimentConfig &cfg, const ExperimentResult &res, const std::string &stem)
        {
            auto csv = open_text_out(cfg.out_dir() / (stem + ".csv"));
            write_result_csv(csv, res);
            auto json = open_text_out(cfg.out_dir() / (stem + ".json"));
            write_result_json(json, res);
        }

        Stage parse_stage(const std::string &s)
        {
            if (s == "sr")
                return Stage::sr;
            if (s == "ir")
                return Stage::ir;
            if (s == "both")
                return Stage::both;
            throw std::invalid_argument("unknown stage '" + s + "' (expected sr, ir, both or policy)");
        }
    }

    void cmd_generate(ExperimentConfig cfg, const CommandOptions &opt)
    {
        cfg = apply_options(std::move(cfg), opt);
        ensure_out_dir(cfg);
        const std::pair<std::string, std::size_t> splits[] = {{"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}};
        const auto manifest_path = cfg.out_dir() / (lower(cfg.channel.pdp.name) + "_manifest.json");
        for (const auto &[split, n] : splits)
            check_overwrite(cfg.dataset_path(split), opt.overwrite);
        check_overwrite(manifest_path, opt.overwrite);

        nlohmann::ordered_json manifest;
        manifest["name"] = cfg.name;
        manifest["config_hash"] = hex64(cfg.hash());
        manifest["seed"] = cfg.seed;
        manifest["profile"] = cfg.channel.pdp.name;
        for (const auto &[split, n] : splits)
        {
            const auto grids = generate_split(cfg, split, n);
            const auto path = cfg.dataset_path(split);
            write_dataset(path, cfg.channel.grid, grids);
            manifest["splits"][split] = {{"file", path.filename().string()},
                                         {"count", n},
                                         {"seed_stream", split_stream(split)},
                                         {"fnv1a", hex64(file_hash(path))}};
            progress(opt, "wrote " + path.string() + " (" + std::to_string(n) + " grids)");
        }
        manifest["config"] = cfg.canonical();
        auto os = open_text_out(manifest_path);
        os << manifest.dump(2) << '\n';
    }

    void cmd_train(ExperimentConfig cfg, const CommandOptions &opt)
    {
        cfg = apply_options(std::move(cfg), opt);
        ensure_out_dir(cfg);
        const auto pattern = cfg.pattern();
        const auto val = load_split(cfg, "val");

        if (opt.stage == "policy")
        {
            const auto lo = cfg.models.find("deep-low"), hi = cfg.models.find("deep-high");
            if (lo == cfg.models.end() || hi == cfg.models.end() || cfg.policy_file.empty())
                throw std::runtime_error("stage policy needs models.deep-low, models.deep-high and evaluate.policy");
            const auto low = load_model_checked(resolve(cfg, lo->second), pattern);
            const auto high = load_model_checked(resolve(cfg, hi->second), pattern);
            const auto policy = calibrate_policy(*low, lo->second.string(), *high, hi->second.string(), val, pattern,
                                                 cfg.policy_sweep_db, cfg.seed);
            const auto ppath = resolve(cfg, cfg.policy_file);
            check_overwrite(ppath, opt.overwrite);
            auto os = open_text_out(ppath);
            write_policy(os, policy);
            progress(opt, "wrote " + ppath.string());
            return;
        }

        const Stage stage = parse_stage(opt.stage);
        const double snr = opt.snr_db.value_or(cfg.train_snr_db);
        const auto path = cfg.model_path(snr, pattern.size());
        std::optional<ChannelNetModel> start;
        if (stage == Stage::ir)
        {
            if (!std::filesystem::exists(path))
                throw std::runtime_error("stage ir needs the stage-1 model '" + path.string() + "'; run --stage sr first");
            start = *load_model_checked(path, pattern);
        }
        else
            check_overwrite(path, opt.overwrite);
        const auto train = load_split(cfg, "train");
        const auto log_path = cfg.out_dir() / ("train_" + path.stem().string() + "_" + opt.stage + ".csv");
        auto log = open_text_out(log_path);
        log << "stage,epoch,train_loss,val_loss,seconds\n";
        auto echo = [&opt](const EpochLog &l) {
            progress(opt, "epoch " + std::to_string(l.epoch) + " train " + fmt_double(l.train_loss) + " val " +
                              fmt_double(l.val_loss));
        };
        cfg.stage1.on_epoch = echo;
        cfg.stage2.on_epoch = echo;
        auto outcome = train_channelnet(cfg, train, val, pattern, snr, stage, std::move(start), &log);
        save_model(path, outcome.model);
        progress(opt, "wrote " + path.string());
    }

    void cmd_baseline(ExperimentConfig cfg, const CommandOptions &opt)
    {
        cfg = apply_options(std::move(cfg), opt);
        ensure_out_dir(cfg);
        const auto pattern = cfg.pattern();
        const auto oracle_path = corr_path(cfg, "oracle", pattern.size());
        const auto analytic_path = corr_path(cfg, "analytic", pattern.size());
        check_overwrite(oracle_path, opt.overwrite);
        write_correlation(oracle_path, oracle_correlations(cfg, pattern));
        progress(opt, "wrote " + oracle_path.string());
        check_overwrite(analytic_path, opt.overwrite);
        write_correlation(analytic_path, analytic_correlations(cfg.channel, pattern));
        progress(opt, "wrote " + analytic_path.string());
        const auto train = load_split(cfg, "train");
        for (double snr : cfg.eval_snrs_db)
        {
            const auto path = corr_path(cfg, "estimated", pattern.size(), snr);
            check_overwrite(path, opt.overwrite);
            write_correlation(path, estimated_correlations(cfg, pattern, train, snr));
            progress(opt, "wrote " + path.string());
        }
    }

    ExperimentResult cmd_evaluate(ExperimentConfig cfg, const CommandOptions &opt)
    {
        cfg = apply_options(std::move(cfg), opt);
        ensure_out_dir(cfg);
        const auto pattern = cfg.pattern();
        const auto test = load_split(cfg, "test");
        Artifacts art;
        const auto needs = [&cfg](const char *n) { return std::find(cfg.estimators.begin(), cfg.estimators.end(), n) != cfg.estimators.end(); };
        if (needs("mmse-oracle") || needs("almmse"))
        {
            const auto path = corr_path(cfg, "oracle", pattern.size());
            if (!std::filesystem::exists(path))
                throw std::runtime_error("oracle correlations '" + path.string() + "' not found; run 'channelnet baseline' first");
            art.oracle = read_correlation(path);
        }
        if (needs("mmse-estimated"))
            art.train = load_split(cfg, "train");
        const auto estimators = build_estimators(cfg, cfg.estimators, pattern, art, nullptr);
        auto res = evaluate_estimators(test, pattern, estimators, cfg.eval_snrs_db,
                                       {lower(cfg.channel.pdp.name), derive_seed(cfg.seed, 0xEE), cfg.paired, cfg.threads});
        res.config_hash = cfg.hash();
        write_results(cfg, res, cfg.name + "_evaluate");
        progress(opt, "wrote " + (cfg.out_dir() / (cfg.name + "_evaluate.csv")).string());
        return res;
    }

    ExperimentResult cmd_pilot_sweep(ExperimentConfig cfg, const CommandOptions &opt)
    {
        cfg = apply_options(std::move(cfg), opt);
        ensure_out_dir(cfg);
        const auto test = load_split(cfg, "test");
        Artifacts art;
        art.train = load_split(cfg, "train");
        std::optional<std::vector<ChannelGrid>> val;
        const double snr = opt.snr_db.value_or(cfg.sweep_snr_db);
        ExperimentResult all;
        all.config_hash = cfg.hash();
        for (std::size_t count : cfg.sweep_counts)
        {
            const auto pattern = lattice_pattern_for_count(cfg.channel.grid, count);
            // reuse the baseline file when it describes this layout, so evaluate and sweep agree
            const auto saved = corr_path(cfg, "oracle", count);
            if (pattern == cfg.pattern() && std::filesystem::exists(saved))
                art.oracle = read_correlation(saved);
            else
                art.oracle = oracle_correlations(cfg, pattern);
            std::shared_ptr<const ChannelNetModel> net;
            if (std::find(cfg.sweep_estimators.begin(), cfg.sweep_estimators.end(), "channelnet") != cfg.sweep_estimators.end())
            {
                const auto path = cfg.model_path(snr, count);
                if (std::filesystem::exists(path) && !opt.overwrite)
                    net = load_model_checked(path, pattern);
                else
                {
                    if (!val)
                        val = load_split(cfg, "val");
                    progress(opt, "training ChannelNet for " + std::to_string(count) + " pilots");
                    auto outcome = train_channelnet(cfg, art.train, *val, pattern, snr, Stage::both);
                    save_model(path, outcome.model);
                    net = std::make_shared<const ChannelNetModel>(std::move(outcome.model));
                }
            }
            const auto estimators = build_estimators(cfg, cfg.sweep_estimators, pattern, art, net);
            const double snrs[] = {snr};
            auto res = evaluate_estimators(test, pattern, estimators, snrs,
                                           {lower(cfg.channel.pdp.name), derive_seed(cfg.seed, 0xEE), cfg.paired, cfg.threads});
            for (auto &s : res.series)
                all.series.push_back(std::move(s));
            progress(opt, "pilot count " + std::to_string(count) + " done");
        }
        write_results(cfg, all, cfg.name + "_pilot_sweep");
        return all;
    }
}
