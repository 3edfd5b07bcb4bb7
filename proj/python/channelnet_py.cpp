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

#include <sstream>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "channelnet/experiment.hpp"

namespace py = pybind11;
using namespace channelnet;

namespace
{
    ChannelConfig channel_config(const std::string &profile, double speed_kmh)
    {
        ChannelConfig c;
        c.pdp = PowerDelayProfile::by_name(profile);
        c.doppler = DopplerSpec::from_speed_kmh(speed_kmh);
        c.validate();
        return c;
    }

    PilotObservation observation(const PilotPattern &pattern, const CVector &values, double snr_db)
    {
        if (values.size() != Eigen::Index(pattern.size()))
            throw std::invalid_argument("expected " + std::to_string(pattern.size()) + " pilot values");
        return {pattern, values, snr_db};
    }
}

PYBIND11_MODULE(_channelnet, m)
{
    m.doc() = "OFDM channel estimation: fading simulator, LS/MMSE baselines and ChannelNet";

    py::class_<PilotPattern>(m, "PilotPattern")
        .def_static("lte", [] { return default_lte_pattern(); }, "The 48-pilot LTE lattice on a 72 x 14 grid.")
        .def_static("for_count", [](std::size_t n) { return lattice_pattern_for_count(OfdmGridSpec{}, n); }, py::arg("count"))
        .def("__len__", &PilotPattern::size)
        .def_property_readonly("positions", [](const PilotPattern &p) {
            std::vector<std::pair<std::size_t, std::size_t>> out;
            for (const auto &q : p.positions())
                out.emplace_back(q.subcarrier, q.timeslot);
            return out;
        })
        .def("__eq__", [](const PilotPattern &a, const PilotPattern &b) { return a == b; });

    m.def("generate_channel_grid",
          [](std::uint64_t seed, const std::string &profile, double speed_kmh) {
              return generate_channel_grid(channel_config(profile, speed_kmh), seed).values;
          },
          py::arg("seed"), py::arg("profile") = "veha", py::arg("speed_kmh") = 50.0,
          "Complex 72 x 14 channel grid (subcarriers x OFDM symbols).");

    m.def("ls_estimate",
          [](const CMatrix &h, const PilotPattern &pattern, double snr_db, std::uint64_t seed) {
              const ChannelGrid grid(OfdmGridSpec{}, h);
              const NoiseSpec noise = std::isinf(snr_db) ? NoiseSpec::noiseless() : NoiseSpec{snr_db};
              return ls_estimate(grid, pattern, unit_pilot_symbols(pattern), noise, seed).values;
          },
          py::arg("h"), py::arg("pattern"), py::arg("snr_db"), py::arg("seed"),
          "Noisy least-squares pilot values (unit pilot symbols). snr_db = inf means noiseless.");

    m.def("interpolate",
          [](const PilotPattern &pattern, const CVector &values) {
              return interpolate_pilots(observation(pattern, values, 0.0), pattern.spec());
          },
          py::arg("pattern"), py::arg("values"), "Separable linear interpolation of pilot values to the full grid.");

    py::class_<CorrelationModel>(m, "CorrelationModel")
        .def_readonly("r_dp", &CorrelationModel::r_dp)
        .def_readonly("r_pp", &CorrelationModel::r_pp);

    m.def("oracle_correlations",
          [](const PilotPattern &pattern, std::size_t n_samples, std::uint64_t seed, const std::string &profile,
             double speed_kmh) {
              return estimate_correlations_oracle(channel_config(profile, speed_kmh), pattern, n_samples, seed);
          },
          py::arg("pattern"), py::arg("n_samples"), py::arg("seed"), py::arg("profile") = "veha",
          py::arg("speed_kmh") = 50.0);

    m.def("mmse_estimate",
          [](const CorrelationModel &corr, const PilotPattern &pattern, const CVector &values, double snr_db) {
              const NoiseSpec noise = std::isinf(snr_db) ? NoiseSpec::noiseless() : NoiseSpec{snr_db};
              const auto filter = build_mmse_filter(corr, noise, unit_pilot_symbols(pattern));
              return apply_mmse(filter, observation(pattern, values, snr_db)).values;
          },
          py::arg("corr"), py::arg("pattern"), py::arg("values"), py::arg("snr_db"));

    py::class_<ChannelNetModel>(m, "ChannelNet")
        .def_static("load", [](const std::filesystem::path &p) { return load_model(p); }, py::arg("path"))
        .def_static("untrained", [](const PilotPattern &p, std::uint64_t seed) { return make_channelnet(p, seed); },
                    py::arg("pattern"), py::arg("seed") = 1)
        .def("save", [](const ChannelNetModel &m, const std::filesystem::path &p) { save_model(p, m); }, py::arg("path"))
        .def_readonly("trained_snr_db", &ChannelNetModel::trained_snr_db)
        .def("estimate",
             [](const ChannelNetModel &model, const PilotPattern &pattern, const CVector &values, double snr_db) {
                 return estimate(model, observation(pattern, values, snr_db)).values;
             },
             py::arg("pattern"), py::arg("values"), py::arg("snr_db") = 0.0);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_static("load", &ExperimentConfig::load, py::arg("path"))
        .def_static("parse",
                    [](const std::string &text) {
                        std::istringstream is(text);
                        return ExperimentConfig::parse(is);
                    },
                    py::arg("text"))
        .def_readwrite("name", &ExperimentConfig::name)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("output_dir", &ExperimentConfig::output_dir)
        .def_property_readonly("hash", &ExperimentConfig::hash)
        .def("canonical", &ExperimentConfig::canonical);

    auto command = [](auto fn) {
        return [fn](const ExperimentConfig &cfg, bool overwrite, std::optional<std::uint64_t> seed) {
            CommandOptions opt;
            opt.overwrite = overwrite;
            opt.seed = seed;
            opt.single_thread = true;
            py::gil_scoped_release release;
            return fn(cfg, opt);
        };
    };
    m.def("generate", command([](const ExperimentConfig &c, const CommandOptions &o) { cmd_generate(c, o); }),
          py::arg("config"), py::arg("overwrite") = false, py::arg("seed") = py::none());
    m.def("baseline", command([](const ExperimentConfig &c, const CommandOptions &o) { cmd_baseline(c, o); }),
          py::arg("config"), py::arg("overwrite") = false, py::arg("seed") = py::none());
    m.def("evaluate",
          command([](const ExperimentConfig &c, const CommandOptions &o) {
              std::ostringstream os;
              write_result_csv(os, cmd_evaluate(c, o));
              return os.str();
          }),
          py::arg("config"), py::arg("overwrite") = false, py::arg("seed") = py::none(),
          "Runs the evaluation and returns the result CSV text.");
}
