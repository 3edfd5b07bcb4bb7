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
#include <iosfwd>
#include <string>
#include <vector>

#include "channelnet/channel_sim.hpp"

namespace channelnet
{
    struct PilotPosition
    {
        std::size_t subcarrier = 0;
        std::size_t timeslot = 0;

        auto operator<=>(const PilotPosition &) const = default;
    };

    /// Lattice pilot layout on a fixed grid. Positions are unique, in bounds, and span
    /// at least two subcarriers and two timeslots.
    class PilotPattern
    {
    public:
        PilotPattern(OfdmGridSpec spec, std::vector<PilotPosition> positions);

        const OfdmGridSpec &spec() const noexcept { return spec_; }
        const std::vector<PilotPosition> &positions() const noexcept { return positions_; }
        std::size_t size() const noexcept { return positions_.size(); }

        /// Sorted distinct pilot timeslots.
        std::vector<std::size_t> timeslots() const;
        /// Fingerprint over grid shape and positions (order-sensitive).
        std::uint64_t hash() const;

        bool operator==(const PilotPattern &other) const
        {
            return spec_.n_subcarriers == other.spec_.n_subcarriers && spec_.n_timeslots == other.spec_.n_timeslots &&
                   positions_ == other.positions_;
        }

    private:
        OfdmGridSpec spec_;
        std::vector<PilotPosition> positions_;
    };

    /// Pilots at (offset_s + m * freq_spacing, symbol_s) for every in-range m, per listed symbol.
    PilotPattern lte_lattice_pattern(const OfdmGridSpec &spec, const std::vector<std::size_t> &symbols,
                                     std::size_t freq_spacing, const std::vector<std::size_t> &offsets);

    /// 48-pilot layout on the 72x14 frame: symbols {0,4,7,11}, spacing 6, staggered offsets 0/3.
    PilotPattern default_lte_pattern(const OfdmGridSpec &spec = {});

    /// Staggered lattice with exactly `count` pilots. Candidates use a prefix of the symbol set
    /// {0,4,7,11} (at least two symbols) with offsets alternating 0 and spacing/2; spacing 6 is
    /// preferred so the 24/36/48 layouts nest. Throws if no candidate hits the count.
    PilotPattern lattice_pattern_for_count(const OfdmGridSpec &spec, std::size_t count);

    /// One "i,k" line per pilot.
    void write_pattern(std::ostream &os, const PilotPattern &pattern);
    PilotPattern read_pattern(std::istream &is, const OfdmGridSpec &spec);

    /// LS pilot values (H x_p + z) / x_p at each pilot, with SNR metadata.
    struct PilotObservation
    {
        PilotPattern pattern;
        CVector values;
        double snr_db = 0.0;
    };

    /// Unit-modulus pilot symbols (all ones) for a pattern.
    CVector unit_pilot_symbols(const PilotPattern &pattern);

    /// Noise is read from noise_field(spec, noise, seed) at the pilot cells, so patterns that
    /// share cells share noise for a given seed.
    PilotObservation ls_estimate(const ChannelGrid &grid, const PilotPattern &pattern, const CVector &pilot_symbols,
                                 const NoiseSpec &noise, std::uint64_t seed);

    /// Full-grid LS observation Y/X with the same noise realization ls_estimate draws.
    ChannelGrid ls_full_grid(const ChannelGrid &grid, const NoiseSpec &noise, std::uint64_t seed);

    /// Separable linear interpolation of pilot values to the full grid: along frequency within each
    /// pilot timeslot, then along time, with nearest-pilot replication past the outermost pilots.
    CMatrix interpolate_pilots(const PilotObservation &obs, const OfdmGridSpec &spec);
    RealImagImages interpolate_to_grid(const PilotObservation &obs, const OfdmGridSpec &spec);

    /// The interpolation as an explicit n_cells x n_pilots matrix (subcarrier-major rows).
    CMatrix interpolation_matrix(const PilotPattern &pattern);
}
