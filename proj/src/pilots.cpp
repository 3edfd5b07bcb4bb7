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

#include "channelnet/pilots.hpp"

#include <algorithm>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace channelnet
{
    PilotPattern::PilotPattern(OfdmGridSpec spec, std::vector<PilotPosition> positions)
        : spec_(spec), positions_(std::move(positions))
    {
        spec_.validate();
        std::set<PilotPosition> seen;
        std::set<std::size_t> subcarriers, timeslots;
        for (const auto &p : positions_)
        {
            if (p.subcarrier >= spec_.n_subcarriers || p.timeslot >= spec_.n_timeslots)
                throw std::invalid_argument("PilotPattern: position (" + std::to_string(p.subcarrier) + "," +
                                            std::to_string(p.timeslot) + ") out of bounds");
            if (!seen.insert(p).second)
                throw std::invalid_argument("PilotPattern: duplicate position (" + std::to_string(p.subcarrier) + "," +
                                            std::to_string(p.timeslot) + ")");
            subcarriers.insert(p.subcarrier);
            timeslots.insert(p.timeslot);
        }
        if (positions_.size() < 4 || subcarriers.size() < 2 || timeslots.size() < 2)
            throw std::invalid_argument("PilotPattern: need >= 4 pilots spanning >= 2 subcarriers and >= 2 timeslots, got " +
                                        std::to_string(positions_.size()) + " pilots");
    }

    std::vector<std::size_t> PilotPattern::timeslots() const
    {
        std::set<std::size_t> ts;
        for (const auto &p : positions_)
            ts.insert(p.timeslot);
        return {ts.begin(), ts.end()};
    }

    std::uint64_t PilotPattern::hash() const
    {
        std::ostringstream os;
        os << spec_.n_subcarriers << 'x' << spec_.n_timeslots << ':';
        for (const auto &p : positions_)
            os << p.subcarrier << ',' << p.timeslot << ';';
        return fnv1a(os.str());
    }

    PilotPattern lte_lattice_pattern(const OfdmGridSpec &spec, const std::vector<std::size_t> &symbols,
                                     std::size_t freq_spacing, const std::vector<std::size_t> &offsets)
    {
        if (freq_spacing == 0)
            throw std::invalid_argument("lte_lattice_pattern: frequency spacing must be positive");
        if (symbols.size() != offsets.size())
            throw std::invalid_argument("lte_lattice_pattern: one offset per pilot symbol required");
        std::vector<PilotPosition> positions;
        std::set<PilotPosition> seen;
        for (std::size_t s = 0; s < symbols.size(); ++s)
        {
            if (symbols[s] >= spec.n_timeslots)
                throw std::invalid_argument("lte_lattice_pattern: pilot symbol " + std::to_string(symbols[s]) + " out of range");
            if (offsets[s] >= freq_spacing)
                throw std::invalid_argument("lte_lattice_pattern: offset must be below the frequency spacing");
            for (std::size_t i = offsets[s]; i < spec.n_subcarriers; i += freq_spacing)
            {
                PilotPosition p{i, symbols[s]};
                if (!seen.insert(p).second)
                    throw std::invalid_argument("lte_lattice_pattern: duplicate pilot position");
                positions.push_back(p);
            }
        }
        if (positions.empty())
            throw std::invalid_argument("lte_lattice_pattern: pattern is empty");
        return {spec, std::move(positions)};
    }

    PilotPattern default_lte_pattern(const OfdmGridSpec &spec)
    {
        return lte_lattice_pattern(spec, {0, 4, 7, 11}, 6, {0, 3, 0, 3});
    }

    PilotPattern lattice_pattern_for_count(const OfdmGridSpec &spec, std::size_t count)
    {
        const std::vector<std::size_t> crs_symbols{0, 4, 7, 11};
        struct Candidate
        {
            std::size_t spacing, n_symbols;
        };
        std::vector<Candidate> candidates;
        for (std::size_t s = 1; s <= spec.n_subcarriers; ++s)
            for (std::size_t n = crs_symbols.size(); n >= 2; --n)
                candidates.push_back({s, n});
        std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) {
            const auto da = std::abs(long(a.spacing) - 6), db = std::abs(long(b.spacing) - 6);
            return da != db ? da < db : a.spacing < b.spacing;
        });

        for (const auto &c : candidates)
        {
            std::vector<std::size_t> symbols, offsets;
            for (std::size_t j = 0; j < c.n_symbols; ++j)
            {
                if (crs_symbols[j] >= spec.n_timeslots)
                    break;
                symbols.push_back(crs_symbols[j]);
                offsets.push_back(j % 2 == 0 ? 0 : c.spacing / 2);
            }
            if (symbols.size() != c.n_symbols)
                continue;
            std::size_t total = 0;
            for (auto off : offsets)
                total += off < spec.n_subcarriers ? (spec.n_subcarriers - off + c.spacing - 1) / c.spacing : 0;
            if (total != count)
                continue;
            try
            {
                return lte_lattice_pattern(spec, symbols, c.spacing, offsets);
            }
            catch (const std::invalid_argument &)
            {
                continue;
            }
        }
        throw std::invalid_argument("lattice_pattern_for_count: no lattice layout yields " + std::to_string(count) + " pilots");
    }

    void write_pattern(std::ostream &os, const PilotPattern &pattern)
    {
        for (const auto &p : pattern.positions())
            os << p.subcarrier << ',' << p.timeslot << '\n';
    }

    PilotPattern read_pattern(std::istream &is, const OfdmGridSpec &spec)
    {
        std::vector<PilotPosition> positions;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line))
        {
            ++line_no;
            if (line.empty() || line[0] == '#')
                continue;
            std::istringstream ls(line);
            long i = -1, k = -1;
            char comma = 0;
            if (!(ls >> i >> comma >> k) || comma != ',' || i < 0 || k < 0)
                throw FormatError(FormatError::Kind::malformed, "pattern line " + std::to_string(line_no) + ": expected 'i,k'");
            positions.push_back({std::size_t(i), std::size_t(k)});
        }
        return {spec, std::move(positions)};
    }

    CVector unit_pilot_symbols(const PilotPattern &pattern)
    {
        return CVector::Ones(Eigen::Index(pattern.size()));
    }

    PilotObservation ls_estimate(const ChannelGrid &grid, const PilotPattern &pattern, const CVector &pilot_symbols,
                                 const NoiseSpec &noise, std::uint64_t seed)
    {
        if (pilot_symbols.size() != Eigen::Index(pattern.size()))
            throw std::invalid_argument("ls_estimate: one pilot symbol per pilot position required");
        if (grid.spec.n_subcarriers != pattern.spec().n_subcarriers || grid.spec.n_timeslots != pattern.spec().n_timeslots)
            throw std::invalid_argument("ls_estimate: pattern grid does not match channel grid");
        for (Eigen::Index m = 0; m < pilot_symbols.size(); ++m)
            if (std::abs(pilot_symbols(m)) == 0.0)
                throw std::invalid_argument("ls_estimate: zero-magnitude pilot symbol at index " + std::to_string(m));

        const CMatrix z = noise_field(grid.spec, noise, seed);
        CVector values(Eigen::Index(pattern.size()));
        for (std::size_t m = 0; m < pattern.size(); ++m)
        {
            const auto &p = pattern.positions()[m];
            const auto i = Eigen::Index(p.subcarrier), k = Eigen::Index(p.timeslot);
            const cdouble x = pilot_symbols(Eigen::Index(m));
            const cdouble y = grid.values(i, k) * x + z(i, k);
            values(Eigen::Index(m)) = y / x;
        }
        return {pattern, std::move(values), noise.snr_db};
    }

    ChannelGrid ls_full_grid(const ChannelGrid &grid, const NoiseSpec &noise, std::uint64_t seed)
    {
        return {grid.spec, grid.values + noise_field(grid.spec, noise, seed)};
    }

    namespace
    {
        // Linear interpolation weights along one axis from sorted anchor coordinates.
        struct AxisWeight
        {
            std::size_t lo, hi;
            double w_hi;
        };

        AxisWeight axis_weight(const std::vector<std::size_t> &anchors, std::size_t x)
        {
            if (x <= anchors.front())
                return {0, 0, 0.0};
            if (x >= anchors.back())
                return {anchors.size() - 1, anchors.size() - 1, 0.0};
            const auto it = std::upper_bound(anchors.begin(), anchors.end(), x);
            const std::size_t hi = std::size_t(it - anchors.begin());
            const std::size_t lo = hi - 1;
            const double t = double(x - anchors[lo]) / double(anchors[hi] - anchors[lo]);
            return {lo, hi, t};
        }
    }

    CMatrix interpolate_pilots(const PilotObservation &obs, const OfdmGridSpec &spec)
    {
        const auto &pattern = obs.pattern;
        if (spec.n_subcarriers != pattern.spec().n_subcarriers || spec.n_timeslots != pattern.spec().n_timeslots)
            throw std::invalid_argument("interpolate_to_grid: pattern grid does not match target grid");
        if (obs.values.size() != Eigen::Index(pattern.size()))
            throw std::invalid_argument("interpolate_to_grid: observation length does not match pattern");

        // Pilots grouped by timeslot, sorted by subcarrier.
        std::map<std::size_t, std::vector<std::pair<std::size_t, cdouble>>> by_slot;
        for (std::size_t m = 0; m < pattern.size(); ++m)
        {
            const auto &p = pattern.positions()[m];
            by_slot[p.timeslot].emplace_back(p.subcarrier, obs.values(Eigen::Index(m)));
        }
        if (by_slot.size() < 2)
            throw std::invalid_argument("interpolate_to_grid: pattern is not interpolable (single timeslot)");

        const auto n_s = spec.n_subcarriers;
        std::vector<std::size_t> slots;
        CMatrix columns(Eigen::Index(n_s), Eigen::Index(by_slot.size()));
        for (auto &[slot, pilots] : by_slot)
        {
            std::sort(pilots.begin(), pilots.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
            std::vector<std::size_t> anchors;
            for (const auto &pv : pilots)
                anchors.push_back(pv.first);
            const auto c = Eigen::Index(slots.size());
            for (std::size_t i = 0; i < n_s; ++i)
            {
                const auto w = axis_weight(anchors, i);
                columns(Eigen::Index(i), c) = w.w_hi == 0.0 ? pilots[w.lo].second
                                                             : (1.0 - w.w_hi) * pilots[w.lo].second + w.w_hi * pilots[w.hi].second;
            }
            slots.push_back(slot);
        }

        CMatrix out(Eigen::Index(n_s), Eigen::Index(spec.n_timeslots));
        for (std::size_t k = 0; k < spec.n_timeslots; ++k)
        {
            const auto w = axis_weight(slots, k);
            if (w.w_hi == 0.0)
                out.col(Eigen::Index(k)) = columns.col(Eigen::Index(w.lo));
            else
                out.col(Eigen::Index(k)) =
                    (1.0 - w.w_hi) * columns.col(Eigen::Index(w.lo)) + w.w_hi * columns.col(Eigen::Index(w.hi));
        }
        return out;
    }

    RealImagImages interpolate_to_grid(const PilotObservation &obs, const OfdmGridSpec &spec)
    {
        const CMatrix h = interpolate_pilots(obs, spec);
        return {h.real(), h.imag()};
    }

    CMatrix interpolation_matrix(const PilotPattern &pattern)
    {
        const auto &spec = pattern.spec();
        CMatrix b(Eigen::Index(spec.n_cells()), Eigen::Index(pattern.size()));
        PilotObservation unit{pattern, CVector::Zero(Eigen::Index(pattern.size())), 0.0};
        for (std::size_t m = 0; m < pattern.size(); ++m)
        {
            unit.values.setZero();
            unit.values(Eigen::Index(m)) = 1.0;
            b.col(Eigen::Index(m)) = ChannelGrid(spec, interpolate_pilots(unit, spec)).vectorized();
        }
        return b;
    }
}
