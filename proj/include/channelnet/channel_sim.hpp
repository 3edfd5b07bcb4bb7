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

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "channelnet/common.hpp"

namespace channelnet
{
    inline constexpr double speed_of_light = 299792458.0;

    /// Time-frequency resource grid geometry: n_subcarriers x n_timeslots cells.
    struct OfdmGridSpec
    {
        std::size_t n_subcarriers = 72;
        std::size_t n_timeslots = 14;
        double subcarrier_spacing = 15e3;    // Hz
        double symbol_duration = 1e-3 / 14.; // s, uniform (cyclic prefix differences ignored)

        std::size_t n_cells() const noexcept { return n_subcarriers * n_timeslots; }

        /// Subcarrier-major vectorization index, shared by every matrix that spans the grid.
        std::size_t cell_index(std::size_t subcarrier, std::size_t timeslot) const noexcept
        {
            return subcarrier * n_timeslots + timeslot;
        }

        void validate() const;
        bool operator==(const OfdmGridSpec &) const = default;
    };

    struct PowerDelayProfile
    {
        std::string name;
        std::vector<double> tap_delays; // s
        std::vector<double> tap_powers; // linear, sums to 1 once normalized

        /// Builds a profile from powers in dB and normalizes to unit total power.
        static PowerDelayProfile from_db(std::string name, std::vector<double> delays_s, const std::vector<double> &powers_db);

        /// ITU-R M.1225 Vehicular A.
        static PowerDelayProfile vehicular_a();
        /// Stanford University Interim SUI-5 (long delay spread).
        static PowerDelayProfile sui5();
        /// Single tap at zero delay (flat fading).
        static PowerDelayProfile flat();
        /// Looks up "veha", "sui5" or "flat" (case-insensitive).
        static PowerDelayProfile by_name(const std::string &name);

        void validate() const;
        double max_delay() const { return tap_delays.empty() ? 0.0 : tap_delays.back(); }
    };

    struct DopplerSpec
    {
        double carrier_frequency = 2.1e9; // Hz
        double speed = 50.0 / 3.6;        // m/s
        std::size_t n_sinusoids = 32;

        static DopplerSpec from_speed_kmh(double kmh, double carrier_hz = 2.1e9);

        double max_doppler() const noexcept { return speed * carrier_frequency / speed_of_light; }
        void validate() const;
    };

    /// Everything the statistical generator needs to draw a grid.
    struct ChannelConfig
    {
        OfdmGridSpec grid;
        PowerDelayProfile pdp = PowerDelayProfile::vehicular_a();
        DopplerSpec doppler;

        void validate() const;
    };

    /// Complex channel response H (n_subcarriers x n_timeslots).
    struct ChannelGrid
    {
        OfdmGridSpec spec;
        CMatrix values;

        ChannelGrid() = default;
        ChannelGrid(OfdmGridSpec s, CMatrix v);

        cdouble operator()(std::size_t i, std::size_t k) const { return values(Eigen::Index(i), Eigen::Index(k)); }
        /// Subcarrier-major vector of length n_cells.
        CVector vectorized() const;
        static ChannelGrid from_vector(const OfdmGridSpec &spec, const CVector &v);
    };

    /// Real and imaginary planes of a grid, each n_subcarriers x n_timeslots.
    struct RealImagImages
    {
        RMatrix real;
        RMatrix imag;
    };

    struct NoiseSpec
    {
        double snr_db = 12.0;

        static NoiseSpec noiseless() { return {std::numeric_limits<double>::infinity()}; }
        double noise_variance() const { return noise_variance_from_snr_db(snr_db); }
    };

    /// Tapped delay line with per-tap sum-of-sinusoids Jakes fading:
    /// H[i,k] = sum_l g_l(k T) exp(-j 2 pi i df tau_l). Deterministic in seed.
    ChannelGrid generate_channel_grid(const OfdmGridSpec &spec, const PowerDelayProfile &pdp,
                                      const DopplerSpec &dop, std::uint64_t seed);
    ChannelGrid generate_channel_grid(const ChannelConfig &config, std::uint64_t seed);

    /// Circular complex Gaussian field of variance sigma^2 per cell (zeros when noiseless).
    CMatrix noise_field(const OfdmGridSpec &spec, const NoiseSpec &noise, std::uint64_t seed);

    /// Y = H .* X + Z.
    CMatrix apply_channel(const ChannelGrid &grid, const CMatrix &symbols, const NoiseSpec &noise, std::uint64_t seed);

    RealImagImages grid_to_images(const ChannelGrid &grid);
    ChannelGrid images_to_grid(const RealImagImages &images, const OfdmGridSpec &spec);
    ChannelGrid images_to_grid(const RealImagImages &images);

    /// Monte Carlo estimate of E[H(t) H*(t + lag T)] / E|H|^2, averaged over cells.
    cdouble empirical_time_autocorr(const ChannelConfig &config, std::size_t lag, std::size_t n_realizations,
                                    std::uint64_t seed);

    /// Monte Carlo estimate of E[H[i+m,k] H*[i,k]], averaged over cells.
    cdouble empirical_freq_corr(const ChannelConfig &config, std::size_t offset, std::size_t n_realizations,
                                std::uint64_t seed);

    /// Closed-form E[H[i+di,k+dk] H*[i,k]] of the generator.
    cdouble analytic_correlation(const ChannelConfig &config, std::ptrdiff_t subcarrier_lag, std::ptrdiff_t timeslot_lag);
}
