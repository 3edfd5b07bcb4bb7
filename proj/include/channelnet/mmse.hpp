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
#include <span>

#include "channelnet/pilots.hpp"

namespace channelnet
{
    enum class CorrelationSource : std::uint8_t
    {
        oracle = 0,
        estimated = 1,
        analytic = 2
    };

    /// Channel correlations between the full grid and the pilots (r_dp, n_cells x n_pilots) and
    /// among the pilots (r_pp, n_pilots x n_pilots). Rows use the subcarrier-major cell index.
    struct CorrelationModel
    {
        CMatrix r_dp;
        CMatrix r_pp;
        CorrelationSource source = CorrelationSource::oracle;
    };

    /// Linear estimator h_d = A h_p (A is n_cells x n_pilots).
    struct MmseFilter
    {
        CMatrix a;
        double noise_variance = 0.0;
    };

    /// Monte Carlo correlations over noiseless grids drawn from the true generator.
    CorrelationModel estimate_correlations_oracle(const ChannelConfig &config, const PilotPattern &pattern,
                                                  std::size_t n_samples, std::uint64_t seed);

    /// Closed-form correlations of the generator (tapped delay line with Jakes time correlation).
    CorrelationModel analytic_correlations(const ChannelConfig &config, const PilotPattern &pattern);

    /// One received frame: LS values at the pilots and the full-grid LS observation Y/X of the same
    /// frame (its pilot cells carry the same noise as `pilots`).
    struct ReceivedFrame
    {
        PilotObservation pilots;
        ChannelGrid ls_grid;
    };

    /// Sample correlations from received frames. The noise contribution sigma^2 is removed from
    /// the r_pp diagonal and from the pilot rows of r_dp; r_pp is then clipped to PSD.
    CorrelationModel estimate_correlations_empirical(std::span<const ReceivedFrame> frames, const PilotPattern &pattern,
                                                     double noise_variance);

    /// A = R_dp (R_pp + sigma^2 (X X^H)^-1)^-1 with X = diag(pilot_symbols). The inverse drops
    /// eigenvalues at or below 1e-12 * trace / n_pilots, so rank-deficient correlations are safe.
    MmseFilter build_mmse_filter(const CorrelationModel &corr, const NoiseSpec &noise, const CVector &pilot_symbols);

    ChannelGrid apply_mmse(const MmseFilter &filter, const PilotObservation &obs);

    /// Separable stand-in for approximated linear MMSE: frequency-only then time-only LMMSE filters
    /// from the marginal correlations of `corr`, each built from an eigen-truncated correlation.
    ChannelGrid almmse_estimate(const PilotObservation &obs, const CorrelationModel &corr, const NoiseSpec &noise,
                                std::size_t rank_time, std::size_t rank_freq);

    /// Marginal correlations recovered from r_dp by averaging over the other axis (Hermitian Toeplitz).
    struct MarginalCorrelations
    {
        CMatrix freq; // n_subcarriers x n_subcarriers
        CMatrix time; // n_timeslots x n_timeslots
    };
    MarginalCorrelations marginal_correlations(const CorrelationModel &corr, const PilotPattern &pattern);

    /// ||A - B||_F / ||B||_F over both matrices of the model.
    double relative_frobenius_distance(const CorrelationModel &a, const CorrelationModel &b);
}
