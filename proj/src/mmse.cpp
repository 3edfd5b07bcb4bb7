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

#include "channelnet/mmse.hpp"

#include <algorithm>
#include <map>

namespace channelnet
{
    namespace
    {
        void check_pattern_grid(const ChannelConfig &config, const PilotPattern &pattern)
        {
            if (config.grid.n_subcarriers != pattern.spec().n_subcarriers ||
                config.grid.n_timeslots != pattern.spec().n_timeslots)
                throw std::invalid_argument("pilot pattern grid does not match channel grid");
        }

        CMatrix hermitian_part(const CMatrix &m)
        {
            return (m + m.adjoint()) / 2.0;
        }

        // Pseudo-inverse of a Hermitian matrix discarding eigenvalues <= threshold.
        CMatrix hermitian_pinv(const CMatrix &m, double threshold)
        {
            Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(m));
            if (eig.info() != Eigen::Success)
                throw std::runtime_error("eigendecomposition failed");
            const auto &lambda = eig.eigenvalues();
            Eigen::VectorXd inv(lambda.size());
            for (Eigen::Index j = 0; j < lambda.size(); ++j)
                inv(j) = lambda(j) > threshold ? 1.0 / lambda(j) : 0.0;
            const auto &v = eig.eigenvectors();
            return v * inv.asDiagonal() * v.adjoint();
        }

        double regularization_floor(const CMatrix &r)
        {
            return r.rows() == 0 ? 0.0 : 1e-12 * std::abs(r.trace().real()) / double(r.rows());
        }

        CMatrix truncate_rank(const CMatrix &r, std::size_t rank)
        {
            Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(r));
            if (eig.info() != Eigen::Success)
                throw std::runtime_error("eigendecomposition failed");
            const auto keep = Eigen::Index(rank);
            // Eigenvalues ascend; keep the largest `rank`.
            const CMatrix u = eig.eigenvectors().rightCols(keep);
            const Eigen::VectorXd lambda = eig.eigenvalues().tail(keep);
            return u * lambda.asDiagonal() * u.adjoint();
        }

        CMatrix toeplitz_from_lags(const std::vector<cdouble> &sum, const std::vector<std::size_t> &count, std::size_t n)
        {
            // lag d stored at index d + n - 1
            std::vector<cdouble> r(2 * n - 1, 0.0);
            for (std::size_t j = 0; j < r.size(); ++j)
                if (count[j] > 0)
                    r[j] = sum[j] / double(count[j]);
            for (std::size_t d = 1; d < n; ++d)
            {
                const std::size_t pos = n - 1 + d, neg = n - 1 - d;
                if (count[pos] == 0 && count[neg] > 0)
                    r[pos] = std::conj(r[neg]);
                else if (count[neg] == 0 && count[pos] > 0)
                    r[neg] = std::conj(r[pos]);
            }
            CMatrix t(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    t(Eigen::Index(a), Eigen::Index(b)) = r[a + n - 1 - b];
            return hermitian_part(t);
        }
    }

    CorrelationModel estimate_correlations_oracle(const ChannelConfig &config, const PilotPattern &pattern,
                                                  std::size_t n_samples, std::uint64_t seed)
    {
        check_pattern_grid(config, pattern);
        const auto n_p = Eigen::Index(pattern.size());
        const auto n_l = Eigen::Index(config.grid.n_cells());
        if (n_samples < 10 * pattern.size())
            throw std::invalid_argument("estimate_correlations_oracle: need at least 10 * n_pilots samples, got " +
                                        std::to_string(n_samples));

        std::vector<Eigen::Index> pilot_cells;
        for (const auto &p : pattern.positions())
            pilot_cells.push_back(Eigen::Index(config.grid.cell_index(p.subcarrier, p.timeslot)));

        CorrelationModel model{CMatrix::Zero(n_l, n_p), CMatrix::Zero(n_p, n_p), CorrelationSource::oracle};
        constexpr std::size_t block = 256;
        CMatrix hd(n_l, Eigen::Index(block)), hp(n_p, Eigen::Index(block));
        for (std::size_t start = 0; start < n_samples; start += block)
        {
            const std::size_t count = std::min(block, n_samples - start);
            for (std::size_t b = 0; b < count; ++b)
            {
                const auto grid = generate_channel_grid(config, derive_seed(seed, 0x0AC1E, start + b));
                hd.col(Eigen::Index(b)) = grid.vectorized();
                for (Eigen::Index m = 0; m < n_p; ++m)
                    hp(m, Eigen::Index(b)) = hd(pilot_cells[std::size_t(m)], Eigen::Index(b));
            }
            const auto c = Eigen::Index(count);
            model.r_dp.noalias() += hd.leftCols(c) * hp.leftCols(c).adjoint();
            model.r_pp.noalias() += hp.leftCols(c) * hp.leftCols(c).adjoint();
        }
        model.r_dp /= double(n_samples);
        model.r_pp = hermitian_part(model.r_pp / double(n_samples));
        return model;
    }

    CorrelationModel analytic_correlations(const ChannelConfig &config, const PilotPattern &pattern)
    {
        check_pattern_grid(config, pattern);
        const auto &spec = config.grid;
        const auto n_p = Eigen::Index(pattern.size());
        CorrelationModel model{CMatrix(Eigen::Index(spec.n_cells()), n_p), CMatrix(n_p, n_p), CorrelationSource::analytic};
        const auto &pos = pattern.positions();
        for (std::size_t i = 0; i < spec.n_subcarriers; ++i)
            for (std::size_t k = 0; k < spec.n_timeslots; ++k)
                for (Eigen::Index m = 0; m < n_p; ++m)
                {
                    const auto &p = pos[std::size_t(m)];
                    model.r_dp(Eigen::Index(spec.cell_index(i, k)), m) =
                        analytic_correlation(config, std::ptrdiff_t(i) - std::ptrdiff_t(p.subcarrier),
                                             std::ptrdiff_t(k) - std::ptrdiff_t(p.timeslot));
                }
        for (Eigen::Index a = 0; a < n_p; ++a)
            model.r_pp.row(a) = model.r_dp.row(Eigen::Index(spec.cell_index(pos[std::size_t(a)].subcarrier, pos[std::size_t(a)].timeslot)));
        model.r_pp = hermitian_part(model.r_pp);
        return model;
    }

    CorrelationModel estimate_correlations_empirical(std::span<const ReceivedFrame> frames, const PilotPattern &pattern,
                                                     double noise_variance)
    {
        if (frames.empty())
            throw std::invalid_argument("estimate_correlations_empirical: empty dataset");
        if (!(noise_variance >= 0.0))
            throw std::invalid_argument("estimate_correlations_empirical: noise variance must be non-negative");
        const auto &spec = pattern.spec();
        const auto n_p = Eigen::Index(pattern.size());
        const auto n_l = Eigen::Index(spec.n_cells());
        std::vector<Eigen::Index> pilot_cells;
        for (const auto &p : pattern.positions())
            pilot_cells.push_back(Eigen::Index(spec.cell_index(p.subcarrier, p.timeslot)));

        CorrelationModel model{CMatrix::Zero(n_l, n_p), CMatrix::Zero(n_p, n_p), CorrelationSource::estimated};
        for (const auto &frame : frames)
        {
            if (!(frame.pilots.pattern == pattern))
                throw std::invalid_argument("estimate_correlations_empirical: frame pattern differs from target pattern");
            if (frame.ls_grid.spec.n_cells() != spec.n_cells())
                throw std::invalid_argument("estimate_correlations_empirical: LS grid shape mismatch");
            const CVector hd = frame.ls_grid.vectorized();
            const CVector &hp = frame.pilots.values;
            for (Eigen::Index m = 0; m < n_p; ++m)
            {
                const cdouble a = hd(pilot_cells[std::size_t(m)]), b = hp(m);
                if (std::abs(a - b) > 1e-9 * (1.0 + std::abs(b)))
                    throw std::invalid_argument("estimate_correlations_empirical: LS grid disagrees with pilot values");
            }
            model.r_dp.noalias() += hd * hp.adjoint();
            model.r_pp.noalias() += hp * hp.adjoint();
        }
        const double n = double(frames.size());
        model.r_dp /= n;
        model.r_pp /= n;
        for (Eigen::Index m = 0; m < n_p; ++m)
        {
            model.r_pp(m, m) -= noise_variance;
            model.r_dp(pilot_cells[std::size_t(m)], m) -= noise_variance;
        }

        Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(model.r_pp));
        if (eig.info() != Eigen::Success)
            throw std::runtime_error("estimate_correlations_empirical: eigendecomposition failed");
        const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
        model.r_pp = hermitian_part(eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().adjoint());
        return model;
    }

    MmseFilter build_mmse_filter(const CorrelationModel &corr, const NoiseSpec &noise, const CVector &pilot_symbols)
    {
        const auto n_p = corr.r_pp.rows();
        if (corr.r_pp.cols() != n_p || corr.r_dp.cols() != n_p)
            throw std::invalid_argument("build_mmse_filter: inconsistent correlation dimensions");
        if (pilot_symbols.size() != n_p)
            throw std::invalid_argument("build_mmse_filter: one pilot symbol per pilot required");
        const double scale = std::max(corr.r_pp.norm(), 1e-300);
        if ((corr.r_pp - corr.r_pp.adjoint()).norm() > 1e-9 * scale)
            throw std::invalid_argument("build_mmse_filter: r_pp is not Hermitian");
        if (!corr.r_pp.allFinite() || !corr.r_dp.allFinite())
            throw std::invalid_argument("build_mmse_filter: non-finite correlation entry");

        const double var = noise.noise_variance();
        CMatrix m = corr.r_pp;
        for (Eigen::Index j = 0; j < n_p; ++j)
        {
            const double mag2 = std::norm(pilot_symbols(j));
            if (mag2 == 0.0)
                throw std::invalid_argument("build_mmse_filter: zero-magnitude pilot symbol");
            m(j, j) += var / mag2;
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(m));
        if (eig.info() != Eigen::Success)
            throw std::runtime_error("build_mmse_filter: eigendecomposition failed");
        const double floor = regularization_floor(corr.r_pp);
        const auto &lambda = eig.eigenvalues();
        const CMatrix &v = eig.eigenvectors();
        Eigen::VectorXd inv(n_p), kept(n_p);
        for (Eigen::Index j = 0; j < n_p; ++j)
        {
            kept(j) = lambda(j) > floor ? 1.0 : 0.0;
            inv(j) = lambda(j) > floor ? 1.0 / lambda(j) : 0.0;
        }
        const CMatrix m_pinv = v * inv.asDiagonal() * v.adjoint();
        MmseFilter f{corr.r_dp * m_pinv, var};

        // Rows of r_dp at the pilot cells are rows of r_pp. With (near) zero noise the product amplifies rounding
        // through tiny eigenvalues, so those rows use r_pp * pinv(m) = P - D pinv(m) instead, P being the
        // projector onto the kept eigenvectors and D the noise diagonal.
        double loading = 0.0;
        for (Eigen::Index j = 0; j < n_p; ++j)
            loading = std::max(loading, var / std::norm(pilot_symbols(j)));
        if (loading > floor)
            return f;
        const CMatrix proj = v * kept.asDiagonal() * v.adjoint();
        const double tol = 1e-9 * scale;
        for (Eigen::Index j = 0; j < n_p; ++j)
        {
            const auto row_j = corr.r_pp.row(j);
            for (Eigen::Index d = 0; d < corr.r_dp.rows(); ++d)
            {
                if (std::abs(corr.r_dp(d, j) - row_j(j)) > tol || (corr.r_dp.row(d) - row_j).norm() > tol)
                    continue;
                f.a.row(d) = proj.row(j) - (var / std::norm(pilot_symbols(j))) * m_pinv.row(j);
            }
        }
        return f;
    }

    ChannelGrid apply_mmse(const MmseFilter &filter, const PilotObservation &obs)
    {
        const auto &spec = obs.pattern.spec();
        if (filter.a.cols() != obs.values.size() || filter.a.rows() != Eigen::Index(spec.n_cells()))
            throw std::invalid_argument("apply_mmse: filter dimensions do not match observation");
        return ChannelGrid::from_vector(spec, filter.a * obs.values);
    }

    MarginalCorrelations marginal_correlations(const CorrelationModel &corr, const PilotPattern &pattern)
    {
        const auto &spec = pattern.spec();
        const std::size_t n_s = spec.n_subcarriers, n_d = spec.n_timeslots;
        if (corr.r_dp.rows() != Eigen::Index(spec.n_cells()) || corr.r_dp.cols() != Eigen::Index(pattern.size()))
            throw std::invalid_argument("marginal_correlations: model does not match pattern");

        std::vector<cdouble> f_sum(2 * n_s - 1, 0.0), t_sum(2 * n_d - 1, 0.0);
        std::vector<std::size_t> f_cnt(2 * n_s - 1, 0), t_cnt(2 * n_d - 1, 0);
        for (std::size_t m = 0; m < pattern.size(); ++m)
        {
            const auto &p = pattern.positions()[m];
            for (std::size_t i = 0; i < n_s; ++i)
            {
                const std::size_t lag = i + n_s - 1 - p.subcarrier;
                f_sum[lag] += corr.r_dp(Eigen::Index(spec.cell_index(i, p.timeslot)), Eigen::Index(m));
                ++f_cnt[lag];
            }
            for (std::size_t k = 0; k < n_d; ++k)
            {
                const std::size_t lag = k + n_d - 1 - p.timeslot;
                t_sum[lag] += corr.r_dp(Eigen::Index(spec.cell_index(p.subcarrier, k)), Eigen::Index(m));
                ++t_cnt[lag];
            }
        }
        return {toeplitz_from_lags(f_sum, f_cnt, n_s), toeplitz_from_lags(t_sum, t_cnt, n_d)};
    }

    ChannelGrid almmse_estimate(const PilotObservation &obs, const CorrelationModel &corr, const NoiseSpec &noise,
                                std::size_t rank_time, std::size_t rank_freq)
    {
        const auto &pattern = obs.pattern;
        const auto &spec = pattern.spec();
        if (rank_time < 1 || rank_freq < 1)
            throw std::invalid_argument("almmse_estimate: ranks must be at least 1");
        if (rank_time > spec.n_timeslots || rank_freq > spec.n_subcarriers)
            throw std::invalid_argument("almmse_estimate: rank exceeds axis dimension");
        if (obs.values.size() != Eigen::Index(pattern.size()))
            throw std::invalid_argument("almmse_estimate: observation length does not match pattern");

        const double var = noise.noise_variance();
        const auto marg = marginal_correlations(corr, pattern);
        const CMatrix r_f = truncate_rank(marg.freq, rank_freq);
        const CMatrix r_t = truncate_rank(marg.time, rank_time);

        std::map<std::size_t, std::vector<std::size_t>> by_slot; // timeslot -> pilot indices
        for (std::size_t m = 0; m < pattern.size(); ++m)
            by_slot[pattern.positions()[m].timeslot].push_back(m);

        const auto n_s = Eigen::Index(spec.n_subcarriers);
        const auto n_slots = Eigen::Index(by_slot.size());
        CMatrix columns(n_s, n_slots);
        Eigen::VectorXd stage_error(n_slots);
        std::vector<std::size_t> slots;
        for (const auto &[slot, members] : by_slot)
        {
            const auto c = Eigen::Index(slots.size());
            const auto n_m = Eigen::Index(members.size());
            std::vector<Eigen::Index> sub;
            CVector y(n_m);
            for (Eigen::Index j = 0; j < n_m; ++j)
            {
                sub.push_back(Eigen::Index(pattern.positions()[members[std::size_t(j)]].subcarrier));
                y(j) = obs.values(Eigen::Index(members[std::size_t(j)]));
            }
            CMatrix cross(n_s, n_m), auto_t(n_m, n_m), cross_full(n_s, n_m), auto_full(n_m, n_m);
            for (Eigen::Index j = 0; j < n_m; ++j)
            {
                cross.col(j) = r_f.col(sub[std::size_t(j)]);
                cross_full.col(j) = marg.freq.col(sub[std::size_t(j)]);
                for (Eigen::Index q = 0; q < n_m; ++q)
                {
                    auto_t(j, q) = r_f(sub[std::size_t(j)], sub[std::size_t(q)]);
                    auto_full(j, q) = marg.freq(sub[std::size_t(j)], sub[std::size_t(q)]);
                }
            }
            CMatrix loaded = auto_t;
            loaded.diagonal().array() += var;
            const CMatrix w = cross * hermitian_pinv(loaded, regularization_floor(auto_t));
            columns.col(c) = w * y;

            // Per-cell error of this stage under the untruncated marginal.
            CMatrix noisy_full = auto_full;
            noisy_full.diagonal().array() += var;
            const CMatrix err = marg.freq - w * cross_full.adjoint() - cross_full * w.adjoint() + w * noisy_full * w.adjoint();
            stage_error(c) = std::max(0.0, err.trace().real() / double(n_s));
            slots.push_back(slot);
        }

        CMatrix cross_t(Eigen::Index(spec.n_timeslots), n_slots), auto_s(n_slots, n_slots);
        for (Eigen::Index a = 0; a < n_slots; ++a)
        {
            cross_t.col(a) = r_t.col(Eigen::Index(slots[std::size_t(a)]));
            for (Eigen::Index b = 0; b < n_slots; ++b)
                auto_s(a, b) = r_t(Eigen::Index(slots[std::size_t(a)]), Eigen::Index(slots[std::size_t(b)]));
        }
        CMatrix loaded_s = auto_s;
        loaded_s.diagonal() += stage_error.cast<cdouble>();
        const CMatrix w_t = cross_t * hermitian_pinv(loaded_s, regularization_floor(auto_s));
        return {spec, columns * w_t.transpose()};
    }

    double relative_frobenius_distance(const CorrelationModel &a, const CorrelationModel &b)
    {
        if (a.r_dp.rows() != b.r_dp.rows() || a.r_dp.cols() != b.r_dp.cols() || a.r_pp.rows() != b.r_pp.rows())
            throw std::invalid_argument("relative_frobenius_distance: shape mismatch");
        const double num = (a.r_dp - b.r_dp).squaredNorm() + (a.r_pp - b.r_pp).squaredNorm();
        const double den = b.r_dp.squaredNorm() + b.r_pp.squaredNorm();
        return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
    }
}
