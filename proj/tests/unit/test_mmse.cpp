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

#include <sstream>

#include "channelnet/io.hpp"
#include "channelnet/mmse.hpp"

using namespace channelnet;

namespace
{
    PilotObservation observe(const ChannelGrid &h, const PilotPattern &pattern, const NoiseSpec &noise, std::uint64_t seed)
    {
        return ls_estimate(h, pattern, unit_pilot_symbols(pattern), noise, seed);
    }

    double grid_mse(const CMatrix &est, const ChannelGrid &h)
    {
        return (est - h.values).squaredNorm() / double(h.values.size());
    }

    // Expected per-cell MSE of a linear filter under the model: tr(R_dd - A R_dp^H - R_dp A^H + A (R_pp + s I) A^H) / N_L,
    // with unit channel power on the diagonal of R_dd.
    double predicted_mse(const CMatrix &a, const CorrelationModel &c, double var)
    {
        CMatrix loaded = c.r_pp;
        loaded.diagonal().array() += var;
        const double n_l = double(a.rows());
        const cdouble t = n_l - (a * c.r_dp.adjoint()).trace() - (c.r_dp * a.adjoint()).trace() +
                          (a * loaded * a.adjoint()).trace();
        return t.real() / n_l;
    }

    ChannelConfig flat_config(double speed)
    {
        ChannelConfig cfg;
        cfg.pdp = PowerDelayProfile::flat();
        cfg.doppler.speed = speed;
        return cfg;
    }
}

TEST_CASE("oracle correlations")
{
    const ChannelConfig cfg;
    const auto pattern = default_lte_pattern();
    CHECK_THROWS_AS(estimate_correlations_oracle(cfg, pattern, 479, 1), std::invalid_argument);

    const auto oracle = estimate_correlations_oracle(cfg, pattern, 20000, 3);
    CHECK(oracle.source == CorrelationSource::oracle);
    CHECK(oracle.r_dp.rows() == 72 * 14);
    CHECK(oracle.r_pp.rows() == 48);
    CHECK(oracle.r_pp.diagonal().real().minCoeff() > 0.98);
    CHECK(oracle.r_pp.diagonal().real().maxCoeff() < 1.02);
    CHECK(oracle.r_pp.isApprox(oracle.r_pp.adjoint(), 1e-14));
    for (std::size_t m = 0; m < 48; ++m)
    {
        const auto &p = pattern.positions()[m];
        CHECK((oracle.r_dp.row(Eigen::Index(cfg.grid.cell_index(p.subcarrier, p.timeslot))) -
               oracle.r_pp.row(Eigen::Index(m)))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }

    const auto analytic = analytic_correlations(cfg, pattern);
    CHECK(analytic.source == CorrelationSource::analytic);
    CHECK(relative_frobenius_distance(oracle, analytic) < 0.05);

    // a static flat channel is fully correlated
    const auto flat = estimate_correlations_oracle(flat_config(0.0), pattern, 2000, 4);
    const cdouble first = flat.r_pp(0, 0);
    CHECK((flat.r_pp.array() - first).abs().maxCoeff() < 1e-12 * std::abs(first));
    CHECK(first.real() == doctest::Approx(1.0).epsilon(0.1));
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(flat.r_pp);
    CHECK(eig.eigenvalues()(46) < 1e-10 * eig.eigenvalues()(47));
}

TEST_CASE("empirical correlations")
{
    const ChannelConfig cfg;
    const auto pattern = default_lte_pattern();
    CHECK_THROWS_AS(estimate_correlations_empirical({}, pattern, 0.1), std::invalid_argument);

    auto frame = [&](std::uint64_t g, const NoiseSpec &noise) {
        const auto h = generate_channel_grid(cfg, derive_seed(21, 1, g));
        return ReceivedFrame{observe(h, pattern, noise, derive_seed(21, 2, g)), ls_full_grid(h, noise, derive_seed(21, 2, g))};
    };

    std::vector<ReceivedFrame> clean;
    for (std::size_t g = 0; g < 5000; ++g)
        clean.push_back(frame(g, NoiseSpec::noiseless()));
    const auto est = estimate_correlations_empirical(clean, pattern, 0.0);
    const auto oracle = estimate_correlations_oracle(cfg, pattern, 20000, 8);
    CHECK(est.source == CorrelationSource::estimated);
    CHECK(relative_frobenius_distance(est, oracle) < 0.1);

    // one sample is rank one and PSD
    const auto one = estimate_correlations_empirical(std::span(clean).first(1), pattern, 0.0);
    Eigen::SelfAdjointEigenSolver<CMatrix> e1(one.r_pp);
    CHECK(e1.eigenvalues().minCoeff() >= -1e-12 * one.r_pp.trace().real());
    CHECK(e1.eigenvalues()(46) < 1e-10 * e1.eigenvalues()(47));

    // noise subtraction keeps r_pp PSD
    const NoiseSpec noise{5.0};
    std::vector<ReceivedFrame> noisy;
    for (std::size_t g = 0; g < 100; ++g)
        noisy.push_back(frame(g, noise));
    const auto n = estimate_correlations_empirical(noisy, pattern, noise.noise_variance());
    Eigen::SelfAdjointEigenSolver<CMatrix> en(n.r_pp);
    CHECK(en.eigenvalues().minCoeff() >= -1e-10 * n.r_pp.trace().real());

    // all-zero grids
    const ChannelGrid zero(cfg.grid, CMatrix::Zero(72, 14));
    std::vector<ReceivedFrame> zeros(3, ReceivedFrame{observe(zero, pattern, NoiseSpec::noiseless(), 0), zero});
    const auto z = estimate_correlations_empirical(zeros, pattern, 0.0);
    CHECK(z.r_dp.isZero(0.0));
    CHECK(z.r_pp.isZero(0.0));

    auto mismatched = noisy;
    mismatched[0].ls_grid.values(0, 0) += 1.0;
    CHECK_THROWS_AS(estimate_correlations_empirical(mismatched, pattern, 0.0), std::invalid_argument);
}

TEST_CASE("mmse filter limits")
{
    const ChannelConfig cfg;
    const auto pattern = default_lte_pattern();
    const auto oracle = estimate_correlations_oracle(cfg, pattern, 20000, 3);
    const auto ones = unit_pilot_symbols(pattern);

    const auto f0 = build_mmse_filter(oracle, NoiseSpec::noiseless(), ones);
    CHECK(f0.noise_variance == 0.0);
    CHECK(f0.a.rows() == 72 * 14);
    CHECK(f0.a.cols() == 48);
    for (std::uint64_t s = 0; s < 5; ++s)
    {
        const auto h = generate_channel_grid(cfg, derive_seed(55, 0, s));
        const auto obs = observe(h, pattern, NoiseSpec::noiseless(), 0);
        const auto est = apply_mmse(f0, obs);
        double worst = 0.0;
        for (std::size_t m = 0; m < 48; ++m)
        {
            const auto &p = pattern.positions()[m];
            worst = std::max(worst, std::abs(est(p.subcarrier, p.timeslot) - obs.values(Eigen::Index(m))));
        }
        CHECK(worst < 1e-8);
    }

    const auto loud = build_mmse_filter(oracle, NoiseSpec{-300.0}, ones);
    CHECK(loud.a.cwiseAbs().maxCoeff() < 1e-20);

    // |x|^2 = 4 divides the effective noise by four
    const auto f4 = build_mmse_filter(oracle, NoiseSpec{6.0}, CVector::Constant(48, 2.0));
    const auto f1 = build_mmse_filter(oracle, NoiseSpec{6.0 + 10.0 * std::log10(4.0)}, ones);
    CHECK((f4.a - f1.a).cwiseAbs().maxCoeff() < 1e-9);

    CorrelationModel skew = oracle;
    skew.r_pp(0, 1) += cdouble(0.0, 0.5);
    CHECK_THROWS_AS(build_mmse_filter(skew, NoiseSpec{10.0}, ones), std::invalid_argument);
    CHECK_THROWS_AS(build_mmse_filter(oracle, NoiseSpec{10.0}, CVector::Ones(3)), std::invalid_argument);

    // rank-deficient correlations do not crash
    const auto flat = estimate_correlations_oracle(flat_config(0.0), pattern, 2000, 4);
    const auto ff = build_mmse_filter(flat, NoiseSpec::noiseless(), ones);
    CHECK(ff.a.allFinite());
    const auto hf = generate_channel_grid(flat_config(0.0), 12);
    CHECK((apply_mmse(ff, observe(hf, pattern, NoiseSpec::noiseless(), 0)).values - hf.values).cwiseAbs().maxCoeff() < 1e-8);

    const MmseFilter zero{CMatrix::Zero(72 * 14, 48), 0.0};
    CHECK(apply_mmse(zero, observe(hf, pattern, NoiseSpec::noiseless(), 0)).values.isZero(0.0));
    const MmseFilter wrong{CMatrix::Zero(72 * 14, 47), 0.0};
    CHECK_THROWS_AS(apply_mmse(wrong, observe(hf, pattern, NoiseSpec::noiseless(), 0)), std::invalid_argument);
}

TEST_CASE("monte carlo mse matches the closed-form filter error")
{
    const ChannelConfig cfg;
    const auto pattern = default_lte_pattern();
    const auto analytic = analytic_correlations(cfg, pattern);
    for (double snr : {5.0, 20.0})
    {
        const NoiseSpec noise{snr};
        const auto filter = build_mmse_filter(analytic, noise, unit_pilot_symbols(pattern));
        const double expect = predicted_mse(filter.a, analytic, noise.noise_variance());
        double acc = 0.0;
        const int n = 1500;
        for (int g = 0; g < n; ++g)
        {
            const auto h = generate_channel_grid(cfg, derive_seed(31, 1, g));
            acc += grid_mse(apply_mmse(filter, observe(h, pattern, noise, derive_seed(31, 2, g))).values, h);
        }
        INFO("snr " << snr << " predicted " << expect << " measured " << acc / n);
        CHECK(acc / n == doctest::Approx(expect).epsilon(0.08));
    }
}

TEST_CASE("oracle mmse beats linear alternatives and improves with snr")
{
    const ChannelConfig cfg;
    const auto pattern = default_lte_pattern();
    const auto oracle = estimate_correlations_oracle(cfg, pattern, 20000, 3);
    const int n = 2000;
    std::vector<double> mmse12, mmse22, ls12, al12;
    const auto f12 = build_mmse_filter(oracle, NoiseSpec{12.0}, unit_pilot_symbols(pattern));
    const auto f22 = build_mmse_filter(oracle, NoiseSpec{22.0}, unit_pilot_symbols(pattern));
    for (int g = 0; g < n; ++g)
    {
        const auto h = generate_channel_grid(cfg, derive_seed(41, 1, g));
        const auto o12 = observe(h, pattern, NoiseSpec{12.0}, derive_seed(41, 2, g));
        const auto o22 = observe(h, pattern, NoiseSpec{22.0}, derive_seed(41, 2, g));
        mmse12.push_back(grid_mse(apply_mmse(f12, o12).values, h));
        mmse22.push_back(grid_mse(apply_mmse(f22, o22).values, h));
        ls12.push_back(grid_mse(interpolate_pilots(o12, h.spec), h));
        al12.push_back(grid_mse(almmse_estimate(o12, oracle, NoiseSpec{12.0}, 4, 16).values, h));
    }
    auto mean = [](const std::vector<double> &v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s / double(v.size());
    };
    // one standard error of the paired difference
    auto diff_se = [&](const std::vector<double> &a, const std::vector<double> &b) {
        std::vector<double> d(a.size());
        for (std::size_t j = 0; j < a.size(); ++j)
            d[j] = a[j] - b[j];
        const double mu = mean(d);
        double ss = 0.0;
        for (double x : d)
            ss += (x - mu) * (x - mu);
        return std::sqrt(ss / double(d.size() - 1) / double(d.size()));
    };
    CHECK(mean(mmse12) <= mean(ls12) + diff_se(mmse12, ls12));
    CHECK(mean(mmse12) <= mean(al12) + diff_se(mmse12, al12));
    CHECK(mean(mmse22) < mean(mmse12));
    CHECK(mean(al12) < mean(ls12));
}

TEST_CASE("almmse stand-in")
{
    const auto pattern = default_lte_pattern();
    CHECK_THROWS_AS(almmse_estimate({pattern, CVector::Ones(48), 0.0}, analytic_correlations({}, pattern), NoiseSpec{10.0}, 0, 4),
                    std::invalid_argument);
    CHECK_THROWS_AS(almmse_estimate({pattern, CVector::Ones(48), 0.0}, analytic_correlations({}, pattern), NoiseSpec{10.0}, 15, 4),
                    std::invalid_argument);

    // single tap: the correlation is separable and the stand-in equals full mmse
    const auto cfg = flat_config(50.0 / 3.6);
    const auto corr = analytic_correlations(cfg, pattern);
    const auto full = build_mmse_filter(corr, NoiseSpec::noiseless(), unit_pilot_symbols(pattern));
    for (std::uint64_t s = 0; s < 5; ++s)
    {
        const auto h = generate_channel_grid(cfg, s);
        const auto obs = observe(h, pattern, NoiseSpec::noiseless(), 0);
        const auto a = almmse_estimate(obs, corr, NoiseSpec::noiseless(), 14, 72);
        CHECK((a.values - apply_mmse(full, obs).values).cwiseAbs().maxCoeff() < 1e-6);
    }

    // rank one recovers a static flat channel
    const auto still = flat_config(0.0);
    const auto still_corr = analytic_correlations(still, pattern);
    const auto h = generate_channel_grid(still, 3);
    const auto est = almmse_estimate(observe(h, pattern, NoiseSpec::noiseless(), 0), still_corr, NoiseSpec::noiseless(), 1, 1);
    CHECK((est.values - h.values).cwiseAbs().maxCoeff() < 1e-9);

    const auto marg = marginal_correlations(analytic_correlations({}, pattern), pattern);
    CHECK(marg.freq.rows() == 72);
    CHECK(marg.time.rows() == 14);
    CHECK(marg.freq(0, 0).real() == doctest::Approx(1.0));
    CHECK(marg.freq.isApprox(marg.freq.adjoint()));
}

TEST_CASE("correlation file round trip")
{
    const auto pattern = default_lte_pattern();
    const auto corr = analytic_correlations({}, pattern);
    std::stringstream ss;
    write_correlation(ss, corr);
    const std::string bytes = ss.str();
    const auto back = read_correlation(ss);
    CHECK(back.source == CorrelationSource::analytic);
    CHECK(back.r_dp.rows() == corr.r_dp.rows());
    CHECK((back.r_dp - corr.r_dp).cwiseAbs().maxCoeff() < 1e-6);
    std::stringstream again;
    write_correlation(again, back);
    CHECK(again.str() == bytes);

    std::istringstream cut(bytes.substr(0, bytes.size() / 2));
    try
    {
        read_correlation(cut);
        FAIL("truncated file accepted");
    }
    catch (const FormatError &e)
    {
        CHECK(e.kind() == FormatError::Kind::truncated);
    }
}
