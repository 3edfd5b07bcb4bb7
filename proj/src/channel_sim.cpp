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

#include "channelnet/channel_sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

namespace channelnet
{
    void OfdmGridSpec::validate() const
    {
        if (n_subcarriers < 1 || n_timeslots < 1)
            throw std::invalid_argument("OfdmGridSpec: grid must have at least one subcarrier and one timeslot");
        if (!(subcarrier_spacing > 0.0) || !std::isfinite(subcarrier_spacing))
            throw std::invalid_argument("OfdmGridSpec: subcarrier spacing must be positive");
        if (!(symbol_duration > 0.0) || !std::isfinite(symbol_duration))
            throw std::invalid_argument("OfdmGridSpec: symbol duration must be positive");
    }

    PowerDelayProfile PowerDelayProfile::from_db(std::string name, std::vector<double> delays_s,
                                                 const std::vector<double> &powers_db)
    {
        if (delays_s.size() != powers_db.size())
            throw std::invalid_argument("PowerDelayProfile: delay and power lists differ in length");
        PowerDelayProfile pdp;
        pdp.name = std::move(name);
        pdp.tap_delays = std::move(delays_s);
        double total = 0.0;
        for (double db : powers_db)
        {
            pdp.tap_powers.push_back(std::pow(10.0, db / 10.0));
            total += pdp.tap_powers.back();
        }
        for (double &p : pdp.tap_powers)
            p /= total;
        pdp.validate();
        return pdp;
    }

    PowerDelayProfile PowerDelayProfile::vehicular_a()
    {
        return from_db("VehA", {0.0, 310e-9, 710e-9, 1090e-9, 1730e-9, 2510e-9}, {0.0, -1.0, -9.0, -10.0, -15.0, -20.0});
    }

    PowerDelayProfile PowerDelayProfile::sui5()
    {
        return from_db("SUI5", {0.0, 4e-6, 10e-6}, {0.0, -5.0, -10.0});
    }

    PowerDelayProfile PowerDelayProfile::flat()
    {
        return from_db("Flat", {0.0}, {0.0});
    }

    PowerDelayProfile PowerDelayProfile::by_name(const std::string &name)
    {
        std::string key;
        for (char c : name)
            if (std::isalnum(static_cast<unsigned char>(c)))
                key.push_back(char(std::tolower(static_cast<unsigned char>(c))));
        if (key == "veha" || key == "vehiculara")
            return vehicular_a();
        if (key == "sui5")
            return sui5();
        if (key == "flat")
            return flat();
        throw std::invalid_argument("unknown power delay profile '" + name + "'");
    }

    void PowerDelayProfile::validate() const
    {
        if (tap_delays.empty())
            throw std::invalid_argument("PowerDelayProfile: no taps");
        if (tap_delays.size() != tap_powers.size())
            throw std::invalid_argument("PowerDelayProfile: delay and power lists differ in length");
        for (std::size_t l = 0; l < tap_delays.size(); ++l)
        {
            if (!(tap_delays[l] >= 0.0) || !std::isfinite(tap_delays[l]))
                throw std::invalid_argument("PowerDelayProfile: delays must be finite and non-negative");
            if (l > 0 && !(tap_delays[l] > tap_delays[l - 1]))
                throw std::invalid_argument("PowerDelayProfile: delays must be strictly increasing");
            if (!(tap_powers[l] > 0.0) || !std::isfinite(tap_powers[l]))
                throw std::invalid_argument("PowerDelayProfile: tap powers must be positive");
        }
    }

    DopplerSpec DopplerSpec::from_speed_kmh(double kmh, double carrier_hz)
    {
        DopplerSpec d;
        d.speed = kmh / 3.6;
        d.carrier_frequency = carrier_hz;
        return d;
    }

    void DopplerSpec::validate() const
    {
        if (!(max_doppler() >= 0.0) || !std::isfinite(max_doppler()))
            throw std::invalid_argument("DopplerSpec: maximum Doppler must be finite and non-negative");
        if (n_sinusoids < 8)
            throw std::invalid_argument("DopplerSpec: at least 8 sinusoids required");
    }

    void ChannelConfig::validate() const
    {
        grid.validate();
        pdp.validate();
        doppler.validate();
        const double unambiguous = 1.0 / grid.subcarrier_spacing;
        if (pdp.max_delay() > unambiguous)
            throw std::invalid_argument("ChannelConfig: PDP max delay exceeds 1/subcarrier_spacing");
        if (pdp.max_delay() > 0.5 * unambiguous)
            warn("PDP '" + pdp.name + "' max delay exceeds half the unambiguous delay range; frequency response aliases");
    }

    ChannelGrid::ChannelGrid(OfdmGridSpec s, CMatrix v) : spec(s), values(std::move(v))
    {
        if (values.rows() != Eigen::Index(spec.n_subcarriers) || values.cols() != Eigen::Index(spec.n_timeslots))
            throw std::invalid_argument("ChannelGrid: value shape does not match grid spec");
    }

    CVector ChannelGrid::vectorized() const
    {
        CVector v(values.size());
        for (std::size_t i = 0; i < spec.n_subcarriers; ++i)
            for (std::size_t k = 0; k < spec.n_timeslots; ++k)
                v(Eigen::Index(spec.cell_index(i, k))) = (*this)(i, k);
        return v;
    }

    ChannelGrid ChannelGrid::from_vector(const OfdmGridSpec &spec, const CVector &v)
    {
        if (v.size() != Eigen::Index(spec.n_cells()))
            throw std::invalid_argument("ChannelGrid::from_vector: length does not match grid spec");
        CMatrix m(spec.n_subcarriers, spec.n_timeslots);
        for (std::size_t i = 0; i < spec.n_subcarriers; ++i)
            for (std::size_t k = 0; k < spec.n_timeslots; ++k)
                m(Eigen::Index(i), Eigen::Index(k)) = v(Eigen::Index(spec.cell_index(i, k)));
        return {spec, std::move(m)};
    }

    ChannelGrid generate_channel_grid(const OfdmGridSpec &spec, const PowerDelayProfile &pdp, const DopplerSpec &dop,
                                      std::uint64_t seed)
    {
        return generate_channel_grid(ChannelConfig{spec, pdp, dop}, seed);
    }

    ChannelGrid generate_channel_grid(const ChannelConfig &config, std::uint64_t seed)
    {
        const auto &spec = config.grid;
        const auto &pdp = config.pdp;
        spec.validate();
        pdp.validate();
        config.doppler.validate();
        if (pdp.max_delay() > 1.0 / spec.subcarrier_spacing)
            throw std::invalid_argument("generate_channel_grid: PDP max delay exceeds 1/subcarrier_spacing");

        constexpr double two_pi = 2.0 * std::numbers::pi;
        const auto n_s = Eigen::Index(spec.n_subcarriers);
        const auto n_d = Eigen::Index(spec.n_timeslots);
        const std::size_t n_taps = pdp.tap_delays.size();
        const std::size_t n_sin = config.doppler.n_sinusoids;
        const double f_d = config.doppler.max_doppler();

        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> angle(0.0, two_pi);

        // Tap fading processes g_l(k T): n_timeslots x n_taps.
        CMatrix gains = CMatrix::Zero(n_d, Eigen::Index(n_taps));
        for (std::size_t l = 0; l < n_taps; ++l)
        {
            const double amp = std::sqrt(pdp.tap_powers[l] / double(n_sin));
            for (std::size_t m = 0; m < n_sin; ++m)
            {
                const double arrival = angle(rng);
                const double phase = angle(rng);
                const double omega = two_pi * f_d * std::cos(arrival) * spec.symbol_duration;
                for (Eigen::Index k = 0; k < n_d; ++k)
                    gains(k, Eigen::Index(l)) += amp * std::polar(1.0, omega * double(k) + phase);
            }
        }

        // Frequency response of each tap: n_subcarriers x n_taps.
        CMatrix steering(n_s, Eigen::Index(n_taps));
        for (Eigen::Index i = 0; i < n_s; ++i)
            for (std::size_t l = 0; l < n_taps; ++l)
                steering(i, Eigen::Index(l)) =
                    std::polar(1.0, -two_pi * double(i) * spec.subcarrier_spacing * pdp.tap_delays[l]);

        return {spec, steering * gains.transpose()};
    }

    CMatrix noise_field(const OfdmGridSpec &spec, const NoiseSpec &noise, std::uint64_t seed)
    {
        const double var = noise.noise_variance();
        CMatrix z = CMatrix::Zero(Eigen::Index(spec.n_subcarriers), Eigen::Index(spec.n_timeslots));
        if (var == 0.0)
            return z;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, std::sqrt(var / 2.0));
        // Draw order is subcarrier-major so nested pilot sets see identical noise.
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            for (Eigen::Index k = 0; k < z.cols(); ++k)
            {
                const double re = normal(rng);
                const double im = normal(rng);
                z(i, k) = {re, im};
            }
        return z;
    }

    CMatrix apply_channel(const ChannelGrid &grid, const CMatrix &symbols, const NoiseSpec &noise, std::uint64_t seed)
    {
        if (symbols.rows() != grid.values.rows() || symbols.cols() != grid.values.cols())
            throw std::invalid_argument("apply_channel: symbol matrix shape does not match grid");
        return grid.values.cwiseProduct(symbols) + noise_field(grid.spec, noise, seed);
    }

    RealImagImages grid_to_images(const ChannelGrid &grid)
    {
        if (!grid.values.allFinite())
            throw std::invalid_argument("grid_to_images: non-finite channel entry");
        return {grid.values.real(), grid.values.imag()};
    }

    ChannelGrid images_to_grid(const RealImagImages &images, const OfdmGridSpec &spec)
    {
        if (images.real.rows() != images.imag.rows() || images.real.cols() != images.imag.cols())
            throw std::invalid_argument("images_to_grid: real and imaginary planes differ in shape");
        if (!images.real.allFinite() || !images.imag.allFinite())
            throw std::invalid_argument("images_to_grid: non-finite image entry");
        CMatrix values(images.real.rows(), images.real.cols());
        values.real() = images.real;
        values.imag() = images.imag;
        return {spec, std::move(values)};
    }

    ChannelGrid images_to_grid(const RealImagImages &images)
    {
        OfdmGridSpec spec;
        spec.n_subcarriers = std::size_t(images.real.rows());
        spec.n_timeslots = std::size_t(images.real.cols());
        return images_to_grid(images, spec);
    }

    cdouble empirical_time_autocorr(const ChannelConfig &config, std::size_t lag, std::size_t n_realizations,
                                    std::uint64_t seed)
    {
        if (lag >= config.grid.n_timeslots)
            throw std::invalid_argument("empirical_time_autocorr: lag must be below the number of timeslots");
        if (n_realizations < 100)
            throw std::invalid_argument("empirical_time_autocorr: at least 100 realizations required");
        if (lag == 0)
            return 1.0;
        const auto n_d = Eigen::Index(config.grid.n_timeslots);
        const auto span = n_d - Eigen::Index(lag);
        cdouble num = 0.0;
        double den = 0.0;
        for (std::size_t r = 0; r < n_realizations; ++r)
        {
            const auto h = generate_channel_grid(config, derive_seed(seed, 0x7A11, r));
            const auto a = h.values.leftCols(span);
            const auto b = h.values.middleCols(Eigen::Index(lag), span);
            num += (a.array() * b.array().conjugate()).sum();
            den += a.squaredNorm();
        }
        return num / den;
    }

    cdouble empirical_freq_corr(const ChannelConfig &config, std::size_t offset, std::size_t n_realizations,
                                std::uint64_t seed)
    {
        if (offset >= config.grid.n_subcarriers)
            throw std::invalid_argument("empirical_freq_corr: offset must be below the number of subcarriers");
        if (n_realizations < 1)
            throw std::invalid_argument("empirical_freq_corr: need at least one realization");
        const auto n_s = Eigen::Index(config.grid.n_subcarriers);
        const auto span = n_s - Eigen::Index(offset);
        cdouble num = 0.0;
        for (std::size_t r = 0; r < n_realizations; ++r)
        {
            const auto h = generate_channel_grid(config, derive_seed(seed, 0xF4E0, r));
            num += (h.values.middleRows(Eigen::Index(offset), span).array() * h.values.topRows(span).array().conjugate()).sum();
        }
        return num / double(n_realizations * std::size_t(span) * config.grid.n_timeslots);
    }

    cdouble analytic_correlation(const ChannelConfig &config, std::ptrdiff_t subcarrier_lag, std::ptrdiff_t timeslot_lag)
    {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        cdouble freq = 0.0;
        for (std::size_t l = 0; l < config.pdp.tap_delays.size(); ++l)
            freq += config.pdp.tap_powers[l] *
                    std::polar(1.0, -two_pi * double(subcarrier_lag) * config.grid.subcarrier_spacing * config.pdp.tap_delays[l]);
        const double x = two_pi * config.doppler.max_doppler() * double(timeslot_lag) * config.grid.symbol_duration;
        return freq * std::cyl_bessel_j(0.0, std::abs(x));
    }
}
