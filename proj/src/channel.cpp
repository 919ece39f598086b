// SPDX-License-Identifier: Apache-2.0
//
// cfisac: cooperative ISAC multistatic sensing toolkit
// Copyright (C) 2026 The cfisac authors
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

#include "cfisac/channel.hpp"

#include <cmath>

#include "cfisac/errors.hpp"
#include "cfisac/parallel.hpp"
#include "cfisac/rng.hpp"
#include "cfisac/units.hpp"

namespace cfisac
{

namespace
{

struct Path
{
    cd amplitude;
    double tau = 0.0;
    double doppler = 0.0;
    Eigen::VectorXcd a_r;
    Eigen::VectorXcd a_t;
};

cd path_phasor(std::size_t i, std::size_t t, double tau, double doppler, const SensingParams &params)
{
    const double phi = kTwoPi * (static_cast<double>(i) * tau * params.subcarrier_spacing -
                                 static_cast<double>(t) * doppler * params.symbol_duration());
    return std::polar(1.0, -phi);
}

Path target_path(const Scene &scene, const SensingParams &params, const ReflectionDraw &draw, std::size_t n,
                 std::size_t m, std::size_t q)
{
    const auto &tx = scene.tx_aps[n];
    const auto &rx = scene.rx_aps[m];
    const auto geo = bistatic_geometry(tx, rx, scene.targets[q].position);
    const auto dd = delay_doppler(tx, rx, scene.targets[q], scene.carrier_freq_hz, scene.light_speed);
    const double lambda = scene.wavelength();
    return {draw.beta(n, m, q) * std::sqrt(pathloss(geo.d_bistatic, params)), dd.tau, dd.doppler,
            steering_vector_cos(rx.array, geo.rx_look.cos, lambda),
            steering_vector_cos(tx.array, geo.tx_look.cos, lambda)};
}

Path clutter_path(const Scene &scene, const SensingParams &params, const ReflectionDraw &draw, std::size_t n,
                  std::size_t m, std::size_t s)
{
    const auto &tx = scene.tx_aps[n];
    const auto &rx = scene.rx_aps[m];
    const auto geo = bistatic_geometry(tx, rx, draw.scatterers[s]);
    const double lambda = scene.wavelength();
    return {draw.clutter_beta(n, m, s) * std::sqrt(pathloss(geo.d_bistatic, params)),
            geo.d_bistatic / scene.light_speed, 0.0, steering_vector_cos(rx.array, geo.rx_look.cos, lambda),
            steering_vector_cos(tx.array, geo.tx_look.cos, lambda)};
}

void check_indices(std::size_t i, std::size_t n, std::size_t m, std::size_t t, const Scene &scene,
                   const SensingParams &params)
{
    if (i >= params.num_subcarriers || t >= params.num_symbols || n >= scene.tx_aps.size() ||
        m >= scene.rx_aps.size())
        fail(ErrorKind::InvalidArgument, "channel index out of range");
}

} // namespace

void SensingParams::validate() const
{
    if (!(subcarrier_spacing > 0.0) || num_subcarriers == 0 || num_symbols == 0 || cyclic_prefix < 0.0)
        fail(ErrorKind::ConfigInvalid, "OFDM numerology must be positive");
    if (!(pathloss.alpha0 > 0.0) || !(pathloss.d0 > 0.0) || !(pathloss.zeta >= 0.0))
        fail(ErrorKind::ConfigInvalid, "pathloss parameters must be positive");
    if (chi2 < 0.0 || clutter_chi2 < 0.0 || noise_var < 0.0 || sigma_tau < 0.0 || sigma_f < 0.0)
        fail(ErrorKind::ConfigInvalid, "variances must be nonnegative");
}

double pathloss(double d, const SensingParams &params)
{
    return params.pathloss.gain(d);
}

ReflectionDraw draw_reflections(const Scene &scene, const SensingParams &params, std::uint64_t seed,
                                std::uint64_t sample, double placement_margin)
{
    const std::size_t N = scene.tx_aps.size();
    const std::size_t M = scene.rx_aps.size();
    const std::size_t Q = scene.targets.size();
    const std::size_t S = params.num_scatterers;

    ReflectionDraw draw;
    draw.beta = CTensor3({N, M, Q});
    Rng beta_rng(seed, sample, Stream::Reflection);
    for (auto &b : draw.beta.values())
        b = beta_rng.complex_normal(params.chi2);

    draw.clutter_beta = CTensor3({N, M, S});
    Rng clutter_rng(seed, sample, Stream::Clutter);
    const Region &r = scene.region;
    for (std::size_t s = 0; s < S; ++s)
        draw.scatterers.push_back({clutter_rng.uniform(r.x_min + placement_margin, r.x_max - placement_margin),
                                   clutter_rng.uniform(r.y_min + placement_margin, r.y_max - placement_margin)});
    for (auto &b : draw.clutter_beta.values())
        b = clutter_rng.complex_normal(params.clutter_chi2);

    if (params.async)
    {
        draw.timing_offset = Tensor<double, 3>({N, M, params.num_symbols});
        draw.freq_offset = Tensor<double, 3>({N, M, params.num_symbols});
        Rng off_rng(seed, sample, Stream::Offsets);
        for (auto &v : draw.timing_offset.values())
            v = params.sigma_tau * off_rng.normal();
        for (auto &v : draw.freq_offset.values())
            v = params.sigma_f * off_rng.normal();
    }
    return draw;
}

Eigen::MatrixXcd sensing_channel(std::size_t i, std::size_t n, std::size_t m, std::size_t t, const Scene &scene,
                                 const SensingParams &params, const ReflectionDraw &draw)
{
    check_indices(i, n, m, t, scene, params);
    const auto Mr = static_cast<Eigen::Index>(scene.rx_aps[m].array.num_elements);
    const auto Nt = static_cast<Eigen::Index>(scene.tx_aps[n].array.num_elements);
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(Mr, Nt);
    for (std::size_t q = 0; q < scene.targets.size(); ++q)
    {
        const Path p = target_path(scene, params, draw, n, m, q);
        G += (p.amplitude * path_phasor(i, t, p.tau, p.doppler, params)) * p.a_r * p.a_t.adjoint();
    }
    return G;
}

Eigen::MatrixXcd clutter_channel(std::size_t i, std::size_t n, std::size_t m, std::size_t t, const Scene &scene,
                                 const SensingParams &params, const ReflectionDraw &draw)
{
    check_indices(i, n, m, t, scene, params);
    const auto Mr = static_cast<Eigen::Index>(scene.rx_aps[m].array.num_elements);
    const auto Nt = static_cast<Eigen::Index>(scene.tx_aps[n].array.num_elements);
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(Mr, Nt);
    for (std::size_t s = 0; s < draw.scatterers.size(); ++s)
    {
        const Path p = clutter_path(scene, params, draw, n, m, s);
        G += (p.amplitude * path_phasor(i, t, p.tau, p.doppler, params)) * p.a_r * p.a_t.adjoint();
    }
    return G;
}

Eigen::MatrixXcd apply_async(const Eigen::MatrixXcd &G, std::size_t i, std::size_t t, double timing_offset,
                             double freq_offset, const SensingParams &params)
{
    const double phase = -kTwoPi * static_cast<double>(i) * timing_offset * params.subcarrier_spacing +
                         kTwoPi * freq_offset * static_cast<double>(t) * params.symbol_duration();
    return std::polar(1.0, phase) * G;
}

std::vector<SensingCube> synthesize_rx(const Scene &scene, const SensingParams &params,
                                       const TransmitBlock &transmit, const ReflectionDraw &draw, std::uint64_t seed,
                                       std::uint64_t sample, std::size_t threads)
{
    const std::size_t N = scene.tx_aps.size();
    const std::size_t M = scene.rx_aps.size();
    const std::size_t Q = scene.targets.size();
    const std::size_t Ns = params.num_subcarriers;
    const std::size_t Ts = params.num_symbols;
    if (transmit.num_tx() != N || transmit.num_subcarriers() != Ns || transmit.num_symbols() != Ts)
        fail(ErrorKind::ShapeMismatch, "transmit block does not match scene / numerology");
    if (draw.beta.dim(0) != N || draw.beta.dim(1) != M || draw.beta.dim(2) != Q)
        fail(ErrorKind::ShapeMismatch, "reflection draw does not match scene");
    for (const auto &ap : scene.tx_aps)
        if (ap.array.num_elements != transmit.num_antennas())
            fail(ErrorKind::ShapeMismatch, "transmit antenna count mismatch");
    const bool has_offsets = !draw.timing_offset.empty();

    std::vector<SensingCube> cubes(M);
    parallel_for(M, threads, [&](std::size_t m) {
        const std::size_t Mr = scene.rx_aps[m].array.num_elements;
        const std::size_t Nt = transmit.num_antennas();
        CTensor3 y({Mr, Ns, Ts});

        std::vector<std::vector<Path>> paths(N);
        for (std::size_t n = 0; n < N; ++n)
        {
            for (std::size_t q = 0; q < Q; ++q)
                paths[n].push_back(target_path(scene, params, draw, n, m, q));
            for (std::size_t s = 0; s < draw.scatterers.size(); ++s)
                paths[n].push_back(clutter_path(scene, params, draw, n, m, s));
        }

        Eigen::VectorXcd acc(static_cast<Eigen::Index>(Mr));
        Eigen::VectorXcd per_tx(static_cast<Eigen::Index>(Mr));
        Eigen::VectorXcd xv(static_cast<Eigen::Index>(Nt));
        for (std::size_t i = 0; i < Ns; ++i)
        {
            for (std::size_t t = 0; t < Ts; ++t)
            {
                acc.setZero();
                for (std::size_t n = 0; n < N; ++n)
                {
                    for (std::size_t a = 0; a < Nt; ++a)
                        xv(static_cast<Eigen::Index>(a)) = transmit.x(n, a, i, t);
                    per_tx.setZero();
                    for (const auto &p : paths[n])
                    {
                        const cd r = p.a_t.dot(xv); // a_t^H x
                        per_tx += (p.amplitude * path_phasor(i, t, p.tau, p.doppler, params) * r) * p.a_r;
                    }
                    if (has_offsets)
                    {
                        const double phase =
                            -kTwoPi * static_cast<double>(i) * draw.timing_offset(n, m, t) * params.subcarrier_spacing +
                            kTwoPi * draw.freq_offset(n, m, t) * static_cast<double>(t) * params.symbol_duration();
                        per_tx *= std::polar(1.0, phase);
                    }
                    acc += per_tx;
                }
                for (std::size_t a = 0; a < Mr; ++a)
                    y(a, i, t) = acc(static_cast<Eigen::Index>(a));
            }
        }

        if (params.noise_var > 0.0)
        {
            Rng noise(seed, sample, Stream::Noise, m);
            for (auto &v : y.values())
                v += noise.complex_normal(params.noise_var);
        }
        cubes[m] = SensingCube{std::move(y), m};
    });
    return cubes;
}

} // namespace cfisac
