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

#include "cfisac/waveform.hpp"

#include <array>
#include <cmath>

#include "cfisac/errors.hpp"
#include "cfisac/rng.hpp"
#include "cfisac/units.hpp"

namespace cfisac
{

Eigen::VectorXcd TransmitBlock::x_vec(std::size_t n, std::size_t i, std::size_t t) const
{
    const auto nt = static_cast<Eigen::Index>(num_antennas());
    Eigen::VectorXcd v(nt);
    for (Eigen::Index a = 0; a < nt; ++a)
        v(a) = x(n, static_cast<std::size_t>(a), i, t);
    return v;
}

double TransmitBlock::ap_power(std::size_t n) const
{
    double p = 0.0;
    for (std::size_t a = 0; a < precoders.dim(1); ++a)
        for (std::size_t k = 0; k < precoders.dim(2); ++k)
            for (std::size_t i = 0; i < precoders.dim(3); ++i)
                p += std::norm(precoders(n, a, k, i));
    return p;
}

TransmitBlock TransmitBlock::scaled(double factor) const
{
    TransmitBlock out = *this;
    for (auto &v : out.x.values())
        v *= factor;
    for (auto &v : out.precoders.values())
        v *= factor;
    return out;
}

CTensor3 gen_qam16(std::size_t num_users, std::size_t num_subcarriers, std::size_t num_symbols, std::uint64_t seed,
                   std::uint64_t sample)
{
    if (num_users == 0 || num_subcarriers == 0 || num_symbols == 0)
        fail(ErrorKind::InvalidArgument, "payload dimensions must be >= 1");
    static constexpr std::array<double, 4> levels{-3.0, -1.0, 1.0, 3.0};
    const double scale = 1.0 / std::sqrt(10.0);
    CTensor3 s({num_users, num_subcarriers, num_symbols});
    Rng rng(seed, sample, Stream::Payload);
    for (auto &v : s.values())
    {
        const auto bits = rng.below(16);
        v = cd(levels[bits & 3u], levels[(bits >> 2) & 3u]) * scale;
    }
    return s;
}

CommChannels gen_comm_channels(const Scene &scene, const PathlossModel &pathloss, double subcarrier_spacing,
                               std::size_t num_subcarriers)
{
    if (scene.users.empty())
        fail(ErrorKind::InvalidArgument, "scene has no users");
    const std::size_t K = scene.users.size();
    const std::size_t N = scene.tx_aps.size();
    const std::size_t Nt = scene.tx_aps.front().array.num_elements;
    for (const auto &ap : scene.tx_aps)
        if (ap.array.num_elements != Nt)
            fail(ErrorKind::ShapeMismatch, "all transmit APs must have the same antenna count");

    CommChannels ch{CTensor4({K, N, Nt, num_subcarriers})};
    const double lambda = scene.wavelength();
    for (std::size_t k = 0; k < K; ++k)
    {
        for (std::size_t n = 0; n < N; ++n)
        {
            const auto look = look_angle(scene.tx_aps[n], scene.users[k]);
            const Eigen::VectorXcd a = steering_vector_cos(scene.tx_aps[n].array, look.cos, lambda);
            const double amp = std::sqrt(pathloss.gain(look.distance) * static_cast<double>(Nt));
            for (std::size_t i = 0; i < num_subcarriers; ++i)
            {
                const double phase =
                    -kTwoPi * static_cast<double>(i) * subcarrier_spacing * look.distance / scene.light_speed;
                const cd g = std::polar(amp, phase);
                for (std::size_t a_idx = 0; a_idx < Nt; ++a_idx)
                    ch.h(k, n, a_idx, i) = g * a(static_cast<Eigen::Index>(a_idx));
            }
        }
    }
    return ch;
}

CTensor4 mmse_precode(const CommChannels &channels, double noise_var, double power_w)
{
    const std::size_t K = channels.h.dim(0);
    const std::size_t N = channels.h.dim(1);
    const std::size_t Nt = channels.h.dim(2);
    const std::size_t Ns = channels.h.dim(3);
    if (K > N * Nt)
        fail(ErrorKind::InvalidArgument, "more users than transmit antennas");
    if (!(power_w > 0.0) || noise_var < 0.0)
        fail(ErrorKind::InvalidArgument, "power must be positive and noise variance nonnegative");

    const auto rows = static_cast<Eigen::Index>(N * Nt);
    const auto users = static_cast<Eigen::Index>(K);
    const double reg = static_cast<double>(K) * noise_var * static_cast<double>(Ns) / power_w;

    CTensor4 w({N, Nt, K, Ns});
    Eigen::MatrixXcd H(rows, users);
    for (std::size_t i = 0; i < Ns; ++i)
    {
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t a = 0; a < Nt; ++a)
                    H(static_cast<Eigen::Index>(n * Nt + a), static_cast<Eigen::Index>(k)) = channels.h(k, n, a, i);

        Eigen::MatrixXcd gram = H.adjoint() * H;
        gram.diagonal().array() += reg;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gram, Eigen::EigenvaluesOnly);
        const double lmax = eig.eigenvalues().maxCoeff();
        const double lmin = eig.eigenvalues().minCoeff();
        if (!(lmin > 0.0) || lmax / lmin > 1e12)
            fail(ErrorKind::SingularChannel, "regularized Gram matrix is numerically singular");

        const Eigen::MatrixXcd Wi = H * gram.ldlt().solve(Eigen::MatrixXcd::Identity(users, users));
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t a = 0; a < Nt; ++a)
                for (std::size_t k = 0; k < K; ++k)
                    w(n, a, k, i) = Wi(static_cast<Eigen::Index>(n * Nt + a), static_cast<Eigen::Index>(k));
    }

    for (std::size_t n = 0; n < N; ++n)
    {
        double p = 0.0;
        for (std::size_t a = 0; a < Nt; ++a)
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t i = 0; i < Ns; ++i)
                    p += std::norm(w(n, a, k, i));
        if (!(p > 0.0))
            continue;
        const double c = std::sqrt(power_w / p);
        for (std::size_t a = 0; a < Nt; ++a)
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t i = 0; i < Ns; ++i)
                    w(n, a, k, i) *= c;
    }
    return w;
}

TransmitBlock assemble_transmit(const CTensor4 &precoders, const CTensor3 &payload)
{
    const std::size_t N = precoders.dim(0);
    const std::size_t Nt = precoders.dim(1);
    const std::size_t K = precoders.dim(2);
    const std::size_t Ns = precoders.dim(3);
    if (payload.dim(0) != K || payload.dim(1) != Ns)
        fail(ErrorKind::ShapeMismatch, "payload shape does not match precoders");
    const std::size_t Ts = payload.dim(2);

    TransmitBlock tb;
    tb.precoders = precoders;
    tb.s = payload;
    tb.x = CTensor4({N, Nt, Ns, Ts});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t a = 0; a < Nt; ++a)
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t i = 0; i < Ns; ++i)
                {
                    const cd wv = precoders(n, a, k, i);
                    if (wv == cd(0.0))
                        continue;
                    cd *xr = &tb.x(n, a, i, std::size_t{0});
                    const cd *sr = &payload(k, i, std::size_t{0});
                    for (std::size_t t = 0; t < Ts; ++t)
                        xr[t] += wv * sr[t];
                }
    return tb;
}

} // namespace cfisac
