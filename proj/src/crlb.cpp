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

#include "cfisac/crlb.hpp"

#include <cmath>

#include "cfisac/errors.hpp"
#include "cfisac/parallel.hpp"
#include "cfisac/units.hpp"

namespace cfisac
{

namespace
{

constexpr cd kJ{0.0, 1.0};

struct AngleDerivatives
{
    std::array<double, 2> dcos{};
    std::array<double, 2> dsin{};
    std::array<double, 2> dd{};
};

AngleDerivatives angle_derivatives(const ApSite &ap, const Vec2 &g)
{
    const double dx = g.x - ap.position.x;
    const double dy = g.y - ap.position.y;
    const double d = std::hypot(dx, dy);
    if (d < kCollocationThreshold)
        fail(ErrorKind::DegenerateGeometry, "target collocated with an AP");
    const double d3 = d * d * d;
    const double kappa = ap.array.axis_sign();
    const double sigma = dy >= 0.0 ? 1.0 : -1.0;
    AngleDerivatives out;
    out.dcos = {kappa * dy * dy / d3, -kappa * dx * dy / d3};
    out.dsin = {-sigma * dy * dx / d3, sigma * dx * dx / d3};
    out.dd = {dx / d, dy / d};
    return out;
}

} // namespace

std::size_t num_params(std::size_t N, std::size_t M, std::size_t Q)
{
    return 4 * Q + 2 * N * M * Q;
}

ParamId param_id(std::size_t index, std::size_t N, std::size_t M, std::size_t Q)
{
    if (index >= num_params(N, M, Q))
        fail(ErrorKind::InvalidArgument, "parameter index out of range");
    ParamId id;
    if (index < 2 * Q)
    {
        id.kind = index % 2 == 0 ? ParamKind::PosX : ParamKind::PosY;
        id.q = index / 2;
        return id;
    }
    if (index < 4 * Q)
    {
        const std::size_t k = index - 2 * Q;
        id.kind = k % 2 == 0 ? ParamKind::VelX : ParamKind::VelY;
        id.q = k / 2;
        return id;
    }
    std::size_t k = index - 4 * Q;
    const std::size_t nb = N * M * Q;
    id.kind = k < nb ? ParamKind::BetaRe : ParamKind::BetaIm;
    k %= nb;
    id.q = k % Q;
    id.m = (k / Q) % M;
    id.n = k / (Q * M);
    return id;
}

std::size_t param_index(const ParamId &id, std::size_t N, std::size_t M, std::size_t Q)
{
    switch (id.kind)
    {
    case ParamKind::PosX: return 2 * id.q;
    case ParamKind::PosY: return 2 * id.q + 1;
    case ParamKind::VelX: return 2 * Q + 2 * id.q;
    case ParamKind::VelY: return 2 * Q + 2 * id.q + 1;
    case ParamKind::BetaRe: return 4 * Q + (id.n * M + id.m) * Q + id.q;
    case ParamKind::BetaIm: return 4 * Q + N * M * Q + (id.n * M + id.m) * Q + id.q;
    }
    return 0;
}

CrlbModel::CrlbModel(const Scene &scene, const SensingParams &params, const TransmitBlock &transmit,
                     const CTensor3 &beta, CrlbOptions options)
    : scene_(scene), params_(params), transmit_(transmit), options_(options), N_(scene.tx_aps.size()),
      M_(scene.rx_aps.size()), Q_(scene.targets.size()), num_params_(num_params(N_, M_, Q_))
{
    if (beta.dim(0) != N_ || beta.dim(1) != M_ || beta.dim(2) != Q_)
        fail(ErrorKind::ShapeMismatch, "beta must be [N][M][Q]");
    if (transmit.num_tx() != N_ || transmit.num_subcarriers() != params.num_subcarriers ||
        transmit.num_symbols() != params.num_symbols)
        fail(ErrorKind::ShapeMismatch, "transmit block does not match scene / numerology");

    const auto Nt = static_cast<Eigen::Index>(transmit.num_antennas());
    k_t_ = Eigen::VectorXd::LinSpaced(Nt, 0.0, static_cast<double>(Nt) - 1.0).cast<cd>();
    const double lambda = scene.wavelength();
    const double fc_c = scene.carrier_freq_hz / scene.light_speed;
    const double dT = params.symbol_duration();
    paths_.resize(M_);
    for (std::size_t m = 0; m < M_; ++m)
    {
        const auto &rx = scene.rx_aps[m];
        for (std::size_t n = 0; n < N_; ++n)
        {
            const auto &tx = scene.tx_aps[n];
            if (tx.array.num_elements != transmit.num_antennas())
                fail(ErrorKind::ShapeMismatch, "transmit antenna count mismatch");
            for (std::size_t q = 0; q < Q_; ++q)
            {
                const Target &target = scene.targets[q];
                const auto geo = bistatic_geometry(tx, rx, target.position);
                const auto dd = delay_doppler(tx, rx, target, scene.carrier_freq_hz, scene.light_speed);
                const auto dt = angle_derivatives(tx, target.position);
                const auto dr = angle_derivatives(rx, target.position);

                Path p;
                p.n = n;
                p.q = q;
                p.sqrt_pl = std::sqrt(pathloss(geo.d_bistatic, params));
                p.amplitude = beta(n, m, q) * p.sqrt_pl;
                p.tau = dd.tau;
                p.doppler = dd.doppler;
                p.a_r = steering_vector_cos(rx.array, geo.rx_look.cos, lambda);
                p.a_t = steering_vector_cos(tx.array, geo.tx_look.cos, lambda);
                p.k_r = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(rx.array.num_elements), 0.0,
                                                   static_cast<double>(rx.array.num_elements) - 1.0);
                p.two_pi_dl_r = kTwoPi * rx.array.spacing / lambda;
                p.two_pi_dl_t = kTwoPi * tx.array.spacing / lambda;
                const Vec2 &v = target.velocity;
                for (int a = 0; a < 2; ++a)
                {
                    p.dd[a] = dt.dd[a] + dr.dd[a];
                    p.dlog_amp[a] = -params.pathloss.zeta / (2.0 * geo.d_bistatic) * p.dd[a];
                    if (options.simplified_derivatives)
                    {
                        p.dcos_t[a] = a == 0 ? tx.array.axis_sign() / geo.d_tx : 0.0;
                        p.dcos_r[a] = a == 0 ? rx.array.axis_sign() / geo.d_rx : 0.0;
                        p.dfd[a] = 0.0;
                    }
                    else
                    {
                        p.dcos_t[a] = dt.dcos[a];
                        p.dcos_r[a] = dr.dcos[a];
                        p.dfd[a] = fc_c * (-v.x * dt.dcos[a] + v.y * dt.dsin[a] + v.x * dr.dcos[a] -
                                           v.y * dr.dsin[a]);
                    }
                }
                p.dphi_dv = {-kTwoPi * dT * fc_c * (-geo.tx_look.cos + geo.rx_look.cos),
                             -kTwoPi * dT * fc_c * (geo.tx_look.sin - geo.rx_look.sin)};
                paths_[m].push_back(std::move(p));
            }
        }
    }
}

Eigen::VectorXcd CrlbModel::rho(std::size_t i, std::size_t m, std::size_t t) const
{
    if (i >= params_.num_subcarriers || t >= params_.num_symbols || m >= M_)
        fail(ErrorKind::InvalidArgument, "rho index out of range");
    const double df = params_.subcarrier_spacing;
    const double dT = params_.symbol_duration();
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(scene_.rx_aps[m].array.num_elements));
    for (const auto &p : paths_[m])
    {
        const Eigen::VectorXcd x = transmit_.x_vec(p.n, i, t);
        const double phi = kTwoPi * (static_cast<double>(i) * p.tau * df - static_cast<double>(t) * p.doppler * dT);
        out += (p.amplitude * std::polar(1.0, -phi) * p.a_t.dot(x)) * p.a_r;
    }
    return out;
}

void CrlbModel::add_slice(std::size_t i, std::size_t t, std::size_t m, Eigen::MatrixXcd &jac,
                          const std::vector<cd> &r, const std::vector<cd> &rk) const
{
    const double df = params_.subcarrier_spacing;
    const double dT = params_.symbol_duration();
    const double c = scene_.light_speed;
    const double di = static_cast<double>(i);
    const double dt = static_cast<double>(t);
    const std::size_t nb = N_ * M_ * Q_;

    for (std::size_t idx = 0; idx < paths_[m].size(); ++idx)
    {
        const Path &p = paths_[m][idx];
        const cd ref = r[p.n * Q_ + p.q];
        const cd ref_k = rk[p.n * Q_ + p.q];
        const double phi = kTwoPi * (di * p.tau * df - dt * p.doppler * dT);
        const cd rot = std::polar(1.0, -phi);
        const cd coeff = p.amplitude * rot;

        const std::size_t b = (p.n * M_ + m) * Q_ + p.q;
        const Eigen::VectorXcd base = (p.sqrt_pl * rot * ref) * p.a_r;
        jac.col(static_cast<Eigen::Index>(4 * Q_ + b)) += base;
        jac.col(static_cast<Eigen::Index>(4 * Q_ + nb + b)) += kJ * base;

        for (int a = 0; a < 2; ++a)
        {
            const double dphi = kTwoPi * (di * df * p.dd[a] / c - dt * dT * p.dfd[a]);
            const cd scalar = ref * cd(p.dlog_amp[a], -dphi) + kJ * (p.two_pi_dl_t * p.dcos_t[a]) * ref_k;
            const Eigen::ArrayXd ramp = -p.two_pi_dl_r * p.dcos_r[a] * p.k_r.array();
            Eigen::VectorXcd term = (scalar + (kJ * ref) * ramp.cast<cd>()).matrix();
            term = coeff * p.a_r.cwiseProduct(term);
            jac.col(static_cast<Eigen::Index>(2 * p.q + a)) += term;

            const double dphi_v = dt * p.dphi_dv[a];
            jac.col(static_cast<Eigen::Index>(2 * Q_ + 2 * p.q + a)) += (coeff * -kJ * dphi_v * ref) * p.a_r;
        }
    }
}

Eigen::MatrixXcd CrlbModel::jacobian(std::size_t i, std::size_t m, std::size_t t) const
{
    if (i >= params_.num_subcarriers || t >= params_.num_symbols || m >= M_)
        fail(ErrorKind::InvalidArgument, "jacobian index out of range");
    const auto Mr = static_cast<Eigen::Index>(scene_.rx_aps[m].array.num_elements);
    Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(Mr, static_cast<Eigen::Index>(num_params_));
    std::vector<Eigen::VectorXcd> x(N_);
    std::vector<cd> r(N_ * Q_), rk(N_ * Q_);
    for (std::size_t n = 0; n < N_; ++n)
        x[n] = transmit_.x_vec(n, i, t);
    for (const auto &p : paths_[m])
    {
        r[p.n * Q_ + p.q] = p.a_t.dot(x[p.n]);
        rk[p.n * Q_ + p.q] = p.a_t.dot(k_t_.cwiseProduct(x[p.n]));
    }
    add_slice(i, t, m, jac, r, rk);
    return jac;
}

Eigen::MatrixXd CrlbModel::fim() const
{
    if (!(params_.noise_var > 0.0))
        fail(ErrorKind::InvalidArgument, "FIM needs a positive noise variance");
    const std::size_t Ns = params_.num_subcarriers;
    const std::size_t Ts = params_.num_symbols;
    const auto P = static_cast<Eigen::Index>(num_params_);

    std::vector<Eigen::MatrixXd> partial(Ns);
    parallel_for(Ns, options_.threads, [&](std::size_t i) {
        Eigen::Index rows = 0;
        for (std::size_t m = 0; m < M_; ++m)
            rows += static_cast<Eigen::Index>(scene_.rx_aps[m].array.num_elements);
        Eigen::MatrixXcd stacked(rows * static_cast<Eigen::Index>(Ts), P);
        std::vector<Eigen::VectorXcd> x(N_);
        std::vector<cd> r(N_ * Q_), rk(N_ * Q_);
        Eigen::Index row = 0;
        for (std::size_t t = 0; t < Ts; ++t)
        {
            for (std::size_t n = 0; n < N_; ++n)
                x[n] = transmit_.x_vec(n, i, t);
            for (std::size_t m = 0; m < M_; ++m)
            {
                for (const auto &p : paths_[m])
                {
                    r[p.n * Q_ + p.q] = p.a_t.dot(x[p.n]);
                    rk[p.n * Q_ + p.q] = p.a_t.dot(k_t_.cwiseProduct(x[p.n]));
                }
                const auto Mr = static_cast<Eigen::Index>(scene_.rx_aps[m].array.num_elements);
                Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(Mr, P);
                add_slice(i, t, m, jac, r, rk);
                stacked.middleRows(row, Mr) = jac;
                row += Mr;
            }
        }
        partial[i] = (stacked.adjoint() * stacked).real();
    });
    Eigen::MatrixXd F = tree_reduce(std::move(partial));
    F *= 2.0 / params_.noise_var;
    return 0.5 * (F + F.transpose());
}

double CrlbReport::root_location() const
{
    if (loc_bounds.empty())
        return 0.0;
    double s = 0.0;
    for (const auto &b : loc_bounds)
        s += b[0] + b[1];
    return std::sqrt(s / static_cast<double>(loc_bounds.size()));
}

double CrlbReport::root_velocity() const
{
    if (vel_bounds.empty())
        return 0.0;
    double s = 0.0;
    for (const auto &b : vel_bounds)
        s += b[0] + b[1];
    return std::sqrt(s / static_cast<double>(vel_bounds.size()));
}

CrlbReport crlb_from_fim(const Eigen::MatrixXd &F, std::size_t Q)
{
    const Eigen::Index np = static_cast<Eigen::Index>(4 * Q);
    if (F.rows() != F.cols() || F.rows() <= np)
        fail(ErrorKind::ShapeMismatch, "FIM must be square with a nuisance block");
    const Eigen::Index nb = F.rows() - np;
    const Eigen::MatrixXd Fpp = F.topLeftCorner(np, np);
    const Eigen::MatrixXd Fpb = F.topRightCorner(np, nb);
    const Eigen::MatrixXd Fbb = F.bottomRightCorner(nb, nb);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Fbb, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12)
        fail(ErrorKind::SingularNuisanceBlock, "beta block of the FIM is singular or ill-conditioned");

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(Fbb);
    Eigen::MatrixXd schur = Fpp - Fpb * ldlt.solve(Fpb.transpose());
    schur = 0.5 * (schur + schur.transpose());
    const Eigen::LDLT<Eigen::MatrixXd> sldlt(schur);
    if (sldlt.info() != Eigen::Success || !sldlt.isPositive() || sldlt.vectorD().minCoeff() <= 0.0)
        fail(ErrorKind::SingularGeometry, "Schur complement of the FIM is not positive definite");

    CrlbReport report;
    report.fim = F;
    report.crlb_psi = sldlt.solve(Eigen::MatrixXd::Identity(np, np));
    report.crlb_psi = 0.5 * (report.crlb_psi + report.crlb_psi.transpose());
    for (std::size_t q = 0; q < Q; ++q)
    {
        const auto px = static_cast<Eigen::Index>(2 * q);
        const auto vx = static_cast<Eigen::Index>(2 * Q + 2 * q);
        report.loc_bounds.push_back({report.crlb_psi(px, px), report.crlb_psi(px + 1, px + 1)});
        report.vel_bounds.push_back({report.crlb_psi(vx, vx), report.crlb_psi(vx + 1, vx + 1)});
    }
    return report;
}

CrlbReport crlb_report(const Scene &scene, const SensingParams &params, const TransmitBlock &transmit,
                       const CTensor3 &beta, CrlbOptions options)
{
    const CrlbModel model(scene, params, transmit, beta, options);
    return crlb_from_fim(model.fim(), scene.targets.size());
}

Eigen::VectorXcd rho(std::size_t i, std::size_t m, std::size_t t, const Scene &scene, const SensingParams &params,
                     const TransmitBlock &transmit, const CTensor3 &beta)
{
    return CrlbModel(scene, params, transmit, beta).rho(i, m, t);
}

Eigen::VectorXcd drho(std::size_t i, std::size_t m, std::size_t t, const Scene &scene, const SensingParams &params,
                      const TransmitBlock &transmit, const CTensor3 &beta, std::size_t which, CrlbOptions options)
{
    const CrlbModel model(scene, params, transmit, beta, options);
    if (which >= model.size())
        fail(ErrorKind::InvalidArgument, "parameter index out of range");
    return model.jacobian(i, m, t).col(static_cast<Eigen::Index>(which));
}

Eigen::MatrixXd fim(const Scene &scene, const SensingParams &params, const TransmitBlock &transmit,
                    const CTensor3 &beta, CrlbOptions options)
{
    return CrlbModel(scene, params, transmit, beta, options).fim();
}

} // namespace cfisac
