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

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "cfisac/channel.hpp"
#include "cfisac/scene.hpp"
#include "cfisac/tensor.hpp"
#include "cfisac/waveform.hpp"

namespace cfisac
{

/*!
 * Fisher information for the LoS multistatic model.
 *
 * Parameter vector layout (P = 4Q + 2NMQ reals):
 *   [g1x, g1y, ..., gQx, gQy,  v1x, v1y, ..., vQx, vQy,
 *    Re beta_{n,m,q} ..., Im beta_{n,m,q} ...]
 * with the beta entries ordered by (n * M + m) * Q + q.
 */

enum class ParamKind
{
    PosX,
    PosY,
    VelX,
    VelY,
    BetaRe,
    BetaIm
};

struct ParamId
{
    ParamKind kind = ParamKind::PosX;
    std::size_t q = 0;
    std::size_t n = 0; // beta entries only
    std::size_t m = 0; // beta entries only
};

std::size_t num_params(std::size_t N, std::size_t M, std::size_t Q);
ParamId param_id(std::size_t index, std::size_t N, std::size_t M, std::size_t Q);
std::size_t param_index(const ParamId &id, std::size_t N, std::size_t M, std::size_t Q);

struct CrlbOptions
{
    // Reproduce the simplified angle derivative (d treated as constant, no
    // Doppler-through-position term) instead of the exact chain rule.
    bool simplified_derivatives = false;
    std::size_t threads = 1;
};

class CrlbModel
{
public:
    CrlbModel(const Scene &scene, const SensingParams &params, const TransmitBlock &transmit, const CTensor3 &beta,
              CrlbOptions options = {});

    std::size_t size() const { return num_params_; }

    // Noiseless rho_{i,m}[t] = sum_n G_{i,n,m}[t] x_{i,n}[t].
    Eigen::VectorXcd rho(std::size_t i, std::size_t m, std::size_t t) const;

    // All partial derivatives d rho_{i,m}[t] / d eta as columns (M_r x P).
    Eigen::MatrixXcd jacobian(std::size_t i, std::size_t m, std::size_t t) const;

    // [F]_{a,b} = Re{(2 / noise_var) sum_{m,i,t} drho_a^H drho_b}.
    Eigen::MatrixXd fim() const;

private:
    struct Path
    {
        std::size_t n = 0;
        std::size_t q = 0;
        cd amplitude;
        double sqrt_pl = 0.0;
        double tau = 0.0;
        double doppler = 0.0;
        Eigen::VectorXcd a_r;
        Eigen::VectorXcd a_t;
        Eigen::VectorXd k_r; // element indices 0..M_r-1
        double two_pi_dl_r = 0.0;
        double two_pi_dl_t = 0.0;
        std::array<double, 2> dlog_amp{};  // dA/dg / A
        std::array<double, 2> dd{};        // d distance / dg
        std::array<double, 2> dfd{};       // d f_D / dg
        std::array<double, 2> dcos_t{};    // d cos(aod) / dg
        std::array<double, 2> dcos_r{};    // d cos(aoa) / dg
        std::array<double, 2> dphi_dv{};   // d phi / dv divided by t
    };

    void add_slice(std::size_t i, std::size_t t, std::size_t m, Eigen::MatrixXcd &jac, const std::vector<cd> &r,
                   const std::vector<cd> &rk) const;

    const Scene &scene_;
    const SensingParams &params_;
    const TransmitBlock &transmit_;
    CrlbOptions options_;
    std::size_t N_ = 0, M_ = 0, Q_ = 0, num_params_ = 0;
    std::vector<std::vector<Path>> paths_; // [m][n * Q + q]
    Eigen::VectorXcd k_t_;                 // transmit element indices
};

struct CrlbReport
{
    Eigen::MatrixXd fim;
    Eigen::MatrixXd crlb_psi;                   // 4Q x 4Q
    std::vector<std::array<double, 2>> loc_bounds; // per target (x, y) variance, m^2
    std::vector<std::array<double, 2>> vel_bounds; // per target (x, y) variance, m^2/s^2

    // sqrt((1/Q) sum_q (Cxx + Cyy)).
    double root_location() const;
    double root_velocity() const;
};

// Schur complement over the beta block; throws SingularNuisanceBlock when
// the beta block condition number exceeds 1e12.
CrlbReport crlb_from_fim(const Eigen::MatrixXd &fim, std::size_t num_targets);

CrlbReport crlb_report(const Scene &scene, const SensingParams &params, const TransmitBlock &transmit,
                       const CTensor3 &beta, CrlbOptions options = {});

Eigen::VectorXcd rho(std::size_t i, std::size_t m, std::size_t t, const Scene &scene, const SensingParams &params,
                     const TransmitBlock &transmit, const CTensor3 &beta);

Eigen::VectorXcd drho(std::size_t i, std::size_t m, std::size_t t, const Scene &scene, const SensingParams &params,
                      const TransmitBlock &transmit, const CTensor3 &beta, std::size_t which,
                      CrlbOptions options = {});

Eigen::MatrixXd fim(const Scene &scene, const SensingParams &params, const TransmitBlock &transmit,
                    const CTensor3 &beta, CrlbOptions options = {});

} // namespace cfisac
