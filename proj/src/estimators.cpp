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

#include "cfisac/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

#include <fftw3.h>

#include "cfisac/errors.hpp"
#include "cfisac/units.hpp"

namespace cfisac
{

namespace
{

using RowMatrixXcd = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::mutex &fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

// out[k][l] = sum_{i,t} h[i][t] exp(+j2pi ik/N_s) exp(-j2pi tl/T_s)
Eigen::MatrixXcd delay_doppler_transform(const Eigen::MatrixXcd &h)
{
    const int Ns = static_cast<int>(h.rows());
    const int Ts = static_cast<int>(h.cols());
    const std::size_t count = static_cast<std::size_t>(Ns) * static_cast<std::size_t>(Ts);
    auto *in = reinterpret_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * count));
    auto *out = reinterpret_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * count));
    if (!in || !out)
        fail(ErrorKind::InvalidArgument, "FFT buffer allocation failed");
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_2d(Ns, Ts, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    // Reversing the subcarrier axis turns the forward transform into an inverse one along it.
    for (int i = 0; i < Ns; ++i)
    {
        const int src = (Ns - i) % Ns;
        for (int t = 0; t < Ts; ++t)
        {
            const cd v = h(src, t);
            in[i * Ts + t][0] = v.real();
            in[i * Ts + t][1] = v.imag();
        }
    }
    fftw_execute(plan);
    Eigen::MatrixXcd result(Ns, Ts);
    for (int k = 0; k < Ns; ++k)
        for (int l = 0; l < Ts; ++l)
            result(k, l) = cd(out[k * Ts + l][0], out[k * Ts + l][1]);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return result;
}

double parabolic_offset(double left, double centre, double right)
{
    const double denom = left - 2.0 * centre + right;
    if (!(denom < 0.0))
        return 0.0;
    return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

template <typename F>
double golden_max(F &&f, double lo, double hi, int iterations = 60)
{
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int k = 0; k < iterations; ++k)
    {
        if (f1 < f2)
        {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
        else
        {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    return f1 >= f2 ? x1 : x2;
}

// |sum_{i,t} h exp(+j2pi i kappa/N_s) exp(-j2pi t ell/T_s)| maximized by coordinate ascent.
void refine_dtft(const Eigen::MatrixXcd &h, double &kappa, double &ell)
{
    const Eigen::Index Ns = h.rows();
    const Eigen::Index Ts = h.cols();
    auto along_t = [&](double l) {
        Eigen::VectorXcd w(Ts);
        for (Eigen::Index t = 0; t < Ts; ++t)
            w(t) = std::polar(1.0, -kTwoPi * static_cast<double>(t) * l / static_cast<double>(Ts));
        return Eigen::VectorXcd(h * w);
    };
    auto along_i = [&](double k) {
        Eigen::VectorXcd w(Ns);
        for (Eigen::Index i = 0; i < Ns; ++i)
            w(i) = std::polar(1.0, kTwoPi * static_cast<double>(i) * k / static_cast<double>(Ns));
        return Eigen::VectorXcd(h.transpose() * w);
    };
    auto value = [&](double k, double l) {
        const Eigen::VectorXcd u = along_t(l);
        cd s = 0.0;
        for (Eigen::Index i = 0; i < Ns; ++i)
            s += u(i) * std::polar(1.0, kTwoPi * static_cast<double>(i) * k / static_cast<double>(Ns));
        return std::abs(s);
    };

    const double start = value(kappa, ell);
    double k = kappa, l = ell;
    for (int round = 0; round < 3; ++round)
    {
        const Eigen::VectorXcd u = along_t(l);
        k = golden_max(
            [&](double kk) {
                cd s = 0.0;
                for (Eigen::Index i = 0; i < Ns; ++i)
                    s += u(i) * std::polar(1.0, kTwoPi * static_cast<double>(i) * kk / static_cast<double>(Ns));
                return std::abs(s);
            },
            k - 0.6, k + 0.6);
        const Eigen::VectorXcd w = along_i(k);
        l = golden_max(
            [&](double ll) {
                cd s = 0.0;
                for (Eigen::Index t = 0; t < Ts; ++t)
                    s += w(t) * std::polar(1.0, -kTwoPi * static_cast<double>(t) * ll / static_cast<double>(Ts));
                return std::abs(s);
            },
            l - 0.6, l + 0.6);
    }
    if (value(k, l) >= start)
    {
        kappa = k;
        ell = l;
    }
}

Eigen::MatrixXcd beamform(const CTensor3 &y, const Eigen::VectorXcd &a_r)
{
    const std::size_t Mr = y.dim(0), Ns = y.dim(1), Ts = y.dim(2);
    const Eigen::Map<const RowMatrixXcd> Y(y.data(), static_cast<Eigen::Index>(Mr),
                                           static_cast<Eigen::Index>(Ns * Ts));
    const RowMatrixXcd z = a_r.adjoint() * Y; // 1 x (N_s T_s)
    Eigen::MatrixXcd out(static_cast<Eigen::Index>(Ns), static_cast<Eigen::Index>(Ts));
    for (std::size_t i = 0; i < Ns; ++i)
        for (std::size_t t = 0; t < Ts; ++t)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
                z(0, static_cast<Eigen::Index>(i * Ts + t));
    return out;
}

Eigen::MatrixXcd references(const TransmitBlock &transmit, std::size_t n, const Eigen::VectorXcd &a_t)
{
    const std::size_t Nt = transmit.num_antennas(), Ns = transmit.num_subcarriers(), Ts = transmit.num_symbols();
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(Ns), static_cast<Eigen::Index>(Ts));
    for (std::size_t a = 0; a < Nt; ++a)
    {
        const cd w = std::conj(a_t(static_cast<Eigen::Index>(a)));
        for (std::size_t i = 0; i < Ns; ++i)
            for (std::size_t t = 0; t < Ts; ++t)
                ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) += w * transmit.x(n, a, i, t);
    }
    return ref;
}

Eigen::MatrixXcd divide_guarded(const Eigen::MatrixXcd &z, const Eigen::MatrixXcd &ref)
{
    Eigen::MatrixXcd h(z.rows(), z.cols());
    std::size_t weak = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index t = 0; t < z.cols(); ++t)
        {
            if (std::abs(ref(i, t)) < 1e-9)
            {
                h(i, t) = 0.0;
                ++weak;
            }
            else
                h(i, t) = z(i, t) / ref(i, t);
        }
    if (static_cast<double>(weak) > 0.01 * static_cast<double>(z.size()))
        fail(ErrorKind::WeakReference, std::to_string(weak) + " of " + std::to_string(z.size()) +
                                           " reference symbols are below 1e-9");
    return h;
}

Eigen::MatrixXcd path_phases(double tau, double doppler, const SensingParams &params)
{
    const auto Ns = static_cast<Eigen::Index>(params.num_subcarriers);
    const auto Ts = static_cast<Eigen::Index>(params.num_symbols);
    const double dT = params.symbol_duration();
    Eigen::MatrixXcd out(Ns, Ts);
    for (Eigen::Index i = 0; i < Ns; ++i)
        for (Eigen::Index t = 0; t < Ts; ++t)
            out(i, t) = std::polar(1.0, -kTwoPi * (static_cast<double>(i) * tau * params.subcarrier_spacing -
                                                   static_cast<double>(t) * doppler * dT));
    return out;
}

void check_cube(const SensingCube &cube, const ArraySpec &rx_array)
{
    if (cube.y.dim(0) != rx_array.num_elements)
        fail(ErrorKind::ShapeMismatch, "cube antenna dimension does not match the receive array");
    if (cube.y.empty())
        fail(ErrorKind::ShapeMismatch, "empty sensing cube");
}

} // namespace

std::vector<double> angle_grid(double grid_step)
{
    if (!(grid_step > 0.0) || !(grid_step < kPi))
        fail(ErrorKind::InvalidArgument, "grid step must be in (0, pi)");
    std::vector<double> grid;
    for (std::size_t k = 1;; ++k)
    {
        const double a = static_cast<double>(k) * grid_step;
        if (!(a < kPi))
            break;
        grid.push_back(a);
    }
    return grid;
}

std::vector<double> music_spectrum(const SensingCube &cube, const ArraySpec &rx_array, double wavelength,
                                   std::size_t num_targets, double grid_step)
{
    check_cube(cube, rx_array);
    const auto Mr = static_cast<Eigen::Index>(rx_array.num_elements);
    if (num_targets == 0 || static_cast<Eigen::Index>(num_targets) >= Mr)
        fail(ErrorKind::InvalidArgument, "MUSIC needs 0 < Q < M_r");
    const std::size_t cols = cube.y.dim(1) * cube.y.dim(2);
    const Eigen::Map<const RowMatrixXcd> Y(cube.y.data(), Mr, static_cast<Eigen::Index>(cols));
    Eigen::MatrixXcd R = (Y * Y.adjoint()) / static_cast<double>(cols);
    R = 0.5 * (R + R.adjoint()).eval();

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(R);
    const Eigen::VectorXd &lam = eig.eigenvalues(); // ascending
    const double lmax = lam(Mr - 1);
    if (!(lmax > 0.0))
        fail(ErrorKind::RankDeficient, "sample covariance is zero");
    std::size_t significant = 0;
    for (Eigen::Index k = 0; k < Mr; ++k)
        if (lam(k) > 0.0 && lmax / lam(k) < 1e6)
            ++significant;
    if (significant < num_targets)
        fail(ErrorKind::RankDeficient, "sample covariance has " + std::to_string(significant) +
                                           " significant eigenvalues, fewer than Q = " +
                                           std::to_string(num_targets));

    const Eigen::MatrixXcd En = eig.eigenvectors().leftCols(Mr - static_cast<Eigen::Index>(num_targets));
    const auto grid = angle_grid(grid_step);
    std::vector<double> spectrum(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        const Eigen::VectorXcd a = steering_vector(rx_array, grid[k], wavelength);
        const double denom = (En.adjoint() * a).squaredNorm();
        spectrum[k] = 1.0 / std::max(denom, std::numeric_limits<double>::min());
    }
    return spectrum;
}

std::vector<double> music_angles(const SensingCube &cube, const ArraySpec &rx_array, double wavelength,
                                 std::size_t num_targets, double grid_step)
{
    const auto spectrum = music_spectrum(cube, rx_array, wavelength, num_targets, grid_step);
    const auto grid = angle_grid(grid_step);
    const std::size_t G = spectrum.size();

    std::vector<std::size_t> peaks;
    for (std::size_t k = 0; k < G; ++k)
    {
        const bool left_ok = k == 0 || spectrum[k] > spectrum[k - 1];
        const bool right_ok = k + 1 == G || spectrum[k] >= spectrum[k + 1];
        if (left_ok && right_ok)
            peaks.push_back(k);
    }
    auto by_value = [&](std::size_t a, std::size_t b) {
        return spectrum[a] != spectrum[b] ? spectrum[a] > spectrum[b] : a < b;
    };
    std::sort(peaks.begin(), peaks.end(), by_value);
    if (peaks.size() < num_targets)
    {
        std::vector<std::size_t> rest(G);
        std::iota(rest.begin(), rest.end(), 0);
        std::sort(rest.begin(), rest.end(), by_value);
        for (std::size_t k : rest)
        {
            if (peaks.size() >= num_targets)
                break;
            if (std::find(peaks.begin(), peaks.end(), k) == peaks.end())
                peaks.push_back(k);
        }
    }
    std::vector<double> angles;
    for (std::size_t j = 0; j < num_targets; ++j)
        angles.push_back(grid[peaks[j]]);
    return angles;
}

DelayDopplerEstimate delay_doppler_from_ratio(const Eigen::MatrixXcd &h, const SensingParams &params,
                                              PeakRefinement refine)
{
    const Eigen::Index Ns = h.rows();
    const Eigen::Index Ts = h.cols();
    if (Ns != static_cast<Eigen::Index>(params.num_subcarriers) ||
        Ts != static_cast<Eigen::Index>(params.num_symbols))
        fail(ErrorKind::ShapeMismatch, "ratio matrix does not match the numerology");

    DelayDopplerEstimate est;
    est.map = delay_doppler_transform(h).cwiseAbs();
    Eigen::Index k = 0, l = 0;
    for (Eigen::Index kk = 0; kk < Ns; ++kk)
        for (Eigen::Index ll = 0; ll < Ts; ++ll)
            if (est.map(kk, ll) > est.map(k, l))
            {
                k = kk;
                l = ll;
            }
    est.delay_bin = static_cast<std::size_t>(k);
    est.doppler_bin = static_cast<std::size_t>(l);

    double kappa = static_cast<double>(k);
    double ell = static_cast<double>(l);
    if (refine != PeakRefinement::None)
    {
        const auto &M = est.map;
        if (Ns >= 3)
            kappa += parabolic_offset(M((k + Ns - 1) % Ns, l), M(k, l), M((k + 1) % Ns, l));
        if (Ts >= 3)
            ell += parabolic_offset(M(k, (l + Ts - 1) % Ts), M(k, l), M(k, (l + 1) % Ts));
        if (refine == PeakRefinement::Dtft)
            refine_dtft(h, kappa, ell);
    }
    if (ell >= 0.5 * static_cast<double>(Ts))
        ell -= static_cast<double>(Ts);
    est.tau = kappa / (static_cast<double>(Ns) * params.subcarrier_spacing);
    est.doppler = ell / (static_cast<double>(Ts) * params.symbol_duration());
    return est;
}

Eigen::MatrixXcd reciprocal_filter(const CTensor3 &y, const ArraySpec &rx_array, const TransmitBlock &transmit,
                                   std::size_t tx_index, const ArraySpec &tx_array, double aoa, double aod,
                                   double wavelength)
{
    if (tx_index >= transmit.num_tx())
        fail(ErrorKind::InvalidArgument, "transmit AP index out of range");
    if (y.dim(0) != rx_array.num_elements || y.dim(1) != transmit.num_subcarriers() ||
        y.dim(2) != transmit.num_symbols() || tx_array.num_elements != transmit.num_antennas())
        fail(ErrorKind::ShapeMismatch, "cube, arrays and transmit block disagree");
    const Eigen::MatrixXcd z = beamform(y, steering_vector(rx_array, aoa, wavelength));
    const Eigen::MatrixXcd ref = references(transmit, tx_index, steering_vector(tx_array, aod, wavelength));
    return divide_guarded(z, ref);
}

DelayDopplerEstimate delay_doppler_map(const SensingCube &cube, const ArraySpec &rx_array,
                                       const TransmitBlock &transmit, std::size_t tx_index, const ArraySpec &tx_array,
                                       double aoa, double aod, const SensingParams &params, double wavelength,
                                       PeakRefinement refine)
{
    check_cube(cube, rx_array);
    return delay_doppler_from_ratio(
        reciprocal_filter(cube.y, rx_array, transmit, tx_index, tx_array, aoa, aod, wavelength), params, refine);
}

Ray make_ray(const ApSite &ap, double angle, const Region &region)
{
    return {ap.position, ray_direction(ap, angle, region)};
}

bool intersect_rays(const Ray &a, const Ray &b, Vec2 &out)
{
    const double det = -a.direction.x * b.direction.y + b.direction.x * a.direction.y;
    if (std::abs(det) < 1e-12)
        return false;
    const Vec2 d = b.origin - a.origin;
    const double s = (-d.x * b.direction.y + b.direction.x * d.y) / det;
    const double u = (a.direction.x * d.y - a.direction.y * d.x) / det;
    if (s < 0.0 || u < 0.0)
        return false;
    out = a.origin + a.direction * s;
    return true;
}

Vec2 closest_point(const std::vector<Ray> &rays, const Vec2 &fallback)
{
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    for (const auto &r : rays)
    {
        const Eigen::Vector2d d(r.direction.x, r.direction.y);
        const Eigen::Matrix2d P = Eigen::Matrix2d::Identity() - d * d.transpose() / d.squaredNorm();
        A += P;
        b += P * Eigen::Vector2d(r.origin.x, r.origin.y);
    }
    if (rays.size() < 2 || std::abs(A.determinant()) < 1e-12)
        return fallback;
    const Eigen::Vector2d p = A.ldlt().solve(b);
    return {p(0), p(1)};
}

Association associate(const std::vector<std::vector<double>> &angles, const std::vector<ApSite> &rx_aps,
                      const Region &region, const GroupCost &extra, bool strict)
{
    const std::size_t M = angles.size();
    if (M == 0 || M != rx_aps.size())
        fail(ErrorKind::ShapeMismatch, "need one detection list per receive AP");
    const std::size_t Q = angles.front().size();
    for (const auto &a : angles)
        if (a.size() != Q)
            fail(ErrorKind::ShapeMismatch, "every receive AP must report the same number of detections");
    if (Q == 0)
        return {};

    const double margin = 0.2 * std::max(region.width(), region.height());
    auto group_cost = [&](const std::vector<std::size_t> &group) {
        std::vector<Ray> rays;
        for (std::size_t m = 0; m < M; ++m)
            rays.push_back(make_ray(rx_aps[m], angles[m][group[m]], region));
        double cost = 0.0;
        std::vector<Vec2> points;
        for (std::size_t a = 0; a < M; ++a)
            for (std::size_t b = a + 1; b < M; ++b)
            {
                Vec2 p;
                if (!intersect_rays(rays[a], rays[b], p))
                {
                    cost += 1e6;
                    continue;
                }
                if (!region.contains(p, margin))
                {
                    const double ox = std::max({region.x_min - margin - p.x, 0.0, p.x - region.x_max - margin});
                    const double oy = std::max({region.y_min - margin - p.y, 0.0, p.y - region.y_max - margin});
                    cost += 1e4 + ox * ox + oy * oy;
                }
                points.push_back(p);
            }
        for (std::size_t a = 0; a < points.size(); ++a)
            for (std::size_t b = a + 1; b < points.size(); ++b)
            {
                const Vec2 d = points[a] - points[b];
                cost += d.dot(d);
            }
        if (extra)
            cost += extra(group);
        return cost;
    };

    std::vector<std::size_t> base(Q);
    std::iota(base.begin(), base.end(), 0);
    std::vector<std::vector<std::size_t>> perms;
    {
        auto p = base;
        do
            perms.push_back(p);
        while (std::next_permutation(p.begin(), p.end()));
    }

    // Mixed-radix counter over the permutations of APs 1..M-1; AP 0 keeps identity order.
    std::vector<std::size_t> choice(M, 0);
    std::vector<std::pair<double, std::vector<std::vector<std::size_t>>>> candidates;
    while (true)
    {
        std::vector<std::vector<std::size_t>> groups(Q, std::vector<std::size_t>(M));
        for (std::size_t q = 0; q < Q; ++q)
        {
            groups[q][0] = q;
            for (std::size_t m = 1; m < M; ++m)
                groups[q][m] = perms[choice[m]][q];
        }
        double cost = 0.0;
        for (const auto &g : groups)
            cost += group_cost(g);
        candidates.emplace_back(cost, std::move(groups));

        std::size_t m = M;
        while (m > 1)
        {
            --m;
            if (++choice[m] < perms.size())
                break;
            choice[m] = 0;
            if (m == 1)
            {
                m = 0;
                break;
            }
        }
        if (m == 0 || M == 1)
            break;
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c)
        if (candidates[c].first < candidates[best].first)
            best = c;
    Association out;
    out.cost = candidates[best].first;
    out.groups = candidates[best].second;
    for (std::size_t c = 0; c < candidates.size(); ++c)
        if (c != best && std::abs(candidates[c].first - out.cost) < 1e-9)
            out.ambiguous = true;
    if (out.ambiguous && strict)
        fail(ErrorKind::AmbiguousAssociation, "two assignments have equal cost");
    return out;
}

LocalizeResult localize(const std::vector<AngleMeasurement> &angles, const std::vector<RangeMeasurement> &ranges,
                        const Scene &layout, const LocalizeOptions &options)
{
    if (angles.size() + ranges.size() < 2)
        fail(ErrorKind::InvalidArgument, "localize needs at least two measurements");
    for (const auto &a : angles)
        if (a.rx >= layout.rx_aps.size())
            fail(ErrorKind::InvalidArgument, "angle measurement references an unknown receive AP");
    for (const auto &r : ranges)
        if (r.rx >= layout.rx_aps.size() || r.tx >= layout.tx_aps.size())
            fail(ErrorKind::InvalidArgument, "range measurement references an unknown AP");

    const std::size_t R = angles.size() + ranges.size();
    auto evaluate = [&](const Vec2 &g, Eigen::VectorXd &res, Eigen::MatrixXd *J) {
        res.resize(static_cast<Eigen::Index>(R));
        if (J)
            J->resize(static_cast<Eigen::Index>(R), 2);
        Eigen::Index row = 0;
        for (const auto &a : angles)
        {
            const auto &ap = layout.rx_aps[a.rx];
            const double dx = g.x - ap.position.x, dy = g.y - ap.position.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < kCollocationThreshold * kCollocationThreshold)
                fail(ErrorKind::DegenerateGeometry, "estimate collocated with a receive AP");
            const double kappa = ap.array.axis_sign();
            const double sigma = dy >= 0.0 ? 1.0 : -1.0;
            const double X = kappa * dx, Y = std::abs(dy);
            res(row) = std::sqrt(options.angle_weight) * (std::atan2(Y, X) - a.angle);
            if (J)
            {
                (*J)(row, 0) = std::sqrt(options.angle_weight) * (-Y * kappa / d2);
                (*J)(row, 1) = std::sqrt(options.angle_weight) * (X * sigma / d2);
            }
            ++row;
        }
        for (const auto &r : ranges)
        {
            const Vec2 dt = g - layout.tx_aps[r.tx].position;
            const Vec2 dr = g - layout.rx_aps[r.rx].position;
            const double nt = dt.norm(), nr = dr.norm();
            if (nt < kCollocationThreshold || nr < kCollocationThreshold)
                fail(ErrorKind::DegenerateGeometry, "estimate collocated with an AP");
            res(row) = std::sqrt(options.range_weight) * (nt + nr - r.range);
            if (J)
            {
                (*J)(row, 0) = std::sqrt(options.range_weight) * (dt.x / nt + dr.x / nr);
                (*J)(row, 1) = std::sqrt(options.range_weight) * (dt.y / nt + dr.y / nr);
            }
            ++row;
        }
    };

    std::vector<Ray> rays;
    for (const auto &a : angles)
        rays.push_back(make_ray(layout.rx_aps[a.rx], a.angle, layout.region));
    LocalizeResult result;
    result.position = closest_point(rays, layout.region.center());

    Eigen::VectorXd res;
    Eigen::MatrixXd J;
    evaluate(result.position, res, &J);
    result.cost = res.squaredNorm();
    for (std::size_t it = 0; it < options.max_iterations; ++it)
    {
        result.iterations = it + 1;
        const Eigen::Matrix2d H = J.transpose() * J;
        const Eigen::Vector2d grad = J.transpose() * res;
        const Eigen::Vector2d step = -H.completeOrthogonalDecomposition().solve(grad);
        if (!step.allFinite() || step.norm() < 1e-12)
        {
            result.converged = true;
            break;
        }
        double scale = 1.0;
        bool improved = false;
        Vec2 candidate;
        Eigen::VectorXd cres;
        for (int k = 0; k < 40; ++k, scale *= 0.5)
        {
            candidate = {result.position.x + scale * step(0), result.position.y + scale * step(1)};
            try
            {
                evaluate(candidate, cres, nullptr);
            }
            catch (const Error &)
            {
                continue;
            }
            if (cres.squaredNorm() < result.cost)
            {
                improved = true;
                break;
            }
        }
        if (!improved)
        {
            result.converged = true;
            break;
        }
        const double previous = result.cost;
        result.position = candidate;
        evaluate(result.position, res, &J);
        result.cost = res.squaredNorm();
        if (scale * step.norm() < 1e-10 || previous - result.cost <= 1e-15 * previous)
        {
            result.converged = true;
            break;
        }
    }
    return result;
}

Vec2 velocity_ls(const std::vector<DopplerMeasurement> &dopplers, const Vec2 &position, const Scene &layout)
{
    if (dopplers.size() < 2)
        fail(ErrorKind::InvalidArgument, "velocity_ls needs at least two Doppler measurements");
    const auto K = static_cast<Eigen::Index>(dopplers.size());
    Eigen::MatrixXd A(K, 2);
    Eigen::VectorXd b(K);
    for (Eigen::Index k = 0; k < K; ++k)
    {
        const auto &d = dopplers[static_cast<std::size_t>(k)];
        if (d.tx >= layout.tx_aps.size() || d.rx >= layout.rx_aps.size())
            fail(ErrorKind::InvalidArgument, "Doppler measurement references an unknown AP");
        const auto tl = look_angle(layout.tx_aps[d.tx], position);
        const auto rl = look_angle(layout.rx_aps[d.rx], position);
        A(k, 0) = -tl.cos + rl.cos;
        A(k, 1) = tl.sin - rl.sin;
        b(k) = layout.light_speed * d.doppler / layout.carrier_freq_hz;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto &s = svd.singularValues();
    if (!(s(1) > 0.0) || s(0) / s(1) > 1e8)
        fail(ErrorKind::SingularGeometry, "velocity design matrix is ill-conditioned");
    const Eigen::Vector2d v = svd.solve(b);
    return {v(0), v(1)};
}

PipelineOptions pipeline_options(const EstimatorConfig &config)
{
    PipelineOptions o;
    o.grid_step = config.grid_step;
    o.sic_sweeps = config.sic_sweeps;
    return o;
}

namespace
{

struct PathFit
{
    std::size_t n = 0;
    std::size_t q = 0;
    double aoa = 0.0;
    double aod = 0.0;
    double tau = 0.0;
    double doppler = 0.0;
    cd alpha;
    bool valid = false;
};

void add_path(CTensor3 &cube, const PathFit &p, const Eigen::VectorXcd &a_r, const Eigen::MatrixXcd &ref,
              const SensingParams &params, double sign)
{
    const Eigen::MatrixXcd s = ref.cwiseProduct(path_phases(p.tau, p.doppler, params)) * (sign * p.alpha);
    const std::size_t Mr = cube.dim(0), Ns = cube.dim(1), Ts = cube.dim(2);
    for (std::size_t a = 0; a < Mr; ++a)
    {
        const cd w = a_r(static_cast<Eigen::Index>(a));
        for (std::size_t i = 0; i < Ns; ++i)
            for (std::size_t t = 0; t < Ts; ++t)
                cube(a, i, t) += w * s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    }
}

// Successive cancellation of (tx, target) paths at one receive AP.
void fit_paths(const SensingCube &cube, const ApSite &rx, const Scene &layout, const TransmitBlock &transmit,
               const SensingParams &params, std::vector<PathFit> &paths, const PipelineOptions &options)
{
    const double lambda = layout.wavelength();
    CTensor3 residual = cube.y;
    std::vector<Eigen::VectorXcd> a_r(paths.size());
    std::vector<Eigen::MatrixXcd> refs(paths.size());
    for (std::size_t k = 0; k < paths.size(); ++k)
    {
        a_r[k] = steering_vector(rx.array, paths[k].aoa, lambda);
        refs[k] = references(transmit, paths[k].n, steering_vector(layout.tx_aps[paths[k].n].array, paths[k].aod,
                                                                   lambda));
        paths[k].valid = false;
    }
    const std::size_t sweeps = std::max<std::size_t>(options.sic_sweeps, 1);
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep)
    {
        for (std::size_t k = 0; k < paths.size(); ++k)
        {
            PathFit &p = paths[k];
            if (p.valid)
                add_path(residual, p, a_r[k], refs[k], params, 1.0);
            const CTensor3 &source = options.sic_sweeps == 0 ? cube.y : residual;
            const Eigen::MatrixXcd z = beamform(source, a_r[k]);
            const Eigen::MatrixXcd matched = refs[k].conjugate().cwiseProduct(z);
            const auto est = delay_doppler_from_ratio(divide_guarded(z, refs[k]), params,
                                                      options.refine == PeakRefinement::None ? PeakRefinement::None
                                                                                             : PeakRefinement::Parabolic);
            double kappa = est.tau * static_cast<double>(params.num_subcarriers) * params.subcarrier_spacing;
            double ell = est.doppler * static_cast<double>(params.num_symbols) * params.symbol_duration();
            if (options.refine == PeakRefinement::Dtft)
                refine_dtft(matched, kappa, ell);
            p.tau = kappa / (static_cast<double>(params.num_subcarriers) * params.subcarrier_spacing);
            p.doppler = ell / (static_cast<double>(params.num_symbols) * params.symbol_duration());
            const Eigen::MatrixXcd s = refs[k].cwiseProduct(path_phases(p.tau, p.doppler, params));
            const double energy = s.squaredNorm();
            p.alpha = energy > 0.0 ? s.conjugate().cwiseProduct(z).sum() / energy : cd{};
            p.valid = true;
            if (options.sic_sweeps > 0)
                add_path(residual, p, a_r[k], refs[k], params, -1.0);
        }
    }
}

// Joint Doppler fit at one receive AP with every path delay fixed by the
// located geometry. Amplitudes are eliminated by least squares and the
// remaining energy b^H G^{-1} b is maximized one Doppler at a time.
class PinnedDopplerFit
{
public:
    PinnedDopplerFit(const SensingCube &cube, const ApSite &rx, const Scene &layout, const TransmitBlock &transmit,
                     const SensingParams &params, const std::vector<PathFit> &paths)
        : P_(paths.size()), Ts_(static_cast<Eigen::Index>(params.num_symbols))
    {
        const double lambda = layout.wavelength();
        const auto Ns = static_cast<Eigen::Index>(params.num_subcarriers);
        std::vector<Eigen::VectorXcd> a_r(P_);
        std::vector<Eigen::MatrixXcd> base(P_);
        B_.assign(P_, Eigen::VectorXcd());
        for (std::size_t k = 0; k < P_; ++k)
        {
            a_r[k] = steering_vector(rx.array, paths[k].aoa, lambda);
            Eigen::MatrixXcd ref =
                references(transmit, paths[k].n, steering_vector(layout.tx_aps[paths[k].n].array, paths[k].aod, lambda));
            for (Eigen::Index i = 0; i < Ns; ++i)
                ref.row(i) *= std::polar(1.0, -kTwoPi * static_cast<double>(i) * paths[k].tau * params.subcarrier_spacing);
            base[k] = std::move(ref);
            const Eigen::MatrixXcd z = beamform(cube.y, a_r[k]);
            B_[k] = base[k].conjugate().cwiseProduct(z).colwise().sum().transpose();
        }
        C_.assign(P_ * P_, Eigen::VectorXcd());
        for (std::size_t k = 0; k < P_; ++k)
            for (std::size_t l = 0; l < P_; ++l)
                C_[k * P_ + l] = a_r[k].dot(a_r[l]) * base[k].conjugate().cwiseProduct(base[l]).colwise().sum().transpose();
        ell_.assign(P_, 0.0);
    }

    // Doppler in bins (f * T_s * dT) per path.
    std::vector<double> &ell() { return ell_; }

    double energy() const
    {
        std::vector<Eigen::VectorXcd> phase(P_);
        for (std::size_t k = 0; k < P_; ++k)
            phase[k] = ramp(ell_[k]);
        const auto Pn = static_cast<Eigen::Index>(P_);
        Eigen::MatrixXcd G(Pn, Pn);
        Eigen::VectorXcd b(Pn);
        for (std::size_t k = 0; k < P_; ++k)
        {
            b(static_cast<Eigen::Index>(k)) = phase[k].dot(B_[k]);
            for (std::size_t l = 0; l < P_; ++l)
                G(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) =
                    phase[k].dot(C_[k * P_ + l].cwiseProduct(phase[l]));
        }
        const Eigen::LDLT<Eigen::MatrixXcd> ldlt(G);
        if (ldlt.info() != Eigen::Success)
            return 0.0;
        const cd e = b.dot(ldlt.solve(b));
        return std::isfinite(e.real()) ? e.real() : 0.0;
    }

    void fit(double max_bins, std::size_t sweeps)
    {
        const double step = 0.05;
        const auto count = static_cast<int>(std::ceil(max_bins / step));
        for (std::size_t sweep = 0; sweep < sweeps; ++sweep)
        {
            for (std::size_t k = 0; k < P_; ++k)
            {
                double best_ell = ell_[k];
                double best = energy();
                for (int g = -count; g <= count; ++g)
                {
                    ell_[k] = g * step;
                    const double e = energy();
                    if (e > best)
                    {
                        best = e;
                        best_ell = ell_[k];
                    }
                }
                ell_[k] = golden_max(
                    [&](double v) {
                        ell_[k] = v;
                        return energy();
                    },
                    best_ell - step, best_ell + step, 40);
                if (energy() < best)
                    ell_[k] = best_ell;
            }
        }
    }

private:
    Eigen::VectorXcd ramp(double ell) const
    {
        Eigen::VectorXcd r(Ts_);
        for (Eigen::Index t = 0; t < Ts_; ++t)
            r(t) = std::polar(1.0, kTwoPi * static_cast<double>(t) * ell / static_cast<double>(Ts_));
        return r;
    }

    std::size_t P_;
    Eigen::Index Ts_;
    std::vector<Eigen::VectorXcd> B_; // sum_i conj(base_k) z_k, per symbol
    std::vector<Eigen::VectorXcd> C_; // (a_k^H a_l) sum_i conj(base_k) base_l, per symbol
    std::vector<double> ell_;
};

} // namespace

FusedEstimate classical_estimate(const std::vector<SensingCube> &cubes, const TransmitBlock &transmit,
                                 const Scene &layout, const SensingParams &params, std::size_t num_targets,
                                 const PipelineOptions &options)
{
    const std::size_t M = layout.rx_aps.size();
    const std::size_t N = layout.tx_aps.size();
    if (cubes.size() != M)
        fail(ErrorKind::ShapeMismatch, "need one cube per receive AP");
    if (transmit.num_tx() != N)
        fail(ErrorKind::ShapeMismatch, "transmit block does not match the transmit APs");
    const double lambda = layout.wavelength();
    const double c = layout.light_speed;
    const std::size_t Q = num_targets;

    FusedEstimate out;
    std::vector<std::vector<double>> angles(M);
    for (std::size_t m = 0; m < M; ++m)
        angles[m] = music_angles(cubes[m], layout.rx_aps[m].array, lambda, Q, options.grid_step);

    auto rays_of = [&](const std::vector<std::size_t> &group) {
        std::vector<Ray> rays;
        for (std::size_t m = 0; m < M; ++m)
            rays.push_back(make_ray(layout.rx_aps[m], angles[m][group[m]], layout.region));
        return rays;
    };
    auto safe_aod = [&](std::size_t n, const Vec2 &p) {
        const Vec2 d = p - layout.tx_aps[n].position;
        if (d.norm() < kCollocationThreshold)
            return 0.5 * kPi;
        return look_angle(layout.tx_aps[n], p).radians();
    };

    const double bins_per_hz = static_cast<double>(params.num_symbols) * params.symbol_duration();
    const double max_bins = 2.0 * std::sqrt(2.0) * layout.v_max * layout.carrier_freq_hz / c * bins_per_hz + 0.5;
    auto pinned_paths = [&](std::size_t m, const Vec2 &p, std::size_t q, double aoa) {
        std::vector<PathFit> paths;
        for (std::size_t n = 0; n < N; ++n)
        {
            PathFit f;
            f.n = n;
            f.q = q;
            f.aoa = aoa;
            f.aod = safe_aod(n, p);
            f.tau = ((p - layout.tx_aps[n].position).norm() + (p - layout.rx_aps[m].position).norm()) / c;
            paths.push_back(f);
        }
        return paths;
    };

    // For several targets the ray geometry alone cannot pair detections when
    // M = 2, so each candidate group is also scored by the fraction of cube
    // energy its delay-pinned paths explain.
    GroupCost energy_cost;
    std::vector<double> cube_energy(M);
    for (std::size_t m = 0; m < M; ++m)
        cube_energy[m] = std::max(Eigen::Map<const Eigen::VectorXcd>(cubes[m].y.data(),
                                                                     static_cast<Eigen::Index>(cubes[m].y.size()))
                                      .squaredNorm(),
                                  std::numeric_limits<double>::min());
    if (Q > 1)
    {
        const double scale = layout.region.width() * layout.region.width() +
                             layout.region.height() * layout.region.height();
        energy_cost = [&, scale](const std::vector<std::size_t> &group) {
            const Vec2 p = closest_point(rays_of(group), layout.region.center());
            double explained = 0.0;
            for (std::size_t m = 0; m < M; ++m)
            {
                PinnedDopplerFit fit(cubes[m], layout.rx_aps[m], layout, transmit, params,
                                     pinned_paths(m, p, 0, angles[m][group[m]]));
                fit.fit(max_bins, 1);
                explained += fit.energy() / cube_energy[m];
            }
            return -scale * explained;
        };
    }
    const Association assoc = associate(angles, layout.rx_aps, layout.region, energy_cost);
    out.ambiguous = assoc.ambiguous;

    std::vector<Vec2> points(Q);
    for (std::size_t q = 0; q < Q; ++q)
        points[q] = closest_point(rays_of(assoc.groups[q]), layout.region.center());

    LocalizeOptions lo;
    lo.angle_weight = 1.0 / (options.grid_step * options.grid_step);
    const double range_res = c / (static_cast<double>(params.num_subcarriers) * params.subcarrier_spacing);
    lo.range_weight = 12.0 / (range_res * range_res);

    std::vector<std::vector<PathFit>> fits(M);
    std::vector<LocalizeResult> located(Q);
    const std::size_t passes = std::max<std::size_t>(options.refine_passes, 1);
    for (std::size_t pass = 0; pass < passes; ++pass)
    {
        for (std::size_t m = 0; m < M; ++m)
        {
            fits[m].clear();
            for (std::size_t q = 0; q < Q; ++q)
                for (std::size_t n = 0; n < N; ++n)
                {
                    PathFit p;
                    p.n = n;
                    p.q = q;
                    p.aoa = angles[m][assoc.groups[q][m]];
                    p.aod = safe_aod(n, points[q]);
                    fits[m].push_back(p);
                }
            fit_paths(cubes[m], layout.rx_aps[m], layout, transmit, params, fits[m], options);
        }
        for (std::size_t q = 0; q < Q; ++q)
        {
            std::vector<AngleMeasurement> am;
            std::vector<RangeMeasurement> rm;
            for (std::size_t m = 0; m < M; ++m)
            {
                am.push_back({m, angles[m][assoc.groups[q][m]]});
                for (const auto &f : fits[m])
                    if (f.q == q)
                        rm.push_back({f.n, m, c * f.tau});
            }
            located[q] = localize(am, rm, layout, lo);
            points[q] = located[q].position;
        }
    }

    for (std::size_t m = 0; m < M; ++m)
    {
        for (auto &f : fits[m])
        {
            const Vec2 &p = points[f.q];
            f.tau = ((p - layout.tx_aps[f.n].position).norm() + (p - layout.rx_aps[m].position).norm()) / c;
            f.aod = safe_aod(f.n, p);
        }
        PinnedDopplerFit pinned(cubes[m], layout.rx_aps[m], layout, transmit, params, fits[m]);
        for (std::size_t k = 0; k < fits[m].size(); ++k)
            pinned.ell()[k] = std::clamp(fits[m][k].doppler * bins_per_hz, -max_bins, max_bins);
        pinned.fit(max_bins, std::max<std::size_t>(options.sic_sweeps, 1));
        for (std::size_t k = 0; k < fits[m].size(); ++k)
            fits[m][k].doppler = pinned.ell()[k] / bins_per_hz;
    }

    for (std::size_t q = 0; q < Q; ++q)
    {
        std::vector<DopplerMeasurement> dm;
        for (std::size_t m = 0; m < M; ++m)
            for (const auto &f : fits[m])
                if (f.q == q)
                    dm.push_back({f.n, m, f.doppler});
        out.positions.push_back(points[q]);
        out.velocities.push_back(velocity_ls(dm, points[q], layout));
        out.residuals.push_back(located[q].cost);
        // a fix far outside the surveillance region is not a usable solution
        const double slack = 0.2 * std::max(layout.region.width(), layout.region.height());
        const bool inside = layout.region.contains(points[q], slack);
        const bool bounded = out.velocities.back().norm() <= 2.0 * std::sqrt(2.0) * layout.v_max;
        out.converged = out.converged && located[q].converged && inside && bounded;
    }

    for (std::size_t m = 0; m < M; ++m)
    {
        ApDetections det;
        det.rx_index = m;
        det.paths.assign(Q, std::vector<DelayDoppler>(N));
        for (std::size_t q = 0; q < Q; ++q)
            det.angles.push_back(angles[m][assoc.groups[q][m]]);
        for (const auto &f : fits[m])
            det.paths[f.q][f.n] = {f.tau, f.doppler};
        out.detections.push_back(std::move(det));
    }
    return out;
}

} // namespace cfisac
