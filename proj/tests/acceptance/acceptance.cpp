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

// Acceptance gate. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cfisac/cli.hpp"
#include "cfisac/crlb.hpp"
#include "cfisac/dataset.hpp"
#include "cfisac/estimators.hpp"
#include "cfisac/rng.hpp"
#include "cfisac/simulation.hpp"
#include "cfisac/vqcodec.hpp"
#include "oracles.hpp"

using namespace cfisac;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
    bool pass = false;
    std::string detail;
};

struct Criterion
{
    std::string name;
    double time_limit_s; // <= 0: no limit
    std::function<Outcome()> run;
};

std::string fmt(const char *f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome overhead()
{
    auto run = [](std::vector<std::string> args) {
        std::ostringstream out, err;
        args.insert(args.begin(), "overhead");
        return run_cli(args, out, err) == 0 ? out.str() : std::string("error");
    };
    const auto d = run({"--scheme", "distributed", "--q", "2"});
    const auto c = run({"--scheme", "centralized", "--mr", "16", "--ns", "256", "--ts", "256"});
    const auto p = run({"--scheme", "proposed", "--nb", "5", "--l", "16384"});
    const bool exact = d == "192\n" && c == "67108864\n" && p == "81920\n";
    const double reduction = 1.0 - 81920.0 / 67108864.0;
    return {exact && reduction > 0.99, "distributed=192 centralized=67108864 proposed=81920 " +
                                           std::string(exact ? "matched" : "MISMATCH") +
                                           ", reduction=" + fmt("%.5f", reduction)};
}

Outcome derivative_gate()
{
    auto cfg = testing::desk_config();
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s)
    {
        cfg.num_targets = 1 + s % 2;
        const auto smp = generate_sample(cfg, 7, s, false);
        worst = std::max(worst, testing::jacobian_fd_error(smp.scene, cfg.sensing, smp.transmit, smp.draw.beta,
                                                           {0, 5, 31, 63}, {0, 9, 40, 63}));
    }
    return {worst < 1e-5, "20 scenes (Q=1,2), max relative error " + fmt("%.3e", worst) + " (limit 1e-5)"};
}

Outcome full_scale_crlb()
{
    const auto cfg = testing::full_config();
    std::vector<double> loc, vel;
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
    {
        const auto smp = generate_sample(cfg, seed, 0, false);
        CrlbOptions opts;
        opts.threads = 0;
        const auto r = crlb_report(smp.scene, cfg.sensing, smp.transmit, smp.draw.beta, opts);
        loc.push_back(r.root_location());
        vel.push_back(r.root_velocity());
    }
    const double ml = median(loc);
    const double mv = median(vel);
    return {ml < 0.1 && mv < 0.1, "median root-CRLB over 5 seeds: location " + fmt("%.4f", ml) +
                                      " m, velocity " + fmt("%.4f", mv) + " m/s (limit 0.1 each)"};
}

Outcome scaling_laws()
{
    auto cfg = testing::desk_config();
    double worst_ratio = 0.0;
    double worst_rx = -1e300;
    for (std::uint64_t s = 0; s < 5; ++s)
    {
        cfg.num_targets = 1 + s % 2;
        const auto smp = generate_sample(cfg, 21, s, false);
        const auto C1 = crlb_report(smp.scene, cfg.sensing, smp.transmit, smp.draw.beta).crlb_psi;
        const auto C2 =
            crlb_report(smp.scene, cfg.sensing, smp.transmit.scaled(std::sqrt(2.0)), smp.draw.beta).crlb_psi;
        for (Eigen::Index k = 0; k < C1.rows(); ++k)
            worst_ratio = std::max(worst_ratio, std::abs(C2(k, k) / C1(k, k) - 0.5) / 0.5);

        // third receive AP on the far edge, reusing the first AP's reflections
        Scene more = smp.scene;
        more.rx_aps.push_back({{50.0, 100.0}, smp.scene.rx_aps[0].array});
        const auto &b = smp.draw.beta;
        CTensor3 nb({b.dim(0), b.dim(1) + 1, b.dim(2)});
        for (std::size_t n = 0; n < b.dim(0); ++n)
            for (std::size_t q = 0; q < b.dim(2); ++q)
            {
                for (std::size_t m = 0; m < b.dim(1); ++m)
                    nb(n, m, q) = b(n, m, q);
                nb(n, b.dim(1), q) = b(n, 0, q);
            }
        const auto C3 = crlb_report(more, cfg.sensing, smp.transmit, nb).crlb_psi;
        for (Eigen::Index k = 0; k < C1.rows(); ++k)
            worst_rx = std::max(worst_rx, C3(k, k) / C1(k, k) - 1.0);
    }
    return {worst_ratio < 1e-9 && worst_rx <= 1e-12,
            "power doubling: max relative deviation from 1/2 " + fmt("%.2e", worst_ratio) +
                "; extra rx AP: max diagonal change " + fmt("%+.3e", worst_rx) + " (must be <= 0)"};
}

Outcome pipeline()
{
    auto cfg = testing::desk_config();
    const double c = kSpeedOfLight;
    const double loc_res = c / (2.0 * static_cast<double>(cfg.sensing.num_subcarriers) * cfg.sensing.subcarrier_spacing);
    const double vel_res = c / (2.0 * cfg.layout.carrier_freq_hz * static_cast<double>(cfg.sensing.num_symbols) *
                                cfg.sensing.symbol_duration());
    int passed = 0;
    double worst_loc = 0.0, worst_vel = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s)
    {
        const auto g = testing::on_grid_scene(cfg, 11, s);
        const auto est = classical_estimate(g.cubes, g.transmit, g.scene, cfg.sensing, cfg.num_targets,
                                            pipeline_options(cfg.estimator));
        const auto &tg = g.scene.targets[0];
        double dmax = 0.0;
        for (const auto &rx : g.scene.rx_aps)
            dmax = std::max(dmax, (tg.position - rx.position).norm());
        const double le = (est.positions[0] - tg.position).norm();
        const double ve = std::max(std::abs(est.velocities[0].x - tg.velocity.x),
                                   std::abs(est.velocities[0].y - tg.velocity.y));
        worst_loc = std::max(worst_loc, le);
        worst_vel = std::max(worst_vel, ve);
        passed += le <= loc_res + cfg.estimator.grid_step / 2.0 * dmax && ve <= vel_res;
    }
    return {passed == 50, std::to_string(passed) + "/50 scenes; worst location " + fmt("%.4f", worst_loc) +
                              " m (range bin " + fmt("%.3f", loc_res) + " m + grid term), worst velocity " +
                              fmt("%.4f", worst_vel) + " m/s (limit " + fmt("%.3f", vel_res) + ")"};
}

Outcome codec()
{
    Rng rng(2024);
    auto gauss = [&](Eigen::Index r, Eigen::Index cols) {
        Eigen::MatrixXd m(r, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < r; ++i)
                m(i, j) = rng.normal();
        return m;
    };
    int mismatches = 0;
    double centroid_err = 0.0;
    for (int k = 0; k < 1000; ++k)
    {
        const auto D = static_cast<Eigen::Index>(1 + rng.below(16));
        const auto Nc = static_cast<Eigen::Index>(std::size_t{1} << (1 + rng.below(7)));
        const auto L = static_cast<Eigen::Index>(1 + rng.below(64));
        auto book = make_codebook(gauss(D, Nc), 0.0);
        const auto Z = gauss(D, L);
        const auto q = quantize(Z, book);
        for (Eigen::Index l = 0; l < L; ++l)
        {
            Eigen::Index best = 0;
            double bd = 0.0;
            for (Eigen::Index j = 0; j < Nc; ++j)
            {
                const double d = (Z.col(l) - book.codewords.col(j)).squaredNorm();
                if (j == 0 || d < bd)
                {
                    bd = d;
                    best = j;
                }
            }
            mismatches += q.indices[static_cast<std::size_t>(l)] != static_cast<std::uint32_t>(best);
        }
        if (k % 10 == 0)
        {
            const auto next = ema_update(book, Z, q.indices);
            for (Eigen::Index j = 0; j < Nc; ++j)
            {
                Eigen::VectorXd sum = Eigen::VectorXd::Zero(D);
                double n = 0.0;
                for (Eigen::Index l = 0; l < L; ++l)
                    if (q.indices[static_cast<std::size_t>(l)] == static_cast<std::uint32_t>(j))
                    {
                        sum += Z.col(l);
                        n += 1.0;
                    }
                const Eigen::VectorXd want = n > 0.0 ? Eigen::VectorXd(sum / n) : Eigen::VectorXd(book.codewords.col(j));
                centroid_err = std::max(centroid_err, (next.codewords.col(j) - want).cwiseAbs().maxCoeff());
            }
        }
    }
    int pack_fail = 0;
    for (std::size_t nc = 2; nc <= 1024; nc *= 2)
        for (std::size_t len : {0ul, 1ul, 3ul, 17ul, 16384ul})
        {
            std::vector<std::uint32_t> idx(len);
            for (auto &v : idx)
                v = static_cast<std::uint32_t>(rng.below(nc));
            pack_fail += unpack_indices(pack_indices(idx, nc), len) != idx;
        }
    return {mismatches == 0 && centroid_err <= 1e-12 && pack_fail == 0,
            "1000 quantizer cases, " + std::to_string(mismatches) + " index mismatches; centroid max error " +
                fmt("%.2e", centroid_err) + "; pack/unpack failures " + std::to_string(pack_fail) +
                " (N_c = 2..1024)"};
}

Outcome channel()
{
    auto cfg = testing::desk_config();
    cfg.sensing.noise_var = 0.0;
    double oracle = 0.0;
    double ramp = 0.0;
    double norm_dev = 0.0;
    const double lambda_dt = cfg.sensing.symbol_duration();
    auto wrap = [](double a) { return std::remainder(a, 2.0 * M_PI); };
    for (std::uint64_t s = 0; s < 5; ++s)
    {
        cfg.num_targets = 1 + s % 2;
        const auto smp = generate_sample(cfg, 41, s, true);
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t i : {0ul, 17ul, 63ul})
                for (std::size_t t : {0ul, 5ul, 63ul})
                {
                    const auto ref = testing::scalar_rx(i, m, t, smp.scene, cfg.sensing, smp.transmit, smp.draw.beta);
                    double e = 0.0;
                    for (Eigen::Index a = 0; a < ref.size(); ++a)
                        e = std::max(e, std::abs(smp.cubes[m].y(static_cast<std::size_t>(a), i, t) - ref(a)));
                    oracle = std::max(oracle, e / ref.norm());
                }

        // single target, single tx: beamformed ratios expose the two ramps
        if (cfg.num_targets == 1)
            for (std::size_t n = 0; n < 2; ++n)
            {
                TransmitBlock tb = testing::constant_transmit(2, 8, 64, 64, 99);
                for (std::size_t a = 0; a < 8; ++a)
                    for (std::size_t i = 0; i < 64; ++i)
                        for (std::size_t t = 0; t < 64; ++t)
                            tb.x(1 - n, a, i, t) = 0.0;
                const auto cubes = synthesize_rx(smp.scene, cfg.sensing, tb, smp.draw, 41, s);
                for (std::size_t m = 0; m < 2; ++m)
                {
                    const auto geo = bistatic_geometry(smp.scene, n, m, 0);
                    const auto dd = delay_doppler(smp.scene, n, m, 0);
                    const auto ar = steering_vector_cos(smp.scene.rx_aps[m].array, geo.rx_look.cos, smp.scene.wavelength());
                    auto bf = [&](std::size_t i, std::size_t t) {
                        std::complex<double> acc = 0.0;
                        for (std::size_t a = 0; a < 8; ++a)
                            acc += std::conj(ar(static_cast<Eigen::Index>(a))) * cubes[m].y(a, i, t);
                        return acc;
                    };
                    for (std::size_t i = 0; i + 1 < 64; i += 7)
                        ramp = std::max(ramp, std::abs(wrap(std::arg(bf(i + 1, 3) / bf(i, 3)) +
                                                            2.0 * M_PI * dd.tau * cfg.sensing.subcarrier_spacing)));
                    for (std::size_t t = 0; t + 1 < 64; t += 7)
                        ramp = std::max(ramp, std::abs(wrap(std::arg(bf(5, t + 1) / bf(5, t)) -
                                                            2.0 * M_PI * dd.doppler * lambda_dt)));
                }
            }

        Rng rng(41, s, Stream::Generic);
        const auto G = sensing_channel(9, 0, 1, 11, smp.scene, cfg.sensing, smp.draw);
        for (int k = 0; k < 200; ++k)
        {
            const auto H = apply_async(G, rng.below(64), rng.below(64), 1e-9 * rng.normal(), 10.0 * rng.normal(),
                                       cfg.sensing);
            norm_dev = std::max(norm_dev, std::abs(H.norm() / G.norm() - 1.0));
        }
    }
    return {oracle <= 1e-12 && ramp <= 1e-9 && norm_dev <= 1e-14,
            "scalar-loop oracle max relative error " + fmt("%.2e", oracle) + " (1e-12); phase ramps " +
                fmt("%.2e", ramp) + " rad (1e-9); apply_async norm deviation " + fmt("%.2e", norm_dev) +
                " (round-off, 1e-14)"};
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism()
{
    auto cfg = testing::desk_config();
    cfg.train_count = 8;
    cfg.test_count = 4;
    cfg.sensing.num_scatterers = 2;
    const auto root = fs::temp_directory_path() / "cfisac_acceptance";
    fs::remove_all(root);
    export_dataset(cfg, (root / "t1").string(), 1);
    export_dataset(cfg, (root / "t4").string(), 4);
    int differ = 0;
    std::size_t bytes = 0;
    for (const char *f : {"train.cfis", "train.cftx", "test.cfis", "test.cftx"})
    {
        const auto a = slurp(root / "t1" / f);
        differ += a != slurp(root / "t4" / f);
        bytes += a.size();
    }
    fs::remove_all(root);
    return {differ == 0, "4 shards, " + std::to_string(bytes) + " bytes, " + std::to_string(differ) +
                             " differ between 1 and 4 threads"};
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {"overhead arithmetic", 1.0, overhead},
        {"derivative gate", 60.0, derivative_gate},
        {"CRLB full-scale threshold", 0.0, full_scale_crlb},
        {"CRLB scaling laws", 0.0, scaling_laws},
        {"classical pipeline, noiseless on-grid", 0.0, pipeline},
        {"VQ codec", 0.0, codec},
        {"channel model properties", 0.0, channel},
        {"dataset determinism", 0.0, determinism},
    };
    int failures = 0;
    for (const auto &c : criteria)
    {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.run();
        }
        catch (const std::exception &e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit_s > 0.0 && secs >= c.time_limit_s)
        {
            o.pass = false;
            o.detail += "; too slow";
        }
        failures += !o.pass;
        std::printf("%s  %-40s %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
