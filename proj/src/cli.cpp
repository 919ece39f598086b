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

#include "cfisac/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>

#include "cfisac/config.hpp"
#include "cfisac/crlb.hpp"
#include "cfisac/dataset.hpp"
#include "cfisac/errors.hpp"
#include "cfisac/estimators.hpp"
#include "cfisac/metrics.hpp"
#include "cfisac/simulation.hpp"
#include "cfisac/vqcodec.hpp"

namespace cfisac
{

namespace
{

using nlohmann::json;
namespace fs = std::filesystem;

struct Common
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> power_dbm;
    std::optional<std::size_t> clutter_s;
    bool async = false;
    std::string out_path;
    std::optional<std::size_t> threads;
};

void add_common(CLI::App *cmd, Common &c, bool needs_config)
{
    auto *opt = cmd->add_option("--config", c.config_path, "experiment configuration (JSON)");
    if (needs_config)
        opt->required();
    cmd->add_option("--seed", c.seed, "override the dataset seed");
    cmd->add_option("--power-dbm", c.power_dbm, "override the per-AP transmit power");
    cmd->add_option("--clutter-s", c.clutter_s, "number of static scatterers");
    cmd->add_flag("--async", c.async, "enable residual timing and frequency offsets");
    cmd->add_option("--out", c.out_path, "write records here instead of standard output");
    cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

ExperimentConfig resolve_config(const Common &c)
{
    ExperimentConfig cfg = load_config(c.config_path);
    if (c.seed)
        cfg.seed = *c.seed;
    if (c.power_dbm)
        cfg.power_dbm = *c.power_dbm;
    if (c.clutter_s)
        cfg.sensing.num_scatterers = *c.clutter_s;
    if (c.async)
        cfg.sensing.async = true;
    if (c.threads)
        cfg.threads = *c.threads;
    cfg.validate();
    return cfg;
}

// Records sink: the --out file when given, the caller's stream otherwise.
class Records
{
public:
    Records(const std::string &path, std::ostream &fallback) : os_(&fallback)
    {
        if (path.empty())
            return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
        if (!*file_)
            fail(ErrorKind::IoError, "cannot open '" + path + "' for writing");
        os_ = file_.get();
    }

    void emit(const json &j) { *os_ << j.dump() << '\n'; }
    std::ostream &stream() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream *os_;
};

json points(const std::vector<Vec2> &v)
{
    json a = json::array();
    for (const auto &p : v)
        a.push_back({p.x, p.y});
    return a;
}

std::vector<Vec2> read_points(const json &a, const std::string &what)
{
    if (!a.is_array())
        fail(ErrorKind::IoError, what + " must be a list of [x, y] pairs");
    std::vector<Vec2> out;
    for (const auto &p : a)
    {
        if (!p.is_array() || p.size() != 2)
            fail(ErrorKind::IoError, what + " must be a list of [x, y] pairs");
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

TargetEstimate label_targets(const Scene &scene)
{
    TargetEstimate t;
    for (const auto &q : scene.targets)
    {
        t.positions.push_back(q.position);
        t.velocities.push_back(q.velocity);
    }
    return t;
}

TargetEstimate label_targets(const std::vector<float> &label)
{
    const std::size_t Q = label.size() / 4;
    TargetEstimate t;
    for (std::size_t q = 0; q < Q; ++q)
    {
        t.positions.push_back({label[2 * q], label[2 * q + 1]});
        t.velocities.push_back({label[2 * Q + 2 * q], label[2 * Q + 2 * q + 1]});
    }
    return t;
}

json targets_json(const TargetEstimate &t)
{
    return {{"positions", points(t.positions)}, {"velocities", points(t.velocities)}};
}

double median(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// --- subcommands --------------------------------------------------------

struct SimulateArgs
{
    Common common;
    std::size_t samples = 1;
    std::uint64_t first = 0;
};

void cmd_simulate(const SimulateArgs &a, std::ostream &out)
{
    const ExperimentConfig cfg = resolve_config(a.common);
    Records rec(a.common.out_path, out);
    for (std::uint64_t s = a.first; s < a.first + a.samples; ++s)
    {
        const Sample smp = generate_sample(cfg, cfg.seed, s, true, cfg.threads);
        json energy = json::array();
        for (const auto &c : smp.cubes)
        {
            double e = 0.0;
            for (const auto &z : c.y.values())
                e += std::norm(z);
            energy.push_back(e);
        }
        json power = json::array();
        for (std::size_t n = 0; n < smp.transmit.num_tx(); ++n)
            power.push_back(smp.transmit.ap_power(n));
        json users = points(smp.scene.users);
        rec.emit({{"type", "sample"},
                  {"seed", cfg.seed},
                  {"sample", s},
                  {"targets", targets_json(label_targets(smp.scene))},
                  {"users", users},
                  {"ap_power_w", power},
                  {"cube_energy", energy}});
    }
}

struct ExportArgs
{
    Common common;
    std::optional<std::size_t> train;
    std::optional<std::size_t> test;
};

void cmd_export(ExportArgs a, std::ostream &out)
{
    ExperimentConfig cfg = resolve_config(a.common);
    if (a.train)
        cfg.train_count = *a.train;
    if (a.test)
        cfg.test_count = *a.test;
    cfg.validate();
    const auto summary = export_dataset(cfg, a.common.out_path, cfg.threads);
    Records rec("", out);
    rec.emit({{"type", "dataset"},
              {"dir", a.common.out_path},
              {"sidecar", summary.sidecar_path},
              {"train", summary.train.count},
              {"test", summary.test.count},
              {"record_bytes", cube_header(cfg).record_bytes()}});
}

struct EstimateArgs
{
    Common common;
    std::string dataset;
    std::string split = "test";
    std::size_t samples = 1;
    std::uint64_t first = 0;
};

void cmd_estimate(const EstimateArgs &a, std::ostream &out)
{
    ExperimentConfig cfg;
    if (!a.dataset.empty())
    {
        cfg = config_from_json(load_sidecar((fs::path(a.dataset) / "dataset.json").string()).at("config"));
        if (a.common.threads)
            cfg.threads = *a.common.threads;
    }
    else
    {
        cfg = resolve_config(a.common);
    }
    const PipelineOptions opts = pipeline_options(cfg.estimator);
    Records rec(a.common.out_path, out);

    auto emit = [&](std::uint64_t sample, const FusedEstimate &e, const TargetEstimate &truth) {
        rec.emit({{"type", "estimate"},
                  {"sample", sample},
                  {"positions", points(e.positions)},
                  {"velocities", points(e.velocities)},
                  {"converged", e.converged},
                  {"ambiguous", e.ambiguous},
                  {"label", targets_json(truth)}});
    };

    if (!a.dataset.empty())
    {
        if (a.split != "train" && a.split != "test")
            fail(ErrorKind::ConfigInvalid, "--split must be train or test");
        const fs::path dir(a.dataset);
        CubeReader cubes((dir / (a.split + ".cfis")).string());
        TransmitReader tx((dir / (a.split + ".cftx")).string());
        const auto side = load_sidecar((dir / "dataset.json").string());
        const std::uint64_t base = side.at(a.split).at("first_sample").get<std::uint64_t>();
        const std::size_t stop = std::min<std::size_t>(cubes.size(), a.first + a.samples);
        for (std::size_t k = a.first; k < stop; ++k)
        {
            DatasetRecord r = cubes.read(k);
            std::vector<SensingCube> sc;
            for (std::size_t m = 0; m < r.cubes.size(); ++m)
                sc.push_back({std::move(r.cubes[m]), m});
            TransmitBlock t;
            t.x = tx.read(k);
            const auto e = classical_estimate(sc, t, cfg.layout, cfg.sensing, cfg.num_targets, opts);
            emit(base + k, e, label_targets(r.label));
        }
        return;
    }
    for (std::uint64_t s = a.first; s < a.first + a.samples; ++s)
    {
        const Sample smp = generate_sample(cfg, cfg.seed, s, true, cfg.threads);
        const auto e = classical_estimate(smp.cubes, smp.transmit, cfg.layout, cfg.sensing, cfg.num_targets, opts);
        emit(s, e, label_targets(smp.scene));
    }
}

struct CrlbArgs
{
    Common common;
    std::size_t seeds = 1;
    bool simplified_derivatives = false;
};

void cmd_crlb(const CrlbArgs &a, std::ostream &out)
{
    const ExperimentConfig cfg = resolve_config(a.common);
    Records rec(a.common.out_path, out);
    CrlbOptions opts;
    opts.simplified_derivatives = a.simplified_derivatives;
    opts.threads = cfg.threads;
    std::vector<double> loc;
    std::vector<double> vel;
    for (std::uint64_t s = 0; s < a.seeds; ++s)
    {
        const Sample smp = generate_sample(cfg, cfg.seed, s, false, cfg.threads);
        const CrlbReport r = crlb_report(smp.scene, cfg.sensing, smp.transmit, smp.draw.beta, opts);
        loc.push_back(r.root_location());
        vel.push_back(r.root_velocity());
        rec.emit({{"type", "crlb"},
                  {"seed", cfg.seed},
                  {"sample", s},
                  {"power_dbm", cfg.power_dbm},
                  {"root_crlb_location_m", loc.back()},
                  {"root_crlb_velocity_mps", vel.back()},
                  {"targets", targets_json(label_targets(smp.scene))}});
    }
    rec.emit({{"type", "crlb_summary"},
              {"seeds", a.seeds},
              {"power_dbm", cfg.power_dbm},
              {"median_location_m", median(loc)},
              {"median_velocity_mps", median(vel)}});
}

struct CodecArgs
{
    Common common;
    std::string dataset;
    std::string codebook_out;
    std::string indices_out;
    std::size_t samples = 16;
    std::size_t epochs = 5;
    std::size_t ap = 0;
};

void cmd_codec_train(const CodecArgs &a, std::ostream &out)
{
    ExperimentConfig cfg;
    std::unique_ptr<CubeReader> reader;
    if (!a.dataset.empty())
    {
        const fs::path dir(a.dataset);
        cfg = config_from_json(load_sidecar((dir / "dataset.json").string()).at("config"));
        reader = std::make_unique<CubeReader>((dir / "train.cfis").string());
    }
    else
    {
        cfg = resolve_config(a.common);
    }
    if (a.ap >= cfg.layout.rx_aps.size())
        fail(ErrorKind::ConfigInvalid, "--ap " + std::to_string(a.ap) + " out of range");
    if (a.codebook_out.empty())
        fail(ErrorKind::ConfigInvalid, "--codebook is required");

    // feature matrices for the selected receive AP
    std::vector<Eigen::MatrixXd> batches;
    const std::size_t n = reader ? std::min(a.samples, reader->size()) : a.samples;
    for (std::size_t s = 0; s < n; ++s)
    {
        if (reader)
            batches.push_back(cube_features(reader->read(s).cubes[a.ap], cfg.codec.dim));
        else
            batches.push_back(
                cube_features(generate_sample(cfg, cfg.seed, s, true, cfg.threads).cubes[a.ap].y, cfg.codec.dim));
    }
    if (batches.empty())
        fail(ErrorKind::ConfigInvalid, "no training samples");

    Records rec(a.common.out_path, out);
    Codebook book = init_codebook(cfg.codec.dim, cfg.codec.num_codewords, cfg.seed, cfg.codec.gamma);
    EmaOptions ema;
    ema.seed = cfg.seed;
    for (std::size_t epoch = 0; epoch < a.epochs; ++epoch)
    {
        double dist = 0.0;
        double commit = 0.0;
        std::size_t columns = 0;
        EmaLog log;
        for (const auto &Z : batches)
        {
            const auto q = quantize(Z, book, cfg.threads);
            dist += distortion(Z, book, q.indices);
            commit += commitment_loss(Z, q.quantized, cfg.codec.omega);
            columns += static_cast<std::size_t>(Z.cols());
            book = ema_update(book, Z, q.indices, ema, &log);
        }
        rec.emit({{"type", "codec_epoch"},
                  {"epoch", epoch},
                  {"ap", a.ap},
                  {"mean_distortion", dist / static_cast<double>(columns)},
                  {"commitment_loss", commit},
                  {"reseeded", log.reseeded}});
    }
    save_codebook(a.codebook_out, book);

    const auto q = quantize(batches.front(), book, cfg.threads);
    const auto packed = pack_indices(q.indices, book.size());
    if (!a.indices_out.empty())
    {
        std::ofstream f(a.indices_out, std::ios::binary | std::ios::trunc);
        if (!f)
            fail(ErrorKind::IoError, "cannot open '" + a.indices_out + "' for writing");
        f.write(reinterpret_cast<const char *>(packed.data()), static_cast<std::streamsize>(packed.size()));
    }
    OverheadParams op;
    op.num_codewords = book.size();
    op.num_features = q.indices.size();
    rec.emit({{"type", "codebook"},
              {"path", a.codebook_out},
              {"dim", book.dim()},
              {"num_codewords", book.size()},
              {"features_per_sample", q.indices.size()},
              {"payload_bits", overhead_bits(OverheadScheme::Proposed, op)},
              {"packed_bytes", packed.size()}});
}

struct EvalArgs
{
    std::string estimates;
    std::string dataset;
    std::string split = "test";
    std::string out_path;
};

void cmd_eval_rmse(const EvalArgs &a, std::ostream &out)
{
    std::ifstream in(a.estimates);
    if (!in)
        fail(ErrorKind::IoError, "cannot open '" + a.estimates + "'");
    std::unique_ptr<CubeReader> reader;
    std::uint64_t base = 0;
    if (!a.dataset.empty())
    {
        const fs::path dir(a.dataset);
        reader = std::make_unique<CubeReader>((dir / (a.split + ".cfis")).string());
        base = load_sidecar((dir / "dataset.json").string()).at(a.split).at("first_sample").get<std::uint64_t>();
    }

    std::vector<TargetEstimate> est;
    std::vector<TargetEstimate> lab;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        json j;
        try
        {
            j = json::parse(line);
        }
        catch (const json::exception &e)
        {
            fail(ErrorKind::IoError, a.estimates + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains("positions") || !j.contains("velocities"))
            continue;
        TargetEstimate e{read_points(j.at("positions"), "positions"), read_points(j.at("velocities"), "velocities")};
        TargetEstimate l;
        if (j.contains("label"))
        {
            l = {read_points(j["label"].at("positions"), "label.positions"),
                 read_points(j["label"].at("velocities"), "label.velocities")};
        }
        else if (reader)
        {
            const auto s = j.at("sample").get<std::uint64_t>();
            if (s < base)
                fail(ErrorKind::IoError, "sample " + std::to_string(s) + " precedes the " + a.split + " shard");
            l = label_targets(reader->read(s - base).label);
        }
        else
        {
            fail(ErrorKind::IoError, a.estimates + ":" + std::to_string(lineno) +
                                         ": record has no label and no --dataset was given");
        }
        est.push_back(std::move(e));
        lab.push_back(std::move(l));
    }
    const RmseResult r = rmse(est, lab);
    Records rec(a.out_path, out);
    rec.emit({{"type", "rmse"}, {"samples", r.samples}, {"loc_rmse_m", r.loc_rmse}, {"vel_rmse_mps", r.vel_rmse}});
}

struct OverheadArgs
{
    std::string scheme;
    OverheadParams p;
    std::optional<std::uint32_t> nb;
    std::optional<std::size_t> nc;
    bool as_json = false;
};

void cmd_overhead(OverheadArgs a, std::ostream &out)
{
    a.p.bits = a.nb;
    a.p.num_codewords = a.nc;
    const auto bits = overhead_bits(parse_overhead_scheme(a.scheme), a.p);
    if (a.as_json)
        out << json{{"type", "overhead"}, {"scheme", a.scheme}, {"bits", bits}}.dump() << '\n';
    else
        out << bits << '\n';
}

bool is_config_error(ErrorKind k)
{
    return k == ErrorKind::ConfigInvalid;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"cfisac: cooperative multistatic ISAC simulation, estimation and bounds", "cfisac"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto *c_sim = app.add_subcommand("simulate", "draw samples and summarize them");
    add_common(c_sim, sim.common, true);
    c_sim->add_option("--samples", sim.samples, "number of samples");
    c_sim->add_option("--first", sim.first, "first sample index");

    ExportArgs exp;
    auto *c_exp = app.add_subcommand("export-dataset", "write CFIS/CFTX shards and a sidecar");
    add_common(c_exp, exp.common, true);
    c_exp->get_option("--out")->required()->description("output directory");
    c_exp->add_option("--train", exp.train, "override the training count");
    c_exp->add_option("--test", exp.test, "override the test count");

    EstimateArgs est;
    auto *c_est = app.add_subcommand("estimate", "classical MUSIC / delay-Doppler / fusion estimates");
    add_common(c_est, est.common, false);
    c_est->add_option("--dataset", est.dataset, "read samples from an exported dataset directory");
    c_est->add_option("--split", est.split, "train or test (with --dataset)");
    c_est->add_option("--samples", est.samples, "number of samples");
    c_est->add_option("--first", est.first, "first sample (record index with --dataset)");

    CrlbArgs crl;
    auto *c_crlb = app.add_subcommand("crlb", "root CRLB of location and velocity");
    add_common(c_crlb, crl.common, true);
    c_crlb->add_option("--seeds", crl.seeds, "number of random scenes");
    c_crlb->add_flag("--simplified-derivatives", crl.simplified_derivatives, "hold distances fixed in the angle derivatives and drop the Doppler position term");

    CodecArgs cod;
    auto *c_cod = app.add_subcommand("codec-train", "EMA k-means codebook on normalized cube features");
    add_common(c_cod, cod.common, false);
    c_cod->add_option("--dataset", cod.dataset, "train on an exported dataset's training shard");
    c_cod->add_option("--codebook", cod.codebook_out, "VQCB output path")->required();
    c_cod->add_option("--indices", cod.indices_out, "write the first sample's packed index stream here");
    c_cod->add_option("--samples", cod.samples, "training samples");
    c_cod->add_option("--epochs", cod.epochs, "passes over the samples");
    c_cod->add_option("--ap", cod.ap, "receive AP whose cubes are encoded");

    EvalArgs ev;
    auto *c_ev = app.add_subcommand("eval-rmse", "RMSE of estimate records against labels");
    c_ev->add_option("--estimates", ev.estimates, "newline-delimited estimate records")->required();
    c_ev->add_option("--dataset", ev.dataset, "labels from this dataset when records carry none");
    c_ev->add_option("--split", ev.split, "train or test");
    c_ev->add_option("--out", ev.out_path, "write the record here");

    OverheadArgs ov;
    auto *c_ov = app.add_subcommand("overhead", "fronthaul bits per update per receive AP");
    c_ov->add_option("--scheme", ov.scheme, "distributed | centralized | proposed")
        ->required()
        ->check(CLI::IsMember({"distributed", "centralized", "proposed"}));
    c_ov->add_option("--q", ov.p.num_targets, "targets (distributed)");
    c_ov->add_option("--mr", ov.p.num_antennas, "receive antennas (centralized)");
    c_ov->add_option("--ns", ov.p.num_subcarriers, "subcarriers (centralized)");
    c_ov->add_option("--ts", ov.p.num_symbols, "symbols (centralized)");
    c_ov->add_option("--nb", ov.nb, "bits per index (proposed)");
    c_ov->add_option("--nc", ov.nc, "codewords (proposed, instead of --nb)");
    c_ov->add_option("--l", ov.p.num_features, "feature columns per AP (proposed)");
    c_ov->add_flag("--json", ov.as_json, "emit a JSON record");

    std::vector<std::string> argv_store{"cfisac"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char *> argv;
    for (auto &s : argv_store)
        argv.push_back(s.data());

    try
    {
        app.parse(static_cast<int>(argv.size()), argv.data());
    }
    catch (const CLI::CallForHelp &)
    {
        out << app.help();
        return 0;
    }
    catch (const CLI::ParseError &e)
    {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try
    {
        if (c_sim->parsed())
            cmd_simulate(sim, out);
        else if (c_exp->parsed())
            cmd_export(exp, out);
        else if (c_est->parsed())
            cmd_estimate(est, out);
        else if (c_crlb->parsed())
            cmd_crlb(crl, out);
        else if (c_cod->parsed())
            cmd_codec_train(cod, out);
        else if (c_ev->parsed())
            cmd_eval_rmse(ev, out);
        else if (c_ov->parsed())
            cmd_overhead(ov, out);
    }
    catch (const Error &e)
    {
        err << "error: " << e.what() << '\n';
        return is_config_error(e.kind()) ? 2 : 1;
    }
    catch (const std::exception &e)
    {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace cfisac
