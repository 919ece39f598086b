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

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include <sstream>

#include "cfisac/cli.hpp"
#include "cfisac/config.hpp"
#include "cfisac/crlb.hpp"
#include "cfisac/dataset.hpp"
#include "cfisac/errors.hpp"
#include "cfisac/estimators.hpp"
#include "cfisac/simulation.hpp"
#include "cfisac/vqcodec.hpp"

namespace py = pybind11;
using namespace cfisac;

namespace
{

ExperimentConfig parse_config(const std::string &text)
{
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::exception &e)
    {
        fail(ErrorKind::ConfigInvalid, e.what());
    }
    return config_from_json(j);
}

py::array_t<std::complex<double>> to_numpy(const CTensor3 &t)
{
    py::array_t<std::complex<double>> a({t.dim(0), t.dim(1), t.dim(2)});
    std::copy(t.values().begin(), t.values().end(), a.mutable_data());
    return a;
}

py::array_t<std::complex<double>> to_numpy(const CTensor4 &t)
{
    py::array_t<std::complex<double>> a({t.dim(0), t.dim(1), t.dim(2), t.dim(3)});
    std::copy(t.values().begin(), t.values().end(), a.mutable_data());
    return a;
}

py::list points(const std::vector<Vec2> &v)
{
    py::list out;
    for (const auto &p : v)
        out.append(py::make_tuple(p.x, p.y));
    return out;
}

py::dict scene_dict(const Scene &s)
{
    std::vector<Vec2> pos, vel;
    for (const auto &t : s.targets)
    {
        pos.push_back(t.position);
        vel.push_back(t.velocity);
    }
    py::dict d;
    d["positions"] = points(pos);
    d["velocities"] = points(vel);
    d["users"] = points(s.users);
    return d;
}

py::dict simulate(const std::string &config, std::uint64_t seed, std::uint64_t sample, bool with_cubes)
{
    const auto cfg = parse_config(config);
    Sample smp;
    {
        py::gil_scoped_release nogil;
        smp = generate_sample(cfg, seed, sample, with_cubes, cfg.threads);
    }
    py::dict d = scene_dict(smp.scene);
    d["label"] = sample_label(smp.scene);
    d["beta"] = to_numpy(smp.draw.beta);
    d["transmit"] = to_numpy(smp.transmit.x);
    py::list cubes;
    for (const auto &c : smp.cubes)
        cubes.append(to_numpy(c.y));
    d["cubes"] = cubes;
    return d;
}

py::dict estimate(const std::string &config, std::uint64_t seed, std::uint64_t sample)
{
    const auto cfg = parse_config(config);
    FusedEstimate est;
    Scene truth;
    {
        py::gil_scoped_release nogil;
        const auto smp = generate_sample(cfg, seed, sample, true, cfg.threads);
        truth = smp.scene;
        est = classical_estimate(smp.cubes, smp.transmit, smp.scene, cfg.sensing, cfg.num_targets,
                                 pipeline_options(cfg.estimator));
    }
    py::dict d;
    d["positions"] = points(est.positions);
    d["velocities"] = points(est.velocities);
    d["converged"] = est.converged;
    d["ambiguous"] = est.ambiguous;
    d["truth"] = scene_dict(truth);
    return d;
}

py::dict crlb(const std::string &config, std::uint64_t seed, std::uint64_t sample, bool simplified_derivatives)
{
    const auto cfg = parse_config(config);
    CrlbReport r;
    {
        py::gil_scoped_release nogil;
        const auto smp = generate_sample(cfg, seed, sample, false, cfg.threads);
        CrlbOptions opts;
        opts.simplified_derivatives = simplified_derivatives;
        opts.threads = cfg.threads;
        r = crlb_report(smp.scene, cfg.sensing, smp.transmit, smp.draw.beta, opts);
    }
    py::dict d;
    d["root_location"] = r.root_location();
    d["root_velocity"] = r.root_velocity();
    d["crlb_psi"] = r.crlb_psi;
    d["fim"] = r.fim;
    return d;
}

std::uint64_t overhead(const std::string &scheme, std::size_t num_targets, std::size_t num_antennas,
                       std::size_t num_subcarriers, std::size_t num_symbols, std::optional<std::size_t> bits,
                       std::optional<std::size_t> num_codewords, std::size_t num_features)
{
    OverheadParams p;
    p.num_targets = num_targets;
    p.num_antennas = num_antennas;
    p.num_subcarriers = num_subcarriers;
    p.num_symbols = num_symbols;
    p.bits = bits;
    p.num_codewords = num_codewords;
    p.num_features = num_features;
    return overhead_bits(parse_overhead_scheme(scheme), p);
}

py::tuple read_cube_record(const std::string &path, std::size_t index)
{
    CubeReader reader(path);
    const auto rec = reader.read(index);
    py::list cubes;
    for (const auto &c : rec.cubes)
        cubes.append(to_numpy(c));
    return py::make_tuple(rec.label, cubes);
}

py::tuple cli(const std::vector<std::string> &args)
{
    std::ostringstream out, err;
    int rc = 0;
    {
        py::gil_scoped_release nogil;
        rc = run_cli(args, out, err);
    }
    return py::make_tuple(rc, out.str(), err.str());
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "cfisac core bindings";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try
        {
            if (p)
                std::rethrow_exception(p);
        }
        catch (const Error &e)
        {
            py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
            exc.attr("kind") = std::string(error_kind_name(e.kind()));
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    m.def("overhead_bits", &overhead, py::arg("scheme"), py::kw_only(), py::arg("num_targets") = 0,
          py::arg("num_antennas") = 0, py::arg("num_subcarriers") = 0, py::arg("num_symbols") = 0,
          py::arg("bits") = py::none(), py::arg("num_codewords") = py::none(), py::arg("num_features") = 0);
    m.def("index_bits", &index_bits, py::arg("num_codewords"));

    m.def(
        "quantize",
        [](const Eigen::MatrixXd &z, const Eigen::MatrixXd &codewords, std::size_t threads) {
            const auto book = make_codebook(codewords);
            QuantizeResult q;
            {
                py::gil_scoped_release nogil;
                q = quantize(z, book, threads);
            }
            py::array_t<std::uint32_t> idx(static_cast<py::ssize_t>(q.indices.size()));
            std::copy(q.indices.begin(), q.indices.end(), idx.mutable_data());
            return py::make_tuple(idx, q.quantized);
        },
        py::arg("z"), py::arg("codewords"), py::arg("threads") = 1,
        "Nearest codeword per column of z (D x L); returns (indices, quantized).");

    m.def(
        "ema_update",
        [](const Eigen::MatrixXd &codewords, const Eigen::MatrixXd &z, const std::vector<std::uint32_t> &indices,
           double gamma) {
            auto book = make_codebook(codewords, gamma);
            return ema_update(book, z, indices).codewords;
        },
        py::arg("codewords"), py::arg("z"), py::arg("indices"), py::arg("gamma"),
        "One EMA step from a fresh codebook (zero accumulators).");
    m.def("commitment_loss", &commitment_loss, py::arg("z"), py::arg("quantized"), py::arg("omega") = 0.25);

    m.def(
        "pack_indices",
        [](const std::vector<std::uint32_t> &indices, std::size_t num_codewords) {
            const auto b = pack_indices(indices, num_codewords);
            return py::bytes(reinterpret_cast<const char *>(b.data()), b.size());
        },
        py::arg("indices"), py::arg("num_codewords"));
    m.def(
        "unpack_indices",
        [](const py::bytes &data, std::size_t count) {
            const std::string s = data;
            return unpack_indices(std::vector<std::uint8_t>(s.begin(), s.end()), count);
        },
        py::arg("data"), py::arg("count"));

    m.def(
        "save_codebook",
        [](const std::string &path, const Eigen::MatrixXd &codewords) { save_codebook(path, make_codebook(codewords)); },
        py::arg("path"), py::arg("codewords"));
    m.def(
        "load_codebook", [](const std::string &path) { return load_codebook(path).codewords; }, py::arg("path"));

    m.def("simulate", &simulate, py::arg("config"), py::arg("seed"), py::arg("sample") = 0,
          py::arg("with_cubes") = true, "Draw one sample; config is a JSON string.");
    m.def("estimate", &estimate, py::arg("config"), py::arg("seed"), py::arg("sample") = 0);
    m.def("crlb", &crlb, py::arg("config"), py::arg("seed"), py::arg("sample") = 0,
          py::arg("simplified_derivatives") = false);
    m.def("read_cube_record", &read_cube_record, py::arg("path"), py::arg("index"));
    m.def("run_cli", &cli, py::arg("args"), "Run the command-line tool in-process; returns (code, stdout, stderr).");
}
