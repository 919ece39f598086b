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

#include "cfisac/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "cfisac/errors.hpp"
#include "cfisac/units.hpp"

namespace cfisac
{

namespace
{

using nlohmann::json;

void check_keys(const json &j, const std::string &where, std::initializer_list<const char *> allowed)
{
    if (!j.is_object())
        fail(ErrorKind::ConfigInvalid, where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto &[key, value] : j.items())
        if (!ok.count(key))
            fail(ErrorKind::ConfigInvalid, "unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json &j, const char *key, T &out)
{
    if (!j.contains(key))
        return;
    try
    {
        out = j.at(key).get<T>();
    }
    catch (const json::exception &e)
    {
        fail(ErrorKind::ConfigInvalid, std::string("bad value for '") + key + "': " + e.what());
    }
}

Vec2 read_vec2(const json &j, const std::string &what)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        fail(ErrorKind::ConfigInvalid, what + " must be a [x, y] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<ApSite> read_aps(const json &list, const std::string &what, double spacing)
{
    if (!list.is_array() || list.empty())
        fail(ErrorKind::ConfigInvalid, what + " must be a non-empty list");
    std::vector<ApSite> aps;
    for (const auto &e : list)
    {
        check_keys(e, what, {"position", "num_elements", "orientation"});
        if (!e.contains("position"))
            fail(ErrorKind::ConfigInvalid, what + " entry needs a position");
        ApSite ap;
        ap.position = read_vec2(e.at("position"), what + ".position");
        read(e, "num_elements", ap.array.num_elements);
        std::string axis = "plus_x";
        read(e, "orientation", axis);
        ap.array.orientation = parse_array_axis(axis);
        ap.array.spacing = spacing;
        aps.push_back(ap);
    }
    return aps;
}

json aps_to_json(const std::vector<ApSite> &aps)
{
    json list = json::array();
    for (const auto &ap : aps)
        list.push_back({{"position", {ap.position.x, ap.position.y}},
                        {"num_elements", ap.array.num_elements},
                        {"orientation", to_string(ap.array.orientation)}});
    return list;
}

} // namespace

double ExperimentConfig::power_w() const
{
    return dbm_to_watt(power_dbm);
}

double ExperimentConfig::comm_noise_w() const
{
    return dbm_to_watt(comm_noise_dbm);
}

void ExperimentConfig::validate() const
{
    auto positive = [](std::size_t v, const char *what) {
        if (v == 0)
            fail(ErrorKind::ConfigInvalid, std::string(what) + " must be positive");
    };
    positive(num_targets, "num_targets");
    positive(num_users, "num_users");
    positive(sensing.num_subcarriers, "num_subcarriers");
    positive(sensing.num_symbols, "num_symbols");
    positive(codec.dim, "codec.dim");
    positive(codec.num_codewords, "codec.num_codewords");
    if ((codec.num_codewords & (codec.num_codewords - 1)) != 0)
        fail(ErrorKind::ConfigInvalid, "codec.num_codewords must be a power of two");
    if (!(codec.gamma >= 0.0 && codec.gamma < 1.0) || !(codec.omega >= 0.0))
        fail(ErrorKind::ConfigInvalid, "codec gamma must be in [0, 1) and omega >= 0");
    if (!(estimator.grid_step > 0.0 && estimator.grid_step < kPi))
        fail(ErrorKind::ConfigInvalid, "estimator.grid_step must be in (0, pi)");
    if (train_count + test_count == 0)
        fail(ErrorKind::ConfigInvalid, "dataset needs at least one record");
    if (layout.tx_aps.empty() || layout.rx_aps.empty())
        fail(ErrorKind::ConfigInvalid, "need at least one transmit and one receive AP");
    const std::size_t nt = layout.tx_aps.front().array.num_elements;
    const std::size_t mr = layout.rx_aps.front().array.num_elements;
    for (const auto &ap : layout.tx_aps)
        if (ap.array.num_elements != nt || nt == 0)
            fail(ErrorKind::ConfigInvalid, "all transmit APs need the same positive element count");
    for (const auto &ap : layout.rx_aps)
        if (ap.array.num_elements != mr || mr == 0)
            fail(ErrorKind::ConfigInvalid, "all receive APs need the same positive element count");
    if (num_users > layout.tx_aps.size() * nt)
        fail(ErrorKind::ConfigInvalid, "more users than transmit antennas");
    if (!(layout.region.width() > 2.0 * target_margin) || !(layout.region.height() > 2.0 * target_margin))
        fail(ErrorKind::ConfigInvalid, "region too small for the target margin");
    if (!(layout.carrier_freq_hz > 0.0) || !(layout.v_max >= 0.0))
        fail(ErrorKind::ConfigInvalid, "carrier frequency must be positive and v_max nonnegative");
    try
    {
        sensing.validate();
    }
    catch (const Error &e)
    {
        fail(ErrorKind::ConfigInvalid, e.what());
    }
}

ExperimentConfig config_from_json(const json &j)
{
    check_keys(j, "config", {"scene", "sensing", "transmit", "dataset", "codec", "estimator", "threads"});
    ExperimentConfig c;

    if (!j.contains("scene"))
        fail(ErrorKind::ConfigInvalid, "config needs a scene section");
    const json &s = j.at("scene");
    check_keys(s, "scene",
               {"carrier_freq_hz", "region", "v_max", "num_targets", "num_users", "target_margin",
                "element_spacing_wavelengths", "tx_aps", "rx_aps"});
    read(s, "carrier_freq_hz", c.layout.carrier_freq_hz);
    read(s, "v_max", c.layout.v_max);
    read(s, "num_targets", c.num_targets);
    read(s, "num_users", c.num_users);
    read(s, "target_margin", c.target_margin);
    if (s.contains("region"))
    {
        const json &r = s.at("region");
        if (!r.is_array() || r.size() != 4)
            fail(ErrorKind::ConfigInvalid, "scene.region must be [x_min, y_min, x_max, y_max]");
        c.layout.region = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
        if (!(c.layout.region.x_max > c.layout.region.x_min) || !(c.layout.region.y_max > c.layout.region.y_min))
            fail(ErrorKind::ConfigInvalid, "scene.region is empty");
    }
    if (!(c.layout.carrier_freq_hz > 0.0))
        fail(ErrorKind::ConfigInvalid, "carrier_freq_hz must be positive");
    double spacing_wl = 0.5;
    read(s, "element_spacing_wavelengths", spacing_wl);
    if (!(spacing_wl > 0.0))
        fail(ErrorKind::ConfigInvalid, "element spacing must be positive");
    const double spacing = spacing_wl * c.layout.wavelength();
    if (!s.contains("tx_aps") || !s.contains("rx_aps"))
        fail(ErrorKind::ConfigInvalid, "scene needs tx_aps and rx_aps");
    c.layout.tx_aps = read_aps(s.at("tx_aps"), "scene.tx_aps", spacing);
    c.layout.rx_aps = read_aps(s.at("rx_aps"), "scene.rx_aps", spacing);

    if (j.contains("sensing"))
    {
        const json &x = j.at("sensing");
        check_keys(x, "sensing",
                   {"subcarrier_spacing_hz", "num_subcarriers", "num_symbols", "cyclic_prefix_s", "pathloss_ref_db",
                    "ref_distance_m", "pathloss_exponent", "reflection_variance", "clutter_variance", "noise_dbm",
                    "num_scatterers", "async", "sigma_tau_s", "sigma_f_hz"});
        auto &p = c.sensing;
        read(x, "subcarrier_spacing_hz", p.subcarrier_spacing);
        read(x, "num_subcarriers", p.num_subcarriers);
        read(x, "num_symbols", p.num_symbols);
        read(x, "cyclic_prefix_s", p.cyclic_prefix);
        double ref_db = -60.0;
        read(x, "pathloss_ref_db", ref_db);
        p.pathloss.alpha0 = db_to_linear(ref_db);
        read(x, "ref_distance_m", p.pathloss.d0);
        read(x, "pathloss_exponent", p.pathloss.zeta);
        read(x, "reflection_variance", p.chi2);
        read(x, "clutter_variance", p.clutter_chi2);
        double noise_dbm = -90.0;
        read(x, "noise_dbm", noise_dbm);
        p.noise_var = dbm_to_watt(noise_dbm);
        read(x, "num_scatterers", p.num_scatterers);
        read(x, "async", p.async);
        read(x, "sigma_tau_s", p.sigma_tau);
        read(x, "sigma_f_hz", p.sigma_f);
    }
    if (j.contains("transmit"))
    {
        const json &x = j.at("transmit");
        check_keys(x, "transmit", {"power_dbm", "comm_noise_dbm"});
        read(x, "power_dbm", c.power_dbm);
        read(x, "comm_noise_dbm", c.comm_noise_dbm);
    }
    if (j.contains("dataset"))
    {
        const json &x = j.at("dataset");
        check_keys(x, "dataset", {"train", "test", "seed"});
        read(x, "train", c.train_count);
        read(x, "test", c.test_count);
        read(x, "seed", c.seed);
    }
    if (j.contains("codec"))
    {
        const json &x = j.at("codec");
        check_keys(x, "codec", {"dim", "num_codewords", "gamma", "omega"});
        read(x, "dim", c.codec.dim);
        read(x, "num_codewords", c.codec.num_codewords);
        read(x, "gamma", c.codec.gamma);
        read(x, "omega", c.codec.omega);
    }
    if (j.contains("estimator"))
    {
        const json &x = j.at("estimator");
        check_keys(x, "estimator", {"grid_step_rad", "sic_sweeps"});
        read(x, "grid_step_rad", c.estimator.grid_step);
        read(x, "sic_sweeps", c.estimator.sic_sweeps);
    }
    read(j, "threads", c.threads);
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig &c)
{
    const auto &r = c.layout.region;
    const double spacing_wl = c.layout.tx_aps.empty() ? 0.5 : c.layout.tx_aps.front().array.spacing / c.layout.wavelength();
    const auto &p = c.sensing;
    return {
        {"scene",
         {{"carrier_freq_hz", c.layout.carrier_freq_hz},
          {"region", {r.x_min, r.y_min, r.x_max, r.y_max}},
          {"v_max", c.layout.v_max},
          {"num_targets", c.num_targets},
          {"num_users", c.num_users},
          {"target_margin", c.target_margin},
          {"element_spacing_wavelengths", spacing_wl},
          {"tx_aps", aps_to_json(c.layout.tx_aps)},
          {"rx_aps", aps_to_json(c.layout.rx_aps)}}},
        {"sensing",
         {{"subcarrier_spacing_hz", p.subcarrier_spacing},
          {"num_subcarriers", p.num_subcarriers},
          {"num_symbols", p.num_symbols},
          {"cyclic_prefix_s", p.cyclic_prefix},
          {"pathloss_ref_db", 10.0 * std::log10(p.pathloss.alpha0)},
          {"ref_distance_m", p.pathloss.d0},
          {"pathloss_exponent", p.pathloss.zeta},
          {"reflection_variance", p.chi2},
          {"clutter_variance", p.clutter_chi2},
          {"noise_dbm", watt_to_dbm(p.noise_var)},
          {"num_scatterers", p.num_scatterers},
          {"async", p.async},
          {"sigma_tau_s", p.sigma_tau},
          {"sigma_f_hz", p.sigma_f}}},
        {"transmit", {{"power_dbm", c.power_dbm}, {"comm_noise_dbm", c.comm_noise_dbm}}},
        {"dataset", {{"train", c.train_count}, {"test", c.test_count}, {"seed", c.seed}}},
        {"codec",
         {{"dim", c.codec.dim},
          {"num_codewords", c.codec.num_codewords},
          {"gamma", c.codec.gamma},
          {"omega", c.codec.omega}}},
        {"estimator", {{"grid_step_rad", c.estimator.grid_step}, {"sic_sweeps", c.estimator.sic_sweeps}}},
        {"threads", c.threads},
    };
}

ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::ConfigInvalid, "cannot open config '" + path + "'");
    json j;
    try
    {
        in >> j;
    }
    catch (const json::exception &e)
    {
        fail(ErrorKind::ConfigInvalid, "cannot parse config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

} // namespace cfisac
