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

#include "cfisac/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cfisac/binio.hpp"
#include "cfisac/errors.hpp"
#include "cfisac/parallel.hpp"

namespace cfisac
{

namespace fs = std::filesystem;

namespace
{

template <typename T>
std::uint32_t u32(T v, const char *what)
{
    if (static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint32_t>::max())
        fail(ErrorKind::ConfigInvalid, std::string(what) + " does not fit the container header");
    return static_cast<std::uint32_t>(v);
}

template <typename T>
std::uint16_t u16(T v, const char *what)
{
    if (static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint16_t>::max())
        fail(ErrorKind::ConfigInvalid, std::string(what) + " does not fit the container header");
    return static_cast<std::uint16_t>(v);
}

class ByteSink
{
public:
    explicit ByteSink(std::size_t reserve) { bytes_.reserve(reserve); }

    void f32(double v)
    {
        const auto f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        for (int b = 0; b < 4; ++b)
            bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }

    void complex(const cd &z)
    {
        f32(z.real());
        f32(z.imag());
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

float f32_at(const std::vector<char> &buf, std::size_t offset)
{
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + b])) << (8 * b);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

std::size_t record_count(std::ifstream &in, std::size_t record_bytes, const std::string &path)
{
    in.seekg(0, std::ios::end);
    const auto end = static_cast<std::size_t>(in.tellg());
    if (end < kDatasetHeaderBytes || (end - kDatasetHeaderBytes) % record_bytes != 0)
        fail(ErrorKind::IoError, path + ": size " + std::to_string(end) + " is not header + k * " +
                                     std::to_string(record_bytes));
    return (end - kDatasetHeaderBytes) / record_bytes;
}

std::vector<char> read_record(std::ifstream &in, std::size_t index, std::size_t count, std::size_t bytes,
                              const std::string &path)
{
    if (index >= count)
        fail(ErrorKind::InvalidArgument, path + ": record " + std::to_string(index) + " of " + std::to_string(count));
    std::vector<char> buf(bytes);
    in.clear();
    in.seekg(static_cast<std::streamoff>(kDatasetHeaderBytes + index * bytes));
    if (!in.read(buf.data(), static_cast<std::streamsize>(bytes)))
        fail(ErrorKind::IoError, path + ": short read");
    return buf;
}

void write_cube_header(std::ostream &out, const CubeHeader &h)
{
    binio::put_magic(out, "CFIS");
    binio::put_le(out, h.version);
    binio::put_le(out, h.num_rx);
    binio::put_le(out, h.num_antennas);
    binio::put_le(out, h.num_subcarriers);
    binio::put_le(out, h.num_symbols);
    binio::put_le(out, h.num_targets);
}

void write_transmit_header(std::ostream &out, const TransmitHeader &h)
{
    binio::put_magic(out, "CFTX");
    binio::put_le(out, h.version);
    binio::put_le(out, h.num_tx);
    binio::put_le(out, h.num_antennas);
    binio::put_le(out, h.num_subcarriers);
    binio::put_le(out, h.num_symbols);
    binio::put_le(out, h.num_users);
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

struct Encoded
{
    std::vector<float> label;
    std::vector<std::uint8_t> cube;
    std::vector<std::uint8_t> transmit;
};

ShardSummary write_shard(const ExperimentConfig &config, const fs::path &dir, const std::string &name,
                         std::uint64_t first, std::size_t count, std::size_t threads, std::vector<float> *lo,
                         std::vector<float> *hi)
{
    ShardSummary shard;
    shard.cube_path = (dir / (name + ".cfis")).string();
    shard.transmit_path = (dir / (name + ".cftx")).string();
    shard.first_sample = first;
    shard.count = count;

    std::ofstream cubes(shard.cube_path, std::ios::binary | std::ios::trunc);
    std::ofstream tx(shard.transmit_path, std::ios::binary | std::ios::trunc);
    if (!cubes || !tx)
        fail(ErrorKind::IoError, "cannot create shard files in '" + dir.string() + "'");
    write_cube_header(cubes, cube_header(config));
    write_transmit_header(tx, transmit_header(config));

    const std::size_t workers = resolve_threads(threads);
    const std::size_t batch = std::max<std::size_t>(1, 2 * workers);
    std::vector<Encoded> encoded;
    for (std::size_t start = 0; start < count; start += batch)
    {
        const std::size_t n = std::min(batch, count - start);
        encoded.assign(n, {});
        parallel_for(n, workers, [&](std::size_t k) {
            const Sample s = generate_sample(config, config.seed, first + start + k, true, 1);
            encoded[k].label = sample_label(s.scene);
            encoded[k].cube = encode_cube_record(encoded[k].label, s.cubes);
            encoded[k].transmit = encode_transmit_record(s.transmit);
        });
        for (const auto &e : encoded)
        {
            cubes.write(reinterpret_cast<const char *>(e.cube.data()), static_cast<std::streamsize>(e.cube.size()));
            tx.write(reinterpret_cast<const char *>(e.transmit.data()),
                     static_cast<std::streamsize>(e.transmit.size()));
            if (lo && hi)
            {
                if (lo->empty())
                {
                    *lo = e.label;
                    *hi = e.label;
                }
                for (std::size_t k = 0; k < e.label.size(); ++k)
                {
                    (*lo)[k] = std::min((*lo)[k], e.label[k]);
                    (*hi)[k] = std::max((*hi)[k], e.label[k]);
                }
            }
        }
        if (!cubes || !tx)
            fail(ErrorKind::IoError, "write failed in '" + dir.string() + "'");
    }
    return shard;
}

nlohmann::json shard_json(const ShardSummary &s)
{
    return {{"cubes", fs::path(s.cube_path).filename().string()},
            {"transmit", fs::path(s.transmit_path).filename().string()},
            {"first_sample", s.first_sample},
            {"count", s.count}};
}

} // namespace

std::size_t CubeHeader::record_bytes() const
{
    return 4 * label_floats() +
           std::size_t{num_rx} * 2 * 4 * num_antennas * std::size_t{num_subcarriers} * num_symbols;
}

std::size_t TransmitHeader::record_bytes() const
{
    return std::size_t{num_tx} * 2 * 4 * num_antennas * std::size_t{num_subcarriers} * num_symbols;
}

CubeHeader cube_header(const ExperimentConfig &config)
{
    const auto &rx = config.layout.rx_aps;
    if (rx.empty())
        fail(ErrorKind::ConfigInvalid, "no receive APs");
    CubeHeader h;
    h.num_rx = u16(rx.size(), "M");
    h.num_antennas = u32(rx.front().array.num_elements, "M_r");
    h.num_subcarriers = u32(config.sensing.num_subcarriers, "N_s");
    h.num_symbols = u32(config.sensing.num_symbols, "T_s");
    h.num_targets = u32(config.num_targets, "Q");
    return h;
}

TransmitHeader transmit_header(const ExperimentConfig &config)
{
    const auto &tx = config.layout.tx_aps;
    if (tx.empty())
        fail(ErrorKind::ConfigInvalid, "no transmit APs");
    TransmitHeader h;
    h.num_tx = u16(tx.size(), "N");
    h.num_antennas = u32(tx.front().array.num_elements, "N_t");
    h.num_subcarriers = u32(config.sensing.num_subcarriers, "N_s");
    h.num_symbols = u32(config.sensing.num_symbols, "T_s");
    h.num_users = u32(config.num_users, "K");
    return h;
}

std::vector<float> sample_label(const Scene &scene)
{
    const std::size_t Q = scene.targets.size();
    std::vector<float> label(4 * Q);
    for (std::size_t q = 0; q < Q; ++q)
    {
        label[2 * q] = static_cast<float>(scene.targets[q].position.x);
        label[2 * q + 1] = static_cast<float>(scene.targets[q].position.y);
        label[2 * Q + 2 * q] = static_cast<float>(scene.targets[q].velocity.x);
        label[2 * Q + 2 * q + 1] = static_cast<float>(scene.targets[q].velocity.y);
    }
    return label;
}

std::vector<std::uint8_t> encode_cube_record(const std::vector<float> &label, const std::vector<SensingCube> &cubes)
{
    std::size_t n = 4 * label.size();
    for (const auto &c : cubes)
        n += 8 * c.y.size();
    ByteSink sink(n);
    for (const float v : label)
        sink.f32(v);
    for (const auto &c : cubes)
        for (const auto &z : c.y.values())
            sink.complex(z);
    return sink.take();
}

std::vector<std::uint8_t> encode_transmit_record(const TransmitBlock &transmit)
{
    ByteSink sink(8 * transmit.x.size());
    for (const auto &z : transmit.x.values())
        sink.complex(z);
    return sink.take();
}

CubeReader::CubeReader(const std::string &path) : path_(path), in_(path, std::ios::binary)
{
    if (!in_)
        fail(ErrorKind::IoError, "cannot open '" + path + "'");
    binio::expect_magic(in_, "CFIS", path);
    header_.version = binio::get_le<std::uint16_t>(in_);
    if (header_.version != kDatasetVersion)
        fail(ErrorKind::IoError, path + ": unsupported version " + std::to_string(header_.version));
    header_.num_rx = binio::get_le<std::uint16_t>(in_);
    header_.num_antennas = binio::get_le<std::uint32_t>(in_);
    header_.num_subcarriers = binio::get_le<std::uint32_t>(in_);
    header_.num_symbols = binio::get_le<std::uint32_t>(in_);
    header_.num_targets = binio::get_le<std::uint32_t>(in_);
    if (header_.record_bytes() == 0)
        fail(ErrorKind::IoError, path + ": empty record layout");
    count_ = record_count(in_, header_.record_bytes(), path);
}

DatasetRecord CubeReader::read(std::size_t index)
{
    const auto buf = read_record(in_, index, count_, header_.record_bytes(), path_);
    DatasetRecord rec;
    rec.label.resize(header_.label_floats());
    std::size_t off = 0;
    for (auto &v : rec.label)
    {
        v = f32_at(buf, off);
        off += 4;
    }
    for (std::size_t m = 0; m < header_.num_rx; ++m)
    {
        CTensor3 cube({header_.num_antennas, header_.num_subcarriers, header_.num_symbols});
        for (auto &z : cube.values())
        {
            z = {f32_at(buf, off), f32_at(buf, off + 4)};
            off += 8;
        }
        rec.cubes.push_back(std::move(cube));
    }
    return rec;
}

TransmitReader::TransmitReader(const std::string &path) : path_(path), in_(path, std::ios::binary)
{
    if (!in_)
        fail(ErrorKind::IoError, "cannot open '" + path + "'");
    binio::expect_magic(in_, "CFTX", path);
    header_.version = binio::get_le<std::uint16_t>(in_);
    if (header_.version != kDatasetVersion)
        fail(ErrorKind::IoError, path + ": unsupported version " + std::to_string(header_.version));
    header_.num_tx = binio::get_le<std::uint16_t>(in_);
    header_.num_antennas = binio::get_le<std::uint32_t>(in_);
    header_.num_subcarriers = binio::get_le<std::uint32_t>(in_);
    header_.num_symbols = binio::get_le<std::uint32_t>(in_);
    header_.num_users = binio::get_le<std::uint32_t>(in_);
    if (header_.record_bytes() == 0)
        fail(ErrorKind::IoError, path + ": empty record layout");
    count_ = record_count(in_, header_.record_bytes(), path);
}

CTensor4 TransmitReader::read(std::size_t index)
{
    const auto buf = read_record(in_, index, count_, header_.record_bytes(), path_);
    CTensor4 x({header_.num_tx, header_.num_antennas, header_.num_subcarriers, header_.num_symbols});
    std::size_t off = 0;
    for (auto &z : x.values())
    {
        z = {f32_at(buf, off), f32_at(buf, off + 4)};
        off += 8;
    }
    return x;
}

CTensor3 normalize_cube(const CTensor3 &cube)
{
    double peak = 0.0;
    for (const auto &z : cube.values())
        peak = std::max({peak, std::abs(z.real()), std::abs(z.imag())});
    CTensor3 out = cube;
    if (peak > 0.0)
        for (auto &z : out.values())
            z /= peak;
    return out;
}

Eigen::MatrixXd cube_features(const CTensor3 &cube, std::size_t dim)
{
    if (dim == 0)
        fail(ErrorKind::InvalidArgument, "feature dimension must be positive");
    const std::size_t L = 2 * cube.size() / dim;
    if (L == 0)
        fail(ErrorKind::ConfigInvalid, "cube holds fewer than " + std::to_string(dim) + " reals");
    const CTensor3 n = normalize_cube(cube);
    Eigen::MatrixXd Z(dim, L);
    const auto &v = n.values();
    for (std::size_t k = 0; k < L * dim; ++k)
        Z(static_cast<Eigen::Index>(k % dim), static_cast<Eigen::Index>(k / dim)) =
            (k % 2 == 0) ? v[k / 2].real() : v[k / 2].imag();
    return Z;
}

DatasetSummary export_dataset(const ExperimentConfig &config, const std::string &out_dir, std::size_t threads)
{
    config.validate();
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        fail(ErrorKind::IoError, "cannot create directory '" + out_dir + "'");

    DatasetSummary out;
    out.train = write_shard(config, dir, "train", 0, config.train_count, threads, &out.label_min, &out.label_max);
    out.test = write_shard(config, dir, "test", config.train_count, config.test_count, threads, nullptr, nullptr);

    const auto ch = cube_header(config);
    nlohmann::json side = {
        {"format", "CFIS"},
        {"version", kDatasetVersion},
        {"seed", config.seed},
        {"label_layout", "g_1x g_1y ... g_Qx g_Qy v_1x v_1y ... v_Qx v_Qy"},
        {"cube_order", "[m][antenna][subcarrier][symbol], (re, im) f32 little-endian"},
        {"record_bytes", ch.record_bytes()},
        {"transmit_record_bytes", transmit_header(config).record_bytes()},
        {"train", shard_json(out.train)},
        {"test", shard_json(out.test)},
        {"label_min", out.label_min},
        {"label_max", out.label_max},
        {"config", config_to_json(config)},
        {"created", utc_timestamp()},
    };
    out.sidecar_path = (dir / "dataset.json").string();
    std::ofstream js(out.sidecar_path, std::ios::trunc);
    if (!js)
        fail(ErrorKind::IoError, "cannot write '" + out.sidecar_path + "'");
    js << side.dump(2) << '\n';
    return out;
}

nlohmann::json load_sidecar(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::IoError, "cannot open '" + path + "'");
    try
    {
        return nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception &e)
    {
        fail(ErrorKind::IoError, path + ": " + e.what());
    }
}

} // namespace cfisac
