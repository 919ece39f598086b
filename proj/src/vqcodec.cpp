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

#include "cfisac/vqcodec.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "cfisac/binio.hpp"
#include "cfisac/errors.hpp"
#include "cfisac/parallel.hpp"
#include "cfisac/rng.hpp"

namespace cfisac
{

namespace
{

constexpr std::uint16_t kCodebookVersion = 1;

bool is_power_of_two(std::size_t n)
{
    return n >= 2 && (n & (n - 1)) == 0;
}

void require_columns(const Eigen::MatrixXd &Z, const Codebook &book)
{
    if (book.size() == 0)
        fail(ErrorKind::EmptyCodebook, "codebook has no codewords");
    if (static_cast<std::size_t>(Z.rows()) != book.dim())
        fail(ErrorKind::ShapeMismatch, "feature dimension " + std::to_string(Z.rows()) + " != codeword dimension " +
                                           std::to_string(book.dim()));
}

} // namespace

void Codebook::validate() const
{
    if (size() == 0)
        fail(ErrorKind::EmptyCodebook, "codebook has no codewords");
    if (!is_power_of_two(size()))
        fail(ErrorKind::NotPowerOfTwo, "N_c = " + std::to_string(size()));
    if (ema_counts.size() != codewords.cols() || ema_sums.rows() != codewords.rows() ||
        ema_sums.cols() != codewords.cols() || idle_runs.size() != size())
        fail(ErrorKind::ShapeMismatch, "codebook accumulators do not match the codewords");
    if (!(gamma >= 0.0 && gamma < 1.0))
        fail(ErrorKind::InvalidArgument, "gamma must lie in [0, 1)");
    if (!codewords.allFinite() || !ema_sums.allFinite() || !ema_counts.allFinite())
        fail(ErrorKind::InvalidArgument, "codebook has non-finite entries");
    if ((ema_counts.array() < 0.0).any())
        fail(ErrorKind::InvalidArgument, "negative EMA count");
}

Codebook make_codebook(const Eigen::MatrixXd &codewords, double gamma)
{
    Codebook book;
    book.codewords = codewords;
    book.ema_counts = Eigen::VectorXd::Zero(codewords.cols());
    book.ema_sums = Eigen::MatrixXd::Zero(codewords.rows(), codewords.cols());
    book.gamma = gamma;
    book.idle_runs.assign(static_cast<std::size_t>(codewords.cols()), 0);
    return book;
}

Codebook init_codebook(std::size_t dim, std::size_t num_codewords, std::uint64_t seed, double gamma)
{
    if (dim == 0)
        fail(ErrorKind::InvalidArgument, "codeword dimension must be positive");
    if (num_codewords == 0)
        fail(ErrorKind::EmptyCodebook, "N_c = 0");
    if (!is_power_of_two(num_codewords))
        fail(ErrorKind::NotPowerOfTwo, "N_c = " + std::to_string(num_codewords));
    Rng rng(seed, 0, Stream::Codebook);
    Eigen::MatrixXd C(dim, num_codewords);
    // column-major fill, one codeword at a time
    for (Eigen::Index j = 0; j < C.cols(); ++j)
        for (Eigen::Index d = 0; d < C.rows(); ++d)
            C(d, j) = 0.02 * rng.normal();
    Codebook book = make_codebook(C, gamma);
    book.validate();
    return book;
}

QuantizeResult quantize(const Eigen::MatrixXd &Z, const Codebook &book, std::size_t threads)
{
    require_columns(Z, book);
    const auto L = static_cast<std::size_t>(Z.cols());
    QuantizeResult out;
    out.indices.assign(L, 0);
    out.quantized.resize(Z.rows(), Z.cols());
    parallel_for(L, threads, [&](std::size_t l) {
        const auto col = Z.col(static_cast<Eigen::Index>(l));
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (Eigen::Index j = 0; j < book.codewords.cols(); ++j)
        {
            const double d2 = (col - book.codewords.col(j)).squaredNorm();
            if (d2 < best)
            {
                best = d2;
                arg = static_cast<std::uint32_t>(j);
            }
        }
        out.indices[l] = arg;
        out.quantized.col(static_cast<Eigen::Index>(l)) = book.codewords.col(arg);
    });
    return out;
}

Codebook ema_update(const Codebook &book, const Eigen::MatrixXd &Z, const std::vector<std::uint32_t> &indices,
                    const EmaOptions &options, EmaLog *log)
{
    require_columns(Z, book);
    if (indices.size() != static_cast<std::size_t>(Z.cols()))
        fail(ErrorKind::LengthMismatch, "index count does not match the number of columns");
    const Eigen::Index Nc = book.codewords.cols();

    Eigen::VectorXd counts = Eigen::VectorXd::Zero(Nc);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(Z.rows(), Nc);
    for (std::size_t l = 0; l < indices.size(); ++l)
    {
        if (indices[l] >= static_cast<std::uint32_t>(Nc))
            fail(ErrorKind::InvalidArgument, "index " + std::to_string(indices[l]) + " out of range");
        counts(indices[l]) += 1.0;
        sums.col(indices[l]) += Z.col(static_cast<Eigen::Index>(l));
    }

    Codebook next = book;
    const double g = book.gamma;
    next.ema_counts = g * book.ema_counts + (1.0 - g) * counts;
    next.ema_sums = g * book.ema_sums + (1.0 - g) * sums;
    next.updates = book.updates + 1;
    for (Eigen::Index j = 0; j < Nc; ++j)
    {
        const auto ju = static_cast<std::size_t>(j);
        if (counts(j) > 0.0 && next.ema_counts(j) > 0.0)
        {
            next.codewords.col(j) = next.ema_sums.col(j) / next.ema_counts(j);
            next.idle_runs[ju] = 0;
            continue;
        }
        if (++next.idle_runs[ju] < options.idle_limit || Z.cols() == 0)
            continue;
        Rng rng(options.seed, next.updates, Stream::Codebook, static_cast<std::uint64_t>(j) + 1);
        const auto pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(Z.cols())));
        next.codewords.col(j) = Z.col(pick);
        next.ema_counts(j) = 0.0;
        next.ema_sums.col(j).setZero();
        next.idle_runs[ju] = 0;
        if (log)
            log->reseeded.push_back(ju);
    }
    return next;
}

double commitment_loss(const Eigen::MatrixXd &Z, const Eigen::MatrixXd &quantized, double omega)
{
    if (Z.rows() != quantized.rows() || Z.cols() != quantized.cols())
        fail(ErrorKind::ShapeMismatch, "feature and quantized shapes differ");
    return omega * (Z - quantized).squaredNorm();
}

double distortion(const Eigen::MatrixXd &Z, const Codebook &book, const std::vector<std::uint32_t> &indices)
{
    require_columns(Z, book);
    if (indices.size() != static_cast<std::size_t>(Z.cols()))
        fail(ErrorKind::LengthMismatch, "index count does not match the number of columns");
    double total = 0.0;
    for (std::size_t l = 0; l < indices.size(); ++l)
        total += (Z.col(static_cast<Eigen::Index>(l)) - book.codewords.col(indices[l])).squaredNorm();
    return total;
}

std::uint32_t index_bits(std::size_t num_codewords)
{
    if (!is_power_of_two(num_codewords))
        fail(ErrorKind::NotPowerOfTwo, "N_c = " + std::to_string(num_codewords) + " is not a power of two >= 2");
    std::uint32_t bits = 0;
    while ((std::size_t{1} << bits) < num_codewords)
        ++bits;
    return bits;
}

std::vector<std::uint8_t> pack_indices(const std::vector<std::uint32_t> &indices, std::size_t num_codewords)
{
    const std::uint32_t nb = index_bits(num_codewords);
    if (nb > 32)
        fail(ErrorKind::InvalidArgument, "more than 32 bits per index");
    std::vector<std::uint8_t> out(1 + (indices.size() * nb + 7) / 8, 0);
    out[0] = static_cast<std::uint8_t>(nb);
    std::size_t bit = 0;
    for (const auto idx : indices)
    {
        if (idx >= num_codewords)
            fail(ErrorKind::InvalidArgument, "index " + std::to_string(idx) + " >= N_c");
        for (std::uint32_t b = nb; b-- > 0; ++bit)
            if ((idx >> b) & 1u)
                out[1 + bit / 8] |= static_cast<std::uint8_t>(0x80u >> (bit % 8));
    }
    return out;
}

std::vector<std::uint32_t> unpack_indices(const std::vector<std::uint8_t> &packed, std::size_t count)
{
    if (packed.empty())
        fail(ErrorKind::LengthMismatch, "empty index stream");
    const std::uint32_t nb = packed[0];
    if (nb == 0 || nb > 32)
        fail(ErrorKind::InvalidArgument, "bad bits-per-index header " + std::to_string(nb));
    if (packed.size() < 1 + (count * nb + 7) / 8)
        fail(ErrorKind::LengthMismatch, "index stream shorter than " + std::to_string(count) + " indices");
    std::vector<std::uint32_t> out(count, 0);
    std::size_t bit = 0;
    for (auto &idx : out)
        for (std::uint32_t b = 0; b < nb; ++b, ++bit)
            idx = (idx << 1) | ((packed[1 + bit / 8] >> (7 - bit % 8)) & 1u);
    return out;
}

OverheadScheme parse_overhead_scheme(const std::string &name)
{
    if (name == "distributed")
        return OverheadScheme::Distributed;
    if (name == "centralized")
        return OverheadScheme::Centralized;
    if (name == "proposed")
        return OverheadScheme::Proposed;
    fail(ErrorKind::InvalidArgument, "unknown overhead scheme '" + name + "'");
}

std::uint64_t overhead_bits(OverheadScheme scheme, const OverheadParams &p)
{
    auto positive = [](std::size_t v, const char *what) {
        if (v == 0)
            fail(ErrorKind::InvalidArgument, std::string(what) + " must be positive");
        return static_cast<std::uint64_t>(v);
    };
    switch (scheme)
    {
    case OverheadScheme::Distributed:
        return 96 * positive(p.num_targets, "Q");
    case OverheadScheme::Centralized:
        return 64 * positive(p.num_antennas, "M_r") * positive(p.num_subcarriers, "N_s") *
               positive(p.num_symbols, "T_s");
    case OverheadScheme::Proposed: {
        std::uint64_t nb = 0;
        if (p.bits)
            nb = positive(*p.bits, "N_b");
        else if (p.num_codewords)
            nb = index_bits(*p.num_codewords);
        else
            fail(ErrorKind::InvalidArgument, "proposed scheme needs N_b or N_c");
        return nb * positive(p.num_features, "L");
    }
    }
    fail(ErrorKind::InvalidArgument, "unknown overhead scheme");
}

void save_codebook(const std::string &path, const Codebook &book)
{
    book.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorKind::IoError, "cannot open '" + path + "' for writing");
    binio::put_magic(out, "VQCB");
    binio::put_le<std::uint16_t>(out, kCodebookVersion);
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(book.dim()));
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(book.size()));
    binio::put_le<std::uint16_t>(out, 0);
    for (Eigen::Index d = 0; d < book.codewords.rows(); ++d)
        for (Eigen::Index j = 0; j < book.codewords.cols(); ++j)
            binio::put_le<float>(out, static_cast<float>(book.codewords(d, j)));
    if (!out)
        fail(ErrorKind::IoError, "write to '" + path + "' failed");
}

Codebook load_codebook(const std::string &path, double gamma)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::IoError, "cannot open '" + path + "'");
    binio::expect_magic(in, "VQCB", path);
    const auto version = binio::get_le<std::uint16_t>(in);
    if (version != kCodebookVersion)
        fail(ErrorKind::IoError, path + ": unsupported codebook version " + std::to_string(version));
    const auto D = binio::get_le<std::uint32_t>(in);
    const auto Nc = binio::get_le<std::uint32_t>(in);
    (void)binio::get_le<std::uint16_t>(in);
    if (Nc == 0)
        fail(ErrorKind::EmptyCodebook, path + ": N_c = 0");
    if (D == 0)
        fail(ErrorKind::IoError, path + ": D = 0");
    Eigen::MatrixXd C(D, Nc);
    for (Eigen::Index d = 0; d < C.rows(); ++d)
        for (Eigen::Index j = 0; j < C.cols(); ++j)
            C(d, j) = binio::get_le<float>(in);
    Codebook book = make_codebook(C, gamma);
    book.validate();
    return book;
}

} // namespace cfisac
