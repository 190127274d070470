#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dkd/errors.hpp"
#include "dkd/matrix.hpp"
#include "dkd/prob.hpp"
#include "dkd/rng.hpp"

namespace dkd {

enum class Split { train, val, test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

/// A labeled feature table. Labels are stored as one-hot distributions over a
/// fixed class count; immutable once built.
struct Dataset {
    Matrix features; // n x d
    std::vector<ProbVector> labels;
    Split split = Split::train;
    std::string provenance;

    std::size_t n() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }
    std::size_t classes() const { return labels.empty() ? 0 : labels.front().size(); }

    std::size_t label_class(std::size_t i) const { return labels[i].argmax(); }

    void validate() const {
        if (features.rows() != labels.size())
            throw DataError("Dataset: feature rows and label count disagree");
        for (const auto& l : labels)
            if (l.size() != classes())
                throw DataError("Dataset: inconsistent label width");
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(classes(), 0);
        for (std::size_t i = 0; i < n(); ++i) ++counts[label_class(i)];
        return counts;
    }
};

struct SplitSet {
    Dataset train, val, test;
};

struct DomainSplits {
    SplitSet source, target;
};

/// How to derive a source/target domain pair from one labeled pool:
/// drop the omitted classes from the source side, subsample the target side.
struct ShiftSpec {
    std::vector<int> omitted_classes;
    double target_fraction = 1.0;
    std::uint64_t seed = 0;
    bool stratified = false; // per-class proportional subsample instead of uniform
};

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

namespace detail {

inline Dataset take_rows(const Dataset& src, const std::vector<std::size_t>& idx, Split split,
                         const std::string& provenance) {
    Dataset out;
    out.features = Matrix(idx.size(), src.dim());
    out.labels.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto row = src.features.row(idx[r]);
        std::copy(row.begin(), row.end(), out.features.row(r).begin());
        out.labels.push_back(src.labels[idx[r]]);
    }
    out.split = split;
    out.provenance = provenance;
    return out;
}

inline SplitSet split_rows(const Dataset& pool, std::vector<std::size_t> idx,
                           const SplitFractions& f, Rng& rng, const std::string& tag) {
    if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");
    rng.shuffle(idx);
    const std::size_t m = idx.size();
    const auto n_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(m)));
    const auto n_val = static_cast<std::size_t>(std::floor(f.val * static_cast<double>(m)));
    const std::size_t n_test = m - n_train - n_val;
    if (n_train == 0 || n_val == 0 || n_test == 0)
        throw std::invalid_argument("split fractions leave an empty split (" + tag + ")");
    SplitSet out;
    out.train = take_rows(pool, {idx.begin(), idx.begin() + n_train}, Split::train, tag);
    out.val = take_rows(pool, {idx.begin() + n_train, idx.begin() + n_train + n_val}, Split::val,
                        tag);
    out.test = take_rows(pool, {idx.begin() + n_train + n_val, idx.end()}, Split::test, tag);
    return out;
}

} // namespace detail

/// Gaussian blob benchmark: C clusters in d dimensions, means placed at a
/// fixed radius along seeded random directions (near-orthogonal in even
/// moderate dimension, so the arrangement behaves like a regular simplex).
/// n_per_class points per cluster with isotropic stddev `spread`.
inline Dataset make_blobs(int n_per_class, int num_classes, int dim, double spread,
                          std::uint64_t seed) {
    if (n_per_class <= 0 || num_classes < 2 || dim <= 0 || !(spread >= 0.0))
        throw std::invalid_argument("make_blobs: invalid sizes");
    constexpr double kMeanRadius = 3.0;
    Rng rng(mix_seed(seed, 0xB10B5));

    std::vector<std::vector<double>> means;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<double> m(dim);
        double norm = 0.0;
        for (double& v : m) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : m) v = kMeanRadius * v / norm;
        means.push_back(std::move(m));
    }

    const auto n = static_cast<std::size_t>(n_per_class) * static_cast<std::size_t>(num_classes);
    Dataset out;
    out.features = Matrix(n, static_cast<std::size_t>(dim));
    out.labels.reserve(n);
    std::size_t row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < n_per_class; ++i, ++row) {
            auto dst = out.features.row(row);
            for (int j = 0; j < dim; ++j)
                dst[j] = means[c][j] + spread * rng.normal();
            out.labels.push_back(
                ProbVector::one_hot(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(c)));
        }
    }
    char prov[128];
    std::snprintf(prov, sizeof prov, "blobs(n_per_class=%d,classes=%d,dim=%d,spread=%g,seed=%llu)",
                  n_per_class, num_classes, dim, spread,
                  static_cast<unsigned long long>(seed));
    out.provenance = prov;
    return out;
}

/// Splits one pool into a prior-shifted source domain (omitted classes
/// removed) and a subsampled target domain that keeps every class. The two
/// domains may overlap; splits within each domain are disjoint.
inline DomainSplits apply_shift(const Dataset& pool, const ShiftSpec& spec,
                                const SplitFractions& fractions = {}) {
    pool.validate();
    if (!(spec.target_fraction > 0.0 && spec.target_fraction <= 1.0))
        throw std::invalid_argument("apply_shift: target_fraction must be in (0,1]");
    const auto counts = pool.class_counts();
    std::set<int> omitted(spec.omitted_classes.begin(), spec.omitted_classes.end());
    for (int c : omitted) {
        if (c < 0 || static_cast<std::size_t>(c) >= pool.classes())
            throw std::invalid_argument("apply_shift: omitted class out of range");
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument("apply_shift: omitted class absent from pool");
    }
    if (omitted.size() >= pool.classes())
        throw std::invalid_argument("apply_shift: cannot omit every class");

    Rng rng(mix_seed(spec.seed, 0x5F1F7));

    std::vector<std::size_t> source_idx;
    for (std::size_t i = 0; i < pool.n(); ++i)
        if (!omitted.count(static_cast<int>(pool.label_class(i)))) source_idx.push_back(i);

    std::vector<std::size_t> target_idx;
    if (spec.stratified) {
        // proportional per-class draw
        std::vector<std::vector<std::size_t>> by_class(pool.classes());
        for (std::size_t i = 0; i < pool.n(); ++i) by_class[pool.label_class(i)].push_back(i);
        for (auto& rows : by_class) {
            rng.shuffle(rows);
            const auto take = static_cast<std::size_t>(
                std::llround(spec.target_fraction * static_cast<double>(rows.size())));
            target_idx.insert(target_idx.end(), rows.begin(), rows.begin() + take);
        }
        std::sort(target_idx.begin(), target_idx.end());
    } else {
        target_idx.resize(pool.n());
        std::iota(target_idx.begin(), target_idx.end(), 0);
        rng.shuffle(target_idx);
        const auto take = static_cast<std::size_t>(
            std::llround(spec.target_fraction * static_cast<double>(pool.n())));
        target_idx.resize(std::max<std::size_t>(1, take));
    }

    DomainSplits out;
    out.source = detail::split_rows(pool, source_idx, fractions, rng, "source");
    out.target = detail::split_rows(pool, target_idx, fractions, rng, "target");
    return out;
}

// ---------------------------------------------------------------------------
// CSV: header row required, '.' decimal separator, label column addressed by
// name, labels are integers in [0, C). Generated datasets export to the same
// schema with feature columns f0..f{d-1}.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace detail

inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        std::size_t num_classes) {
    std::ifstream is(path);
    if (!is) throw DataError("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw FormatError(path + ":1: missing header row");
    const auto header = detail::split_csv_line(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_idx = i;
    if (label_idx == header.size())
        throw FormatError(path + ":1: no column named '" + label_column + "'");
    const std::size_t dim = header.size() - 1;
    if (dim == 0) throw FormatError(path + ":1: no feature columns");

    std::vector<double> values;
    std::vector<ProbVector> labels;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        for (std::size_t i = 0; i < fields.size(); ++i) {
            char* end = nullptr;
            const double v = std::strtod(fields[i].c_str(), &end);
            if (end == fields[i].c_str() || *end != '\0')
                throw FormatError(path + ":" + std::to_string(line_no) + ": bad number '" +
                                  fields[i] + "'");
            if (i == label_idx) {
                const double r = std::round(v);
                if (std::abs(v - r) > 1e-9 || r < 0 || r >= static_cast<double>(num_classes))
                    throw FormatError(path + ":" + std::to_string(line_no) +
                                      ": label out of range: " + fields[i]);
                labels.push_back(ProbVector::one_hot(num_classes, static_cast<std::size_t>(r)));
            } else {
                values.push_back(v);
            }
        }
    }
    if (labels.empty()) throw FormatError(path + ": no data rows");
    Dataset out;
    out.features = Matrix(labels.size(), dim, std::move(values));
    out.labels = std::move(labels);
    out.provenance = "csv:" + path;
    out.validate();
    return out;
}

inline void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("save_csv: cannot open " + path);
    for (std::size_t j = 0; j < data.dim(); ++j) os << "f" << j << ",";
    os << "label\n";
    char buf[40];
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto row = data.features.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", row[j]);
            os << buf << ",";
        }
        os << data.label_class(i) << "\n";
    }
    if (!os) throw DataError("save_csv: write failed for " + path);
}

// ---------------------------------------------------------------------------
// IDX: the original big-endian MNIST container. Image magic 0x00000803
// (unsigned bytes, 3 dims), label magic 0x00000801 (unsigned bytes, 1 dim).
// Pixels scale to [0, 1].
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated at offset " +
                          std::to_string(static_cast<long long>(is.tellg())));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

} // namespace detail

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw DataError("load_idx: cannot open " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw DataError("load_idx: cannot open " + labels_path);

    if (detail::read_be32(imgs, images_path) != 0x00000803u)
        throw FormatError(images_path + ": bad image magic (expected 0x00000803)");
    const std::uint32_t n = detail::read_be32(imgs, images_path);
    const std::uint32_t rows = detail::read_be32(imgs, images_path);
    const std::uint32_t cols = detail::read_be32(imgs, images_path);

    if (detail::read_be32(labs, labels_path) != 0x00000801u)
        throw FormatError(labels_path + ": bad label magic (expected 0x00000801)");
    const std::uint32_t n_labels = detail::read_be32(labs, labels_path);
    if (n != n_labels)
        throw FormatError(images_path + ": item count " + std::to_string(n) +
                          " does not match label count " + std::to_string(n_labels));

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> pixels(dim);
    std::vector<unsigned char> raw_labels(n);
    if (!labs.read(reinterpret_cast<char*>(raw_labels.data()), n))
        throw FormatError(labels_path + ": truncated label data");

    Dataset out;
    out.features = Matrix(n, dim);
    out.labels.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(dim)))
            throw FormatError(images_path + ": truncated image data at item " + std::to_string(i));
        auto dst = out.features.row(i);
        for (std::size_t j = 0; j < dim; ++j) dst[j] = pixels[j] / 255.0;
        if (raw_labels[i] > 9)
            throw FormatError(labels_path + ": label out of range at item " + std::to_string(i));
        out.labels.push_back(ProbVector::one_hot(10, raw_labels[i]));
    }
    out.provenance = "idx:" + images_path;
    out.validate();
    return out;
}

/// Per-column affine transform fitted on one dataset (source-domain train when
/// standardization is enabled) and applied to all splits of both domains.
struct Standardizer {
    std::vector<double> mean, stddev;

    static Standardizer fit(const Dataset& data) {
        Standardizer s;
        const std::size_t d = data.dim();
        s.mean.assign(d, 0.0);
        s.stddev.assign(d, 0.0);
        for (std::size_t i = 0; i < data.n(); ++i) {
            const auto row = data.features.row(i);
            for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
        }
        for (double& m : s.mean) m /= static_cast<double>(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) {
            const auto row = data.features.row(i);
            for (std::size_t j = 0; j < d; ++j) {
                const double dev = row[j] - s.mean[j];
                s.stddev[j] += dev * dev;
            }
        }
        for (double& v : s.stddev) {
            v = std::sqrt(v / static_cast<double>(data.n()));
            if (v == 0.0) v = 1.0; // constant column stays constant
        }
        return s;
    }

    void apply(Dataset& data) const {
        for (std::size_t i = 0; i < data.n(); ++i) {
            auto row = data.features.row(i);
            for (std::size_t j = 0; j < row.size(); ++j)
                row[j] = (row[j] - mean[j]) / stddev[j];
        }
    }
};

} // namespace dkd
