#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "dkd/data.hpp"

namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("dkd_data_test_" + name);
}

void write_be32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<char*>(b), 4);
}

void write_idx_pair(const fs::path& img, const fs::path& lab, std::uint32_t n,
                    std::uint32_t img_count_override = 0) {
    std::ofstream io(img, std::ios::binary);
    write_be32(io, 0x00000803u);
    write_be32(io, img_count_override ? img_count_override : n);
    write_be32(io, 2);
    write_be32(io, 2);
    for (std::uint32_t i = 0; i < n; ++i) {
        unsigned char px[4] = {0, 255, 128, static_cast<unsigned char>(i)};
        io.write(reinterpret_cast<char*>(px), 4);
    }
    io.close();
    std::ofstream lo(lab, std::ios::binary);
    write_be32(lo, 0x00000801u);
    write_be32(lo, n);
    for (std::uint32_t i = 0; i < n; ++i) {
        unsigned char l = static_cast<unsigned char>(i % 10);
        lo.write(reinterpret_cast<char*>(&l), 1);
    }
}

} // namespace

TEST_CASE("make_blobs determinism and priors") {
    auto a = dkd::make_blobs(200, 5, 10, 1.0, 42);
    auto b = dkd::make_blobs(200, 5, 10, 1.0, 42);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);

    auto c = dkd::make_blobs(200, 5, 10, 1.0, 43);
    CHECK(a.features.data() != c.features.data());

    CHECK(a.n() == 1000);
    CHECK(a.dim() == 10);
    CHECK(a.classes() == 5);
    for (std::size_t count : a.class_counts()) CHECK(count == 200);

    CHECK_THROWS_AS(dkd::make_blobs(0, 5, 10, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(dkd::make_blobs(10, 1, 10, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(dkd::make_blobs(10, 5, 0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("make_blobs separable limit: a nearest-mean rule is perfect at tiny spread") {
    auto data = dkd::make_blobs(50, 2, 6, 1e-6, 7);
    // class means estimated from the data itself
    std::vector<std::vector<double>> means(2, std::vector<double>(6, 0.0));
    std::vector<std::size_t> counts(2, 0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto c = data.label_class(i);
        ++counts[c];
        for (std::size_t j = 0; j < 6; ++j) means[c][j] += data.features.at(i, j);
    }
    for (std::size_t c = 0; c < 2; ++c)
        for (double& v : means[c]) v /= static_cast<double>(counts[c]);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        double d0 = 0, d1 = 0;
        for (std::size_t j = 0; j < 6; ++j) {
            const double x = data.features.at(i, j);
            d0 += (x - means[0][j]) * (x - means[0][j]);
            d1 += (x - means[1][j]) * (x - means[1][j]);
        }
        correct += (d0 < d1 ? 0u : 1u) == data.label_class(i);
    }
    CHECK(correct == data.n());
}

TEST_CASE("apply_shift omission and subsampling") {
    auto pool = dkd::make_blobs(100, 10, 4, 1.0, 11);

    dkd::ShiftSpec spec;
    spec.omitted_classes = {3};
    spec.target_fraction = 0.1;
    spec.seed = 5;
    auto domains = dkd::apply_shift(pool, spec);

    auto count_class = [](const dkd::SplitSet& s, std::size_t c) {
        return s.train.class_counts()[c] + s.val.class_counts()[c] + s.test.class_counts()[c];
    };
    CHECK(count_class(domains.source, 3) == 0);
    CHECK(count_class(domains.target, 3) > 0);
    const std::size_t target_total =
        domains.target.train.n() + domains.target.val.n() + domains.target.test.n();
    CHECK(target_total == 100); // 10% of 1000

    // deterministic under the same seed
    auto again = dkd::apply_shift(pool, spec);
    CHECK(domains.target.train.features == again.target.train.features);
    CHECK(domains.source.test.features == again.source.test.features);

    // two omitted classes
    dkd::ShiftSpec two;
    two.omitted_classes = {3, 7};
    two.target_fraction = 0.2;
    two.seed = 5;
    auto harder = dkd::apply_shift(pool, two);
    CHECK(count_class(harder.source, 3) == 0);
    CHECK(count_class(harder.source, 7) == 0);
    CHECK(count_class(harder.source, 2) > 0);

    // validation
    dkd::ShiftSpec bad;
    bad.omitted_classes = {12};
    CHECK_THROWS_AS(dkd::apply_shift(pool, bad), std::invalid_argument);
    dkd::ShiftSpec tiny;
    tiny.target_fraction = 0.001; // one row cannot fill three splits
    CHECK_THROWS_AS(dkd::apply_shift(pool, tiny), std::invalid_argument);
}

TEST_CASE("apply_shift identity case keeps class priors") {
    auto pool = dkd::make_blobs(60, 4, 3, 1.0, 13);
    dkd::ShiftSpec spec;          // nothing omitted
    spec.target_fraction = 1.0;   // full population
    spec.seed = 2;
    auto domains = dkd::apply_shift(pool, spec);

    auto totals = [](const dkd::SplitSet& s) {
        auto a = s.train.class_counts();
        const auto b = s.val.class_counts();
        const auto c = s.test.class_counts();
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i] + c[i];
        return a;
    };
    const auto src = totals(domains.source);
    const auto tgt = totals(domains.target);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(src[c] == 60);
        CHECK(tgt[c] == 60);
    }

    // prior-shift property in general: target keeps full support, source is
    // zero exactly on omitted classes
    dkd::ShiftSpec omit2;
    omit2.omitted_classes = {1, 2};
    omit2.target_fraction = 0.5;
    omit2.seed = 9;
    auto shifted = dkd::apply_shift(pool, omit2);
    const auto s2 = totals(shifted.source);
    const auto t2 = totals(shifted.target);
    CHECK(s2[1] == 0);
    CHECK(s2[2] == 0);
    CHECK(s2[0] > 0);
    for (std::size_t c = 0; c < 4; ++c) CHECK(t2[c] > 0);
}

TEST_CASE("stratified subsampling hits per-class counts") {
    auto pool = dkd::make_blobs(100, 4, 3, 1.0, 17);
    dkd::ShiftSpec spec;
    spec.target_fraction = 0.2;
    spec.seed = 3;
    spec.stratified = true;
    auto domains = dkd::apply_shift(pool, spec);
    auto counts = domains.target.train.class_counts();
    const auto v = domains.target.val.class_counts();
    const auto t = domains.target.test.class_counts();
    for (std::size_t c = 0; c < 4; ++c) CHECK(counts[c] + v[c] + t[c] == 20);
}

TEST_CASE("csv round trip") {
    const auto path = temp_file("round.csv");
    {
        std::ofstream os(path);
        os << "f0,f1,label\n";
        os << "0.25,-1.5,0\n";
        os << "1e-3,2.25,2\n";
        os << "3.5,0.125,1\n";
    }
    auto data = dkd::load_csv(path.string(), "label", 3);
    CHECK(data.n() == 3);
    CHECK(data.dim() == 2);
    CHECK(data.features.at(0, 0) == 0.25);
    CHECK(data.features.at(1, 1) == 2.25);
    CHECK(data.label_class(0) == 0);
    CHECK(data.label_class(1) == 2);
    CHECK(data.label_class(2) == 1);

    const auto out = temp_file("round_out.csv");
    dkd::save_csv(data, out.string());
    auto back = dkd::load_csv(out.string(), "label", 3);
    CHECK(back.features == data.features);
    CHECK(back.labels == data.labels);

    // deterministic bytes on re-save
    const auto out2 = temp_file("round_out2.csv");
    dkd::save_csv(data, out2.string());
    std::ifstream a(out), b(out2);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());

    fs::remove(path);
    fs::remove(out);
    fs::remove(out2);
}

TEST_CASE("csv error paths carry line numbers") {
    const auto path = temp_file("bad.csv");
    {
        std::ofstream os(path);
        os << "f0,f1,label\n";
        os << "0.25,oops,0\n";
    }
    CHECK_THROWS_WITH_AS(dkd::load_csv(path.string(), "label", 3),
                         doctest::Contains(":2:"), dkd::FormatError);
    {
        std::ofstream os(path);
        os << "f0,f1,label\n0.5,0.5,7\n";
    }
    CHECK_THROWS_AS(dkd::load_csv(path.string(), "label", 3), dkd::FormatError);
    {
        std::ofstream os(path);
        os << "f0,f1,notlabel\n";
    }
    CHECK_THROWS_AS(dkd::load_csv(path.string(), "label", 3), dkd::FormatError);
    CHECK_THROWS_AS(dkd::load_csv("/nonexistent/nope.csv", "label", 3), dkd::DataError);
    fs::remove(path);
}

TEST_CASE("idx loading") {
    const auto img = temp_file("images.idx");
    const auto lab = temp_file("labels.idx");
    write_idx_pair(img, lab, 12);

    auto data = dkd::load_idx(img.string(), lab.string());
    CHECK(data.n() == 12);
    CHECK(data.dim() == 4);
    CHECK(data.classes() == 10);
    CHECK(data.features.at(0, 0) == 0.0);   // pixel 0
    CHECK(data.features.at(0, 1) == 1.0);   // pixel 255
    CHECK(data.features.at(0, 2) == doctest::Approx(128.0 / 255.0));
    CHECK(data.label_class(3) == 3);

    // count mismatch
    write_idx_pair(img, lab, 12, 13);
    CHECK_THROWS_AS(dkd::load_idx(img.string(), lab.string()), dkd::FormatError);

    // bad magic
    {
        std::ofstream io(img, std::ios::binary);
        write_be32(io, 0xDEADBEEFu);
        write_be32(io, 1);
        write_be32(io, 2);
        write_be32(io, 2);
    }
    CHECK_THROWS_AS(dkd::load_idx(img.string(), lab.string()), dkd::FormatError);
    fs::remove(img);
    fs::remove(lab);
}

TEST_CASE("standardizer fits on one split and applies to others") {
    auto pool = dkd::make_blobs(50, 3, 4, 2.0, 23);
    auto s = dkd::Standardizer::fit(pool);
    dkd::Dataset copy = pool;
    s.apply(copy);
    // columns of the fitted split end up zero mean, unit variance
    for (std::size_t j = 0; j < copy.dim(); ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < copy.n(); ++i) mean += copy.features.at(i, j);
        mean /= static_cast<double>(copy.n());
        CHECK(std::abs(mean) < 1e-9);
        double var = 0;
        for (std::size_t i = 0; i < copy.n(); ++i) {
            const double d = copy.features.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(copy.n());
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}
