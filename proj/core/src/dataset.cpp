#include "dnas/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dnas/rng.hpp"

namespace dnas {

namespace {

constexpr double kPi = 3.141592653589793238462643383279;

// Orthonormal d x 2 embedding from the seeded stream; isometric on the
// 2-d signal so class geometry survives the lift to feature_width dims.
std::vector<double> make_embedding(std::size_t d, CounterRng& rng) {
    std::vector<double> q(d * 2);
    for (double& v : q) v = rng.next_normal();
    auto col = [&](std::size_t j, std::size_t i) -> double& { return q[i * 2 + j]; };
    double n0 = 0.0;
    for (std::size_t i = 0; i < d; ++i) n0 += col(0, i) * col(0, i);
    n0 = std::sqrt(n0);
    for (std::size_t i = 0; i < d; ++i) col(0, i) /= n0;
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += col(0, i) * col(1, i);
    for (std::size_t i = 0; i < d; ++i) col(1, i) -= dot * col(0, i);
    double n1 = 0.0;
    for (std::size_t i = 0; i < d; ++i) n1 += col(1, i) * col(1, i);
    n1 = std::sqrt(n1);
    for (std::size_t i = 0; i < d; ++i) col(1, i) /= n1;
    return q;
}

void signal_point(DatasetKind kind, std::size_t cls, std::size_t classes, double t,
                  CounterRng& noise_rng, double noise_level, double& x, double& y) {
    switch (kind) {
        case DatasetKind::SPIRALS: {
            const double r = 0.1 + 0.9 * t;
            const double a = 2.0 * kPi * (1.5 * t + static_cast<double>(cls) / classes);
            x = r * std::cos(a);
            y = r * std::sin(a);
            break;
        }
        case DatasetKind::MOONS: {
            const double a = kPi * t;
            if (cls == 0) {
                x = std::cos(a);
                y = std::sin(a);
            } else {
                x = 1.0 - std::cos(a);
                y = 0.5 - std::sin(a);
            }
            break;
        }
        case DatasetKind::BLOBS_HARD: {
            const double a = 2.0 * kPi * static_cast<double>(cls) / classes;
            // Tight circle of centers with overlapping spread.
            x = std::cos(a) + 0.55 * noise_rng.next_normal();
            y = std::sin(a) + 0.55 * noise_rng.next_normal();
            return; // blob spread is the signal; coordinate noise still added below
        }
    }
    (void)noise_level;
}

} // namespace

const char* dataset_tag(DatasetKind k) {
    switch (k) {
        case DatasetKind::SPIRALS: return "spirals";
        case DatasetKind::MOONS: return "moons";
        case DatasetKind::BLOBS_HARD: return "blobs_hard";
    }
    return "?";
}

std::optional<DatasetKind> dataset_from_tag(const std::string& tag) {
    if (tag == "spirals") return DatasetKind::SPIRALS;
    if (tag == "moons") return DatasetKind::MOONS;
    if (tag == "blobs_hard") return DatasetKind::BLOBS_HARD;
    return std::nullopt;
}

const std::vector<std::size_t>& Dataset::split(const std::string& name) const {
    if (name == "train") return train_idx;
    if (name == "val") return val_idx;
    if (name == "test") return test_idx;
    throw UsageError("unknown split '" + name + "'");
}

Dataset make_dataset(DatasetKind kind, std::size_t n, std::size_t classes,
                     double noise_level, std::uint64_t seed, std::size_t feature_width) {
    if (classes < 2) throw UsageError("make_dataset: need at least 2 classes");
    if (n < 10 * classes)
        throw UsageError("make_dataset: n must be >= 10 * classes, got n=" + std::to_string(n));
    if (kind == DatasetKind::MOONS && classes != 2)
        throw UsageError("make_dataset: moons supports exactly 2 classes");
    if (feature_width < 2)
        throw UsageError("make_dataset: feature_width must be >= 2");
    if (noise_level < 0.0) throw UsageError("make_dataset: noise_level must be >= 0");

    Dataset ds;
    ds.kind = kind;
    ds.n = n;
    ds.feature_width = feature_width;
    ds.classes = classes;
    ds.noise_level = noise_level;
    ds.seed = seed;
    ds.inputs.assign(n * feature_width, 0.0);
    ds.labels.assign(n, 0);

    CounterRng embed_rng(derive_key(seed, "dataset/embed"));
    const std::vector<double> q = make_embedding(feature_width, embed_rng);
    CounterRng noise_rng(derive_key(seed, "dataset/noise"));

    // Balanced class counts (+-1): the first n % classes classes get one extra.
    std::vector<std::size_t> counts(classes, n / classes);
    for (std::size_t c = 0; c < n % classes; ++c) counts[c]++;

    std::size_t row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i, ++row) {
            const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(counts[c]);
            double x = 0.0, y = 0.0;
            signal_point(kind, c, classes, t, noise_rng, noise_level, x, y);
            x += noise_level * noise_rng.next_normal();
            y += noise_level * noise_rng.next_normal();
            for (std::size_t j = 0; j < feature_width; ++j)
                ds.inputs[row * feature_width + j] = q[j * 2 + 0] * x + q[j * 2 + 1] * y;
            ds.labels[row] = static_cast<int>(c);
        }
    }

    // Stratified 0.4/0.3/0.3 split, deterministic in the seed.
    CounterRng split_rng(derive_key(seed, "dataset/split"));
    std::size_t base = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<std::size_t> idx(counts[c]);
        for (std::size_t i = 0; i < counts[c]; ++i) idx[i] = base + i;
        split_rng.shuffle(idx);
        const std::size_t n_tr = static_cast<std::size_t>(0.4 * static_cast<double>(counts[c]));
        const std::size_t n_va = static_cast<std::size_t>(0.3 * static_cast<double>(counts[c]));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i < n_tr)
                ds.train_idx.push_back(idx[i]);
            else if (i < n_tr + n_va)
                ds.val_idx.push_back(idx[i]);
            else
                ds.test_idx.push_back(idx[i]);
        }
        base += counts[c];
    }
    std::sort(ds.train_idx.begin(), ds.train_idx.end());
    std::sort(ds.val_idx.begin(), ds.val_idx.end());
    std::sort(ds.test_idx.begin(), ds.test_idx.end());
    return ds;
}

std::string dataset_cache_name(DatasetKind kind, std::size_t n, std::size_t classes,
                               double noise_level, std::uint64_t seed,
                               std::size_t feature_width) {
    char noise_buf[32];
    std::snprintf(noise_buf, sizeof(noise_buf), "%a", noise_level);
    std::ostringstream os;
    os << "dataset_" << dataset_tag(kind) << '_' << n << '_' << classes << '_' << noise_buf
       << '_' << seed << '_' << feature_width << ".txt";
    std::string s = os.str();
    // hexfloat contains characters unfriendly to file names
    for (char& ch : s)
        if (ch == '.' || ch == '+' || ch == '-') ch = 'm';
    return s;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw UsageError("save_dataset: cannot open " + path);
    char buf[64];
    f << "dnas-dataset v1\n";
    std::snprintf(buf, sizeof(buf), "%a", ds.noise_level);
    f << dataset_tag(ds.kind) << ' ' << ds.n << ' ' << ds.classes << ' ' << buf << ' '
      << ds.seed << ' ' << ds.feature_width << '\n';
    for (std::size_t i = 0; i < ds.n; ++i) {
        f << ds.labels[i];
        for (std::size_t j = 0; j < ds.feature_width; ++j) {
            std::snprintf(buf, sizeof(buf), "%a", ds.inputs[i * ds.feature_width + j]);
            f << ' ' << buf;
        }
        f << '\n';
    }
    auto dump = [&](const char* name, const std::vector<std::size_t>& v) {
        f << name;
        for (std::size_t i : v) f << ' ' << i;
        f << '\n';
    };
    dump("train", ds.train_idx);
    dump("val", ds.val_idx);
    dump("test", ds.test_idx);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("load_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "dnas-dataset v1")
        throw UsageError("load_dataset: bad header in " + path);
    Dataset ds;
    {
        std::string kind_tag, noise_hex;
        if (!(f >> kind_tag >> ds.n >> ds.classes >> noise_hex >> ds.seed >> ds.feature_width))
            throw UsageError("load_dataset: truncated header in " + path);
        auto kind = dataset_from_tag(kind_tag);
        if (!kind) throw UsageError("load_dataset: unknown kind " + kind_tag);
        ds.kind = *kind;
        ds.noise_level = std::strtod(noise_hex.c_str(), nullptr);
    }
    ds.inputs.assign(ds.n * ds.feature_width, 0.0);
    ds.labels.assign(ds.n, 0);
    for (std::size_t i = 0; i < ds.n; ++i) {
        if (!(f >> ds.labels[i])) throw UsageError("load_dataset: truncated rows");
        std::string hex;
        for (std::size_t j = 0; j < ds.feature_width; ++j) {
            if (!(f >> hex)) throw UsageError("load_dataset: truncated rows");
            ds.inputs[i * ds.feature_width + j] = std::strtod(hex.c_str(), nullptr);
        }
    }
    auto read_split = [&](const char* name, std::vector<std::size_t>& v) {
        std::string tag;
        if (!(f >> tag) || tag != name)
            throw UsageError(std::string("load_dataset: expected split '") + name + "'");
        std::getline(f, line);
        std::istringstream is(line);
        std::size_t i;
        while (is >> i) v.push_back(i);
    };
    read_split("train", ds.train_idx);
    read_split("val", ds.val_idx);
    read_split("test", ds.test_idx);
    if (ds.train_idx.size() + ds.val_idx.size() + ds.test_idx.size() != ds.n)
        throw UsageError("load_dataset: splits do not cover all rows");
    return ds;
}

} // namespace dnas
