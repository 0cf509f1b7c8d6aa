#include "dnas/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "dnas/rng.hpp"
#include "dnas/selection.hpp"
#include "dnas/supernet.hpp"

namespace dnas {

namespace {

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

std::string hex_u64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string record_line(const BenchRecord& r) {
    std::ostringstream os;
    os << "record " << r.genotype << '|';
    for (std::size_t s = 0; s < r.seeds.size(); ++s) {
        if (s) os << ';';
        os << r.seeds[s] << ':' << hex_double(r.val_acc[s]) << ':' << hex_double(r.test_acc[s]);
    }
    os << '|' << hex_double(r.mean_val) << '|' << hex_double(r.std_val) << '|'
       << hex_double(r.mean_test) << '|' << hex_double(r.std_test) << '|'
       << hex_u64(r.config_hash);
    return os.str();
}

BenchRecord parse_record_line(const std::string& line) {
    if (line.rfind("record ", 0) != 0)
        throw UsageError("bench: expected record line, got '" + line + "'");
    const std::string body = line.substr(7);
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
        std::size_t bar = body.find('|', pos);
        if (bar == std::string::npos) {
            fields.push_back(body.substr(pos));
            break;
        }
        fields.push_back(body.substr(pos, bar - pos));
        pos = bar + 1;
    }
    if (fields.size() != 7) throw UsageError("bench: malformed record line");
    BenchRecord r;
    r.genotype = fields[0];
    std::istringstream seeds(fields[1]);
    std::string tok;
    while (std::getline(seeds, tok, ';')) {
        const std::size_t c1 = tok.find(':');
        const std::size_t c2 = tok.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw UsageError("bench: malformed per-seed field");
        r.seeds.push_back(std::stoull(tok.substr(0, c1)));
        r.val_acc.push_back(std::strtod(tok.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr));
        r.test_acc.push_back(std::strtod(tok.substr(c2 + 1).c_str(), nullptr));
    }
    r.mean_val = std::strtod(fields[2].c_str(), nullptr);
    r.std_val = std::strtod(fields[3].c_str(), nullptr);
    r.mean_test = std::strtod(fields[4].c_str(), nullptr);
    r.std_test = std::strtod(fields[5].c_str(), nullptr);
    r.config_hash = std::stoull(fields[6], nullptr, 16);
    return r;
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) {
        sd = 0.0;
        return;
    }
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    sd = std::sqrt(acc / (static_cast<double>(v.size()) - 1.0));
}

struct ParsedDb {
    BenchDB db;
    std::size_t declared_count = 0;
};

ParsedDb parse_db_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("bench: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "dnas-bench v1")
        throw UsageError("bench: bad version header in " + path);
    ParsedDb out;
    auto expect = [&](const char* key) {
        if (!std::getline(f, line) || line.rfind(std::string(key) + " ", 0) != 0)
            throw UsageError(std::string("bench: expected '") + key + "' line in " + path);
        return line.substr(std::string(key).size() + 1);
    };
    out.db.space_descriptor = expect("space");
    out.db.config_hash = std::stoull(expect("config"), nullptr, 16);
    out.db.seeds_per_arch = std::stoul(expect("seeds_per_arch"));
    out.declared_count = std::stoul(expect("count"));
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line.rfind("end ", 0) == 0) {
            const std::size_t n = std::stoul(line.substr(4));
            if (n != out.db.records.size())
                throw UsageError("bench: end marker count mismatch in " + path);
            out.db.complete = true;
            break;
        }
        out.db.records.push_back(parse_record_line(line));
    }
    if (out.db.records.size() > out.declared_count)
        throw UsageError("bench: more records than declared count in " + path);
    if (out.db.complete && out.db.records.size() != out.declared_count)
        throw UsageError("bench: complete DB with wrong record count in " + path);
    return out;
}

} // namespace

const BenchRecord& BenchDB::query(const std::string& genotype) const {
    for (const BenchRecord& r : records)
        if (r.genotype == genotype) return r;
    throw InvariantError("bench query: unknown genotype '" + genotype + "'");
}

double BenchDB::rank_of(const std::string& genotype) const {
    const BenchRecord& rec = query(genotype);
    std::size_t lower = 0;
    for (const BenchRecord& r : records)
        if (r.mean_test < rec.mean_test) ++lower;
    return static_cast<double>(lower) / static_cast<double>(records.size());
}

const BenchRecord& BenchDB::best() const {
    if (records.empty()) throw InvariantError("bench: empty DB");
    const BenchRecord* b = &records[0];
    for (const BenchRecord& r : records)
        if (r.mean_test > b->mean_test) b = &r;
    return *b;
}

const BenchRecord& BenchDB::worst() const {
    if (records.empty()) throw InvariantError("bench: empty DB");
    const BenchRecord* w = &records[0];
    for (const BenchRecord& r : records)
        if (r.mean_test < w->mean_test) w = &r;
    return *w;
}

std::uint64_t bench_config_hash(const CellSpec& spec, const Dataset& ds,
                                const TrainConfig& cfg, std::size_t seeds_per_arch) {
    std::ostringstream os;
    os << spec.descriptor() << '\n'
       << dataset_tag(ds.kind) << ' ' << ds.n << ' ' << ds.classes << ' '
       << hex_double(ds.noise_level) << ' ' << ds.seed << ' ' << ds.feature_width << '\n'
       << hex_u64(cfg.hash()) << ' ' << cfg.seed << ' ' << seeds_per_arch;
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : os.str()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

BenchDB build_bench(const CellSpec& spec, const Dataset& ds, const TrainConfig& cfg,
                    std::size_t seeds_per_arch, const std::string& db_path, std::size_t cap,
                    std::size_t threads, std::ostream* progress) {
    if (seeds_per_arch < 1) throw UsageError("build_bench: seeds_per_arch must be >= 1");
    if (threads < 1) threads = 1;
    const auto genotypes = enumerate_genotypes(spec, cap);
    const std::uint64_t db_hash = bench_config_hash(spec, ds, cfg, seeds_per_arch);

    BenchDB db;
    db.space_descriptor = spec.descriptor();
    db.config_hash = db_hash;
    db.seeds_per_arch = seeds_per_arch;

    std::size_t start = 0;
    const bool existing = std::filesystem::exists(db_path);
    if (existing) {
        ParsedDb parsed = parse_db_file(db_path);
        if (parsed.db.space_descriptor != db.space_descriptor ||
            parsed.db.config_hash != db_hash || parsed.db.seeds_per_arch != seeds_per_arch ||
            parsed.declared_count != genotypes.size())
            throw InvariantError("build_bench: config-hash mismatch on resume of " + db_path);
        for (std::size_t i = 0; i < parsed.db.records.size(); ++i)
            if (parsed.db.records[i].genotype != genotype_to_string(spec, genotypes[i]))
                throw InvariantError("build_bench: record order mismatch on resume");
        if (parsed.db.complete) return parsed.db;
        db.records = std::move(parsed.db.records);
        start = db.records.size();
    }

    std::ofstream f;
    if (existing) {
        f.open(db_path, std::ios::app);
    } else {
        f.open(db_path);
        f << "dnas-bench v1\n";
        f << "space " << db.space_descriptor << '\n';
        f << "config " << hex_u64(db_hash) << '\n';
        f << "seeds_per_arch " << seeds_per_arch << '\n';
        f << "count " << genotypes.size() << '\n';
        f.flush();
    }
    if (!f) throw UsageError("build_bench: cannot open " + db_path);
    std::ofstream build_log(db_path + ".buildlog", std::ios::app);

    const std::size_t total = genotypes.size();
    std::vector<std::optional<BenchRecord>> pending(total);
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{start};
    std::atomic<bool> failed{false};
    std::string failure;

    auto compute = [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        BenchRecord r;
        r.genotype = genotype_to_string(spec, genotypes[i]);
        for (std::size_t s = 0; s < seeds_per_arch; ++s) {
            const std::uint64_t seed = cfg.seed + s;
            const ScratchResult res = train_from_scratch(spec, genotypes[i], ds, cfg, seed);
            r.seeds.push_back(seed);
            r.val_acc.push_back(res.val_accuracy);
            r.test_acc.push_back(res.test_accuracy);
        }
        mean_std(r.val_acc, r.mean_val, r.std_val);
        mean_std(r.test_acc, r.mean_test, r.std_test);
        r.config_hash = cfg.hash();
        r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    };

    auto worker = [&] {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            try {
                BenchRecord r = compute(i);
                {
                    std::lock_guard<std::mutex> lock(mu);
                    pending[i] = std::move(r);
                }
                cv.notify_all();
            } catch (const std::exception& e) {
                {
                    std::lock_guard<std::mutex> lock(mu);
                    failed = true;
                    failure = e.what();
                }
                cv.notify_all();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    const std::size_t nthreads = std::min(threads, total > start ? total - start : 1);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);

    // Writer: append records strictly in enumeration order.
    for (std::size_t i = start; i < total; ++i) {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return pending[i].has_value() || failed.load(); });
        if (failed.load()) break;
        BenchRecord r = std::move(*pending[i]);
        pending[i].reset();
        lock.unlock();
        f << record_line(r) << '\n';
        f.flush();
        build_log << r.genotype << " wall_time " << r.wall_time << '\n';
        if (progress)
            (*progress) << "bench " << (i + 1) << '/' << total << ' ' << r.genotype
                        << " mean_test " << r.mean_test << '\n';
        r.wall_time = 0.0; // canonical record carries no timing
        db.records.push_back(std::move(r));
    }
    for (std::thread& t : pool) t.join();
    if (failed.load()) throw NumericError("build_bench: worker failed: " + failure);

    f << "end " << total << '\n';
    f.flush();
    db.complete = true;
    return db;
}

BenchDB load_bench(const std::string& path) {
    ParsedDb parsed = parse_db_file(path);
    if (!parsed.db.complete)
        throw InvariantError("load_bench: DB at " + path + " is incomplete (" +
                             std::to_string(parsed.db.records.size()) + '/' +
                             std::to_string(parsed.declared_count) + " records)");
    return std::move(parsed.db);
}

std::vector<TrajectoryPoint> trajectory_eval(
    const std::vector<std::pair<std::size_t, std::string>>& checkpoints,
    const std::string& method, const BenchDB& db, const Dataset& ds,
    const TrainConfig& cfg, std::uint64_t select_seed) {
    if (method != "mag" && method != "pt" && method != "pt-mag")
        throw UsageError("trajectory_eval: unknown method '" + method + "'");
    std::vector<TrajectoryPoint> out;
    std::string expected_descriptor;
    for (const auto& [epoch, path] : checkpoints) {
        TrajectoryPoint p;
        p.epoch = epoch;
        if (!std::filesystem::exists(path)) {
            p.ok = false;
            p.message = "missing checkpoint " + path + ", skipped";
            out.push_back(std::move(p));
            continue;
        }
        Supernet net = Supernet::load_checkpoint(path);
        if (expected_descriptor.empty()) {
            expected_descriptor = net.spec().descriptor();
            if (expected_descriptor != db.space_descriptor)
                throw InvariantError("trajectory_eval: checkpoint space does not match DB");
        } else if (net.spec().descriptor() != expected_descriptor) {
            throw InvariantError("trajectory_eval: checkpoints span different spaces");
        }
        Genotype g;
        if (method == "mag") {
            g = magnitude_select(net);
        } else if (method == "pt") {
            g = pt_select(net, ds, cfg, select_seed).genotype;
        } else {
            g = pt_mag_select(net, ds, cfg, select_seed).genotype;
        }
        p.genotype = genotype_to_string(net.spec(), g);
        p.oracle_mean_test = db.query(p.genotype).mean_test;
        p.ok = true;
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace dnas
