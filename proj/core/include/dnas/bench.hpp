#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dnas/dataset.hpp"
#include "dnas/searchspace.hpp"
#include "dnas/trainer.hpp"

namespace dnas {

struct BenchRecord {
    std::string genotype;
    std::vector<std::uint64_t> seeds;
    std::vector<double> val_acc;
    std::vector<double> test_acc;
    double mean_val = 0.0, std_val = 0.0;
    double mean_test = 0.0, std_test = 0.0;
    std::uint64_t config_hash = 0;
    // Wall time is measured during builds and logged to the sidecar build
    // log; it is not part of the canonical DB bytes (rebuilds must be
    // byte-identical).
    double wall_time = 0.0;
};

struct BenchDB {
    std::string space_descriptor;
    std::uint64_t config_hash = 0; // binds space + dataset + recipe + seeds
    std::size_t seeds_per_arch = 0;
    std::vector<BenchRecord> records; // enumeration order
    bool complete = false;

    const BenchRecord& query(const std::string& genotype) const;
    // Fraction of records with strictly lower mean test accuracy; ties
    // share the lower rank.
    double rank_of(const std::string& genotype) const;
    const BenchRecord& best() const;
    const BenchRecord& worst() const;
};

std::uint64_t bench_config_hash(const CellSpec& spec, const Dataset& ds,
                                const TrainConfig& cfg, std::size_t seeds_per_arch);

// Trains every genotype from scratch with seeds (cfg.seed .. cfg.seed+k-1),
// persisting each record as soon as it is ready. Safe to interrupt and
// resume; the finished file is byte-identical either way. Worker threads
// train independent architectures; the writer serializes output in
// enumeration order.
BenchDB build_bench(const CellSpec& spec, const Dataset& ds, const TrainConfig& cfg,
                    std::size_t seeds_per_arch, const std::string& db_path,
                    std::size_t cap = 10000, std::size_t threads = 1,
                    std::ostream* progress = nullptr);

BenchDB load_bench(const std::string& path);

struct TrajectoryPoint {
    std::size_t epoch = 0;
    std::string genotype;
    double oracle_mean_test = 0.0;
    bool ok = false;
    std::string message; // set for skipped/missing checkpoints
};

// Runs the given selection method ("mag" | "pt" | "pt-mag") on each
// checkpoint snapshot and queries the oracle.
std::vector<TrajectoryPoint> trajectory_eval(
    const std::vector<std::pair<std::size_t, std::string>>& checkpoints,
    const std::string& method, const BenchDB& db, const Dataset& ds,
    const TrainConfig& cfg, std::uint64_t select_seed);

} // namespace dnas
