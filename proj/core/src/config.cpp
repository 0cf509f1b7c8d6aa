#include "dnas/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

extern char** environ;

namespace dnas {

const std::vector<std::pair<std::string, std::string>>& Config::schema() {
    static const std::vector<std::pair<std::string, std::string>> entries = {
        {"space.variant", "s2p"},
        {"space.num_inputs", "2"},
        {"space.num_intermediate", "2"},
        {"space.feature_width", "8"},
        {"space.mask_renormalize", "true"},
        {"dataset.kind", "spirals"},
        {"dataset.n", "600"},
        {"dataset.classes", "3"},
        {"dataset.noise", "0.15"},
        {"dataset.seed", "1"},
        {"train.epochs", "50"},
        {"train.batch", "32"},
        {"train.lr_w", "0.05"},
        {"train.lr_alpha", "0.08"},
        {"train.momentum", "0.9"},
        {"train.alpha_mode", "bilevel"},
        {"train.rs_sigma", "0.0"},
        {"train.rs_per_epoch", "false"},
        {"train.seed", "1"},
        {"select.method", "pt"},
        {"select.finetune_epochs", "5"},
        {"select.topology_finetune_epochs", "-1"},
        {"select.finetune_alpha", "true"},
        {"select.strength_epochs", "0"},
        {"select.seed", "1"},
        {"bench.seeds_per_arch", "3"},
        {"bench.cap", "10000"},
        {"bench.threads", "1"},
        {"io.out_dir", "out"},
        {"io.checkpoint_every", "0"},
    };
    return entries;
}

Config Config::defaults() {
    Config c;
    for (const auto& [k, v] : schema()) c.values_[k] = v;
    return c;
}

bool Config::key_allowed(const std::string& key) {
    if (key.rfind("space.s1_pools.", 0) == 0) return true;
    for (const auto& [k, v] : schema())
        if (k == key) return true;
    return false;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!key_allowed(key)) throw UsageError("config: unknown key '" + key + "'");
    values_[key] = value;
}

void Config::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("config: cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config: missing '=' at " + path + ":" + std::to_string(lineno));
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw UsageError("config: empty key or value at " + path + ":" +
                             std::to_string(lineno));
        set(key, value);
    }
}

void Config::apply_environment() {
    for (char** env = environ; *env; ++env) {
        const std::string entry(*env);
        if (entry.rfind("DNAS_", 0) != 0) continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string key = entry.substr(5, eq - 5);
        std::size_t pos;
        while ((pos = key.find("__")) != std::string::npos) key.replace(pos, 2, ".");
        set(key, entry.substr(eq + 1));
    }
}

const std::string& Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("config: missing key '" + key + "'");
    return it->second;
}

double Config::get_double(const std::string& key) const {
    try {
        std::size_t used = 0;
        const double v = std::stod(get(key), &used);
        if (used != get(key).size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw UsageError("config: '" + key + "' must be a number, got '" + get(key) + "'");
    }
}

std::size_t Config::get_size(const std::string& key) const {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(get(key), &used);
        if (used != get(key).size() || v < 0) throw std::invalid_argument("");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw UsageError("config: '" + key + "' must be a non-negative integer, got '" +
                         get(key) + "'");
    }
}

long Config::get_long(const std::string& key) const {
    try {
        std::size_t used = 0;
        const long v = std::stol(get(key), &used);
        if (used != get(key).size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw UsageError("config: '" + key + "' must be an integer, got '" + get(key) + "'");
    }
}

std::uint64_t Config::get_u64(const std::string& key) const {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(get(key), &used);
        if (used != get(key).size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw UsageError("config: '" + key + "' must be an unsigned integer, got '" +
                         get(key) + "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("config: '" + key + "' must be true/false, got '" + v + "'");
}

CellSpec Config::make_space() const {
    const std::string vtag = get("space.variant");
    auto variant = variant_from_tag(vtag);
    if (!variant) throw UsageError("config: unknown space.variant '" + vtag + "'");
    S1Pools s1;
    const std::string prefix = "space.s1_pools.";
    for (const auto& [k, v] : values_) {
        if (k.rfind(prefix, 0) != 0) continue;
        std::vector<OpKind> pool;
        std::istringstream is(v);
        std::string tag;
        while (std::getline(is, tag, ',')) {
            auto op = op_from_tag(tag);
            if (!op) throw UsageError("config: unknown op tag '" + tag + "' in " + k);
            pool.push_back(*op);
        }
        s1[k.substr(prefix.size())] = std::move(pool);
    }
    return build_space(*variant, get_size("space.num_inputs"),
                       get_size("space.num_intermediate"), get_size("space.feature_width"),
                       s1.empty() ? nullptr : &s1);
}

Dataset Config::make_dataset() const {
    const std::string ktag = get("dataset.kind");
    auto kind = dataset_from_tag(ktag);
    if (!kind) throw UsageError("config: unknown dataset.kind '" + ktag + "'");
    return dnas::make_dataset(*kind, get_size("dataset.n"), get_size("dataset.classes"),
                              get_double("dataset.noise"), get_u64("dataset.seed"),
                              get_size("space.feature_width"));
}

TrainConfig Config::make_train_config() const {
    TrainConfig cfg;
    cfg.epochs = get_size("train.epochs");
    cfg.batch_size = get_size("train.batch");
    cfg.lr_w = get_double("train.lr_w");
    cfg.lr_alpha = get_double("train.lr_alpha");
    cfg.momentum = get_double("train.momentum");
    const std::string mode = get("train.alpha_mode");
    auto m = alpha_mode_from_tag(mode);
    if (!m) throw UsageError("config: unknown train.alpha_mode '" + mode + "'");
    cfg.alpha_mode = *m;
    cfg.rs_sigma = get_double("train.rs_sigma");
    if (cfg.alpha_mode == AlphaMode::SDARTS_RS && !(cfg.rs_sigma > 0.0))
        throw UsageError("config: train.alpha_mode=sdarts_rs requires train.rs_sigma > 0");
    cfg.rs_per_epoch = get_bool("train.rs_per_epoch");
    cfg.finetune_epochs = get_size("select.finetune_epochs");
    cfg.topology_finetune_epochs = get_long("select.topology_finetune_epochs");
    cfg.finetune_alpha = get_bool("select.finetune_alpha");
    cfg.strength_epochs = get_size("select.strength_epochs");
    cfg.seed = get_u64("train.seed");
    cfg.validate();
    return cfg;
}

std::string Config::resolved_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
}

void Config::write_resolved(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw UsageError("config: cannot write " + path);
    f << resolved_text();
}

std::uint64_t Config::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : resolved_text()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace dnas
