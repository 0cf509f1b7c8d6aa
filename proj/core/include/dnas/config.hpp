#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dnas/dataset.hpp"
#include "dnas/searchspace.hpp"
#include "dnas/trainer.hpp"

namespace dnas {

// Flat dotted-key configuration. Layering order (later wins):
// defaults < file < environment (DNAS_ prefix, "__" for '.') < flags.
// Unknown keys are rejected; the only open-ended keys are the per-edge
// pools under space.s1_pools.<src>-><dst>.
class Config {
public:
    static Config defaults();
    // Documented key set with default values, in canonical order.
    static const std::vector<std::pair<std::string, std::string>>& schema();

    void load_file(const std::string& path);
    void apply_environment(); // DNAS_section__key=value
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    std::string get_str(const std::string& key) const { return get(key); }
    double get_double(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    long get_long(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    CellSpec make_space() const;
    Dataset make_dataset() const;
    TrainConfig make_train_config() const;

    std::string resolved_text() const; // sorted "key = value" lines
    void write_resolved(const std::string& path) const;
    std::uint64_t hash() const;

private:
    static bool key_allowed(const std::string& key);
    std::map<std::string, std::string> values_;
};

} // namespace dnas
