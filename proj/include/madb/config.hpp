#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "madb/encoding.hpp"
#include "madb/orchestrator.hpp"

namespace madb {

/// Everything one CLI invocation needs: the per-run settings plus the sweep.
struct ExperimentConfig {
    ExperimentSettings settings;
    std::vector<RunMode> modes{RunMode::madb, RunMode::pl_nosharing, RunMode::iso_nosharing, RunMode::nolearning};
    /// Sharing variants compared by the ablation (MADB runs only).
    std::vector<SharingMode> ablation_sharing{SharingMode::full, SharingMode::marl2_dif_scheduler,
                                              SharingMode::marl3_dif_optimizer};
    std::vector<std::size_t> train_sizes{50, 150, 300, 450};
    std::size_t num_seeds = 5;
    std::uint64_t first_seed = 1;
    std::string output_dir = "results";

    std::vector<std::uint64_t> seeds() const;
    /// Throws ConfigError on an unusable sweep.
    void validate() const;
};

/// Reads `key = value` lines; '#' starts a comment. Unknown keys, malformed
/// values and repeated keys are errors. Keys not mentioned keep defaults.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Sets one key on an existing config (same syntax as a config line).
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Every recognised key with its current value, in file syntax.
void write_config(std::ostream& out, const ExperimentConfig& config);
std::vector<std::string> config_keys();

}  // namespace madb
