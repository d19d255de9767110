#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "madb/config.hpp"
#include "madb/errors.hpp"
#include "madb/harness.hpp"

namespace fs = std::filesystem;
using namespace madb;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> modes;
};

void add_common(CLI::App* cmd, Common& c, bool with_mode) {
    cmd->add_option("--config", c.config_path, "Config file (key = value lines)")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "Override one key, e.g. --set experiment.test_queries=20");
    cmd->add_option("--seed", c.seed, "Run this seed only");
    cmd->add_option("--out", c.out, "Output directory (default experiment.output_dir)");
    if (with_mode) cmd->add_option("--mode", c.modes, "Run mode(s): madb, pl_nosharing, iso_nosharing, nolearning");
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
    for (const auto& o : c.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
        set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    if (c.seed) {
        cfg.first_seed = *c.seed;
        cfg.num_seeds = 1;
    }
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (!c.modes.empty()) {
        cfg.modes.clear();
        for (const auto& m : c.modes) cfg.modes.push_back(parse_run_mode(m));
    }
    cfg.validate();
    return cfg;
}

int report(const MatrixSummary& s, const fs::path& dir) {
    std::cout << "wrote " << dir.string() << " (" << s.runs.size() - s.failures() << " runs";
    if (s.failures()) std::cout << ", " << s.failures() << " failed, see failures.csv";
    std::cout << ")\n";
    for (const auto& c : s.cells)
        std::cout << "  " << to_string(c.mode) << '/' << to_string(c.sharing) << " n=" << c.train_size
                  << " latency=" << c.total_latency.mean << " (sd " << c.total_latency.stddev
                  << ") hit=" << c.mean_hit_ratio.mean << '\n';
    for (const auto& i : s.improvements)
        std::cout << "  n=" << i.train_size << " vs " << to_string(i.mode) << '/' << to_string(i.sharing) << ": "
                  << 100.0 * i.improvement << "%\n";
    return s.failures() ? 1 : 0;
}

int gen_workload(const Common& c, std::size_t train_size) {
    const ExperimentConfig cfg = load(c);
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    const std::size_t n = train_size ? train_size : cfg.train_sizes.back();
    const auto env = Environment::build(cfg.settings, cfg.first_seed, n);

    nlohmann::json cat = nlohmann::json::array();
    for (const auto& r : env.catalog.relations())
        cat.push_back({{"id", r.id}, {"name", r.name}, {"num_blocks", r.num_blocks}, {"has_index", r.has_index},
                       {"index_blocks", r.index_blocks}});
    nlohmann::json meta{{"seed", cfg.first_seed},
                        {"pool_capacity", env.pool_capacity},
                        {"train_templates", env.train_templates.size()},
                        {"test_templates", env.test_templates.size()},
                        {"relations", cat}};
    std::ofstream(dir / "catalog.json") << meta.dump(2) << '\n';
    std::ofstream train(dir / "train_workload.tsv");
    write_workload(train, env.train_queries);
    std::ofstream test(dir / "test_workload.tsv");
    write_workload(test, env.test_queries);
    std::cout << "wrote " << dir.string() << ": " << env.catalog.size() << " relations, " << env.train_queries.size()
              << " training and " << env.test_queries.size() << " test queries\n";
    return 0;
}

int run_one(const Common& c, std::optional<std::size_t> train_size, const std::string& sharing) {
    ExperimentConfig cfg = load(c);
    std::vector<RunSpec> specs;
    for (RunMode mode : cfg.modes)
        for (std::uint64_t seed : cfg.seeds()) {
            RunSpec s;
            s.mode = mode;
            s.seed = seed;
            s.train_size = train_size ? *train_size : cfg.train_sizes.back();
            if (!sharing.empty())
                s.sharing = parse_sharing_mode(sharing);
            else
                s.sharing = mode == RunMode::madb ? SharingMode::full : SharingMode::no_sharing;
            specs.push_back(s);
        }
    const fs::path dir = cfg.output_dir;
    return report(execute_runs(cfg, specs, dir, &std::cerr), dir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent query scheduling and join ordering over a simulated buffer pool"};
    app.require_subcommand(1);

    Common gen_c, run_c, matrix_c, ablate_c;
    std::size_t gen_size = 0;
    std::optional<std::size_t> run_size;
    std::string run_sharing;
    std::string agg_in, agg_out;

    auto* gen = app.add_subcommand("gen-workload", "Write the catalog and train/test query streams for one seed");
    add_common(gen, gen_c, false);
    gen->add_option("--train-size", gen_size, "Training queries (default: largest configured size)");

    auto* run = app.add_subcommand("run", "Train and evaluate single runs");
    add_common(run, run_c, true);
    run->add_option("--train-size", run_size, "Training queries (default: largest configured size)");
    run->add_option("--sharing", run_sharing, "Sharing mode: full, no_sharing, marl2_dif_scheduler, marl3_dif_optimizer");

    auto* matrix = app.add_subcommand("matrix", "Mode x train size x seed sweep");
    add_common(matrix, matrix_c, true);

    auto* ablate = app.add_subcommand("ablate", "Sharing-mode comparison at the largest train size");
    add_common(ablate, ablate_c, false);

    auto* agg = app.add_subcommand("aggregate", "Recompute cell statistics from per-query metrics CSVs");
    agg->add_option("input", agg_in, "Metrics file or directory")->required()->check(CLI::ExistingPath);
    agg->add_option("--out", agg_out, "Output directory (default: the input directory)");

    std::string show_path;
    auto* show = app.add_subcommand("show-config", "Print every config key with its effective value");
    show->add_option("--config", show_path, "Config file")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return gen_workload(gen_c, gen_size);
        if (*run) return run_one(run_c, run_size, run_sharing);
        if (*matrix) {
            const auto cfg = load(matrix_c);
            return report(run_matrix(cfg, &std::cerr), fs::path(cfg.output_dir) / "matrix");
        }
        if (*ablate) {
            const auto cfg = load(ablate_c);
            return report(compare_sharing_ablations(cfg, &std::cerr), fs::path(cfg.output_dir) / "ablation");
        }
        if (*agg) {
            fs::path out = agg_out;
            if (out.empty()) out = fs::is_directory(agg_in) ? fs::path(agg_in) : fs::path(agg_in).parent_path();
            return report(aggregate(agg_in, out), out);
        }
        if (*show) {
            const auto cfg = show_path.empty() ? ExperimentConfig{} : load_config(show_path);
            write_config(std::cout, cfg);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "madb: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "madb: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
