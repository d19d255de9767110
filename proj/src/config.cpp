#include "madb/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "madb/errors.hpp"

namespace madb {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = s.find(',');
        const auto item = trim(s.substr(0, comma));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

template <typename T>
T parse_number(std::string_view text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ConfigError("'" + std::string(text) + "' is not a valid number");
    return value;
}

double parse_double(std::string_view text) {
    // from_chars for double is missing from older standard libraries.
    std::string s(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError("'" + s + "' is not a valid number");
    return v;
}

bool parse_bool(std::string_view text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("'" + std::string(text) + "' is not a boolean");
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt(xs[i]);
    }
    return out;
}

// Message of a ConfigError without its "config: " prefix, for re-wrapping.
std::string detail(const ConfigError& e) {
    std::string_view w(e.what());
    constexpr std::string_view prefix = "config: ";
    if (w.substr(0, prefix.size()) == prefix) w.remove_prefix(prefix.size());
    return std::string(w);
}

struct Entry {
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Entry size_entry(Member member) {
    return {[member](ExperimentConfig& c, std::string_view v) { member(c) = parse_number<std::size_t>(v); },
            [member](const ExperimentConfig& c) { return std::to_string(member(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Member>
Entry double_entry(Member member) {
    return {[member](ExperimentConfig& c, std::string_view v) { member(c) = parse_double(v); },
            [member](const ExperimentConfig& c) { return format_double(member(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Member>
Entry bool_entry(Member member) {
    return {[member](ExperimentConfig& c, std::string_view v) { member(c) = parse_bool(v); },
            [member](const ExperimentConfig& c) {
                return std::string(member(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
            }};
}

void add_agent_keys(std::map<std::string, Entry>& t, const std::string& prefix,
                    AgentConfig& (*agent)(ExperimentConfig&)) {
    t[prefix + ".hidden_layers"] = {
        [agent](ExperimentConfig& c, std::string_view v) {
            std::vector<std::size_t> h;
            for (auto item : split_list(v)) h.push_back(parse_number<std::size_t>(item));
            if (std::find(h.begin(), h.end(), std::size_t{0}) != h.end())
                throw ConfigError("hidden layer widths must be positive");
            agent(c).hidden_layers = h;
        },
        [agent](const ExperimentConfig& c) {
            return join(agent(const_cast<ExperimentConfig&>(c)).hidden_layers,
                        [](std::size_t x) { return std::to_string(x); });
        }};
    t[prefix + ".learning_rate"] = double_entry([agent](ExperimentConfig& c) -> double& { return agent(c).learning_rate; });
    t[prefix + ".gamma"] = double_entry([agent](ExperimentConfig& c) -> double& { return agent(c).gamma; });
    t[prefix + ".epsilon_start"] = double_entry([agent](ExperimentConfig& c) -> double& { return agent(c).epsilon_start; });
    t[prefix + ".epsilon_min"] = double_entry([agent](ExperimentConfig& c) -> double& { return agent(c).epsilon_min; });
    t[prefix + ".epsilon_decay"] = double_entry([agent](ExperimentConfig& c) -> double& { return agent(c).epsilon_decay; });
    t[prefix + ".batch_size"] = size_entry([agent](ExperimentConfig& c) -> std::size_t& { return agent(c).batch_size; });
    t[prefix + ".replay_capacity"] =
        size_entry([agent](ExperimentConfig& c) -> std::size_t& { return agent(c).replay_capacity; });
    t[prefix + ".target_sync_period"] =
        size_entry([agent](ExperimentConfig& c) -> std::size_t& { return agent(c).target_sync_period; });
    t[prefix + ".updates_per_step"] =
        size_entry([agent](ExperimentConfig& c) -> std::size_t& { return agent(c).updates_per_step; });
    t[prefix + ".demo_margin_weight"] =
        double_entry([agent](ExperimentConfig& c) -> double& { return agent(c).demo_margin_weight; });
    t[prefix + ".demo_margin"] = double_entry([agent](ExperimentConfig& c) -> double& { return agent(c).demo_margin; });
}

#define MADB_SIZE(key, expr) t[key] = size_entry([](ExperimentConfig& c) -> std::size_t& { return expr; })
#define MADB_DOUBLE(key, expr) t[key] = double_entry([](ExperimentConfig& c) -> double& { return expr; })
#define MADB_BOOL(key, expr) t[key] = bool_entry([](ExperimentConfig& c) -> bool& { return expr; })

const std::map<std::string, Entry>& table() {
    static const std::map<std::string, Entry> entries = [] {
        std::map<std::string, Entry> t;
        MADB_SIZE("catalog.num_relations", c.settings.catalog.num_relations);
        MADB_SIZE("catalog.min_blocks", c.settings.catalog.min_blocks);
        MADB_SIZE("catalog.max_blocks", c.settings.catalog.max_blocks);
        MADB_DOUBLE("catalog.index_probability", c.settings.catalog.index_probability);
        MADB_DOUBLE("catalog.index_fraction", c.settings.catalog.index_fraction);

        MADB_SIZE("workload.num_templates", c.settings.workload.num_templates);
        MADB_SIZE("workload.min_query_relations", c.settings.workload.min_query_relations);
        MADB_SIZE("workload.max_query_relations", c.settings.workload.max_query_relations);
        MADB_DOUBLE("workload.prefix_heavy_fraction", c.settings.workload.prefix_heavy_fraction);
        MADB_DOUBLE("workload.skew_min", c.settings.workload.skew_min);
        MADB_DOUBLE("workload.skew_max", c.settings.workload.skew_max);
        MADB_DOUBLE("workload.uniform_level_min", c.settings.workload.uniform_level_min);
        MADB_DOUBLE("workload.uniform_level_max", c.settings.workload.uniform_level_max);
        MADB_DOUBLE("workload.join_weight_spread", c.settings.workload.join_weight_spread);
        MADB_DOUBLE("workload.join_output_rows", c.settings.workload.join_output_rows);
        MADB_BOOL("workload.selectivity_from_profile", c.settings.workload.selectivity_from_profile);
        MADB_DOUBLE("workload.base_selectivity_min", c.settings.workload.base_selectivity_min);
        MADB_DOUBLE("workload.base_selectivity_max", c.settings.workload.base_selectivity_max);
        MADB_DOUBLE("workload.max_result_rows", c.settings.workload.max_result_rows);
        MADB_DOUBLE("workload.extra_edge_probability", c.settings.workload.extra_edge_probability);
        MADB_DOUBLE("workload.instance_jitter", c.settings.workload.instance_jitter);
        MADB_DOUBLE("workload.train_fraction", c.settings.workload.train_fraction);

        MADB_DOUBLE("costs.hit_cost", c.settings.costs.hit_cost);
        MADB_DOUBLE("costs.miss_cost", c.settings.costs.miss_cost);
        MADB_DOUBLE("costs.join_cpu_cost", c.settings.costs.join_cpu_cost);
        MADB_DOUBLE("costs.rows_per_block", c.settings.costs.rows_per_block);
        MADB_DOUBLE("costs.index_block_threshold", c.settings.costs.index_block_threshold);
        MADB_DOUBLE("costs.index_scan_mean_threshold", c.settings.costs.index_scan_mean_threshold);

        MADB_SIZE("encoding.downsample_width", c.settings.encoding.downsample_width);
        MADB_SIZE("encoding.queue_capacity", c.settings.encoding.queue_capacity);

        add_agent_keys(t, "scheduler", [](ExperimentConfig& c) -> AgentConfig& { return c.settings.scheduler_agent; });
        add_agent_keys(t, "optimizer", [](ExperimentConfig& c) -> AgentConfig& { return c.settings.optimizer_agent; });

        MADB_DOUBLE("experiment.pool_fraction", c.settings.pool_fraction);
        MADB_SIZE("experiment.test_queries", c.settings.test_queries);
        MADB_SIZE("experiment.demo_epochs", c.settings.demo_epochs);
        MADB_BOOL("experiment.learn_during_eval", c.settings.learn_during_eval);
        MADB_BOOL("experiment.scheduler_slot_sharing", c.settings.scheduler_slot_sharing);
        MADB_BOOL("experiment.optimizer_relation_sharing", c.settings.optimizer_relation_sharing);
        MADB_SIZE("experiment.num_seeds", c.num_seeds);
        t["experiment.first_seed"] = {
            [](ExperimentConfig& c, std::string_view v) { c.first_seed = parse_number<std::uint64_t>(v); },
            [](const ExperimentConfig& c) { return std::to_string(c.first_seed); }};
        t["experiment.modes"] = {
            [](ExperimentConfig& c, std::string_view v) {
                c.modes.clear();
                for (auto item : split_list(v)) c.modes.push_back(parse_run_mode(item));
            },
            [](const ExperimentConfig& c) { return join(c.modes, [](RunMode m) { return std::string(to_string(m)); }); }};
        t["experiment.ablation_sharing"] = {
            [](ExperimentConfig& c, std::string_view v) {
                c.ablation_sharing.clear();
                for (auto item : split_list(v)) c.ablation_sharing.push_back(parse_sharing_mode(item));
            },
            [](const ExperimentConfig& c) {
                return join(c.ablation_sharing, [](SharingMode m) { return std::string(to_string(m)); });
            }};
        t["experiment.train_sizes"] = {
            [](ExperimentConfig& c, std::string_view v) {
                c.train_sizes.clear();
                for (auto item : split_list(v)) c.train_sizes.push_back(parse_number<std::size_t>(item));
            },
            [](const ExperimentConfig& c) { return join(c.train_sizes, [](std::size_t n) { return std::to_string(n); }); }};
        t["experiment.output_dir"] = {[](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); },
                                      [](const ExperimentConfig& c) { return c.output_dir; }};
        return t;
    }();
    return entries;
}

#undef MADB_SIZE
#undef MADB_DOUBLE
#undef MADB_BOOL

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < num_seeds; ++i) out.push_back(first_seed + i);
    return out;
}

void ExperimentConfig::validate() const {
    if (modes.empty()) throw ConfigError("experiment.modes is empty");
    if (num_seeds == 0) throw ConfigError("experiment.num_seeds must be positive");
    if (train_sizes.empty()) throw ConfigError("experiment.train_sizes is empty");
    for (std::size_t i = 0; i < train_sizes.size(); ++i) {
        if (train_sizes[i] == 0) throw ConfigError("training sizes must be positive");
        if (i > 0 && train_sizes[i] <= train_sizes[i - 1]) throw ConfigError("training sizes must be ascending");
    }
    if (output_dir.empty()) throw ConfigError("experiment.output_dir is empty");
    if (!(settings.pool_fraction > 0.0 && settings.pool_fraction <= 1.0))
        throw ConfigError("experiment.pool_fraction must lie in (0,1]");
    if (settings.test_queries == 0) throw ConfigError("experiment.test_queries must be positive");
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
    const auto& t = table();
    const auto it = t.find(std::string(key));
    if (it == t.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
    try {
        it->second.set(config, trim(value));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(key) + ": " + detail(e));
    }
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    ExperimentConfig config;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto where = source + ":" + std::to_string(lineno) + ": ";
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key(trim(view.substr(0, eq)));
        if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' set twice");
        try {
            set_config_value(config, key, view.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + detail(e));
        }
    }
    try {
        config.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + detail(e));
    }
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return parse_config(in, path);
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
    std::string section;
    for (const auto& [key, entry] : table()) {
        const auto prefix = key.substr(0, key.find('.'));
        if (prefix != section) {
            if (!section.empty()) out << '\n';
            section = prefix;
        }
        out << key << " = " << entry.get(config) << '\n';
    }
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [key, entry] : table()) keys.push_back(key);
    return keys;
}

}  // namespace madb
