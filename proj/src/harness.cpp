#include "madb/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "madb/errors.hpp"

namespace madb {

namespace fs = std::filesystem;

RunRecord summarize(const RunResult& result) {
    RunRecord r;
    r.spec = result.spec;
    r.ok = true;
    const auto& t = result.test;
    r.queries = t.records.size();
    const double n = t.records.empty() ? 1.0 : static_cast<double>(t.records.size());
    r.total_latency = t.total_latency;
    r.mean_hit_ratio = t.mean_hit_ratio();
    r.mean_plan_cost = t.total_plan_cost / n;
    r.mean_expert_cost = t.total_expert_cost / n;
    return r;
}

Stat mean_and_stddev(const std::vector<double>& values) {
    Stat s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return s;
}

double relative_improvement(double baseline, double candidate) {
    if (baseline == 0.0) return 0.0;
    return (baseline - candidate) / baseline;
}

std::size_t MatrixSummary::failures() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunRecord& r) { return !r.ok; }));
}

std::vector<CellSummary> summarize_cells(const std::vector<RunRecord>& runs) {
    struct Acc {
        CellSummary cell;
        std::vector<double> latency, hit, plan;
    };
    std::vector<Acc> accs;
    for (const auto& r : runs) {
        if (!r.ok) continue;
        auto it = std::find_if(accs.begin(), accs.end(), [&](const Acc& a) {
            return a.cell.mode == r.spec.mode && a.cell.sharing == r.spec.sharing &&
                   a.cell.train_size == r.spec.train_size;
        });
        if (it == accs.end()) {
            Acc a;
            a.cell.mode = r.spec.mode;
            a.cell.sharing = r.spec.sharing;
            a.cell.train_size = r.spec.train_size;
            accs.push_back(std::move(a));
            it = accs.end() - 1;
        }
        it->latency.push_back(r.total_latency);
        it->hit.push_back(r.mean_hit_ratio);
        it->plan.push_back(r.mean_plan_cost);
    }
    std::vector<CellSummary> out;
    for (auto& a : accs) {
        a.cell.runs = a.latency.size();
        a.cell.total_latency = mean_and_stddev(a.latency);
        a.cell.mean_hit_ratio = mean_and_stddev(a.hit);
        a.cell.mean_plan_cost = mean_and_stddev(a.plan);
        out.push_back(a.cell);
    }
    return out;
}

std::vector<Improvement> improvement_table(const std::vector<CellSummary>& cells) {
    std::vector<Improvement> out;
    for (const auto& ref : cells) {
        if (ref.mode != RunMode::madb || ref.sharing != SharingMode::full) continue;
        for (const auto& c : cells) {
            if (c.train_size != ref.train_size || (c.mode == ref.mode && c.sharing == ref.sharing)) continue;
            Improvement imp;
            imp.train_size = c.train_size;
            imp.mode = c.mode;
            imp.sharing = c.sharing;
            imp.baseline_latency = c.total_latency.mean;
            imp.reference_latency = ref.total_latency.mean;
            imp.improvement = relative_improvement(imp.baseline_latency, imp.reference_latency);
            out.push_back(imp);
        }
    }
    return out;
}

std::vector<RunSpec> matrix_specs(const ExperimentConfig& config) {
    config.validate();
    std::vector<RunSpec> specs;
    for (RunMode mode : config.modes)
        for (std::size_t size : config.train_sizes)
            for (std::uint64_t seed : config.seeds()) {
                RunSpec s;
                s.mode = mode;
                s.sharing = mode == RunMode::madb ? SharingMode::full : SharingMode::no_sharing;
                s.seed = seed;
                s.train_size = size;
                specs.push_back(s);
            }
    return specs;
}

std::vector<RunSpec> ablation_specs(const ExperimentConfig& config) {
    config.validate();
    if (config.ablation_sharing.empty()) throw ConfigError("experiment.ablation_sharing is empty");
    if (std::find(config.ablation_sharing.begin(), config.ablation_sharing.end(), SharingMode::full) ==
        config.ablation_sharing.end())
        throw ConfigError("experiment.ablation_sharing must include full");
    std::vector<RunSpec> specs;
    for (SharingMode sharing : config.ablation_sharing)
        for (std::uint64_t seed : config.seeds()) {
            RunSpec s;
            s.mode = RunMode::madb;
            s.sharing = sharing;
            s.seed = seed;
            s.train_size = config.train_sizes.back();
            specs.push_back(s);
        }
    return specs;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_outputs(const fs::path& dir, const MatrixSummary& summary, const char* prefix) {
    const std::string p = prefix;
    {
        auto out = open_out(dir / (p + "cells.csv"));
        write_cells_csv(out, summary.cells);
    }
    {
        auto out = open_out(dir / (p + "improvements.csv"));
        write_improvements_csv(out, summary.improvements);
    }
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

void read_metrics_file(const fs::path& path, std::vector<RunRecord>& runs, std::map<std::string, std::size_t>& index,
                       std::vector<double>& hit_sums) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("run_id,", 0) == 0) continue;
        const auto f = split(line);
        if (f.size() != 9) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 9 fields");
        try {
            auto [it, fresh] = index.try_emplace(f[0], runs.size());
            if (fresh) {
                RunRecord r;
                r.spec.mode = parse_run_mode(f[1]);
                r.spec.sharing = parse_sharing_mode(f[2]);
                r.spec.seed = std::stoull(f[3]);
                r.spec.train_size = std::stoull(f[4]);
                r.ok = true;
                runs.push_back(r);
                hit_sums.push_back(0.0);
            }
            auto& r = runs[it->second];
            r.queries += 1;
            r.total_latency += std::stod(f[6]);
            hit_sums[it->second] += std::stod(f[7]);
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

MatrixSummary execute_runs(const ExperimentConfig& config, const std::vector<RunSpec>& specs, const fs::path& out_dir,
                           std::ostream* progress, const RunFunction& run) {
    const fs::path runs_dir = out_dir / "runs";
    fs::create_directories(runs_dir);
    {
        auto out = open_out(out_dir / "config.conf");
        write_config(out, config);
    }
    MatrixSummary summary;
    std::size_t done = 0;
    for (const auto& spec : specs) {
        const std::string id = spec.run_id();
        RunRecord record;
        try {
            const RunResult result = run(config.settings, spec);
            {
                auto out = open_out(runs_dir / (id + ".metrics.csv"));
                write_metrics_header(out);
                write_metrics_rows(out, result);
            }
            {
                auto out = open_out(runs_dir / (id + ".training.csv"));
                write_training_log_header(out);
                write_training_log(out, result);
            }
            {
                auto out = open_out(runs_dir / (id + ".layout.json"));
                write_layout_schema(out, config.settings.catalog.num_relations, config.settings.encoding,
                                    spec.mode == RunMode::iso_nosharing ? SharingMode::no_sharing : spec.sharing);
            }
            record = summarize(result);
        } catch (const std::exception& e) {
            record.spec = spec;
            record.ok = false;
            record.error = e.what();
        }
        ++done;
        if (progress) {
            *progress << '[' << done << '/' << specs.size() << "] " << id;
            if (record.ok)
                *progress << " latency=" << format_number(record.total_latency)
                          << " hit=" << format_number(record.mean_hit_ratio) << '\n';
            else
                *progress << " FAILED: " << record.error << '\n';
        }
        summary.runs.push_back(std::move(record));
    }
    summary.cells = summarize_cells(summary.runs);
    summary.improvements = improvement_table(summary.cells);
    {
        auto out = open_out(out_dir / "summary.csv");
        write_runs_csv(out, summary.runs);
    }
    {
        auto out = open_out(out_dir / "failures.csv");
        write_failures_csv(out, summary.runs);
    }
    write_outputs(out_dir, summary, "");
    return summary;
}

MatrixSummary run_matrix(const ExperimentConfig& config, std::ostream* progress) {
    return execute_runs(config, matrix_specs(config), fs::path(config.output_dir) / "matrix", progress);
}

MatrixSummary compare_sharing_ablations(const ExperimentConfig& config, std::ostream* progress) {
    return execute_runs(config, ablation_specs(config), fs::path(config.output_dir) / "ablation", progress);
}

std::vector<RunRecord> read_metrics(const fs::path& path) {
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::recursive_directory_iterator(path)) {
            const auto name = entry.path().filename().string();
            if (entry.is_regular_file() && name.size() > 12 && name.ends_with(".metrics.csv"))
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(path)) {
        files.push_back(path);
    } else {
        throw std::runtime_error("no such metrics file or directory: " + path.string());
    }
    std::vector<RunRecord> runs;
    std::map<std::string, std::size_t> index;
    std::vector<double> hit_sums;
    for (const auto& f : files) read_metrics_file(f, runs, index, hit_sums);
    for (std::size_t i = 0; i < runs.size(); ++i)
        runs[i].mean_hit_ratio = runs[i].queries ? hit_sums[i] / static_cast<double>(runs[i].queries) : 0.0;
    return runs;
}

MatrixSummary aggregate(const fs::path& metrics, const fs::path& out_dir) {
    MatrixSummary summary;
    summary.runs = read_metrics(metrics);
    summary.cells = summarize_cells(summary.runs);
    summary.improvements = improvement_table(summary.cells);
    fs::create_directories(out_dir);
    write_outputs(out_dir, summary, "aggregate_");
    return summary;
}

void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& runs) {
    write_summary_header(out);
    for (const auto& r : runs) {
        if (!r.ok) continue;
        const auto& s = r.spec;
        out << s.run_id() << ',' << to_string(s.mode) << ',' << to_string(s.sharing) << ',' << s.seed << ','
            << s.train_size << ',' << r.queries << ',' << format_number(r.total_latency) << ','
            << format_number(r.mean_hit_ratio) << ',' << format_number(r.mean_plan_cost) << ','
            << format_number(r.mean_expert_cost) << '\n';
    }
}

void write_failures_csv(std::ostream& out, const std::vector<RunRecord>& runs) {
    out << "run_id,error\n";
    for (const auto& r : runs) {
        if (r.ok) continue;
        std::string msg = r.error;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << r.spec.run_id() << ',' << msg << '\n';
    }
}

void write_cells_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
    out << "mode,sharing,train_size,runs,latency_mean,latency_std,hit_ratio_mean,hit_ratio_std,plan_cost_mean,"
           "plan_cost_std\n";
    for (const auto& c : cells)
        out << to_string(c.mode) << ',' << to_string(c.sharing) << ',' << c.train_size << ',' << c.runs << ','
            << format_number(c.total_latency.mean) << ',' << format_number(c.total_latency.stddev) << ','
            << format_number(c.mean_hit_ratio.mean) << ',' << format_number(c.mean_hit_ratio.stddev) << ','
            << format_number(c.mean_plan_cost.mean) << ',' << format_number(c.mean_plan_cost.stddev) << '\n';
}

void write_improvements_csv(std::ostream& out, const std::vector<Improvement>& improvements) {
    out << "train_size,baseline_mode,baseline_sharing,baseline_latency,madb_latency,improvement\n";
    for (const auto& i : improvements)
        out << i.train_size << ',' << to_string(i.mode) << ',' << to_string(i.sharing) << ','
            << format_number(i.baseline_latency) << ',' << format_number(i.reference_latency) << ','
            << format_number(i.improvement) << '\n';
}

}  // namespace madb
