#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "madb/config.hpp"
#include "madb/orchestrator.hpp"

namespace madb {

/// Test-set totals of one run, or the reason it failed.
struct RunRecord {
    RunSpec spec;
    bool ok = false;
    std::string error;
    std::size_t queries = 0;
    double total_latency = 0.0;
    double mean_hit_ratio = 0.0;
    double mean_plan_cost = 0.0;
    double mean_expert_cost = 0.0;
};

RunRecord summarize(const RunResult& result);

struct Stat {
    double mean = 0.0;
    /// Sample standard deviation; 0 for a single run.
    double stddev = 0.0;
};

Stat mean_and_stddev(const std::vector<double>& values);

/// Seeds pooled per (mode, sharing, train size).
struct CellSummary {
    RunMode mode = RunMode::madb;
    SharingMode sharing = SharingMode::full;
    std::size_t train_size = 0;
    std::size_t runs = 0;
    Stat total_latency;
    Stat mean_hit_ratio;
    Stat mean_plan_cost;
};

/// (baseline - reference) / baseline on mean total latency; the reference is
/// the MADB/full cell of the same train size.
struct Improvement {
    std::size_t train_size = 0;
    RunMode mode = RunMode::madb;
    SharingMode sharing = SharingMode::full;
    double baseline_latency = 0.0;
    double reference_latency = 0.0;
    double improvement = 0.0;
};

double relative_improvement(double baseline, double candidate);

struct MatrixSummary {
    std::vector<RunRecord> runs;
    std::vector<CellSummary> cells;
    std::vector<Improvement> improvements;

    std::size_t failures() const;
};

/// Cells in first-appearance order; failed runs are skipped.
std::vector<CellSummary> summarize_cells(const std::vector<RunRecord>& runs);
std::vector<Improvement> improvement_table(const std::vector<CellSummary>& cells);

/// mode x train size x seed. MADB runs with full sharing, the rest without.
std::vector<RunSpec> matrix_specs(const ExperimentConfig& config);
/// MADB at the largest train size, one run per ablation sharing mode and seed.
std::vector<RunSpec> ablation_specs(const ExperimentConfig& config);

using RunFunction = std::function<RunResult(const ExperimentSettings&, const RunSpec&)>;

/// Runs every spec in order and writes, under out_dir:
///   runs/<run_id>.metrics.csv, runs/<run_id>.training.csv, runs/<run_id>.layout.json,
///   summary.csv, cells.csv, improvements.csv, failures.csv, config.conf.
/// A throwing run is recorded as failed; the others still complete.
MatrixSummary execute_runs(const ExperimentConfig& config, const std::vector<RunSpec>& specs,
                           const std::filesystem::path& out_dir, std::ostream* progress = nullptr,
                           const RunFunction& run = run_experiment);

MatrixSummary run_matrix(const ExperimentConfig& config, std::ostream* progress = nullptr);
MatrixSummary compare_sharing_ablations(const ExperimentConfig& config, std::ostream* progress = nullptr);

/// Rebuilds run records from per-query metrics CSVs (a file, or every
/// *.metrics.csv below a directory). Plan costs are not in the raw rows and
/// stay zero.
std::vector<RunRecord> read_metrics(const std::filesystem::path& path);

/// read_metrics + cells + improvements, written to out_dir as
/// aggregate_cells.csv and aggregate_improvements.csv.
MatrixSummary aggregate(const std::filesystem::path& metrics, const std::filesystem::path& out_dir);

void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& runs);
void write_failures_csv(std::ostream& out, const std::vector<RunRecord>& runs);
void write_cells_csv(std::ostream& out, const std::vector<CellSummary>& cells);
void write_improvements_csv(std::ostream& out, const std::vector<Improvement>& improvements);

}  // namespace madb
