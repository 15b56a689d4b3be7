#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pfedlia/orchestrator.hpp"

namespace pfedlia {

struct CliOptions {
    std::string config_path;
    std::optional<std::vector<std::uint64_t>> seed_override;
    std::string out_dir = "out";
};

// Table-1-style row: mean and sample std of the final-round mean accuracies
// across seeds (std 0 for a single seed, recorded via n_seeds).
struct SummaryRow {
    std::string method;
    std::string dataset;
    std::string partition_scheme;
    int n_seeds = 0;
    double final_mean_accuracy = 0.0;
    double std_across_seeds = 0.0;
};

SummaryRow aggregate_seeds(const ExperimentConfig& cfg,
                           const std::vector<std::vector<RoundLog>>& per_seed_logs);

// Serialization used by both the CLI and the determinism tests.
std::string rounds_csv_header();
std::string rounds_csv_row(std::uint64_t seed, const RoundLog& log);

// Exit codes: 0 success, 1 configuration error, 2 runtime failure. Partial
// outputs are removed on failure.
int run_command(const CliOptions& opts);
int bench_command(const CliOptions& opts);
int dump_clusters_command(const CliOptions& opts);

}  // namespace pfedlia
