#include "pfedlia/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "pfedlia/config.hpp"
#include "pfedlia/csv.hpp"
#include "pfedlia/rng.hpp"

namespace pfedlia {
namespace fs = std::filesystem;

namespace {

// Tracks files written by one command so a failure leaves no partial output.
class OutputSet {
  public:
    explicit OutputSet(const fs::path& dir) : dir_(dir) { fs::create_directories(dir_); }

    std::ofstream open(const std::string& name) {
        const fs::path p = dir_ / name;
        written_.push_back(p);
        std::ofstream out(p);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        return out;
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void discard_all() {
        for (const fs::path& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

  private:
    fs::path dir_;
    std::vector<fs::path> written_;
};

std::string dataset_name(const ExperimentConfig& cfg) {
    if (cfg.data.source == DataConfig::Source::synthetic) return "synthetic";
    return "idx:" + fs::path(cfg.data.idx_images).filename().string();
}

std::string scheme_label(PartitionScheme s) {
    switch (s) {
        case PartitionScheme::pathological: return "pathological";
        case PartitionScheme::noisy: return "noisy";
        case PartitionScheme::iid: return "iid";
    }
    return "?";
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

ExperimentConfig load_with_overrides(const CliOptions& opts) {
    ExperimentConfig cfg = load_config(opts.config_path);
    if (opts.seed_override) {
        cfg.seeds = *opts.seed_override;
        std::sort(cfg.seeds.begin(), cfg.seeds.end());
        cfg.seeds.erase(std::unique(cfg.seeds.begin(), cfg.seeds.end()), cfg.seeds.end());
    }
    validate_config(cfg);
    return cfg;
}

void write_influence_matrix(std::ofstream& out, const InfluenceMatrix& m) {
    std::vector<std::string> header;
    header.reserve(m.n);
    for (int j = 0; j < m.n; ++j) header.push_back("j" + std::to_string(j));
    out << join(header, ',') << '\n';
    for (int i = 0; i < m.n; ++i) out << join_doubles(m.row(i), ',') << '\n';
}

void write_clusters(std::ofstream& out, const OpticsResult& optics,
                    const ClusterAssignment& resolved) {
    out << "order_pos,client_id,reachability,cluster\n";
    for (std::size_t k = 0; k < optics.profile.ordering.size(); ++k) {
        const int client = optics.profile.ordering[k];
        out << k << ',' << client << ',' << format_double(optics.profile.reachability[k]) << ','
            << resolved.labels[client] << '\n';
    }
}

void write_frontiers(std::ofstream& out, const ClusteringOutcome& outcome) {
    out << "client_id,frontier,degenerate,beneficial\n";
    for (std::size_t i = 0; i < outcome.beneficial.size(); ++i) {
        out << i << ',' << format_double(outcome.peer[i].frontier) << ','
            << (outcome.peer[i].degenerate ? 1 : 0) << ','
            << join_ints(outcome.beneficial[i], ';') << '\n';
    }
}

nlohmann::json make_manifest(const ExperimentConfig& cfg,
                             const std::vector<std::string>& artifacts) {
    nlohmann::json manifest;
    manifest["run_id"] = config_hash(cfg) + "-" + timestamp_utc();
    manifest["created_utc"] = timestamp_utc();
    manifest["seeds"] = cfg.seeds;
    manifest["config_snapshot"] = config_to_json(cfg);
    manifest["artifacts"] = artifacts;
    return manifest;
}

}  // namespace

SummaryRow aggregate_seeds(const ExperimentConfig& cfg,
                           const std::vector<std::vector<RoundLog>>& per_seed_logs) {
    if (per_seed_logs.empty()) throw ConfigError("aggregate_seeds: no logs");
    SummaryRow row;
    row.method = method_name(cfg.method);
    row.dataset = dataset_name(cfg);
    row.partition_scheme = scheme_label(cfg.partition.scheme);
    row.n_seeds = static_cast<int>(per_seed_logs.size());

    std::vector<double> finals;
    for (const auto& logs : per_seed_logs) {
        if (logs.empty()) throw ConfigError("aggregate_seeds: a seed produced no rounds");
        finals.push_back(logs.back().mean_accuracy);
    }
    double mean = 0.0;
    for (double f : finals) mean += f;
    mean /= finals.size();
    double var = 0.0;
    if (finals.size() > 1) {
        for (double f : finals) var += (f - mean) * (f - mean);
        var /= (finals.size() - 1);
    }
    row.final_mean_accuracy = mean;
    row.std_across_seeds = std::sqrt(var);
    return row;
}

std::string rounds_csv_header() {
    return "seed,round,phase,mean_accuracy,std_accuracy,num_clusters,cluster_sizes,"
           "per_client_accuracy";
}

std::string rounds_csv_row(std::uint64_t seed, const RoundLog& log) {
    std::string row = std::to_string(seed);
    row += ',' + std::to_string(log.round);
    row += ',' + phase_name(log.phase);
    row += ',' + format_double(log.mean_accuracy);
    row += ',' + format_double(log.std_accuracy);
    row += ',' + std::to_string(log.per_cluster_sizes.size());
    row += ',' + join_ints(log.per_cluster_sizes, ';');
    row += ',' + join_doubles(log.per_client_accuracy, ';');
    return row;
}

int run_command(const CliOptions& opts) {
    ExperimentConfig cfg;
    try {
        cfg = load_with_overrides(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    OutputSet outputs{opts.out_dir};
    try {
        std::vector<std::vector<RoundLog>> per_seed_logs;
        RunArtifacts first_seed_artifacts;
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
            RunArtifacts artifacts;
            per_seed_logs.push_back(
                run_experiment(cfg, cfg.seeds[s], s == 0 ? &first_seed_artifacts : &artifacts));
        }

        {
            std::ofstream rounds = outputs.open("rounds.csv");
            rounds << rounds_csv_header() << '\n';
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
                for (const RoundLog& log : per_seed_logs[s])
                    rounds << rounds_csv_row(cfg.seeds[s], log) << '\n';
        }
        {
            const SummaryRow row = aggregate_seeds(cfg, per_seed_logs);
            std::ofstream summary = outputs.open("summary.csv");
            summary << "method,dataset,partition_scheme,n_seeds,final_mean_accuracy,"
                       "std_across_seeds\n";
            summary << row.method << ',' << row.dataset << ',' << row.partition_scheme << ','
                    << row.n_seeds << ',' << format_double(row.final_mean_accuracy) << ','
                    << format_double(row.std_across_seeds) << '\n';
        }

        std::vector<std::string> artifact_names{"rounds.csv", "summary.csv", "manifest.json"};
        if (first_seed_artifacts.clustering) {
            const ClusteringOutcome& outcome = *first_seed_artifacts.clustering;
            {
                std::ofstream m = outputs.open("influence_matrix.csv");
                write_influence_matrix(m, outcome.matrix);
            }
            {
                std::ofstream c = outputs.open("clusters.csv");
                write_clusters(c, outcome.optics, outcome.resolved);
            }
            artifact_names.push_back("influence_matrix.csv");
            artifact_names.push_back("clusters.csv");
            if (cfg.method == Method::pfedlia_p2p) {
                std::ofstream f = outputs.open("frontiers.csv");
                write_frontiers(f, outcome);
                artifact_names.push_back("frontiers.csv");
            }
        }
        {
            std::ofstream m = outputs.open("manifest.json");
            m << make_manifest(cfg, artifact_names).dump(2) << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        outputs.discard_all();
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
}

int bench_command(const CliOptions& opts) {
    ExperimentConfig cfg;
    try {
        cfg = load_with_overrides(opts);
        if (!cfg.bench.present)
            throw ConfigError("bench-influence requires a \"bench\" section in the config");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    OutputSet outputs{opts.out_dir};
    try {
        Dataset all;
        const std::uint64_t seed0 = cfg.seeds.front();
        if (cfg.data.source == DataConfig::Source::synthetic) {
            SyntheticSpec s = cfg.data.synthetic;
            s.seed = mix_seed(s.seed, seed0, seed_tag::data);
            all = generate_synthetic(s);
        } else {
            all = load_idx(cfg.data.idx_images, cfg.data.idx_labels);
        }
        const int need = cfg.bench.d0_size + cfg.bench.batch_count + cfg.bench.validation_size;
        if (static_cast<int>(all.size()) < need)
            throw ConfigError("bench needs " + std::to_string(need) + " examples, dataset has " +
                              std::to_string(all.size()));
        std::vector<int> idx(all.size());
        std::iota(idx.begin(), idx.end(), 0);
        Rng(mix_seed(seed0, seed_tag::bench)).shuffle(idx);

        BenchScenario scenario;
        scenario.spec = cfg.model;
        for (int i = 0; i < cfg.bench.d0_size; ++i) scenario.d0.push_back(all[idx[i]]);
        for (int i = 0; i < cfg.bench.batch_count; ++i)
            scenario.batch.push_back(all[idx[cfg.bench.d0_size + i]]);
        for (int i = 0; i < cfg.bench.validation_size; ++i)
            scenario.validation.push_back(all[idx[cfg.bench.d0_size + cfg.bench.batch_count + i]]);
        scenario.lia = cfg.lia;
        scenario.exact.learning_rate = cfg.bench.exact_learning_rate;
        scenario.exact.batch_size = cfg.bench.exact_batch_size;
        scenario.exact.max_epochs = cfg.bench.exact_max_epochs;
        scenario.exact.init_seed = mix_seed(seed0, seed_tag::init);
        scenario.exact.shuffle_seed = mix_seed(seed0, seed_tag::local_train);
        scenario.thresholds = cfg.bench.thresholds;

        const std::vector<BenchRow> rows = speedup_benchmark(scenario);
        std::ofstream out = outputs.open("speedup.csv");
        out << "threshold,lia_seconds,exact_seconds,ratio\n";
        for (const BenchRow& row : rows)
            out << format_double(row.threshold) << ',' << format_double(row.lia_seconds) << ','
                << format_double(row.exact_seconds) << ',' << format_double(row.ratio) << '\n';
        return 0;
    } catch (const std::exception& e) {
        outputs.discard_all();
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
}

int dump_clusters_command(const CliOptions& opts) {
    ExperimentConfig cfg;
    try {
        cfg = load_with_overrides(opts);
        if (cfg.method != Method::pfedlia_central && cfg.method != Method::pfedlia_p2p)
            throw ConfigError("dump-clusters requires a pfedlia method");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    OutputSet outputs{opts.out_dir};
    try {
        const std::uint64_t seed = cfg.seeds.front();
        const PartitionResult part = build_client_data(cfg, seed);
        const ParamVector theta0 = run_warmup(cfg, part.shards, seed);
        const ClusteringOutcome outcome = clustering_phase(cfg, theta0, part.shards, seed);
        {
            std::ofstream m = outputs.open("influence_matrix.csv");
            write_influence_matrix(m, outcome.matrix);
        }
        {
            std::ofstream c = outputs.open("clusters.csv");
            write_clusters(c, outcome.optics, outcome.resolved);
        }
        if (cfg.method == Method::pfedlia_p2p) {
            std::ofstream f = outputs.open("frontiers.csv");
            write_frontiers(f, outcome);
        }
        return 0;
    } catch (const std::exception& e) {
        outputs.discard_all();
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace pfedlia
