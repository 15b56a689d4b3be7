#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pfedlia/report.hpp"

namespace {

std::optional<std::vector<std::uint64_t>> parse_seed_list(const std::string& arg) {
    if (arg.empty()) return std::nullopt;
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos <= arg.size()) {
        const std::size_t comma = arg.find(',', pos);
        const std::string token = arg.substr(pos, comma == std::string::npos ? std::string::npos
                                                                             : comma - pos);
        seeds.push_back(std::stoull(token));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustered personalized federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string seed_arg;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Path to the JSON experiment config")
            ->required();
        cmd->add_option("--out", out_dir, "Output directory (default: out)");
        cmd->add_option("--seed", seed_arg, "Seed override, comma-separated (e.g. 0,1,2,3)");
    };

    CLI::App* run = app.add_subcommand("run", "Run an experiment over all configured seeds");
    add_common(run);
    CLI::App* bench = app.add_subcommand(
        "bench-influence", "Time lazy influence against exact retraining influence");
    add_common(bench);
    CLI::App* dump = app.add_subcommand(
        "dump-clusters", "Warm up, compute the influence matrix, and dump the clustering");
    add_common(dump);

    CLI11_PARSE(app, argc, argv);

    pfedlia::CliOptions opts;
    opts.config_path = config_path;
    opts.out_dir = out_dir;
    try {
        opts.seed_override = parse_seed_list(seed_arg);
    } catch (const std::exception&) {
        std::cerr << "config error: invalid --seed list \"" << seed_arg << "\"\n";
        return 1;
    }

    if (run->parsed()) return pfedlia::run_command(opts);
    if (bench->parsed()) return pfedlia::bench_command(opts);
    if (dump->parsed()) return pfedlia::dump_clusters_command(opts);
    return 1;
}
