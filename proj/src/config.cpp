#include "pfedlia/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

namespace pfedlia {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!obj.is_object()) throw ConfigError(ctx + " must be a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + ctx);
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& ctx) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for \"" + key + "\" in " + ctx + ": " + e.what());
    }
}

template <typename T>
T get_required(const json& obj, const std::string& key, const std::string& ctx) {
    if (!obj.contains(key)) throw ConfigError("missing required key \"" + key + "\" in " + ctx);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for \"" + key + "\" in " + ctx + ": " + e.what());
    }
}

PartitionScheme scheme_from_name(const std::string& s) {
    if (s == "pathological") return PartitionScheme::pathological;
    if (s == "noisy") return PartitionScheme::noisy;
    if (s == "iid") return PartitionScheme::iid;
    throw ConfigError("unknown partition scheme \"" + s + "\"");
}

std::string scheme_name(PartitionScheme s) {
    switch (s) {
        case PartitionScheme::pathological: return "pathological";
        case PartitionScheme::noisy: return "noisy";
        case PartitionScheme::iid: return "iid";
    }
    return "?";
}

ModelKind kind_from_name(const std::string& s) {
    if (s == "softmax-regression") return ModelKind::softmax_regression;
    if (s == "mlp") return ModelKind::mlp;
    throw ConfigError("unknown model kind \"" + s + "\" (want \"softmax-regression\" or \"mlp\")");
}

}  // namespace

ExperimentConfig parse_config(const json& root) {
    check_keys(root,
               {"method", "num_clients", "participation_fraction", "total_rounds",
                "warmup_rounds", "local_epochs_per_round", "seeds", "model", "train", "lia",
                "optics", "partition", "data", "bench"},
               "config");

    ExperimentConfig cfg;
    cfg.method = method_from_name(get_required<std::string>(root, "method", "config"));
    cfg.num_clients = get_or<int>(root, "num_clients", 100, "config");
    cfg.participation_fraction = get_or<double>(root, "participation_fraction", 0.1, "config");
    cfg.total_rounds = get_or<int>(root, "total_rounds", 40, "config");
    cfg.warmup_rounds = get_or<int>(root, "warmup_rounds", 20, "config");
    cfg.local_epochs_per_round = get_or<int>(root, "local_epochs_per_round", 1, "config");

    if (root.contains("seeds")) {
        std::vector<std::int64_t> raw = get_required<std::vector<std::int64_t>>(root, "seeds", "config");
        cfg.seeds.clear();
        for (std::int64_t s : raw) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    } else {
        cfg.seeds = {0, 1, 2, 3};
    }
    std::sort(cfg.seeds.begin(), cfg.seeds.end());
    cfg.seeds.erase(std::unique(cfg.seeds.begin(), cfg.seeds.end()), cfg.seeds.end());

    if (!root.contains("model")) throw ConfigError("missing required key \"model\" in config");
    const json& model = root.at("model");
    check_keys(model, {"kind", "input_dim", "num_classes", "hidden_dim"}, "model");
    cfg.model.kind = kind_from_name(get_required<std::string>(model, "kind", "model"));
    cfg.model.input_dim = get_required<int>(model, "input_dim", "model");
    cfg.model.num_classes = get_required<int>(model, "num_classes", "model");
    cfg.model.hidden_dim = get_or<int>(model, "hidden_dim", 0, "model");
    if (cfg.model.kind == ModelKind::mlp && !model.contains("hidden_dim"))
        throw ConfigError("mlp model requires hidden_dim");

    if (root.contains("train")) {
        const json& train = root.at("train");
        check_keys(train, {"learning_rate", "batch_size"}, "train");
        cfg.learning_rate = get_or<double>(train, "learning_rate", 0.1, "train");
        cfg.batch_size = get_or<int>(train, "batch_size", 32, "train");
    }

    cfg.lia.learning_rate = cfg.learning_rate;
    cfg.lia.batch_size = cfg.batch_size;
    if (root.contains("lia")) {
        const json& lia = root.at("lia");
        check_keys(lia, {"epochs_k", "learning_rate", "batch_size", "train_batch_fraction", "seed"},
                   "lia");
        cfg.lia.epochs_k = get_or<int>(lia, "epochs_k", 20, "lia");
        cfg.lia.learning_rate = get_or<double>(lia, "learning_rate", cfg.learning_rate, "lia");
        cfg.lia.batch_size = get_or<int>(lia, "batch_size", cfg.batch_size, "lia");
        cfg.lia.train_batch_fraction = get_or<double>(lia, "train_batch_fraction", 1.0, "lia");
        cfg.lia.seed = static_cast<std::uint64_t>(get_or<std::int64_t>(lia, "seed", 0, "lia"));
    }

    if (root.contains("optics")) {
        const json& optics = root.at("optics");
        check_keys(optics, {"min_pts", "max_eps", "extraction_eps"}, "optics");
        cfg.optics.min_pts = get_or<int>(optics, "min_pts", 4, "optics");
        if (optics.contains("max_eps") && !optics.at("max_eps").is_null())
            cfg.optics.max_eps = get_required<double>(optics, "max_eps", "optics");
        if (optics.contains("extraction_eps") && !optics.at("extraction_eps").is_null())
            cfg.optics.extraction_eps = get_required<double>(optics, "extraction_eps", "optics");
    }

    if (!root.contains("partition")) throw ConfigError("missing required key \"partition\" in config");
    const json& part = root.at("partition");
    check_keys(part, {"scheme", "num_clusters", "noisy_extra_labels", "noisy_probability", "seed"},
               "partition");
    cfg.partition.scheme = scheme_from_name(get_required<std::string>(part, "scheme", "partition"));
    cfg.partition.num_clusters = get_or<int>(part, "num_clusters", 1, "partition");
    cfg.partition.noisy_extra_labels = get_or<int>(part, "noisy_extra_labels", 1, "partition");
    cfg.partition.noisy_probability = get_or<double>(part, "noisy_probability", 0.5, "partition");
    cfg.partition.seed = static_cast<std::uint64_t>(get_or<std::int64_t>(part, "seed", 0, "partition"));
    cfg.partition.num_clients = cfg.num_clients;

    if (!root.contains("data")) throw ConfigError("missing required key \"data\" in config");
    const json& data = root.at("data");
    check_keys(data, {"synthetic", "idx"}, "data");
    if (data.contains("synthetic") == data.contains("idx"))
        throw ConfigError("data must contain exactly one of \"synthetic\" or \"idx\"");
    if (data.contains("synthetic")) {
        const json& syn = data.at("synthetic");
        check_keys(syn,
                   {"num_classes", "input_dim", "examples_per_class", "class_separation",
                    "noise_sigma", "seed"},
                   "data.synthetic");
        cfg.data.source = DataConfig::Source::synthetic;
        cfg.data.synthetic.num_classes = get_required<int>(syn, "num_classes", "data.synthetic");
        cfg.data.synthetic.input_dim = get_required<int>(syn, "input_dim", "data.synthetic");
        cfg.data.synthetic.examples_per_class =
            get_required<int>(syn, "examples_per_class", "data.synthetic");
        cfg.data.synthetic.class_separation =
            get_required<double>(syn, "class_separation", "data.synthetic");
        cfg.data.synthetic.noise_sigma = get_required<double>(syn, "noise_sigma", "data.synthetic");
        cfg.data.synthetic.seed =
            static_cast<std::uint64_t>(get_or<std::int64_t>(syn, "seed", 0, "data.synthetic"));
    } else {
        const json& idx = data.at("idx");
        check_keys(idx, {"images", "labels"}, "data.idx");
        cfg.data.source = DataConfig::Source::idx;
        cfg.data.idx_images = get_required<std::string>(idx, "images", "data.idx");
        cfg.data.idx_labels = get_required<std::string>(idx, "labels", "data.idx");
    }

    if (root.contains("bench")) {
        const json& bench = root.at("bench");
        check_keys(bench,
                   {"d0_size", "batch_count", "validation_size", "thresholds", "exact"},
                   "bench");
        cfg.bench.present = true;
        cfg.bench.d0_size = get_or<int>(bench, "d0_size", 990, "bench");
        cfg.bench.batch_count = get_or<int>(bench, "batch_count", 10, "bench");
        cfg.bench.validation_size = get_or<int>(bench, "validation_size", 100, "bench");
        cfg.bench.thresholds =
            get_or<std::vector<double>>(bench, "thresholds", cfg.bench.thresholds, "bench");
        if (bench.contains("exact")) {
            const json& exact = bench.at("exact");
            check_keys(exact, {"learning_rate", "batch_size", "max_epochs"}, "bench.exact");
            cfg.bench.exact_learning_rate =
                get_or<double>(exact, "learning_rate", 0.1, "bench.exact");
            cfg.bench.exact_batch_size = get_or<int>(exact, "batch_size", 32, "bench.exact");
            cfg.bench.exact_max_epochs = get_or<int>(exact, "max_epochs", 5000, "bench.exact");
        }
    }

    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("failed to parse " + path + ": " + e.what());
    }
    if (root.is_object() && root.contains("config_snapshot")) {
        // a manifest from a previous run reproduces that run
        ExperimentConfig cfg = parse_config(root.at("config_snapshot"));
        if (root.contains("seeds")) {
            std::vector<std::int64_t> raw = root.at("seeds").get<std::vector<std::int64_t>>();
            cfg.seeds.clear();
            for (std::int64_t s : raw) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
            std::sort(cfg.seeds.begin(), cfg.seeds.end());
            cfg.seeds.erase(std::unique(cfg.seeds.begin(), cfg.seeds.end()), cfg.seeds.end());
        }
        return cfg;
    }
    return parse_config(root);
}

json config_to_json(const ExperimentConfig& cfg) {
    json root;
    root["method"] = method_name(cfg.method);
    root["num_clients"] = cfg.num_clients;
    root["participation_fraction"] = cfg.participation_fraction;
    root["total_rounds"] = cfg.total_rounds;
    root["warmup_rounds"] = cfg.warmup_rounds;
    root["local_epochs_per_round"] = cfg.local_epochs_per_round;
    root["seeds"] = cfg.seeds;
    root["model"] = {
        {"kind", cfg.model.kind == ModelKind::mlp ? "mlp" : "softmax-regression"},
        {"input_dim", cfg.model.input_dim},
        {"num_classes", cfg.model.num_classes},
        {"hidden_dim", cfg.model.hidden_dim},
    };
    root["train"] = {{"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size}};
    root["lia"] = {
        {"epochs_k", cfg.lia.epochs_k},
        {"learning_rate", cfg.lia.learning_rate},
        {"batch_size", cfg.lia.batch_size},
        {"train_batch_fraction", cfg.lia.train_batch_fraction},
        {"seed", cfg.lia.seed},
    };
    root["optics"] = {
        {"min_pts", cfg.optics.min_pts},
        {"max_eps", std::isfinite(cfg.optics.max_eps) ? json(cfg.optics.max_eps) : json(nullptr)},
        {"extraction_eps",
         cfg.optics.extraction_eps ? json(*cfg.optics.extraction_eps) : json(nullptr)},
    };
    root["partition"] = {
        {"scheme", scheme_name(cfg.partition.scheme)},
        {"num_clusters", cfg.partition.num_clusters},
        {"noisy_extra_labels", cfg.partition.noisy_extra_labels},
        {"noisy_probability", cfg.partition.noisy_probability},
        {"seed", cfg.partition.seed},
    };
    if (cfg.data.source == DataConfig::Source::synthetic) {
        root["data"] = {{"synthetic",
                         {{"num_classes", cfg.data.synthetic.num_classes},
                          {"input_dim", cfg.data.synthetic.input_dim},
                          {"examples_per_class", cfg.data.synthetic.examples_per_class},
                          {"class_separation", cfg.data.synthetic.class_separation},
                          {"noise_sigma", cfg.data.synthetic.noise_sigma},
                          {"seed", cfg.data.synthetic.seed}}}};
    } else {
        root["data"] = {
            {"idx", {{"images", cfg.data.idx_images}, {"labels", cfg.data.idx_labels}}}};
    }
    if (cfg.bench.present) {
        root["bench"] = {
            {"d0_size", cfg.bench.d0_size},
            {"batch_count", cfg.bench.batch_count},
            {"validation_size", cfg.bench.validation_size},
            {"thresholds", cfg.bench.thresholds},
            {"exact",
             {{"learning_rate", cfg.bench.exact_learning_rate},
              {"batch_size", cfg.bench.exact_batch_size},
              {"max_epochs", cfg.bench.exact_max_epochs}}},
        };
    }
    return root;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string dump = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace pfedlia
