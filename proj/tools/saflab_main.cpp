// saflab: train, fault-inject and evaluate small networks whose weights are
// hardened by saturating transforms applied at read time.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "saflab/saflab.hpp"

namespace fs = std::filesystem;
using saflab::ErrorCategory;
using json = nlohmann::json;

namespace {

int exit_code_for(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::usage: return 2;
        case ErrorCategory::input: return 3;
        case ErrorCategory::format: return 4;
        case ErrorCategory::io: return 5;
        case ErrorCategory::dimension: return 6;
    }
    return 1;
}

struct CommonOpts {
    std::string dataset = "synth";
    std::string data_dir;
    std::string config_file;
    std::string out_dir = "out";
    uint64_t seed = 1;
    int64_t subset = 0;
};

struct TrainOpts {
    std::string arch = "cnn-s";
    std::string saf = "none";
    std::string optimizer = "sgd";
    std::string schedule = "cosine";
    float lr = 0.1f;
    float momentum = 0.9f;
    float weight_decay = 1e-3f;
    int epochs = 200;
    int batch_size = 128;
    bool no_augment = false;
    std::string checkpoint;  // finetune input

    // short AdamW adaptation recipe
    static TrainOpts finetune_defaults() {
        TrainOpts t;
        t.optimizer = "adamw";
        t.lr = 1e-5f;
        t.epochs = 5;
        return t;
    }
};

struct EvalOpts {
    std::string checkpoint;
    std::string dtype = "fp32";
    std::vector<double> bers;
    int rounds = 100;
    int workers = 1;
};

// Loads a dataset pair (train, test) according to --dataset/--data-dir.
struct LoadedData {
    saflab::Dataset train;
    saflab::Dataset test;
    json normalization;
};

LoadedData load_data(const CommonOpts& c, bool standardized) {
    LoadedData out;
    if (c.dataset == "cifar10") {
        saflab::require(!c.data_dir.empty(), ErrorCategory::usage,
                        "--data-dir required for cifar10");
        out.train = saflab::load_cifar10(c.data_dir, saflab::Split::train);
        out.test = saflab::load_cifar10(c.data_dir, saflab::Split::test);
        if (standardized) {
            const saflab::ChannelStats st = saflab::channel_stats(out.train);
            saflab::standardize(out.train, st);
            saflab::standardize(out.test, st);
            out.normalization = {{"mean", st.mean}, {"std", st.stddev}};
        }
    } else if (c.dataset == "mnist") {
        saflab::require(!c.data_dir.empty(), ErrorCategory::usage,
                        "--data-dir required for mnist");
        out.train = saflab::load_mnist_idx(c.data_dir, saflab::Split::train);
        out.test = saflab::load_mnist_idx(c.data_dir, saflab::Split::test);
        if (standardized) {
            const saflab::ChannelStats st = saflab::channel_stats(out.train);
            saflab::standardize(out.train, st);
            saflab::standardize(out.test, st);
            out.normalization = {{"mean", st.mean}, {"std", st.stddev}};
        }
    } else if (c.dataset == "synth") {
        out.train = saflab::synth_blobs(10, 200, 32, c.seed, 10.0f, 1);
        out.test = saflab::synth_blobs(10, 50, 32, c.seed, 10.0f, 2);
        out.normalization = nullptr;
    } else if (c.dataset == "cifar100" || c.dataset == "imagenet") {
        saflab::fail(ErrorCategory::input,
                     "dataset '" + c.dataset + "' is not supported at desk scale; "
                     "available: cifar10, mnist, synth");
    } else {
        saflab::fail(ErrorCategory::input,
                     "unknown dataset '" + c.dataset + "' (available: cifar10, mnist, synth)");
    }
    return out;
}

saflab::Model build_model(const std::string& arch, const saflab::Dataset& train,
                          const saflab::SafKind& saf, uint64_t seed) {
    saflab::Rng rng = saflab::Rng(seed).split(0xA11);
    if (arch == "cnn-s") {
        saflab::require(train.images.rank() == 4 && train.images.shape[2] >= 8,
                        ErrorCategory::input, "cnn-s needs image-shaped input");
        return saflab::make_cnn_s(train.images.shape[1], train.images.shape[2],
                                  train.images.shape[3], train.class_count, saf, rng);
    }
    if (arch == "mlp") {
        int64_t features = 1;
        for (int i = 1; i < train.images.rank(); ++i) features *= train.images.shape[i];
        return saflab::make_mlp({features, 128, train.class_count}, saf, rng);
    }
    saflab::fail(ErrorCategory::input, "unknown arch '" + arch + "' (available: cnn-s, mlp)");
}

saflab::TrainConfig to_train_config(const TrainOpts& t, const CommonOpts& c) {
    saflab::TrainConfig cfg;
    if (t.optimizer == "sgd") {
        cfg.optimizer = saflab::TrainConfig::Optimizer::sgd_momentum;
    } else if (t.optimizer == "adamw") {
        cfg.optimizer = saflab::TrainConfig::Optimizer::adamw;
    } else {
        saflab::fail(ErrorCategory::usage, "unknown optimizer '" + t.optimizer + "'");
    }
    if (t.schedule == "cosine") {
        cfg.schedule = saflab::TrainConfig::Schedule::cosine;
    } else if (t.schedule == "constant") {
        cfg.schedule = saflab::TrainConfig::Schedule::constant;
    } else {
        saflab::fail(ErrorCategory::usage, "unknown schedule '" + t.schedule + "'");
    }
    cfg.lr0 = t.lr;
    cfg.momentum = t.momentum;
    cfg.weight_decay = t.weight_decay;
    cfg.epochs = t.epochs;
    cfg.batch_size = t.batch_size;
    cfg.seed = c.seed;
    cfg.augment = !t.no_augment;
    cfg.validate();
    return cfg;
}

json train_manifest(const TrainOpts& t, const CommonOpts& c, const json& normalization,
                    int64_t train_size) {
    json m;
    m["dataset"] = c.dataset;
    m["train_size"] = train_size;
    m["arch"] = t.arch;
    m["saf"] = t.saf;
    m["optimizer"] = t.optimizer;
    m["schedule"] = t.schedule;
    m["lr0"] = t.lr;
    m["momentum"] = t.momentum;
    m["weight_decay"] = t.weight_decay;
    m["epochs"] = t.epochs;
    m["batch_size"] = t.batch_size;
    m["augment"] = !t.no_augment;
    m["seed"] = c.seed;
    m["normalization"] = normalization;
    m["std_formula"] = "population";
    return m;
}

// --config FILE: JSON object whose keys mirror the long flags. Values load
// as defaults before command-line flags are parsed, so explicit flags win.
void apply_config(const std::string& path, CommonOpts& c, TrainOpts* t, EvalOpts* e) {
    if (path.empty()) return;
    std::ifstream is(path);
    saflab::require(is.good(), ErrorCategory::io, "cannot open config " + path);
    json cfg;
    try {
        cfg = json::parse(is);
    } catch (const json::exception& ex) {
        saflab::fail(ErrorCategory::format, "bad config " + path + ": " + ex.what());
    }
    auto get = [&](const char* key, auto& slot) {
        if (cfg.contains(key)) slot = cfg.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("dataset", c.dataset);
    get("data-dir", c.data_dir);
    get("out", c.out_dir);
    get("seed", c.seed);
    get("subset", c.subset);
    if (t) {
        get("arch", t->arch);
        get("saf", t->saf);
        get("optimizer", t->optimizer);
        get("schedule", t->schedule);
        get("lr", t->lr);
        get("momentum", t->momentum);
        get("weight-decay", t->weight_decay);
        get("epochs", t->epochs);
        get("batch-size", t->batch_size);
        get("checkpoint", t->checkpoint);
        if (cfg.contains("augment")) t->no_augment = !cfg.at("augment").get<bool>();
    }
    if (e) {
        get("checkpoint", e->checkpoint);
        get("dtype", e->dtype);
        get("ber", e->bers);
        get("rounds", e->rounds);
        get("workers", e->workers);
    }
}

std::string find_config_arg(int argc, char** argv) {
    for (int i = 1; i < argc - 1; ++i) {
        if (std::string(argv[i]) == "--config") return argv[i + 1];
    }
    return {};
}

void add_common_flags(CLI::App* app, CommonOpts& c) {
    app->add_option("--dataset", c.dataset, "Dataset: cifar10 | mnist | synth");
    app->add_option("--data-dir", c.data_dir, "Directory holding the dataset files");
    app->add_option("--config", c.config_file, "JSON config file mirroring the flags");
    app->add_option("--out", c.out_dir, "Output directory");
    app->add_option("--seed", c.seed, "Root seed");
    app->add_option("--subset", c.subset,
                    "Use only the first N samples (train split when training, "
                    "test split when evaluating; 0 = all)");
}

void add_train_flags(CLI::App* app, TrainOpts& t) {
    app->add_option("--arch", t.arch, "Architecture: cnn-s | mlp");
    app->add_option("--saf", t.saf,
                    "Weight transform: none|tanh|tanh0.5|softsign|arctan|tanhC:<c>");
    app->add_option("--optimizer", t.optimizer, "sgd | adamw");
    app->add_option("--schedule", t.schedule, "cosine | constant");
    app->add_option("--lr", t.lr, "Initial learning rate");
    app->add_option("--momentum", t.momentum, "SGD momentum");
    app->add_option("--weight-decay", t.weight_decay, "Weight decay");
    app->add_option("--epochs", t.epochs, "Training epochs");
    app->add_option("--batch-size", t.batch_size, "Minibatch size");
    app->add_flag("--no-augment", t.no_augment, "Disable flip/crop augmentation");
}

int cmd_train(const CommonOpts& c, const TrainOpts& t, bool is_finetune) {
    LoadedData data = load_data(c, true);
    if (c.subset > 0) data.train = saflab::take(data.train, std::min(c.subset, data.train.size()));

    saflab::Model model;
    json manifest;
    const saflab::SafKind saf = saflab::parse_saf(t.saf);
    if (is_finetune) {
        saflab::require(!t.checkpoint.empty(), ErrorCategory::usage,
                        "--checkpoint required for finetune");
        model = saflab::load_checkpoint(t.checkpoint, &manifest);
        saflab::set_saf(model, saf);
    } else {
        model = build_model(t.arch, data.train, saf, c.seed);
    }

    saflab::TrainConfig cfg = to_train_config(t, c);
    std::cout << (is_finetune ? "finetune " : "train ") << model.arch_name << " saf=" << t.saf
              << " optimizer=" << t.optimizer << " epochs=" << cfg.epochs << "\n";
    saflab::train(model, data.train, cfg, &std::cout);

    const float clean = saflab::top1(model, data.test, c.subset);
    std::cout << "clean top-1: " << clean << "%\n";

    json out_manifest = train_manifest(t, c, data.normalization, data.train.size());
    if (is_finetune) {
        out_manifest["finetuned_from"] = t.checkpoint;
        out_manifest["base_manifest"] = manifest;
    }
    out_manifest["clean_top1"] = clean;

    fs::create_directories(c.out_dir);
    const fs::path ckpt = fs::path(c.out_dir) / "model.ckpt";
    saflab::save_checkpoint(model, out_manifest, ckpt);
    std::cout << "checkpoint written to " << ckpt.string() << "\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& c, const EvalOpts& e) {
    saflab::require(!e.checkpoint.empty(), ErrorCategory::usage, "--checkpoint required");
    json manifest;
    const saflab::Model model = saflab::load_checkpoint(e.checkpoint, &manifest);
    LoadedData data = load_data(c, true);

    const saflab::StoredDType dtype = saflab::parse_dtype(e.dtype);
    if (e.bers.empty()) {
        const saflab::Model quantized =
            saflab::read_deployed(model, dtype, saflab::FaultConfig{0.0, c.seed, 0});
        std::cout << "clean top-1 (" << e.dtype << "): "
                  << saflab::top1(quantized, data.test, c.subset) << "%\n";
        return 0;
    }
    saflab::Campaign camp;
    camp.dtype = dtype;
    camp.bers = e.bers;
    camp.rounds = e.rounds;
    camp.seed = c.seed;
    camp.subset = c.subset;
    camp.workers = e.workers;
    const saflab::DegradationReport report = saflab::run_campaign(model, data.test, camp);
    std::cout << "clean top-1 (" << e.dtype << "): " << report.clean_top1 << "%\n";
    for (const auto& r : report.per_ber) {
        std::cout << "ber " << r.ber << ": " << r.mean << " +/- " << r.stddev
                  << " (mean flips " << r.mean_flip_count << ")\n";
    }
    return 0;
}

int cmd_sweep(const CommonOpts& c, const EvalOpts& e) {
    saflab::require(!e.checkpoint.empty(), ErrorCategory::usage, "--checkpoint required");
    saflab::require(!e.bers.empty(), ErrorCategory::usage, "at least one --ber required");
    json manifest;
    const saflab::Model model = saflab::load_checkpoint(e.checkpoint, &manifest);
    LoadedData data = load_data(c, true);

    saflab::Campaign camp;
    camp.dtype = saflab::parse_dtype(e.dtype);
    camp.bers = e.bers;
    camp.rounds = e.rounds;
    camp.seed = c.seed;
    camp.subset = c.subset;
    camp.workers = e.workers;

    saflab::SweepMeta meta;
    meta.dataset = c.dataset;
    meta.arch = model.arch_name;
    std::string saf = "none";
    for (const auto& l : model.layers) {
        if (l.has_params()) {
            saf = saflab::saf_name(l.saf);
            break;
        }
    }
    meta.saf = saf;
    meta.manifest_extra["checkpoint"] = e.checkpoint;
    meta.manifest_extra["data-dir"] = c.data_dir;
    meta.manifest_extra["normalization"] = data.normalization;
    meta.manifest_extra["train_manifest"] = manifest;

    const saflab::DegradationReport report = saflab::run_campaign(model, data.test, camp);
    saflab::sweep_and_emit(report, camp, meta, c.out_dir);
    std::cout << "wrote " << (fs::path(c.out_dir) / "results.csv").string() << ", summary.csv, "
              << "manifest.json\n";
    return 0;
}

int cmd_inspect(const std::string& path) {
    json manifest;
    const saflab::Model model = saflab::load_checkpoint(path, &manifest);
    json arch = saflab::architecture_json(model);
    std::cout << "arch: " << arch.dump(2) << "\n";
    std::cout << "manifest: " << manifest.dump(2) << "\n";
    int64_t weights = 0;
    for (const auto& l : model.layers) {
        if (l.has_params()) weights += l.weights.numel();
    }
    std::cout << "total weights: " << weights << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weight-hardening fault-injection laboratory"};
    app.require_subcommand(1);

    CommonOpts common;
    TrainOpts train_opts;
    TrainOpts finetune_opts = TrainOpts::finetune_defaults();
    EvalOpts eval_opts;
    std::string inspect_path;

    CLI::App* train_cmd = app.add_subcommand("train", "Train a model from scratch");
    add_common_flags(train_cmd, common);
    add_train_flags(train_cmd, train_opts);

    CLI::App* finetune_cmd =
        app.add_subcommand("finetune", "Adapt an existing checkpoint to a weight transform");
    add_common_flags(finetune_cmd, common);
    add_train_flags(finetune_cmd, finetune_opts);
    finetune_cmd->add_option("--checkpoint", finetune_opts.checkpoint, "Input checkpoint");

    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
    add_common_flags(eval_cmd, common);
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint to evaluate");
    eval_cmd->add_option("--dtype", eval_opts.dtype, "Stored datatype: fp32 | fp16 | q25");
    eval_cmd->add_option("--ber", eval_opts.bers, "Bit-error rate (repeatable)");
    eval_cmd->add_option("--rounds", eval_opts.rounds, "Monte Carlo rounds per BER");
    eval_cmd->add_option("--workers", eval_opts.workers, "Parallel evaluation threads");

    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Monte Carlo BER sweep, emitting CSV results");
    add_common_flags(sweep_cmd, common);
    sweep_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint to evaluate");
    sweep_cmd->add_option("--dtype", eval_opts.dtype, "Stored datatype: fp32 | fp16 | q25");
    sweep_cmd->add_option("--ber", eval_opts.bers, "Bit-error rate (repeatable)");
    sweep_cmd->add_option("--rounds", eval_opts.rounds, "Monte Carlo rounds per BER");
    sweep_cmd->add_option("--workers", eval_opts.workers, "Parallel evaluation threads");

    CLI::App* inspect_cmd = app.add_subcommand("inspect-checkpoint", "Print checkpoint metadata");
    inspect_cmd->add_option("--checkpoint", inspect_path, "Checkpoint path")->required();

    try {
        // Config values act as defaults; parse() then overwrites from argv.
        const std::string cfg_path = find_config_arg(argc, argv);
        if (!cfg_path.empty()) {
            apply_config(cfg_path, common, &train_opts, &eval_opts);
            apply_config(cfg_path, common, &finetune_opts, nullptr);
        }
        app.parse(argc, argv);

        if (train_cmd->parsed()) return cmd_train(common, train_opts, false);
        if (finetune_cmd->parsed()) return cmd_train(common, finetune_opts, true);
        if (eval_cmd->parsed()) return cmd_evaluate(common, eval_opts);
        if (sweep_cmd->parsed()) return cmd_sweep(common, eval_opts);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_path);
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: category=usage: " << e.what() << "\n";
        return exit_code_for(ErrorCategory::usage);
    } catch (const saflab::Error& e) {
        std::cerr << "error: category=" << saflab::to_string(e.category()) << ": " << e.what()
                  << "\n";
        return exit_code_for(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: category=internal: " << e.what() << "\n";
        return 1;
    }
}
