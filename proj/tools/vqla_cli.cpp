// Command-line entry point: data generation, training, evaluation,
// prediction, gradient checking and throughput measurement.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vqla/config.hpp"
#include "vqla/errors.hpp"
#include "vqla/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vqla;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--set", args.overrides, "dotted-path config override key=value")->take_all();
    cmd->add_option("--seed", args.seed, "training seed override")->each([&args](const std::string&) {
        args.seed_set = true;
    });
}

TrainConfig make_config(const CommonArgs& args) {
    TrainConfig cfg = parse_config(args.config_path, args.overrides);
    if (args.seed_set) cfg.seed = args.seed;
    return cfg;
}

Vocabulary vocab_from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    if (tokens.size() < 2) throw DataError("model meta vocabulary is missing the reserved tokens");
    v.id_to_token = tokens;
    for (std::size_t i = 2; i < tokens.size(); ++i) v.token_to_id[tokens[i]] = static_cast<int>(i);
    return v;
}

ClassMap classes_from_labels(const std::vector<std::string>& labels) {
    ClassMap m;
    for (const std::string& l : labels) m.intern(l);
    return m;
}

std::string default_checkpoint(const CommonArgs& args) { return (fs::path(args.out_dir) / "checkpoint.vqla").string(); }

// ---------------------------------------------------------------------------
// datagen
// ---------------------------------------------------------------------------

void write_split(const std::vector<VqlaSample>& samples, const fs::path& out_dir, const std::string& name) {
    const fs::path img_dir = out_dir / "images";
    fs::create_directories(img_dir);
    std::ofstream ann(out_dir / (name + ".jsonl"));
    if (!ann) throw DataError("cannot write annotations under '" + out_dir.string() + "'");
    for (const VqlaSample& s : samples) {
        const std::string img_rel = "images/" + s.frame_id + ".ppm";
        write_ppm((out_dir / img_rel).string(), *s.image);
        json rec = {
            {"frame_id", s.frame_id},
            {"image", img_rel},
            {"width", s.frame_width},
            {"height", s.frame_height},
            {"question", s.question},
            {"answer", s.answer},
            {"bbox", {s.target_box.x_min, s.target_box.y_min, s.target_box.x_max, s.target_box.y_max}},
        };
        ann << rec.dump() << "\n";
    }
}

void cmd_datagen(const CommonArgs& args) {
    TrainConfig cfg = make_config(args);
    SyntheticSplits splits = generate_synthetic_dataset(cfg.synthetic);
    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);
    write_split(splits.train, out_dir, "train");
    write_split(splits.val, out_dir, "val");
    std::cout << "wrote " << splits.train.size() << " train / " << splits.val.size() << " val samples to "
              << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

template <typename T>
void run_training(TrainConfig& cfg, const TaskData& data, const CommonArgs& args) {
    if (cfg.checkpoint_path.empty()) cfg.checkpoint_path = default_checkpoint(args);
    if (cfg.log_path.empty()) cfg.log_path = (fs::path(args.out_dir) / "train_log.tsv").string();
    fs::create_directories(args.out_dir);
    TrainState<T> state = train<T>(cfg, data);

    ModelMeta meta;
    meta.model = cfg.model;
    meta.precision = cfg.precision;
    meta.class_labels = data.classes.labels;
    meta.vocab_tokens = data.vocab.id_to_token;
    save_model_meta(meta, cfg.checkpoint_path + ".meta.json");

    const double final_loss = state.trajectory.empty() ? 0.0 : state.trajectory.back().total;
    std::cout << "trained " << state.steps_done << " steps / " << state.epochs_done << " epochs, final loss "
              << final_loss << "\n";
    std::cout << "checkpoint: " << cfg.checkpoint_path << "\n";
    if (!data.val.empty()) {
        EvalReport report = evaluate<T>(state.params, data.val, data.vocab, cfg.batch_size, data.classes);
        std::cout << "val accuracy " << report.accuracy << ", macro-F1 " << report.macro_f1 << ", mIoU "
                  << report.miou << "\n";
    }
}

void cmd_train(const CommonArgs& args) {
    TrainConfig cfg = make_config(args);
    TaskData data = prepare_task_data(cfg);
    if (cfg.precision == Precision::f64) {
        run_training<double>(cfg, data, args);
    } else {
        run_training<float>(cfg, data, args);
    }
}

// ---------------------------------------------------------------------------
// eval / predict / bench
// ---------------------------------------------------------------------------

template <typename T>
GvleLvitParams<T> load_params(const ModelMeta& meta, const std::string& checkpoint) {
    Rng rng(0);
    GvleLvitParams<T> params = GvleLvitParams<T>::init(meta.model, rng);
    load_checkpoint(params, checkpoint);
    return params;
}

std::vector<VqlaSample> dataset_split(TrainConfig& cfg, const std::string& split, const ClassMap& classes) {
    std::vector<VqlaSample> samples;
    if (cfg.use_synthetic) {
        SyntheticSplits splits = generate_synthetic_dataset(cfg.synthetic);
        samples = split == "train" ? std::move(splits.train) : std::move(splits.val);
    } else {
        const std::string& path = split == "train" ? cfg.train_annotations : cfg.val_annotations;
        if (path.empty()) throw DataError("no annotation path configured for split '" + split + "'");
        samples = load_annotations(path);
    }
    if (samples.empty()) throw DataError("split '" + split + "' is empty");
    assign_answer_classes(samples, classes);
    return samples;
}

template <typename T>
void run_eval(const ModelMeta& meta, const std::string& checkpoint, TrainConfig& cfg, const std::string& split) {
    GvleLvitParams<T> params = load_params<T>(meta, checkpoint);
    ClassMap classes = classes_from_labels(meta.class_labels);
    Vocabulary vocab = vocab_from_tokens(meta.vocab_tokens);
    std::vector<VqlaSample> samples = dataset_split(cfg, split, classes);
    EvalReport report = evaluate<T>(params, samples, vocab, cfg.batch_size, classes);
    std::cout << eval_report_to_json(report) << "\n";
}

void cmd_eval(const CommonArgs& args, const std::string& checkpoint_arg, const std::string& split) {
    TrainConfig cfg = make_config(args);
    const std::string checkpoint = checkpoint_arg.empty() ? default_checkpoint(args) : checkpoint_arg;
    ModelMeta meta = load_model_meta(checkpoint + ".meta.json");
    if (split != "train" && split != "val") throw ConfigError("--split must be train or val");
    if (meta.precision == Precision::f64) {
        run_eval<double>(meta, checkpoint, cfg, split);
    } else {
        run_eval<float>(meta, checkpoint, cfg, split);
    }
}

template <typename T>
void run_predict(const ModelMeta& meta, const std::string& checkpoint, const std::string& input) {
    GvleLvitParams<T> params = load_params<T>(meta, checkpoint);
    Vocabulary vocab = vocab_from_tokens(meta.vocab_tokens);
    std::vector<VqlaSample> samples = load_annotations(input);
    if (samples.empty()) throw DataError("annotation file '" + input + "' has no records");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i].answer_class = 0;  // unused for prediction
        ModelBatch<T> batch = make_model_batch<T>(samples, {i}, vocab, meta.model);
        ModelOutputs<T> out = model_forward(batch, params);
        const T* logits = out.logits.data().data();
        std::size_t best = 0;
        for (std::size_t c = 1; c < meta.model.classes; ++c) {
            if (logits[c] > logits[best]) best = c;
        }
        const T* bx = out.boxes.data().data();
        const BoxXYXY norm = to_xyxy(BoxCXCYWH{static_cast<double>(bx[0]), static_cast<double>(bx[1]),
                                               static_cast<double>(bx[2]), static_cast<double>(bx[3])});
        const double w = samples[i].frame_width;
        const double h = samples[i].frame_height;
        std::cout << samples[i].frame_id << "\t" << meta.class_labels.at(best) << "\t" << norm.x_min * w << " "
                  << norm.y_min * h << " " << norm.x_max * w << " " << norm.y_max * h << "\n";
    }
}

void cmd_predict(const CommonArgs& args, const std::string& checkpoint_arg, const std::string& input) {
    const std::string checkpoint = checkpoint_arg.empty() ? default_checkpoint(args) : checkpoint_arg;
    ModelMeta meta = load_model_meta(checkpoint + ".meta.json");
    if (meta.precision == Precision::f64) {
        run_predict<double>(meta, checkpoint, input);
    } else {
        run_predict<float>(meta, checkpoint, input);
    }
}

void cmd_gradcheck(const CommonArgs& args) {
    TrainConfig cfg = make_config(args);
    GradCheckReport report = grad_check(cfg.seed, cfg.model.fusion);
    for (const GradCheckGroup& g : report.groups) {
        std::printf("%-16s max rel err %.3e\n", g.name.c_str(), g.max_rel_err);
    }
    std::printf("worst %.3e (threshold %.0e)\n", report.worst, report.threshold);
    if (!report.passed()) {
        throw NumericError("gradient check failed: worst relative error " + std::to_string(report.worst));
    }
}

void cmd_bench(const CommonArgs& args, const std::string& checkpoint_arg) {
    TrainConfig cfg = make_config(args);
    std::vector<VqlaSample> samples;
    Vocabulary vocab;
    if (!checkpoint_arg.empty()) {
        ModelMeta meta = load_model_meta(checkpoint_arg + ".meta.json");
        ClassMap classes = classes_from_labels(meta.class_labels);
        vocab = vocab_from_tokens(meta.vocab_tokens);
        samples = dataset_split(cfg, "val", classes);
        if (meta.precision == Precision::f64) {
            GvleLvitParams<double> params = load_params<double>(meta, checkpoint_arg);
            const double fps = bench_forward_fps(params, samples, vocab);
            std::cout << "fps " << fps << " over " << samples.size() << " samples\n";
        } else {
            GvleLvitParams<float> params = load_params<float>(meta, checkpoint_arg);
            const double fps = bench_forward_fps(params, samples, vocab);
            std::cout << "fps " << fps << " over " << samples.size() << " samples\n";
        }
        return;
    }
    // No checkpoint: measure a randomly initialized model on the val split.
    TaskData data = prepare_task_data(cfg);
    if (data.val.empty()) throw DataError("bench: validation split is empty");
    Rng rng(cfg.seed);
    GvleLvitParams<float> params = GvleLvitParams<float>::init(cfg.model, rng);
    const double fps = bench_forward_fps(params, data.val, data.vocab);
    std::cout << "fps " << fps << " over " << data.val.size() << " samples\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gated vision-language VQLA model: train, evaluate, predict"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string checkpoint_arg;
    std::string split = "val";
    std::string input_path;

    CLI::App* datagen = app.add_subcommand("datagen", "write a synthetic dataset (annotations + PPM images)");
    add_common(datagen, args);

    CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    add_common(train_cmd, args);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and print the metric report");
    add_common(eval_cmd, args);
    eval_cmd->add_option("--checkpoint", checkpoint_arg, "checkpoint path (default <out>/checkpoint.vqla)");
    eval_cmd->add_option("--split", split, "train|val (default val)");

    CLI::App* predict_cmd = app.add_subcommand("predict", "predict answers and pixel-space boxes for annotations");
    add_common(predict_cmd, args);
    predict_cmd->add_option("--checkpoint", checkpoint_arg, "checkpoint path (default <out>/checkpoint.vqla)");
    predict_cmd->add_option("--input", input_path, "annotation file to predict on")->required();

    CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "autodiff vs finite differences on a tiny model");
    add_common(gradcheck_cmd, args);

    CLI::App* bench_cmd = app.add_subcommand("bench", "forward passes per second over the validation split");
    add_common(bench_cmd, args);
    bench_cmd->add_option("--checkpoint", checkpoint_arg, "optional checkpoint to benchmark");

    try {
        app.parse(argc, argv);
        if (datagen->parsed()) cmd_datagen(args);
        if (train_cmd->parsed()) cmd_train(args);
        if (eval_cmd->parsed()) cmd_eval(args, checkpoint_arg, split);
        if (predict_cmd->parsed()) cmd_predict(args, checkpoint_arg, input_path);
        if (gradcheck_cmd->parsed()) cmd_gradcheck(args);
        if (bench_cmd->parsed()) cmd_bench(args, checkpoint_arg);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
