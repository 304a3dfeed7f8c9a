#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "vqla/config.hpp"
#include "vqla/errors.hpp"

using namespace vqla;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path dir = fs::temp_directory_path() / "vqla_config_test";
    fs::create_directories(dir);
    const fs::path path = dir / name;
    std::ofstream out(path);
    out << text;
    return path;
}

}  // namespace

TEST_CASE("empty config yields the full default TrainConfig") {
    TrainConfig cfg = parse_config("", {});
    CHECK(cfg.epochs == 80);
    CHECK(cfg.batch_size == 64);
    CHECK(cfg.learning_rate == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(cfg.weights.ce == 1.0);
    CHECK(cfg.weights.giou == 1.0);
    CHECK(cfg.weights.l1 == 1.0);
    CHECK(cfg.model.dim == 64);
    CHECK(cfg.model.seq_len == 16);
    CHECK(cfg.model.patches == 16);
    CHECK(cfg.model.classes == 0);  // resolved from data
    CHECK(cfg.model.fusion == FusionStrategy::gated);
    CHECK(cfg.precision == Precision::f32);
    CHECK(cfg.use_synthetic);

    const fs::path empty = write_config("empty.json", "");
    TrainConfig cfg2 = parse_config(empty.string(), {});
    CHECK(cfg2.epochs == 80);
}

TEST_CASE("config file values and overrides") {
    const fs::path path = write_config("basic.json", R"({
      "train": {"epochs": 5, "batch_size": 8},
      "model": {"dim": 32, "heads": 4},
      "data": {"train_samples": 10, "val_samples": 2}
    })");
    SUBCASE("file values applied") {
        TrainConfig cfg = parse_config(path.string(), {});
        CHECK(cfg.epochs == 5);
        CHECK(cfg.batch_size == 8);
        CHECK(cfg.model.dim == 32);
        CHECK(cfg.model.heads == 4);
        CHECK(cfg.synthetic.train_samples == 10);
        CHECK(cfg.learning_rate == doctest::Approx(1e-5));  // untouched default
    }
    SUBCASE("override replaces one key and keeps the rest") {
        TrainConfig cfg = parse_config(path.string(), {"train.lr=3e-4"});
        CHECK(cfg.learning_rate == doctest::Approx(3e-4).epsilon(1e-12));
        CHECK(cfg.epochs == 5);
    }
    SUBCASE("string and boolean overrides") {
        TrainConfig cfg = parse_config(path.string(),
                                       {"model.fusion=concat", "train.precision=f64", "data.synthetic=false",
                                        "data.train_annotations=somewhere.jsonl"});
        CHECK(cfg.model.fusion == FusionStrategy::concat);
        CHECK(cfg.precision == Precision::f64);
        CHECK_FALSE(cfg.use_synthetic);
        CHECK(cfg.train_annotations == "somewhere.jsonl");
    }
}

TEST_CASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(parse_config("", {"optimizr.lr=1"}), doctest::Contains("optimizr.lr"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("", {"train.learningrate=1"}), doctest::Contains("train.learningrate"),
                         ConfigError);

    const fs::path bad_file = write_config("unknown.json", R"({"train": {"epochz": 3}})");
    CHECK_THROWS_WITH_AS(parse_config(bad_file.string(), {}), doctest::Contains("train.epochz"), ConfigError);

    const fs::path bad_section = write_config("section.json", R"({"optimizr": {"lr": 3}})");
    CHECK_THROWS_WITH_AS(parse_config(bad_section.string(), {}), doctest::Contains("optimizr"), ConfigError);
}

TEST_CASE("validation failures") {
    SUBCASE("heads must divide dim") {
        CHECK_THROWS_WITH_AS(parse_config("", {"model.heads=3"}), doctest::Contains("divide"), ConfigError);
    }
    SUBCASE("gated fusion needs aligned lengths") {
        CHECK_THROWS_AS(parse_config("", {"model.seq_len=8"}), ConfigError);
    }
    SUBCASE("concat fusion permits different lengths") {
        TrainConfig cfg = parse_config("", {"model.seq_len=8", "model.fusion=concat"});
        CHECK(cfg.model.seq_len == 8);
    }
    SUBCASE("negative numbers rejected") {
        CHECK_THROWS_AS(parse_config("", {"train.epochs=-1"}), ConfigError);
        CHECK_THROWS_AS(parse_config("", {"train.lambda_giou=-0.5"}), ConfigError);
    }
    SUBCASE("type mismatches rejected") {
        CHECK_THROWS_AS(parse_config("", {"train.epochs=soon"}), ConfigError);
        CHECK_THROWS_AS(parse_config("", {"train.lr=fast"}), ConfigError);
    }
    SUBCASE("zero batch size rejected") {
        CHECK_THROWS_AS(parse_config("", {"train.batch_size=0"}), ConfigError);
    }
    SUBCASE("malformed JSON rejected") {
        const fs::path path = write_config("broken.json", "{not json");
        CHECK_THROWS_AS(parse_config(path.string(), {}), ConfigError);
    }
    SUBCASE("missing file rejected") {
        CHECK_THROWS_AS(parse_config("/nonexistent/vqla.json", {}), ConfigError);
    }
}

TEST_CASE("model meta round trip") {
    const fs::path dir = fs::temp_directory_path() / "vqla_config_test";
    fs::create_directories(dir);
    ModelMeta meta;
    meta.model.dim = 32;
    meta.model.layers = 1;
    meta.model.heads = 2;
    meta.model.seq_len = 16;
    meta.model.patches = 16;
    meta.model.classes = 3;
    meta.model.vocab_size = 12;
    meta.model.input_dim = 48;
    meta.model.fusion = FusionStrategy::concat;
    meta.precision = Precision::f32;
    meta.class_labels = {"a", "b", "c"};
    meta.vocab_tokens = {"<pad>", "<unk>", "what", "is"};
    const std::string path = (dir / "meta.json").string();
    save_model_meta(meta, path);
    ModelMeta back = load_model_meta(path);
    CHECK(back.model.dim == 32);
    CHECK(back.model.fusion == FusionStrategy::concat);
    CHECK(back.class_labels == meta.class_labels);
    CHECK(back.vocab_tokens == meta.vocab_tokens);
    CHECK(back.precision == Precision::f32);
}

TEST_CASE("eval report serialization") {
    EvalReport r;
    r.accuracy = 0.75;
    r.macro_f1 = 0.5;
    r.miou = 0.25;
    r.sample_count = 4;
    ClassStats c;
    c.label = "idle";
    c.support = 2;
    c.tp = 1;
    r.per_class.push_back(c);
    const std::string js = eval_report_to_json(r);
    CHECK(js.find("\"accuracy\": 0.75") != std::string::npos);
    CHECK(js.find("idle") != std::string::npos);
}
