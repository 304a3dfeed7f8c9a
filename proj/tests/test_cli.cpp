// End-to-end checks of the command-line tool (runs the real binary; the
// build passes its location through VQLA_CLI).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const char* cli = std::getenv("VQLA_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "VQLA_CLI must point at the vqla binary");
    RunResult res;
    FILE* pipe = popen((std::string(cli) + " " + args + " 2>&1").c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[512];
    while (fgets(buf, sizeof buf, pipe) != nullptr) res.output += buf;
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "vqla_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("eval on a checkpoint trained to saturation on 4 samples reports accuracy 1.0") {
    const fs::path dir = fresh_dir("saturate");
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, R"({"model": {"dim": 32, "layers": 1, "heads": 2},
                        "train": {"epochs": 400, "batch_size": 4, "lr": 3e-4},
                        "data": {"train_samples": 4, "val_samples": 0, "dataset_seed": 21}})");
    RunResult trained = run_cli("train --config " + cfg.string() + " --out " + (dir / "run").string() + " --seed 3");
    REQUIRE_MESSAGE(trained.exit_code == 0, trained.output);

    RunResult eval = run_cli("eval --config " + cfg.string() + " --out " + (dir / "run").string() + " --split train");
    REQUIRE_MESSAGE(eval.exit_code == 0, eval.output);
    const json report = json::parse(eval.output);
    CHECK(report.at("accuracy").get<double>() == 1.0);
    CHECK(report.at("samples").get<int>() == 4);
}

TEST_CASE("unknown config key exits 1 and names the key") {
    RunResult res = run_cli("train --set optimizr.lr=1");
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("optimizr.lr") != std::string::npos);
}

TEST_CASE("missing annotation file exits 2") {
    const fs::path dir = fresh_dir("missing_data");
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, R"({"data": {"synthetic": false, "train_annotations": "/nonexistent/ann.jsonl"}})");
    RunResult res = run_cli("train --config " + cfg.string() + " --out " + (dir / "run").string());
    CHECK(res.exit_code == 2);
}

TEST_CASE("datagen and train rerun to identical artifacts") {
    const fs::path dir = fresh_dir("idempotent");
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, R"({"model": {"dim": 16, "layers": 1, "heads": 2},
                        "train": {"epochs": 3, "batch_size": 8, "lr": 3e-4},
                        "data": {"train_samples": 64, "val_samples": 4, "dataset_seed": 9}})");
    for (const char* out : {"a", "b"}) {
        RunResult gen = run_cli("datagen --config " + cfg.string() + " --out " + (dir / out / "data").string());
        REQUIRE_MESSAGE(gen.exit_code == 0, gen.output);
        RunResult tr =
            run_cli("train --config " + cfg.string() + " --out " + (dir / out / "run").string() + " --seed 5");
        REQUIRE_MESSAGE(tr.exit_code == 0, tr.output);
    }
    CHECK(read_file(dir / "a/data/train.jsonl") == read_file(dir / "b/data/train.jsonl"));
    CHECK(read_file(dir / "a/data/images/syn-train-0.ppm") == read_file(dir / "b/data/images/syn-train-0.ppm"));
    CHECK(read_file(dir / "a/run/checkpoint.vqla") == read_file(dir / "b/run/checkpoint.vqla"));
    CHECK(read_file(dir / "a/run/train_log.tsv") == read_file(dir / "b/run/train_log.tsv"));
}

TEST_CASE("predict prints answer labels and pixel-space boxes") {
    const fs::path dir = fresh_dir("predict");
    const fs::path cfg = dir / "cfg.json";
    write_file(cfg, R"({"model": {"dim": 16, "layers": 1, "heads": 2},
                        "train": {"epochs": 2, "batch_size": 8, "lr": 3e-4},
                        "data": {"train_samples": 64, "val_samples": 2, "dataset_seed": 11}})");
    RunResult gen = run_cli("datagen --config " + cfg.string() + " --out " + (dir / "data").string());
    REQUIRE_MESSAGE(gen.exit_code == 0, gen.output);
    RunResult tr = run_cli("train --config " + cfg.string() + " --out " + (dir / "run").string());
    REQUIRE_MESSAGE(tr.exit_code == 0, tr.output);
    RunResult pred = run_cli("predict --out " + (dir / "run").string() + " --input " +
                             (dir / "data" / "val.jsonl").string());
    REQUIRE_MESSAGE(pred.exit_code == 0, pred.output);
    std::istringstream lines(pred.output);
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
        ++count;
        std::istringstream fields(line);
        std::string frame_id, answer;
        double x0, y0, x1, y1;
        fields >> frame_id >> answer >> x0 >> y0 >> x1 >> y1;
        CHECK_FALSE(answer.empty());
        CHECK(x0 >= 0.0);
        CHECK(x1 <= 64.0);
        CHECK(x0 <= x1);
        CHECK(y0 <= y1);
    }
    CHECK(count == 2);
}

TEST_CASE("gradcheck subcommand exits 0 and prints per-group errors") {
    RunResult res = run_cli("gradcheck --seed 12");
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("worst") != std::string::npos);
    CHECK(res.output.find("gate_w") != std::string::npos);
}
