#include "vqla/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vqla/errors.hpp"

namespace vqla {

using nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"model", {"dim", "layers", "heads", "seq_len", "patches", "classes", "mlp_ratio", "activation", "fusion"}},
        {"train",
         {"epochs", "batch_size", "lr", "lambda_ce", "lambda_giou", "lambda_l1", "precision", "seed", "max_steps",
          "grad_clip", "checkpoint", "checkpoint_every_epoch", "log"}},
        {"data",
         {"synthetic", "train_annotations", "val_annotations", "canvas", "shapes", "colors", "train_samples",
          "val_samples", "dataset_seed"}},
    };
    return schema;
}

void reject_unknown_keys(const json& root) {
    if (!root.is_object()) throw ConfigError("config root must be an object");
    const auto& schema = config_schema();
    for (const auto& [section, body] : root.items()) {
        auto it = schema.find(section);
        if (it == schema.end()) throw ConfigError("unknown config key '" + section + "'");
        if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
        for (const auto& [key, value] : body.items()) {
            (void)value;
            if (!it->second.count(key)) {
                throw ConfigError("unknown config key '" + section + "." + key + "'");
            }
        }
    }
}

std::size_t get_size(const json& j, const std::string& key) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) {
        throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
    const std::int64_t v = j.get<std::int64_t>();
    if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
}

double get_real(const json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return j.get<double>();
}

std::string get_string(const json& j, const std::string& key) {
    if (!j.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& key) {
    if (!j.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
    return j.get<bool>();
}

std::vector<std::string> get_string_list(const json& j, const std::string& key) {
    if (!j.is_array()) throw ConfigError("config key '" + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw ConfigError("config key '" + key + "' must be an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

void apply_section(TrainConfig& cfg, const std::string& section, const std::string& key, const json& v) {
    const std::string path = section + "." + key;
    if (section == "model") {
        if (key == "dim") cfg.model.dim = get_size(v, path);
        else if (key == "layers") cfg.model.layers = get_size(v, path);
        else if (key == "heads") cfg.model.heads = get_size(v, path);
        else if (key == "seq_len") cfg.model.seq_len = get_size(v, path);
        else if (key == "patches") cfg.model.patches = get_size(v, path);
        else if (key == "classes") cfg.model.classes = get_size(v, path);
        else if (key == "mlp_ratio") cfg.model.mlp_ratio = get_size(v, path);
        else if (key == "activation") cfg.model.activation = activation_from_string(get_string(v, path));
        else if (key == "fusion") cfg.model.fusion = fusion_from_string(get_string(v, path));
    } else if (section == "train") {
        if (key == "epochs") cfg.epochs = get_size(v, path);
        else if (key == "batch_size") cfg.batch_size = get_size(v, path);
        else if (key == "lr") cfg.learning_rate = get_real(v, path);
        else if (key == "lambda_ce") cfg.weights.ce = get_real(v, path);
        else if (key == "lambda_giou") cfg.weights.giou = get_real(v, path);
        else if (key == "lambda_l1") cfg.weights.l1 = get_real(v, path);
        else if (key == "precision") cfg.precision = precision_from_string(get_string(v, path));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(get_size(v, path));
        else if (key == "max_steps") cfg.max_steps = get_size(v, path);
        else if (key == "grad_clip") cfg.grad_clip = get_real(v, path);
        else if (key == "checkpoint") cfg.checkpoint_path = get_string(v, path);
        else if (key == "checkpoint_every_epoch") cfg.checkpoint_every_epoch = get_bool(v, path);
        else if (key == "log") cfg.log_path = get_string(v, path);
    } else if (section == "data") {
        if (key == "synthetic") cfg.use_synthetic = get_bool(v, path);
        else if (key == "train_annotations") cfg.train_annotations = get_string(v, path);
        else if (key == "val_annotations") cfg.val_annotations = get_string(v, path);
        else if (key == "canvas") cfg.synthetic.canvas = static_cast<int>(get_size(v, path));
        else if (key == "shapes") cfg.synthetic.shapes = get_string_list(v, path);
        else if (key == "colors") cfg.synthetic.colors = get_string_list(v, path);
        else if (key == "train_samples") cfg.synthetic.train_samples = get_size(v, path);
        else if (key == "val_samples") cfg.synthetic.val_samples = get_size(v, path);
        else if (key == "dataset_seed") cfg.synthetic.seed = static_cast<std::uint64_t>(get_size(v, path));
    }
}

json parse_override_value(const std::string& raw) {
    json v = json::parse(raw, nullptr, false);
    if (v.is_discarded()) return json(raw);  // plain string
    return v;
}

}  // namespace

TrainConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    json root = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
            root = json::parse(text, nullptr, false);
            if (root.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
        }
    }
    reject_unknown_keys(root);

    for (const std::string& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override '" + ov + "' must have the form section.key=value");
        }
        const std::string key_path = ov.substr(0, eq);
        const std::size_t dot = key_path.find('.');
        if (dot == std::string::npos) {
            throw ConfigError("override key '" + key_path + "' must have the form section.key");
        }
        const std::string section = key_path.substr(0, dot);
        const std::string key = key_path.substr(dot + 1);
        auto it = config_schema().find(section);
        if (it == config_schema().end() || !it->second.count(key)) {
            throw ConfigError("unknown config key '" + key_path + "'");
        }
        root[section][key] = parse_override_value(ov.substr(eq + 1));
    }

    TrainConfig cfg;
    cfg.model.classes = 0;  // default: infer from data
    for (const auto& [section, body] : root.items()) {
        for (const auto& [key, value] : body.items()) apply_section(cfg, section, key, value);
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Model meta sidecar.
// ---------------------------------------------------------------------------

void save_model_meta(const ModelMeta& meta, const std::string& path) {
    json j;
    j["model"] = {
        {"dim", meta.model.dim},
        {"layers", meta.model.layers},
        {"heads", meta.model.heads},
        {"seq_len", meta.model.seq_len},
        {"patches", meta.model.patches},
        {"classes", meta.model.classes},
        {"mlp_ratio", meta.model.mlp_ratio},
        {"vocab_size", meta.model.vocab_size},
        {"input_dim", meta.model.input_dim},
        {"activation", to_string(meta.model.activation)},
        {"fusion", to_string(meta.model.fusion)},
    };
    j["precision"] = to_string(meta.precision);
    j["classes"] = meta.class_labels;
    j["vocab"] = meta.vocab_tokens;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model meta '" + path + "'");
    out << j.dump(2) << "\n";
}

ModelMeta load_model_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model meta '" + path + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("model meta '" + path + "' is not valid JSON");
    ModelMeta meta;
    try {
        const json& m = j.at("model");
        meta.model.dim = m.at("dim").get<std::size_t>();
        meta.model.layers = m.at("layers").get<std::size_t>();
        meta.model.heads = m.at("heads").get<std::size_t>();
        meta.model.seq_len = m.at("seq_len").get<std::size_t>();
        meta.model.patches = m.at("patches").get<std::size_t>();
        meta.model.classes = m.at("classes").get<std::size_t>();
        meta.model.mlp_ratio = m.at("mlp_ratio").get<std::size_t>();
        meta.model.vocab_size = m.at("vocab_size").get<std::size_t>();
        meta.model.input_dim = m.at("input_dim").get<std::size_t>();
        meta.model.activation = activation_from_string(m.at("activation").get<std::string>());
        meta.model.fusion = fusion_from_string(m.at("fusion").get<std::string>());
        meta.precision = precision_from_string(j.at("precision").get<std::string>());
        meta.class_labels = j.at("classes").get<std::vector<std::string>>();
        meta.vocab_tokens = j.at("vocab").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError("model meta '" + path + "' is malformed: " + e.what());
    }
    meta.model.validate();
    return meta;
}

std::string eval_report_to_json(const EvalReport& report) {
    json j;
    j["accuracy"] = report.accuracy;
    j["macro_f1"] = report.macro_f1;
    j["miou"] = report.miou;
    j["samples"] = report.sample_count;
    j["per_class"] = json::array();
    for (const ClassStats& c : report.per_class) {
        j["per_class"].push_back({{"label", c.label},
                                  {"support", c.support},
                                  {"tp", c.tp},
                                  {"fp", c.fp},
                                  {"fn", c.fn},
                                  {"precision", c.precision},
                                  {"recall", c.recall},
                                  {"f1", c.f1}});
    }
    return j.dump(2);
}

}  // namespace vqla
