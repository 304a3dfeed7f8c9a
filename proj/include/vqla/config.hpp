#pragma once

#include <string>
#include <vector>

#include "vqla/train.hpp"

namespace vqla {

// Parse the JSON config file (empty path = all defaults), apply dotted-path
// overrides ("train.lr=3e-4"), reject unknown keys, and validate. classes=0
// means "infer from data".
TrainConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);

// Serialized alongside checkpoints so eval/predict/bench can rebuild the
// model without the training data.
struct ModelMeta {
    ModelConfig model;
    Precision precision = Precision::f32;
    std::vector<std::string> class_labels;
    std::vector<std::string> vocab_tokens;  // id order, including <pad>/<unk>
};

void save_model_meta(const ModelMeta& meta, const std::string& path);
ModelMeta load_model_meta(const std::string& path);

std::string eval_report_to_json(const EvalReport& report);

}  // namespace vqla
