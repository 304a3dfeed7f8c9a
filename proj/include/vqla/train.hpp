#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vqla/adam.hpp"
#include "vqla/box.hpp"
#include "vqla/data.hpp"
#include "vqla/model.hpp"

namespace vqla {

struct LossWeights {
    double ce = 1.0;
    double giou = 1.0;
    double l1 = 1.0;
};

template <typename T>
struct LossParts {
    Tensor<T> total;
    Tensor<T> ce;
    Tensor<T> giou;
    Tensor<T> l1;
};

// lambda_ce * CE + lambda_giou * GIoU-loss + lambda_l1 * L1, each
// batch-averaged. Ground-truth boxes are normalized cxcywh.
template <typename T>
LossParts<T> total_loss(const Tensor<T>& logits, const Tensor<T>& pred_boxes,
                        const std::vector<int>& target_classes, const Tensor<T>& gt_boxes,
                        const LossWeights& weights);

enum class Precision { f32, f64 };
Precision precision_from_string(const std::string& s);
std::string to_string(Precision p);

struct TrainConfig {
    ModelConfig model;
    std::size_t epochs = 80;
    std::size_t batch_size = 64;
    double learning_rate = 1e-5;
    LossWeights weights;
    Precision precision = Precision::f32;
    std::uint64_t seed = 0;
    std::size_t max_steps = 0;  // 0 = run the full epoch budget
    double grad_clip = 0.0;     // global-norm clip, 0 = off

    bool use_synthetic = true;
    SyntheticTaskConfig synthetic;
    std::string train_annotations;
    std::string val_annotations;

    std::string checkpoint_path;
    bool checkpoint_every_epoch = false;
    std::string log_path;

    void validate() const;
};

// Samples plus the vocabulary/class map frozen from the training split.
struct TaskData {
    std::vector<VqlaSample> train;
    std::vector<VqlaSample> val;
    Vocabulary vocab;
    ClassMap classes;
};

// Generate or load the dataset, freeze vocab/classes from the training split,
// assign answer indices, and resolve model.vocab_size/input_dim/classes.
TaskData prepare_task_data(TrainConfig& config);

struct StepRecord {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double total = 0.0;
    double ce = 0.0;
    double giou = 0.0;
    double l1 = 0.0;

    bool operator==(const StepRecord&) const = default;
};

template <typename T>
struct TrainState {
    GvleLvitParams<T> params;
    std::vector<std::vector<T>> adam_m;
    std::vector<std::vector<T>> adam_v;
    std::int64_t adam_t = 0;
    std::size_t steps_done = 0;
    std::size_t epochs_done = 0;
    std::vector<StepRecord> trajectory;
};

// Run (or resume) training toward config.epochs / config.max_steps. Fully
// deterministic per (config, seed); chunked resumed runs produce the same
// trajectory as one uninterrupted run.
template <typename T>
TrainState<T> train(const TrainConfig& config, const TaskData& data, std::optional<TrainState<T>> resume = {});

struct ClassStats {
    std::string label;
    std::size_t support = 0;  // ground-truth count
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const ClassStats&) const = default;
};

struct EvalReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;  // over classes present in ground truth
    double miou = 0.0;
    std::vector<ClassStats> per_class;
    std::size_t sample_count = 0;

    bool operator==(const EvalReport&) const = default;
};

template <typename T>
EvalReport evaluate(const GvleLvitParams<T>& params, const std::vector<VqlaSample>& samples,
                    const Vocabulary& vocab, std::size_t batch_size, const ClassMap& classes);

// Metric core over plain predictions, shared by evaluate and its tests.
EvalReport metrics_from_predictions(const std::vector<int>& pred_classes, const std::vector<int>& gt_classes,
                                    const std::vector<double>& per_sample_iou, const ClassMap& classes);

// ---------------------------------------------------------------------------
// End-to-end gradient check (64-bit, tiny model).
// ---------------------------------------------------------------------------

struct GradCheckGroup {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double worst = 0.0;
    double threshold = 1e-5;
    bool passed() const { return worst < threshold; }
};

// The tiny verification model: D=8, N=1, H=2, L=P=4, C=3.
ModelConfig tiny_gradcheck_config(FusionStrategy fusion);

// A small random feature-path batch matching cfg, for gradient checking.
template <typename T>
ModelBatch<T> make_gradcheck_batch(const ModelConfig& cfg, Rng& rng);

// Central differences are only valid away from the loss's kinks (ReLU zeros,
// box min/max ties). Deterministically nudges the ReLU biases and the
// ground-truth boxes until the evaluation point clears every kink by a
// margin much larger than the finite-difference step.
template <typename T>
void make_generic_gradcheck_point(GvleLvitParams<T>& params, ModelBatch<T>& batch);

// Autodiff vs central differences of the joint loss for every unfrozen
// parameter. Relative error per group is
// max|ad - fd| / max(||ad||_inf, ||fd||_inf, floor); the floor keeps groups
// whose true gradient is identically zero (the K-projection bias cancels in
// the row softmax) from dividing rounding noise by rounding noise.
template <typename T>
GradCheckReport grad_check_params(GvleLvitParams<T>& params, const ModelBatch<T>& batch, const LossWeights& weights,
                                  double h, double threshold, double floor = 1e-6);

// 64-bit check on the tiny model.
GradCheckReport grad_check(std::uint64_t seed, FusionStrategy fusion = FusionStrategy::gated);

// ---------------------------------------------------------------------------
// Checkpoints: "VQLA1", u32 LE count, then per tensor u16 LE name length,
// name, u8 rank, rank x u32 LE extents, f32 LE payload.
// ---------------------------------------------------------------------------

template <typename T>
void save_checkpoint(const GvleLvitParams<T>& params, const std::string& path);

template <typename T>
void load_checkpoint(GvleLvitParams<T>& params, const std::string& path);

// Forward throughput (batch-1 forwards) over the given samples.
template <typename T>
double bench_forward_fps(const GvleLvitParams<T>& params, const std::vector<VqlaSample>& samples,
                         const Vocabulary& vocab);

}  // namespace vqla
