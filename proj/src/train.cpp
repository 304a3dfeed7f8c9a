#include "vqla/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "vqla/errors.hpp"

namespace vqla {

Precision precision_from_string(const std::string& s) {
    if (s == "f32") return Precision::f32;
    if (s == "f64") return Precision::f64;
    throw ConfigError("unknown precision '" + s + "' (expected f32|f64)");
}

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

void TrainConfig::validate() const {
    model.validate_structure();
    if (batch_size == 0) throw ConfigError("train config: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("train config: learning rate must be positive");
    if (weights.ce < 0.0 || weights.giou < 0.0 || weights.l1 < 0.0) {
        throw ConfigError("train config: loss weights must be >= 0");
    }
    if (grad_clip < 0.0) throw ConfigError("train config: grad_clip must be >= 0");
    if (!use_synthetic && train_annotations.empty()) {
        throw ConfigError("train config: either enable synthetic data or provide train annotations");
    }
}

template <typename T>
LossParts<T> total_loss(const Tensor<T>& logits, const Tensor<T>& pred_boxes,
                        const std::vector<int>& target_classes, const Tensor<T>& gt_boxes,
                        const LossWeights& weights) {
    LossParts<T> parts;
    parts.ce = cross_entropy(logits, target_classes);
    parts.giou = giou_loss(pred_boxes, gt_boxes);
    parts.l1 = l1_box_loss(pred_boxes, gt_boxes);
    parts.total = add(add(mul_scalar(parts.ce, static_cast<T>(weights.ce)),
                          mul_scalar(parts.giou, static_cast<T>(weights.giou))),
                      mul_scalar(parts.l1, static_cast<T>(weights.l1)));
    return parts;
}

// ---------------------------------------------------------------------------
// Data preparation.
// ---------------------------------------------------------------------------

TaskData prepare_task_data(TrainConfig& config) {
    TaskData data;
    if (config.use_synthetic) {
        SyntheticSplits splits = generate_synthetic_dataset(config.synthetic);
        data.train = std::move(splits.train);
        data.val = std::move(splits.val);
    } else {
        data.train = load_annotations(config.train_annotations);
        if (!config.val_annotations.empty()) data.val = load_annotations(config.val_annotations);
    }
    if (data.train.empty()) throw DataError("training split is empty");
    validate_homogeneous(data.train);
    if (!data.val.empty()) validate_homogeneous(data.val);

    std::vector<std::string> questions;
    questions.reserve(data.train.size());
    for (const VqlaSample& s : data.train) questions.push_back(s.question);
    data.vocab = build_vocab(questions);
    data.classes = build_class_map(data.train);
    assign_answer_classes(data.train, data.classes);
    if (!data.val.empty()) assign_answer_classes(data.val, data.classes);

    if (config.model.classes == 0) {
        config.model.classes = data.classes.size();
    } else if (config.model.classes != data.classes.size()) {
        throw DataError("dataset/class-map inconsistency: found " + std::to_string(data.classes.size()) +
                        " answer classes but the model is configured for " + std::to_string(config.model.classes));
    }
    config.model.vocab_size = data.vocab.size();
    config.model.input_dim = visual_input_dim(data.train.front(), config.model.patches);
    config.model.validate();
    return data;
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

namespace {

std::uint64_t epoch_shuffle_seed(std::uint64_t base, std::size_t epoch) {
    return base ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1));
}

template <typename T>
void clip_gradients(std::vector<std::pair<std::string, Tensor<T>>>& params, double max_norm) {
    double sq = 0.0;
    for (auto& [name, p] : params) {
        (void)name;
        for (T g : p.grad_view()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& [name, p] : params) {
        (void)name;
        for (T& g : p.grad()) g *= scale;
    }
}

}  // namespace

template <typename T>
TrainState<T> train(const TrainConfig& config, const TaskData& data, std::optional<TrainState<T>> resume) {
    config.validate();
    if (data.train.empty()) throw DataError("train: empty training split");

    TrainState<T> state;
    if (resume) {
        state = std::move(*resume);
    } else {
        Rng init_rng(config.seed);
        state.params = GvleLvitParams<T>::init(config.model, init_rng);
    }

    AdamConfig adam_cfg;
    adam_cfg.lr = config.learning_rate;
    Adam<T> adam(state.params.named_parameters(), adam_cfg);
    if (resume.has_value() || state.adam_t > 0) {
        if (!state.adam_m.empty()) {
            adam.first_moments() = state.adam_m;
            adam.second_moments() = state.adam_v;
            adam.set_step_count(state.adam_t);
        }
    }

    std::ofstream log;
    if (!config.log_path.empty()) {
        log.open(config.log_path, state.steps_done == 0 ? std::ios::trunc : std::ios::app);
        if (!log) throw DataError("cannot open training log '" + config.log_path + "'");
    }

    auto named = state.params.named_parameters();
    bool stop = false;
    while (!stop && state.epochs_done < config.epochs) {
        const std::size_t epoch = state.epochs_done;
        const auto batches =
            make_batches(data.train, config.batch_size, epoch_shuffle_seed(config.seed, epoch));
        for (const std::vector<std::size_t>& batch_idx : batches) {
            if (config.max_steps != 0 && state.steps_done >= config.max_steps) {
                stop = true;
                break;
            }
            ModelBatch<T> batch = make_model_batch<T>(data.train, batch_idx, data.vocab, config.model);
            adam.zero_grad();  // parameters unused by the strategy keep zero grads
            GradGraph<T> graph;
            ModelOutputs<T> out = model_forward(batch, state.params);
            LossParts<T> loss =
                total_loss(out.logits, out.boxes, batch.target_classes, batch.target_boxes, config.weights);
            const double total = static_cast<double>(loss.total.item());
            if (!std::isfinite(total)) {
                throw NumericError("non-finite training loss at step " + std::to_string(state.steps_done + 1));
            }
            graph.backward(loss.total);
            if (config.grad_clip > 0.0) clip_gradients(named, config.grad_clip);
            adam.step();

            StepRecord rec;
            rec.step = ++state.steps_done;
            rec.epoch = epoch;
            rec.total = total;
            rec.ce = static_cast<double>(loss.ce.item());
            rec.giou = static_cast<double>(loss.giou.item());
            rec.l1 = static_cast<double>(loss.l1.item());
            state.trajectory.push_back(rec);
            if (log) {
                log << rec.step << '\t' << rec.epoch << '\t' << rec.total << '\t' << rec.ce << '\t' << rec.giou
                    << '\t' << rec.l1 << '\n';
            }
        }
        if (!stop) {
            ++state.epochs_done;
            if (config.checkpoint_every_epoch && !config.checkpoint_path.empty()) {
                save_checkpoint(state.params, config.checkpoint_path);
            }
        }
    }

    state.adam_m = adam.first_moments();
    state.adam_v = adam.second_moments();
    state.adam_t = adam.step_count();
    if (!config.checkpoint_path.empty()) save_checkpoint(state.params, config.checkpoint_path);
    return state;
}

// ---------------------------------------------------------------------------
// Evaluation.
// ---------------------------------------------------------------------------

EvalReport metrics_from_predictions(const std::vector<int>& pred_classes, const std::vector<int>& gt_classes,
                                    const std::vector<double>& per_sample_iou, const ClassMap& classes) {
    if (pred_classes.size() != gt_classes.size() || pred_classes.size() != per_sample_iou.size()) {
        throw std::invalid_argument("metrics_from_predictions: length mismatch");
    }
    EvalReport report;
    report.sample_count = pred_classes.size();
    if (report.sample_count == 0) return report;

    std::size_t correct = 0;
    double iou_sum = 0.0;
    std::vector<std::size_t> tp(classes.size(), 0), fp(classes.size(), 0), fn(classes.size(), 0),
        support(classes.size(), 0);
    for (std::size_t i = 0; i < pred_classes.size(); ++i) {
        const int gt = gt_classes[i];
        const int pred = pred_classes[i];
        ++support[static_cast<std::size_t>(gt)];
        if (pred == gt) {
            ++correct;
            ++tp[static_cast<std::size_t>(gt)];
        } else {
            ++fn[static_cast<std::size_t>(gt)];
            if (pred >= 0 && static_cast<std::size_t>(pred) < classes.size()) {
                ++fp[static_cast<std::size_t>(pred)];
            }
        }
        iou_sum += per_sample_iou[i];
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.sample_count);
    report.miou = iou_sum / static_cast<double>(report.sample_count);

    double f1_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        ClassStats st;
        st.label = classes.labels[c];
        st.support = support[c];
        st.tp = tp[c];
        st.fp = fp[c];
        st.fn = fn[c];
        st.precision = (tp[c] + fp[c]) > 0 ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
        st.recall = (tp[c] + fn[c]) > 0 ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]) : 0.0;
        st.f1 = (st.precision + st.recall) > 0.0 ? 2.0 * st.precision * st.recall / (st.precision + st.recall) : 0.0;
        report.per_class.push_back(st);
        if (support[c] > 0) {
            f1_sum += st.f1;
            ++present;
        }
    }
    report.macro_f1 = present > 0 ? f1_sum / static_cast<double>(present) : 0.0;
    return report;
}

namespace {

BoxXYXY clamp_unit(const BoxXYXY& b) {
    auto cl = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    return {cl(b.x_min), cl(b.y_min), cl(b.x_max), cl(b.y_max)};
}

}  // namespace

template <typename T>
EvalReport evaluate(const GvleLvitParams<T>& params, const std::vector<VqlaSample>& samples,
                    const Vocabulary& vocab, std::size_t batch_size, const ClassMap& classes) {
    if (samples.empty()) throw DataError("evaluate: empty dataset");
    const ModelConfig& cfg = params.config;
    std::vector<int> preds, gts;
    std::vector<double> ious;
    preds.reserve(samples.size());
    gts.reserve(samples.size());
    ious.reserve(samples.size());
    const auto batches = make_batches(samples, std::max<std::size_t>(1, batch_size), std::nullopt);
    for (const auto& batch_idx : batches) {
        ModelBatch<T> batch = make_model_batch<T>(samples, batch_idx, vocab, cfg);
        ModelOutputs<T> out = model_forward(batch, params);  // no active graph: inference
        for (std::size_t i = 0; i < batch.batch; ++i) {
            const T* logits = out.logits.data().data() + i * cfg.classes;
            int best = 0;
            for (std::size_t c = 1; c < cfg.classes; ++c) {
                if (logits[c] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
            }
            preds.push_back(best);
            gts.push_back(batch.target_classes[i]);
            const T* bx = out.boxes.data().data() + i * 4;
            const BoxCXCYWH pred_c{static_cast<double>(bx[0]), static_cast<double>(bx[1]),
                                   static_cast<double>(bx[2]), static_cast<double>(bx[3])};
            const BoxXYXY pred_xy = clamp_unit(to_xyxy(pred_c));
            ious.push_back(iou(pred_xy, batch.target_boxes_norm[i]));
        }
    }
    return metrics_from_predictions(preds, gts, ious, classes);
}

// ---------------------------------------------------------------------------
// Gradient check.
// ---------------------------------------------------------------------------

ModelConfig tiny_gradcheck_config(FusionStrategy fusion) {
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.seq_len = 4;
    cfg.patches = 4;
    cfg.classes = 3;
    cfg.mlp_ratio = 4;
    cfg.vocab_size = 9;
    cfg.input_dim = 6;
    cfg.fusion = fusion;
    return cfg;
}

template <typename T>
ModelBatch<T> make_gradcheck_batch(const ModelConfig& cfg, Rng& rng) {
    const std::size_t batch_n = 2;
    ModelBatch<T> batch;
    batch.batch = batch_n;
    for (std::size_t i = 0; i < batch_n * cfg.seq_len; ++i) {
        batch.token_ids.push_back(static_cast<int>(rng.next_below(cfg.vocab_size)));
    }
    batch.visual = Tensor<T>::randn(Shape{batch_n, cfg.patches, cfg.input_dim}, rng, 0.5);
    std::vector<T> gt;
    for (std::size_t i = 0; i < batch_n; ++i) {
        batch.target_classes.push_back(static_cast<int>(rng.next_below(cfg.classes)));
        const double cx = rng.next_real(0.3, 0.7);
        const double cy = rng.next_real(0.3, 0.7);
        const double w = rng.next_real(0.2, 0.5);
        const double h = rng.next_real(0.2, 0.5);
        gt.push_back(static_cast<T>(cx));
        gt.push_back(static_cast<T>(cy));
        gt.push_back(static_cast<T>(w));
        gt.push_back(static_cast<T>(h));
        batch.target_boxes_norm.push_back(to_xyxy(BoxCXCYWH{cx, cy, w, h}));
    }
    batch.target_boxes = Tensor<T>(Shape{batch_n, 4}, std::move(gt));
    return batch;
}

template <typename T>
void make_generic_gradcheck_point(GvleLvitParams<T>& params, ModelBatch<T>& batch) {
    const ModelConfig& cfg = params.config;
    const T relu_margin = T(5e-4);
    const T box_margin = T(1e-3);
    const T step = T(3e-3);
    for (int pass = 0; pass < 100; ++pass) {
        bool clean = true;

        // ReLU pre-activations in the localization head.
        Tensor<T> e = embed_text(batch.token_ids, batch.batch, params);
        Tensor<T> f = embed_visual(batch.visual, params);
        Tensor<T> fused = cfg.fusion == FusionStrategy::gated ? gvle_fuse(f, e, params) : concat_fuse(f, e);
        Tensor<T> cls_tok = tile_batch(reshape(params.cls, Shape{1, cfg.dim}), batch.batch);
        Tensor<T> seq = concat<T>({cls_tok, fused}, 1);
        Tensor<T> cls_repr = reshape(narrow(encoder_forward(seq, params), 1, 0, 1), Shape{batch.batch, cfg.dim});
        Tensor<T> h1pre = add(matmul(cls_repr, params.loc1_w), params.loc1_b);
        for (std::size_t i = 0; i < h1pre.size(); ++i) {
            if (std::abs(h1pre.at(i)) < relu_margin) {
                params.loc1_b.at(i % cfg.dim) += step;
                clean = false;
            }
        }
        Tensor<T> h2pre = add(matmul(relu(h1pre), params.loc2_w), params.loc2_b);
        for (std::size_t i = 0; i < h2pre.size(); ++i) {
            if (std::abs(h2pre.at(i)) < relu_margin) {
                params.loc2_b.at(i % cfg.dim) += step;
                clean = false;
            }
        }
        if (!clean) continue;

        // Corner ties and degenerate overlaps between predicted and target
        // boxes (x axis: components 0/2, y axis: 1/3).
        Tensor<T> pred = localize_head(cls_repr, params);
        for (std::size_t i = 0; i < batch.batch; ++i) {
            for (int axis = 0; axis < 2; ++axis) {
                const T pc = pred.at(i * 4 + axis);
                const T pe = pred.at(i * 4 + 2 + axis) / T(2);
                T& gc = batch.target_boxes.at(i * 4 + axis);
                T& ge_full = batch.target_boxes.at(i * 4 + 2 + axis);
                const T ge = ge_full / T(2);
                const T lo_gap = (pc - pe) - (gc - ge);
                const T hi_gap = (pc + pe) - (gc + ge);
                const T overlap_w = std::min(pc + pe, gc + ge) - std::max(pc - pe, gc - ge);
                if (std::abs(lo_gap) < box_margin || std::abs(hi_gap) < box_margin ||
                    std::abs(overlap_w) < box_margin) {
                    gc += step;
                    ge_full += step;
                    clean = false;
                }
            }
        }
        if (clean) break;
    }
    // Keep the normalized-xyxy mirror in sync with the adjusted targets.
    for (std::size_t i = 0; i < batch.batch; ++i) {
        const T* b = batch.target_boxes.data().data() + i * 4;
        batch.target_boxes_norm[i] =
            to_xyxy(BoxCXCYWH{static_cast<double>(b[0]), static_cast<double>(b[1]), static_cast<double>(b[2]),
                              static_cast<double>(b[3])});
    }
}

template <typename T>
GradCheckReport grad_check_params(GvleLvitParams<T>& params, const ModelBatch<T>& batch, const LossWeights& weights,
                                  double h, double threshold, double floor) {
    auto loss_value = [&]() {
        ModelOutputs<T> out = model_forward(batch, params);
        return static_cast<double>(
            total_loss(out.logits, out.boxes, batch.target_classes, batch.target_boxes, weights).total.item());
    };

    params.zero_grads();
    {
        GradGraph<T> graph;
        ModelOutputs<T> out = model_forward(batch, params);
        LossParts<T> loss = total_loss(out.logits, out.boxes, batch.target_classes, batch.target_boxes, weights);
        graph.backward(loss.total);
    }

    GradCheckReport report;
    report.threshold = threshold;
    for (auto& [name, p] : params.named_parameters()) {
        if (!p.requires_grad()) continue;  // frozen parameters are excluded
        const std::vector<T>& ad = p.grad_view();
        double max_abs = floor;
        double max_diff = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const T keep = p.at(i);
            p.at(i) = keep + static_cast<T>(h);
            const double up = loss_value();
            p.at(i) = keep - static_cast<T>(h);
            const double down = loss_value();
            p.at(i) = keep;
            const double fd = (up - down) / (2.0 * h);
            const double adi = ad.empty() ? 0.0 : static_cast<double>(ad[i]);
            max_abs = std::max({max_abs, std::abs(adi), std::abs(fd)});
            max_diff = std::max(max_diff, std::abs(adi - fd));
        }
        GradCheckGroup group;
        group.name = name;
        group.max_rel_err = max_diff / max_abs;
        report.worst = std::max(report.worst, group.max_rel_err);
        report.groups.push_back(group);
    }
    return report;
}

GradCheckReport grad_check(std::uint64_t seed, FusionStrategy fusion) {
    const ModelConfig cfg = tiny_gradcheck_config(fusion);
    Rng rng(seed);
    GvleLvitParams<double> params = GvleLvitParams<double>::init(cfg, rng);
    ModelBatch<double> batch = make_gradcheck_batch<double>(cfg, rng);
    make_generic_gradcheck_point(params, batch);
    return grad_check_params(params, batch, LossWeights{}, 1e-5, 1e-5, 1e-4);
}

// ---------------------------------------------------------------------------
// Checkpoints.
// ---------------------------------------------------------------------------

namespace {

void write_u16_le(std::ostream& out, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint16_t read_u16_le(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32_le(out, bits);
}

float read_f32_le(std::istream& in) {
    const std::uint32_t bits = read_u32_le(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

constexpr char kCheckpointMagic[5] = {'V', 'Q', 'L', 'A', '1'};

}  // namespace

template <typename T>
void save_checkpoint(const GvleLvitParams<T>& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    out.write(kCheckpointMagic, 5);
    const auto named = params.named_parameters();
    write_u32_le(out, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        write_u16_le(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        out.put(static_cast<char>(t.rank()));
        for (std::size_t e : t.shape()) write_u32_le(out, static_cast<std::uint32_t>(e));
        for (std::size_t i = 0; i < t.size(); ++i) write_f32_le(out, static_cast<float>(t.at(i)));
    }
    if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

template <typename T>
void load_checkpoint(GvleLvitParams<T>& params, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0) {
        throw DataError("checkpoint '" + path + "' has a bad magic (expected VQLA1)");
    }
    const std::uint32_t count = read_u32_le(in);
    if (!in) throw DataError("checkpoint '" + path + "' is truncated in the header");

    struct Entry {
        Shape shape;
        std::vector<float> values;
    };
    std::unordered_map<std::string, Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = read_u16_le(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw DataError("checkpoint '" + path + "' is truncated while reading a tensor name");
        const int rank = in.get();
        if (rank < 0) throw DataError("checkpoint '" + path + "': unexpected end of file at tensor '" + name + "'");
        Entry e;
        for (int r = 0; r < rank; ++r) e.shape.push_back(read_u32_le(in));
        const std::size_t n = shape_numel(e.shape);
        e.values.resize(n);
        for (std::size_t j = 0; j < n; ++j) e.values[j] = read_f32_le(in);
        if (!in) throw DataError("checkpoint '" + path + "': unexpected end of file in tensor '" + name + "'");
        entries.emplace(std::move(name), std::move(e));
    }

    for (auto& [name, t] : params.named_parameters()) {
        auto it = entries.find(name);
        if (it == entries.end()) {
            throw DataError("checkpoint '" + path + "' is missing tensor '" + name + "'");
        }
        if (it->second.shape != t.shape()) {
            throw DataError("checkpoint '" + path + "': tensor '" + name + "' has shape " +
                            shape_str(it->second.shape) + " but the model expects " + shape_str(t.shape()));
        }
        for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = static_cast<T>(it->second.values[i]);
    }
}

// ---------------------------------------------------------------------------
// Throughput.
// ---------------------------------------------------------------------------

template <typename T>
double bench_forward_fps(const GvleLvitParams<T>& params, const std::vector<VqlaSample>& samples,
                         const Vocabulary& vocab) {
    if (samples.empty()) throw DataError("bench: empty dataset");
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ModelBatch<T> batch = make_model_batch<T>(samples, {i}, vocab, params.config);
        ModelOutputs<T> out = model_forward(batch, params);
        (void)out;
    }
    const auto stop = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(stop - start).count();
    return static_cast<double>(samples.size()) / std::max(seconds, 1e-9);
}

// ---------------------------------------------------------------------------
// Explicit instantiations.
// ---------------------------------------------------------------------------

template LossParts<float> total_loss<float>(const Tensor<float>&, const Tensor<float>&, const std::vector<int>&,
                                            const Tensor<float>&, const LossWeights&);
template LossParts<double> total_loss<double>(const Tensor<double>&, const Tensor<double>&, const std::vector<int>&,
                                              const Tensor<double>&, const LossWeights&);
template TrainState<float> train<float>(const TrainConfig&, const TaskData&, std::optional<TrainState<float>>);
template TrainState<double> train<double>(const TrainConfig&, const TaskData&, std::optional<TrainState<double>>);
template EvalReport evaluate<float>(const GvleLvitParams<float>&, const std::vector<VqlaSample>&, const Vocabulary&,
                                    std::size_t, const ClassMap&);
template EvalReport evaluate<double>(const GvleLvitParams<double>&, const std::vector<VqlaSample>&,
                                     const Vocabulary&, std::size_t, const ClassMap&);
template void save_checkpoint<float>(const GvleLvitParams<float>&, const std::string&);
template void save_checkpoint<double>(const GvleLvitParams<double>&, const std::string&);
template void load_checkpoint<float>(GvleLvitParams<float>&, const std::string&);
template void load_checkpoint<double>(GvleLvitParams<double>&, const std::string&);
template double bench_forward_fps<float>(const GvleLvitParams<float>&, const std::vector<VqlaSample>&,
                                         const Vocabulary&);
template double bench_forward_fps<double>(const GvleLvitParams<double>&, const std::vector<VqlaSample>&,
                                          const Vocabulary&);
template ModelBatch<float> make_gradcheck_batch<float>(const ModelConfig&, Rng&);
template ModelBatch<double> make_gradcheck_batch<double>(const ModelConfig&, Rng&);
template void make_generic_gradcheck_point<float>(GvleLvitParams<float>&, ModelBatch<float>&);
template void make_generic_gradcheck_point<double>(GvleLvitParams<double>&, ModelBatch<double>&);
template GradCheckReport grad_check_params<float>(GvleLvitParams<float>&, const ModelBatch<float>&,
                                                  const LossWeights&, double, double, double);
template GradCheckReport grad_check_params<double>(GvleLvitParams<double>&, const ModelBatch<double>&,
                                                   const LossWeights&, double, double, double);

}  // namespace vqla
