#include "vqla/model.hpp"

#include <cmath>

#include "vqla/errors.hpp"

namespace vqla {

FusionStrategy fusion_from_string(const std::string& s) {
    if (s == "gated") return FusionStrategy::gated;
    if (s == "concat") return FusionStrategy::concat;
    throw ConfigError("unknown fusion strategy '" + s + "' (expected gated|concat)");
}

std::string to_string(FusionStrategy f) { return f == FusionStrategy::gated ? "gated" : "concat"; }

Activation activation_from_string(const std::string& s) {
    if (s == "gelu") return Activation::gelu;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "' (expected gelu|relu)");
}

std::string to_string(Activation a) { return a == Activation::gelu ? "gelu" : "relu"; }

void ModelConfig::validate_structure() const {
    if (dim == 0 || layers == 0 || heads == 0 || seq_len == 0 || patches == 0 || mlp_ratio == 0) {
        throw ConfigError("model config: all extents must be positive");
    }
    if (dim % heads != 0) {
        throw ConfigError("model config: heads (" + std::to_string(heads) + ") must divide dim (" +
                          std::to_string(dim) + ")");
    }
    if (fusion == FusionStrategy::gated && seq_len != patches) {
        throw ConfigError("model config: gated fusion requires seq_len == patches, got " + std::to_string(seq_len) +
                          " and " + std::to_string(patches));
    }
}

void ModelConfig::validate() const {
    validate_structure();
    if (classes == 0) throw ConfigError("model config: classes unresolved");
    if (vocab_size < 2) throw ConfigError("model config: vocab_size must cover PAD and UNK");
    if (input_dim == 0) throw ConfigError("model config: input_dim unresolved");
}

// ---------------------------------------------------------------------------
// Parameters.
// ---------------------------------------------------------------------------

namespace {

constexpr double kEmbedInitStd = 0.02;

}  // namespace

template <typename T>
GvleLvitParams<T> GvleLvitParams<T>::init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.dim;
    // Weight matrices: fan-scaled normal (Xavier). Embedding-like tables: a
    // flat small std, as in ViT.
    auto w = [&](Shape shape) {
        const double fan_sum = static_cast<double>(shape[0] + shape[1]);
        const double std = std::sqrt(2.0 / fan_sum);
        return Tensor<T>::randn(std::move(shape), rng, std).set_requires_grad(true);
    };
    auto table = [&](Shape shape) {
        return Tensor<T>::randn(std::move(shape), rng, kEmbedInitStd).set_requires_grad(true);
    };
    auto zeros = [&](Shape shape) { return Tensor<T>::zeros(std::move(shape)).set_requires_grad(true); };
    auto ones = [&](Shape shape) { return Tensor<T>::full(std::move(shape), T(1)).set_requires_grad(true); };

    GvleLvitParams<T> p;
    p.config = cfg;
    p.token_embedding = table({cfg.vocab_size, d});
    p.text_pos = table({cfg.seq_len, d});
    p.segment = table({2, d});
    p.visual_proj_w = w({cfg.input_dim, d});
    p.visual_proj_b = zeros({d});
    p.visual_pos = table({cfg.patches, d});
    p.gate_w = w({2 * d, d});
    p.gate_b = zeros({d});
    p.gate_visual_w = w({d, d});
    p.gate_visual_b = zeros({d});
    p.gate_text_w = w({d, d});
    p.gate_text_b = zeros({d});
    p.cls = Tensor<T>::randn({d}, rng, kEmbedInitStd).set_requires_grad(true);
    p.enc.resize(cfg.layers);
    for (auto& layer : p.enc) {
        layer.q_w = w({d, d});
        layer.q_b = zeros({d});
        layer.k_w = w({d, d});
        layer.v_w = w({d, d});
        layer.v_b = zeros({d});
        layer.o_w = w({d, d});
        layer.o_b = zeros({d});
        layer.mlp1_w = w({d, cfg.mlp_ratio * d});
        layer.mlp1_b = zeros({cfg.mlp_ratio * d});
        layer.mlp2_w = w({cfg.mlp_ratio * d, d});
        layer.mlp2_b = zeros({d});
        layer.ln1_g = ones({d});
        layer.ln1_b = zeros({d});
        layer.ln2_g = ones({d});
        layer.ln2_b = zeros({d});
    }
    p.final_ln_g = ones({d});
    p.final_ln_b = zeros({d});
    p.cls_head_w = w({d, cfg.classes});
    p.cls_head_b = zeros({cfg.classes});
    p.loc1_w = w({d, d});
    p.loc1_b = zeros({d});
    p.loc2_w = w({d, d});
    p.loc2_b = zeros({d});
    p.loc3_w = w({d, 4});
    p.loc3_b = zeros({4});
    return p;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> GvleLvitParams<T>::named_parameters() const {
    std::vector<std::pair<std::string, Tensor<T>>> out = {
        {"token_embedding", token_embedding},
        {"text_pos", text_pos},
        {"segment", segment},
        {"visual_proj_w", visual_proj_w},
        {"visual_proj_b", visual_proj_b},
        {"visual_pos", visual_pos},
        {"gate_w", gate_w},
        {"gate_b", gate_b},
        {"gate_visual_w", gate_visual_w},
        {"gate_visual_b", gate_visual_b},
        {"gate_text_w", gate_text_w},
        {"gate_text_b", gate_text_b},
        {"cls", cls},
    };
    for (std::size_t i = 0; i < enc.size(); ++i) {
        const std::string prefix = "enc" + std::to_string(i) + ".";
        auto& l = enc[i];
        out.emplace_back(prefix + "q_w", l.q_w);
        out.emplace_back(prefix + "q_b", l.q_b);
        out.emplace_back(prefix + "k_w", l.k_w);
        out.emplace_back(prefix + "v_w", l.v_w);
        out.emplace_back(prefix + "v_b", l.v_b);
        out.emplace_back(prefix + "o_w", l.o_w);
        out.emplace_back(prefix + "o_b", l.o_b);
        out.emplace_back(prefix + "mlp1_w", l.mlp1_w);
        out.emplace_back(prefix + "mlp1_b", l.mlp1_b);
        out.emplace_back(prefix + "mlp2_w", l.mlp2_w);
        out.emplace_back(prefix + "mlp2_b", l.mlp2_b);
        out.emplace_back(prefix + "ln1_g", l.ln1_g);
        out.emplace_back(prefix + "ln1_b", l.ln1_b);
        out.emplace_back(prefix + "ln2_g", l.ln2_g);
        out.emplace_back(prefix + "ln2_b", l.ln2_b);
    }
    out.emplace_back("final_ln_g", final_ln_g);
    out.emplace_back("final_ln_b", final_ln_b);
    out.emplace_back("cls_head_w", cls_head_w);
    out.emplace_back("cls_head_b", cls_head_b);
    out.emplace_back("loc1_w", loc1_w);
    out.emplace_back("loc1_b", loc1_b);
    out.emplace_back("loc2_w", loc2_w);
    out.emplace_back("loc2_b", loc2_b);
    out.emplace_back("loc3_w", loc3_w);
    out.emplace_back("loc3_b", loc3_b);
    return out;
}

template <typename T>
void GvleLvitParams<T>::set_requires_grad(bool v) {
    for (auto& [name, t] : named_parameters()) {
        (void)name;
        t.set_requires_grad(v);
    }
}

template <typename T>
void GvleLvitParams<T>::zero_grads() {
    for (auto& [name, t] : named_parameters()) {
        (void)name;
        t.zero_grad();
    }
}

template <typename T>
template <typename U>
GvleLvitParams<U> GvleLvitParams<T>::cast() const {
    Rng dummy(0);
    GvleLvitParams<U> out = GvleLvitParams<U>::init(config, dummy);
    auto src = named_parameters();
    auto dst = out.named_parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
        auto& from = src[i].second;
        auto& to = dst[i].second;
        for (std::size_t j = 0; j < from.size(); ++j) to.at(j) = static_cast<U>(from.at(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch assembly.
// ---------------------------------------------------------------------------

std::vector<float> patchify(const Image& img, std::size_t patches) {
    const std::size_t grid = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(patches))));
    if (grid * grid != patches) {
        throw DataError("patchify: patch count " + std::to_string(patches) + " is not a perfect square");
    }
    if (img.width % static_cast<int>(grid) != 0 || img.height % static_cast<int>(grid) != 0) {
        throw DataError("patchify: " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " image does not divide into a " + std::to_string(grid) + "x" + std::to_string(grid) +
                        " patch grid");
    }
    const std::size_t pw = static_cast<std::size_t>(img.width) / grid;
    const std::size_t ph = static_cast<std::size_t>(img.height) / grid;
    const std::size_t d_in = pw * ph * 3;
    std::vector<float> out(patches * d_in);
    for (std::size_t gy = 0; gy < grid; ++gy) {
        for (std::size_t gx = 0; gx < grid; ++gx) {
            float* dst = out.data() + (gy * grid + gx) * d_in;
            for (std::size_t py = 0; py < ph; ++py) {
                const std::size_t row = gy * ph + py;
                const std::uint8_t* src = img.rgb.data() + (row * img.width + gx * pw) * 3;
                for (std::size_t i = 0; i < pw * 3; ++i) {
                    dst[py * pw * 3 + i] = static_cast<float>(src[i]) / 255.0f;
                }
            }
        }
    }
    return out;
}

std::size_t visual_input_dim(const VqlaSample& sample, std::size_t patches) {
    if (sample.features) return sample.features->dim;
    if (sample.image) {
        const std::size_t grid = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(patches))));
        if (grid * grid != patches) {
            throw DataError("visual_input_dim: patch count " + std::to_string(patches) +
                            " is not a perfect square");
        }
        if (sample.image->width % static_cast<int>(grid) != 0 || sample.image->height % static_cast<int>(grid) != 0) {
            throw DataError("visual_input_dim: image does not divide into the patch grid");
        }
        return (static_cast<std::size_t>(sample.image->width) / grid) *
               (static_cast<std::size_t>(sample.image->height) / grid) * 3;
    }
    throw DataError("sample '" + sample.frame_id + "' has no visual source");
}

template <typename T>
ModelBatch<T> make_model_batch(const std::vector<VqlaSample>& samples, const std::vector<std::size_t>& indices,
                               const Vocabulary& vocab, const ModelConfig& cfg) {
    if (indices.empty()) throw DataError("make_model_batch: empty batch");
    ModelBatch<T> batch;
    batch.batch = indices.size();
    batch.token_ids.reserve(indices.size() * cfg.seq_len);
    batch.visual = Tensor<T>(Shape{indices.size(), cfg.patches, cfg.input_dim});
    batch.target_classes.reserve(indices.size());
    std::vector<T> gt;
    gt.reserve(indices.size() * 4);
    std::size_t row = 0;
    for (std::size_t idx : indices) {
        const VqlaSample& s = samples.at(idx);
        const std::vector<int> ids = tokenize(s.question, vocab, cfg.seq_len);
        batch.token_ids.insert(batch.token_ids.end(), ids.begin(), ids.end());

        if (s.features) {
            if (s.features->length != cfg.patches || s.features->dim != cfg.input_dim) {
                throw DataError("sample '" + s.frame_id + "': feature shape " + std::to_string(s.features->length) +
                                "x" + std::to_string(s.features->dim) + " does not match model " +
                                std::to_string(cfg.patches) + "x" + std::to_string(cfg.input_dim));
            }
            for (std::size_t i = 0; i < s.features->values.size(); ++i) {
                batch.visual.at(row * cfg.patches * cfg.input_dim + i) = static_cast<T>(s.features->values[i]);
            }
        } else if (s.image) {
            const std::vector<float> flat = patchify(*s.image, cfg.patches);
            if (flat.size() != cfg.patches * cfg.input_dim) {
                throw DataError("sample '" + s.frame_id + "': patch width " +
                                std::to_string(flat.size() / cfg.patches) + " does not match model input_dim " +
                                std::to_string(cfg.input_dim));
            }
            for (std::size_t i = 0; i < flat.size(); ++i) {
                batch.visual.at(row * cfg.patches * cfg.input_dim + i) = static_cast<T>(flat[i]);
            }
        } else {
            throw DataError("sample '" + s.frame_id + "' has no visual source");
        }

        if (s.answer_class < 0 || static_cast<std::size_t>(s.answer_class) >= cfg.classes) {
            throw DataError("sample '" + s.frame_id + "': answer class " + std::to_string(s.answer_class) +
                            " outside [0, " + std::to_string(cfg.classes) + ")");
        }
        batch.target_classes.push_back(s.answer_class);

        const double w = static_cast<double>(s.frame_width);
        const double h = static_cast<double>(s.frame_height);
        const BoxXYXY norm{s.target_box.x_min / w, s.target_box.y_min / h, s.target_box.x_max / w,
                           s.target_box.y_max / h};
        batch.target_boxes_norm.push_back(norm);
        const BoxCXCYWH c = to_cxcywh(norm);
        gt.push_back(static_cast<T>(c.cx));
        gt.push_back(static_cast<T>(c.cy));
        gt.push_back(static_cast<T>(c.w));
        gt.push_back(static_cast<T>(c.h));
        ++row;
    }
    batch.target_boxes = Tensor<T>(Shape{indices.size(), 4}, std::move(gt));
    return batch;
}

// ---------------------------------------------------------------------------
// Forward pieces.
// ---------------------------------------------------------------------------

namespace {

// x[rows x d] @ w[d x k] + b[k]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    return add(matmul(x, w), b);
}

template <typename T>
Tensor<T> segment_row(const GvleLvitParams<T>& params, std::size_t row) {
    return reshape(narrow(params.segment, 0, row, 1), Shape{params.config.dim});
}

}  // namespace

template <typename T>
Tensor<T> embed_text(const std::vector<int>& token_ids, std::size_t batch, const GvleLvitParams<T>& params) {
    const ModelConfig& cfg = params.config;
    if (batch == 0 || token_ids.size() != batch * cfg.seq_len) {
        throw std::invalid_argument("embed_text: expected " + std::to_string(batch) + " x " +
                                    std::to_string(cfg.seq_len) + " token ids, got " +
                                    std::to_string(token_ids.size()));
    }
    Tensor<T> tok = embedding(params.token_embedding, token_ids);          // (B*L) x D
    Tensor<T> e = reshape(tok, Shape{batch, cfg.seq_len, cfg.dim});        // B x L x D
    e = add(e, params.text_pos);                                           // + position (suffix broadcast)
    e = add(e, segment_row(params, 0));                                    // + text segment
    return e;
}

template <typename T>
Tensor<T> embed_visual(const Tensor<T>& visual, const GvleLvitParams<T>& params) {
    const ModelConfig& cfg = params.config;
    const Shape& s = visual.shape();
    if (s.size() != 3 || s[1] != cfg.patches || s[2] != cfg.input_dim) {
        throw std::invalid_argument("embed_visual: expected [batch x " + std::to_string(cfg.patches) + " x " +
                                    std::to_string(cfg.input_dim) + "] input, got " + shape_str(s));
    }
    const std::size_t batch = s[0];
    Tensor<T> flat = reshape(visual, Shape{batch * cfg.patches, cfg.input_dim});
    Tensor<T> fv = linear(flat, params.visual_proj_w, params.visual_proj_b);
    Tensor<T> f = reshape(fv, Shape{batch, cfg.patches, cfg.dim});
    f = add(f, params.visual_pos);
    f = add(f, segment_row(params, 1));
    return f;
}

template <typename T>
Tensor<T> gvle_fuse(const Tensor<T>& f, const Tensor<T>& e, const GvleLvitParams<T>& params) {
    const ModelConfig& cfg = params.config;
    if (f.shape() != e.shape()) {
        throw std::invalid_argument("gvle_fuse: visual " + shape_str(f.shape()) + " and text " +
                                    shape_str(e.shape()) + " sequences must align");
    }
    const std::size_t batch = f.shape()[0];
    const std::size_t positions = f.shape()[1];
    Tensor<T> f2 = reshape(f, Shape{batch * positions, cfg.dim});
    Tensor<T> e2 = reshape(e, Shape{batch * positions, cfg.dim});
    Tensor<T> gate_in = concat<T>({f2, e2}, 1);  // [f || e]
    Tensor<T> omega = sigmoid(linear(gate_in, params.gate_w, params.gate_b));
    Tensor<T> visual_branch = tanh(linear(f2, params.gate_visual_w, params.gate_visual_b));
    Tensor<T> text_branch = tanh(linear(e2, params.gate_text_w, params.gate_text_b));
    Tensor<T> one_minus = add_scalar(neg(omega), T(1));
    Tensor<T> fused = add(mul(omega, visual_branch), mul(one_minus, text_branch));
    return reshape(fused, Shape{batch, positions, cfg.dim});
}

template <typename T>
Tensor<T> concat_fuse(const Tensor<T>& f, const Tensor<T>& e) {
    if (f.rank() != 3 || e.rank() != 3 || f.shape()[0] != e.shape()[0] || f.shape()[2] != e.shape()[2]) {
        throw std::invalid_argument("concat_fuse: widths differ: " + shape_str(e.shape()) + " vs " +
                                    shape_str(f.shape()));
    }
    return concat<T>({e, f}, 1);
}

namespace {

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const EncoderLayerParams<T>& l, const ModelConfig& cfg) {
    const std::size_t batch = x.shape()[0];
    const std::size_t s = x.shape()[1];
    const std::size_t d = cfg.dim;
    const std::size_t dh = d / cfg.heads;
    Tensor<T> flat = reshape(x, Shape{batch * s, d});
    Tensor<T> q = reshape(linear(flat, l.q_w, l.q_b), Shape{batch, s, d});
    Tensor<T> k = reshape(matmul(flat, l.k_w), Shape{batch, s, d});
    Tensor<T> v = reshape(linear(flat, l.v_w, l.v_b), Shape{batch, s, d});
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<Tensor<T>> heads;
    heads.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        Tensor<T> qh = narrow(q, 2, h * dh, dh);
        Tensor<T> kh = narrow(k, 2, h * dh, dh);
        Tensor<T> vh = narrow(v, 2, h * dh, dh);
        Tensor<T> scores = mul_scalar(matmul(qh, transpose_last2(kh)), scale);
        Tensor<T> attn = softmax_last_dim(scores);
        heads.push_back(matmul(attn, vh));
    }
    Tensor<T> ctx = concat(heads, 2);
    Tensor<T> out = linear(reshape(ctx, Shape{batch * s, d}), l.o_w, l.o_b);
    return reshape(out, Shape{batch, s, d});
}

template <typename T>
Tensor<T> encoder_mlp(const Tensor<T>& x, const EncoderLayerParams<T>& l, const ModelConfig& cfg) {
    const std::size_t batch = x.shape()[0];
    const std::size_t s = x.shape()[1];
    Tensor<T> flat = reshape(x, Shape{batch * s, cfg.dim});
    Tensor<T> hidden = linear(flat, l.mlp1_w, l.mlp1_b);
    hidden = cfg.activation == Activation::gelu ? gelu(hidden) : relu(hidden);
    Tensor<T> out = linear(hidden, l.mlp2_w, l.mlp2_b);
    return reshape(out, Shape{batch, s, cfg.dim});
}

}  // namespace

template <typename T>
Tensor<T> encoder_forward(const Tensor<T>& seq, const GvleLvitParams<T>& params) {
    const ModelConfig& cfg = params.config;
    if (seq.rank() != 3 || seq.shape()[2] != cfg.dim) {
        throw std::invalid_argument("encoder_forward: expected [batch x S x " + std::to_string(cfg.dim) +
                                    "], got " + shape_str(seq.shape()));
    }
    constexpr T ln_eps = T(1e-5);
    Tensor<T> x = seq;
    for (const EncoderLayerParams<T>& l : params.enc) {
        x = add(x, multi_head_attention(layer_norm(x, l.ln1_g, l.ln1_b, ln_eps), l, cfg));
        x = add(x, encoder_mlp(layer_norm(x, l.ln2_g, l.ln2_b, ln_eps), l, cfg));
    }
    return layer_norm(x, params.final_ln_g, params.final_ln_b, ln_eps);
}

template <typename T>
Tensor<T> classify_logits(const Tensor<T>& cls_repr, const GvleLvitParams<T>& params) {
    return linear(cls_repr, params.cls_head_w, params.cls_head_b);
}

template <typename T>
Tensor<T> classify_head(const Tensor<T>& cls_repr, const GvleLvitParams<T>& params) {
    return softmax_last_dim(classify_logits(cls_repr, params));
}

template <typename T>
Tensor<T> localize_head(const Tensor<T>& cls_repr, const GvleLvitParams<T>& params) {
    Tensor<T> h = relu(linear(cls_repr, params.loc1_w, params.loc1_b));
    h = relu(linear(h, params.loc2_w, params.loc2_b));
    return sigmoid(linear(h, params.loc3_w, params.loc3_b));
}

template <typename T>
ModelOutputs<T> model_forward(const ModelBatch<T>& batch, const GvleLvitParams<T>& params) {
    const ModelConfig& cfg = params.config;
    Tensor<T> e = embed_text(batch.token_ids, batch.batch, params);
    Tensor<T> f = embed_visual(batch.visual, params);
    Tensor<T> fused =
        cfg.fusion == FusionStrategy::gated ? gvle_fuse(f, e, params) : concat_fuse(f, e);
    Tensor<T> cls_tok = tile_batch(reshape(params.cls, Shape{1, cfg.dim}), batch.batch);  // B x 1 x D
    Tensor<T> seq = concat<T>({cls_tok, fused}, 1);
    Tensor<T> encoded = encoder_forward(seq, params);
    Tensor<T> cls_repr = reshape(narrow(encoded, 1, 0, 1), Shape{batch.batch, cfg.dim});
    ModelOutputs<T> out;
    out.logits = classify_logits(cls_repr, params);
    out.probabilities = softmax_last_dim(out.logits);
    out.boxes = localize_head(cls_repr, params);
    return out;
}

// ---------------------------------------------------------------------------
// Explicit instantiations.
// ---------------------------------------------------------------------------

template struct GvleLvitParams<float>;
template struct GvleLvitParams<double>;
template GvleLvitParams<double> GvleLvitParams<float>::cast<double>() const;
template GvleLvitParams<float> GvleLvitParams<double>::cast<float>() const;
template GvleLvitParams<float> GvleLvitParams<float>::cast<float>() const;
template GvleLvitParams<double> GvleLvitParams<double>::cast<double>() const;

template ModelBatch<float> make_model_batch<float>(const std::vector<VqlaSample>&, const std::vector<std::size_t>&,
                                                   const Vocabulary&, const ModelConfig&);
template ModelBatch<double> make_model_batch<double>(const std::vector<VqlaSample>&, const std::vector<std::size_t>&,
                                                     const Vocabulary&, const ModelConfig&);

template Tensor<float> embed_text<float>(const std::vector<int>&, std::size_t, const GvleLvitParams<float>&);
template Tensor<double> embed_text<double>(const std::vector<int>&, std::size_t, const GvleLvitParams<double>&);
template Tensor<float> embed_visual<float>(const Tensor<float>&, const GvleLvitParams<float>&);
template Tensor<double> embed_visual<double>(const Tensor<double>&, const GvleLvitParams<double>&);
template Tensor<float> gvle_fuse<float>(const Tensor<float>&, const Tensor<float>&, const GvleLvitParams<float>&);
template Tensor<double> gvle_fuse<double>(const Tensor<double>&, const Tensor<double>&,
                                          const GvleLvitParams<double>&);
template Tensor<float> concat_fuse<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> concat_fuse<double>(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> encoder_forward<float>(const Tensor<float>&, const GvleLvitParams<float>&);
template Tensor<double> encoder_forward<double>(const Tensor<double>&, const GvleLvitParams<double>&);
template Tensor<float> classify_logits<float>(const Tensor<float>&, const GvleLvitParams<float>&);
template Tensor<double> classify_logits<double>(const Tensor<double>&, const GvleLvitParams<double>&);
template Tensor<float> classify_head<float>(const Tensor<float>&, const GvleLvitParams<float>&);
template Tensor<double> classify_head<double>(const Tensor<double>&, const GvleLvitParams<double>&);
template Tensor<float> localize_head<float>(const Tensor<float>&, const GvleLvitParams<float>&);
template Tensor<double> localize_head<double>(const Tensor<double>&, const GvleLvitParams<double>&);
template ModelOutputs<float> model_forward<float>(const ModelBatch<float>&, const GvleLvitParams<float>&);
template ModelOutputs<double> model_forward<double>(const ModelBatch<double>&, const GvleLvitParams<double>&);

}  // namespace vqla
