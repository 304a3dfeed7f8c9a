#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vqla/data.hpp"
#include "vqla/ops.hpp"
#include "vqla/rng.hpp"
#include "vqla/tensor.hpp"

namespace vqla {

enum class FusionStrategy { gated, concat };
enum class Activation { gelu, relu };

FusionStrategy fusion_from_string(const std::string& s);
std::string to_string(FusionStrategy f);
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct ModelConfig {
    std::size_t dim = 64;        // embedding width D
    std::size_t layers = 2;      // encoder depth N
    std::size_t heads = 2;       // attention heads H
    std::size_t seq_len = 16;    // text positions L
    std::size_t patches = 16;    // visual positions P
    std::size_t classes = 18;    // answer classes C
    std::size_t mlp_ratio = 4;   // encoder MLP width multiple r
    std::size_t vocab_size = 2;  // V, resolved from data
    std::size_t input_dim = 0;   // D_in, resolved from data
    Activation activation = Activation::gelu;
    FusionStrategy fusion = FusionStrategy::gated;

    // Checks that hold before data resolves vocab/input/classes.
    void validate_structure() const;
    // Full check including the data-resolved fields.
    void validate() const;
};

// The key projection carries no bias: a shared key offset shifts every
// attention score in a row equally, which the softmax cancels exactly.
template <typename T>
struct EncoderLayerParams {
    Tensor<T> q_w, q_b, k_w, v_w, v_b, o_w, o_b;
    Tensor<T> mlp1_w, mlp1_b, mlp2_w, mlp2_b;
    Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
};

// Every learnable tensor of the model. Weight matrices and embedding tables
// initialize from N(0, 0.02^2), biases zero, layer-norm affines to identity.
template <typename T>
struct GvleLvitParams {
    ModelConfig config;

    Tensor<T> token_embedding;  // V x D
    Tensor<T> text_pos;         // L x D
    Tensor<T> segment;          // 2 x D, row 0 = text, row 1 = visual
    Tensor<T> visual_proj_w;    // D_in x D
    Tensor<T> visual_proj_b;    // D
    Tensor<T> visual_pos;       // P x D
    Tensor<T> gate_w;           // 2D x D
    Tensor<T> gate_b;           // D
    Tensor<T> gate_visual_w;    // D x D
    Tensor<T> gate_visual_b;    // D
    Tensor<T> gate_text_w;      // D x D
    Tensor<T> gate_text_b;      // D
    Tensor<T> cls;              // D
    std::vector<EncoderLayerParams<T>> enc;
    Tensor<T> final_ln_g, final_ln_b;  // D
    Tensor<T> cls_head_w, cls_head_b;  // D x C, C
    Tensor<T> loc1_w, loc1_b;          // D x D, D
    Tensor<T> loc2_w, loc2_b;          // D x D, D
    Tensor<T> loc3_w, loc3_b;          // D x 4, 4

    static GvleLvitParams init(const ModelConfig& cfg, Rng& rng);

    // Stable (name, tensor) listing; ordering defines checkpoint layout and
    // optimizer slot order. The returned handles share storage with the
    // fields.
    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() const;

    void set_requires_grad(bool v);
    void zero_grads();

    template <typename U>
    GvleLvitParams<U> cast() const;
};

// ---------------------------------------------------------------------------
// Batch assembly.
// ---------------------------------------------------------------------------

// Flatten an image into P patch rows (row-major patch grid; pixels scaled to
// [0,1], channel-last within a patch). The patch grid is sqrt(P) x sqrt(P).
std::vector<float> patchify(const Image& img, std::size_t patches);

// D_in implied by a sample under a given patch count.
std::size_t visual_input_dim(const VqlaSample& sample, std::size_t patches);

template <typename T>
struct ModelBatch {
    std::size_t batch = 0;
    std::vector<int> token_ids;  // batch * L
    Tensor<T> visual;            // batch x P x D_in
    std::vector<int> target_classes;
    Tensor<T> target_boxes;               // batch x 4 normalized cxcywh
    std::vector<BoxXYXY> target_boxes_norm;  // normalized xyxy, for metrics
};

template <typename T>
ModelBatch<T> make_model_batch(const std::vector<VqlaSample>& samples, const std::vector<std::size_t>& indices,
                               const Vocabulary& vocab, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Forward pieces.
// ---------------------------------------------------------------------------

// e[i] = token_row(id_i) + segment[text] + pos[i], batched as [B x L x D].
template <typename T>
Tensor<T> embed_text(const std::vector<int>& token_ids, std::size_t batch, const GvleLvitParams<T>& params);

// f = proj(visual) + segment[visual] + pos, batched as [B x P x D].
template <typename T>
Tensor<T> embed_visual(const Tensor<T>& visual, const GvleLvitParams<T>& params);

// Gated fusion: omega = sigmoid(W [f || e] + b) per position/channel,
// output = omega * tanh(Wf f + bf) + (1 - omega) * tanh(We e + be).
template <typename T>
Tensor<T> gvle_fuse(const Tensor<T>& f, const Tensor<T>& e, const GvleLvitParams<T>& params);

// Baseline fusion: text rows followed by visual rows.
template <typename T>
Tensor<T> concat_fuse(const Tensor<T>& f, const Tensor<T>& e);

// N pre-LN blocks (x += MHSA(LN(x)); x += MLP(LN(x))) then a final layer norm.
template <typename T>
Tensor<T> encoder_forward(const Tensor<T>& seq, const GvleLvitParams<T>& params);

template <typename T>
Tensor<T> classify_logits(const Tensor<T>& cls_repr, const GvleLvitParams<T>& params);

// Softmax class probabilities.
template <typename T>
Tensor<T> classify_head(const Tensor<T>& cls_repr, const GvleLvitParams<T>& params);

// 3-layer ReLU perceptron then a sigmoid-squashed linear projection to
// normalized cxcywh.
template <typename T>
Tensor<T> localize_head(const Tensor<T>& cls_repr, const GvleLvitParams<T>& params);

template <typename T>
struct ModelOutputs {
    Tensor<T> logits;         // batch x C
    Tensor<T> probabilities;  // batch x C
    Tensor<T> boxes;          // batch x 4 cxcywh in [0,1]
};

template <typename T>
ModelOutputs<T> model_forward(const ModelBatch<T>& batch, const GvleLvitParams<T>& params);

}  // namespace vqla
