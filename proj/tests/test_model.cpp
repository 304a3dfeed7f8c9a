#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "vqla/errors.hpp"
#include "vqla/model.hpp"
#include "vqla/train.hpp"

#include "test_util.hpp"

using namespace vqla;
using vqla::testutil::max_rel_err;
using vqla::testutil::random_tensor;

namespace {

template <typename T>
GvleLvitParams<T> tiny_params(std::uint64_t seed, FusionStrategy fusion = FusionStrategy::gated) {
    Rng rng(seed);
    return GvleLvitParams<T>::init(tiny_gradcheck_config(fusion), rng);
}

template <typename T>
void fill_zero(Tensor<T>& t) {
    std::fill(t.data().begin(), t.data().end(), T(0));
}

template <typename T>
void zero_all_weights(GvleLvitParams<T>& p) {
    for (auto& [name, t] : p.named_parameters()) {
        const bool is_ln_gain = name.ends_with("ln1_g") || name.ends_with("ln2_g") || name == "final_ln_g";
        std::fill(t.data().begin(), t.data().end(), is_ln_gain ? T(1) : T(0));
    }
}

VqlaSample feature_sample(Rng& rng, const ModelConfig& cfg, int cls, const std::string& question) {
    VqlaSample s;
    s.frame_id = "t" + std::to_string(rng.next_below(1000000));
    s.frame_width = 100;
    s.frame_height = 100;
    FeatureSeq f;
    f.length = cfg.patches;
    f.dim = cfg.input_dim;
    for (std::size_t i = 0; i < f.length * f.dim; ++i) f.values.push_back(static_cast<float>(rng.next_real(-1, 1)));
    s.features = std::move(f);
    s.question = question;
    s.answer = "a";
    s.answer_class = cls;
    const double x0 = rng.next_real(5, 40), y0 = rng.next_real(5, 40);
    s.target_box = {x0, y0, x0 + rng.next_real(20, 50), y0 + rng.next_real(20, 50)};
    return s;
}

}  // namespace

TEST_CASE("embed_text fixtures") {
    GvleLvitParams<double> p = tiny_params<double>(1);
    const ModelConfig& cfg = p.config;

    SUBCASE("all tables zero give zero output") {
        fill_zero(p.token_embedding);
        fill_zero(p.text_pos);
        fill_zero(p.segment);
        Tensor<double> e = embed_text({0, 1, 2, 3}, 1, p);
        for (std::size_t i = 0; i < e.size(); ++i) CHECK(e.at(i) == 0.0);
    }
    SUBCASE("only the token table nonzero: rows equal table rows") {
        fill_zero(p.text_pos);
        fill_zero(p.segment);
        Tensor<double> e = embed_text({3, 0, 5, 1}, 1, p);
        const std::vector<int> ids = {3, 0, 5, 1};
        for (std::size_t i = 0; i < cfg.seq_len; ++i) {
            for (std::size_t j = 0; j < cfg.dim; ++j) {
                CHECK(e.at(i * cfg.dim + j) ==
                      p.token_embedding.at(static_cast<std::size_t>(ids[i]) * cfg.dim + j));
            }
        }
    }
    SUBCASE("random tables match hand-summed lookups") {
        const std::vector<int> ids = {2, 7, 4, 4};
        Tensor<double> e = embed_text(ids, 1, p);
        for (std::size_t i = 0; i < cfg.seq_len; ++i) {
            for (std::size_t j = 0; j < cfg.dim; ++j) {
                const double expect = p.token_embedding.at(static_cast<std::size_t>(ids[i]) * cfg.dim + j) +
                                      p.segment.at(j) + p.text_pos.at(i * cfg.dim + j);
                CHECK(e.at(i * cfg.dim + j) == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
    SUBCASE("id out of range fails") {
        CHECK_THROWS_AS(embed_text({0, 1, 2, 99}, 1, p), std::invalid_argument);
    }
}

TEST_CASE("patchify grid rules") {
    Image img;
    img.width = 64;
    img.height = 64;
    img.rgb.assign(64 * 64 * 3, 10);
    CHECK_THROWS_WITH_AS(patchify(img, 25), doctest::Contains("5x5"), DataError);
    CHECK(patchify(img, 64).size() == 64 * (8 * 8 * 3));
    CHECK_THROWS_AS(patchify(img, 10), DataError);  // not a perfect square

    Image odd;
    odd.width = 30;
    odd.height = 64;
    odd.rgb.assign(30 * 64 * 3, 0);
    CHECK_THROWS_AS(patchify(odd, 16), DataError);  // 30 not divisible by 4
}

TEST_CASE("embed_visual fixtures") {
    GvleLvitParams<double> p = tiny_params<double>(2);
    const ModelConfig& cfg = p.config;

    SUBCASE("zero input and zero bias leave segment plus position") {
        Tensor<double> zero_vis(Shape{1, cfg.patches, cfg.input_dim}, 0.0);
        Tensor<double> f = embed_visual(zero_vis, p);
        for (std::size_t i = 0; i < cfg.patches; ++i) {
            for (std::size_t j = 0; j < cfg.dim; ++j) {
                const double expect = p.segment.at(cfg.dim + j) + p.visual_pos.at(i * cfg.dim + j);
                CHECK(f.at(i * cfg.dim + j) == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
    SUBCASE("ones input picks up projection column sums") {
        fill_zero(p.segment);
        fill_zero(p.visual_pos);
        fill_zero(p.visual_proj_b);
        Tensor<double> ones(Shape{1, cfg.patches, cfg.input_dim}, 1.0);
        Tensor<double> f = embed_visual(ones, p);
        for (std::size_t j = 0; j < cfg.dim; ++j) {
            double col = 0.0;
            for (std::size_t r = 0; r < cfg.input_dim; ++r) col += p.visual_proj_w.at(r * cfg.dim + j);
            CHECK(f.at(j) == doctest::Approx(col).epsilon(1e-9));
        }
    }
    SUBCASE("wrong feature length fails") {
        Tensor<double> bad(Shape{1, cfg.patches + 1, cfg.input_dim}, 0.0);
        CHECK_THROWS_AS(embed_visual(bad, p), std::invalid_argument);
    }
}

TEST_CASE("gvle_fuse fixtures") {
    SUBCASE("zero inputs and parameters give zero output, gate at one half") {
        GvleLvitParams<double> p = tiny_params<double>(3);
        zero_all_weights(p);
        const std::size_t d = p.config.dim;
        Tensor<double> f(Shape{1, p.config.patches, d}, 0.0);
        Tensor<double> e(Shape{1, p.config.seq_len, d}, 0.0);
        Tensor<double> fused = gvle_fuse(f, e, p);
        for (std::size_t i = 0; i < fused.size(); ++i) CHECK(fused.at(i) == 0.0);

        // Push the visual branch to tanh ~= 1: the output then reads the gate
        // value directly, sigma(0) = 0.5.
        std::fill(p.gate_visual_b.data().begin(), p.gate_visual_b.data().end(), 30.0);
        Tensor<double> gate_probe = gvle_fuse(f, e, p);
        for (std::size_t i = 0; i < gate_probe.size(); ++i) {
            CHECK(gate_probe.at(i) == doctest::Approx(0.5).epsilon(1e-9));
        }
    }
    SUBCASE("saturated gate reduces to the visual branch") {
        GvleLvitParams<double> p = tiny_params<double>(4);
        std::fill(p.gate_b.data().begin(), p.gate_b.data().end(), 30.0);
        Rng rng(5);
        Tensor<double> f = random_tensor<double>({2, p.config.patches, p.config.dim}, rng);
        Tensor<double> e = random_tensor<double>({2, p.config.seq_len, p.config.dim}, rng);
        Tensor<double> fused = gvle_fuse(f, e, p);

        Tensor<double> f2 = reshape(f, Shape{2 * p.config.patches, p.config.dim});
        Tensor<double> visual = tanh(add(matmul(f2, p.gate_visual_w), p.gate_visual_b));
        for (std::size_t i = 0; i < fused.size(); ++i) {
            CHECK(std::abs(fused.at(i) - visual.at(i)) < 1e-6);
        }
    }
    SUBCASE("scalar hand evaluation") {
        ModelConfig cfg;
        cfg.dim = 1;
        cfg.layers = 1;
        cfg.heads = 1;
        cfg.seq_len = 1;
        cfg.patches = 1;
        cfg.classes = 2;
        cfg.vocab_size = 2;
        cfg.input_dim = 1;
        Rng rng(0);
        GvleLvitParams<double> p = GvleLvitParams<double>::init(cfg, rng);
        p.gate_w.data() = {1.0, 1.0};
        p.gate_b.data() = {0.0};
        p.gate_visual_w.data() = {1.0};
        p.gate_visual_b.data() = {0.0};
        p.gate_text_w.data() = {1.0};
        p.gate_text_b.data() = {0.0};
        Tensor<double> f(Shape{1, 1, 1}, std::vector<double>{1.0});
        Tensor<double> e(Shape{1, 1, 1}, std::vector<double>{0.0});
        const double fused = gvle_fuse(f, e, p).at(0);
        const double omega = 1.0 / (1.0 + std::exp(-1.0));
        CHECK(omega == doctest::Approx(0.7310585786300049).epsilon(1e-12));
        CHECK(fused == doctest::Approx(omega * std::tanh(1.0)).epsilon(1e-12));
        CHECK(fused == doctest::Approx(0.5567699411459397).epsilon(1e-9));
    }
    SUBCASE("length mismatch fails") {
        ModelConfig cfg = tiny_gradcheck_config(FusionStrategy::gated);
        Rng rng(0);
        GvleLvitParams<double> p = GvleLvitParams<double>::init(cfg, rng);
        Tensor<double> f(Shape{1, cfg.patches, cfg.dim}, 0.0);
        Tensor<double> e(Shape{1, cfg.patches + 1, cfg.dim}, 0.0);
        CHECK_THROWS_AS(gvle_fuse(f, e, p), std::invalid_argument);
    }
}

TEST_CASE("concat_fuse fixtures") {
    Tensor<double> e(Shape{1, 1, 3}, std::vector<double>{1, 2, 3});
    Tensor<double> f(Shape{1, 1, 3}, std::vector<double>{4, 5, 6});
    Tensor<double> out = concat_fuse(f, e);
    CHECK(out.shape() == Shape{1, 2, 3});
    // Text rows first, visual after, contents preserved bitwise.
    CHECK(out.data() == std::vector<double>{1, 2, 3, 4, 5, 6});

    Tensor<double> wide(Shape{1, 1, 4}, 0.0);
    CHECK_THROWS_AS(concat_fuse(wide, e), std::invalid_argument);
}

namespace {

// Plain-double recomputation of one pre-LN encoder block plus final norm,
// single head only.
std::vector<double> encoder_oracle_1head(const std::vector<double>& x_in, std::size_t s, std::size_t d,
                                         const GvleLvitParams<double>& p) {
    auto ln = [&](const std::vector<double>& v, const Tensor<double>& g, const Tensor<double>& b) {
        std::vector<double> out(v.size());
        for (std::size_t r = 0; r < v.size() / d; ++r) {
            double mu = 0;
            for (std::size_t j = 0; j < d; ++j) mu += v[r * d + j];
            mu /= static_cast<double>(d);
            double var = 0;
            for (std::size_t j = 0; j < d; ++j) var += (v[r * d + j] - mu) * (v[r * d + j] - mu);
            var /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
                out[r * d + j] = g.at(j) * (v[r * d + j] - mu) / std::sqrt(var + 1e-5) + b.at(j);
            }
        }
        return out;
    };
    auto affine = [&](const std::vector<double>& v, const Tensor<double>& w, const Tensor<double>& b,
                      std::size_t cols) {
        const std::size_t rows = v.size() / d;
        std::vector<double> out(rows * cols, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                double acc = b.at(j);
                for (std::size_t k = 0; k < d; ++k) acc += v[i * d + k] * w.at(k * cols + j);
                out[i * cols + j] = acc;
            }
        }
        return out;
    };
    const auto& l = p.enc[0];
    std::vector<double> x = x_in;

    std::vector<double> h = ln(x, l.ln1_g, l.ln1_b);
    const Tensor<double> no_bias = Tensor<double>::zeros({d});
    std::vector<double> q = affine(h, l.q_w, l.q_b, d);
    std::vector<double> k = affine(h, l.k_w, no_bias, d);
    std::vector<double> v = affine(h, l.v_w, l.v_b, d);
    std::vector<double> ctx(s * d, 0.0);
    for (std::size_t i = 0; i < s; ++i) {
        std::vector<double> scores(s);
        double mx = -1e30;
        for (std::size_t j = 0; j < s; ++j) {
            double dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += q[i * d + c] * k[j * d + c];
            scores[j] = dot / std::sqrt(static_cast<double>(d));
            mx = std::max(mx, scores[j]);
        }
        double z = 0;
        for (std::size_t j = 0; j < s; ++j) {
            scores[j] = std::exp(scores[j] - mx);
            z += scores[j];
        }
        for (std::size_t j = 0; j < s; ++j) {
            for (std::size_t c = 0; c < d; ++c) ctx[i * d + c] += scores[j] / z * v[j * d + c];
        }
    }
    std::vector<double> att = affine(ctx, l.o_w, l.o_b, d);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += att[i];

    std::vector<double> h2 = ln(x, l.ln2_g, l.ln2_b);
    const std::size_t hidden_w = p.config.mlp_ratio * d;
    const std::size_t rows = s;
    std::vector<double> hidden(rows * hidden_w, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < hidden_w; ++j) {
            double acc = l.mlp1_b.at(j);
            for (std::size_t c = 0; c < d; ++c) acc += h2[i * d + c] * l.mlp1_w.at(c * hidden_w + j);
            hidden[i * hidden_w + j] = 0.5 * acc * (1.0 + std::erf(acc / std::sqrt(2.0)));
        }
    }
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double acc = l.mlp2_b.at(j);
            for (std::size_t c = 0; c < hidden_w; ++c) acc += hidden[i * hidden_w + c] * l.mlp2_w.at(c * d + j);
            x[i * d + j] += acc;
        }
    }
    return ln(x, p.final_ln_g, p.final_ln_b);
}

}  // namespace

TEST_CASE("encoder_forward fixtures") {
    SUBCASE("zero weights reduce to the final layer norm of the input") {
        GvleLvitParams<double> p = tiny_params<double>(6);
        zero_all_weights(p);
        Rng rng(7);
        Tensor<double> x = random_tensor<double>({2, 5, p.config.dim}, rng);
        Tensor<double> out = encoder_forward(x, p);
        Tensor<double> expect =
            layer_norm(x, Tensor<double>::full({p.config.dim}, 1.0), Tensor<double>::zeros({p.config.dim}), 1e-5);
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out.at(i) == doctest::Approx(expect.at(i)).epsilon(1e-9));
        }
    }
    SUBCASE("tiny case matches the scalar oracle (covers single- and two-token attention)") {
        ModelConfig cfg;
        cfg.dim = 2;
        cfg.layers = 1;
        cfg.heads = 1;
        cfg.seq_len = 2;
        cfg.patches = 2;
        cfg.classes = 2;
        cfg.vocab_size = 4;
        cfg.input_dim = 3;
        Rng rng(8);
        GvleLvitParams<double> p = GvleLvitParams<double>::init(cfg, rng);
        // Larger weights so the block does real work.
        for (auto& [name, t] : p.named_parameters()) {
            if (name.starts_with("enc0")) {
                for (double& v : t.data()) v *= 20.0;
            }
        }
        for (std::size_t s : {std::size_t(1), std::size_t(2), std::size_t(5)}) {
            Tensor<double> x = random_tensor<double>({1, s, cfg.dim}, rng);
            Tensor<double> out = encoder_forward(x, p);
            std::vector<double> oracle = encoder_oracle_1head(x.data(), s, cfg.dim, p);
            for (std::size_t i = 0; i < out.size(); ++i) {
                CHECK(out.at(i) == doctest::Approx(oracle[i]).epsilon(1e-5));
            }
        }
    }
    SUBCASE("head split width must divide") {
        ModelConfig bad = tiny_gradcheck_config(FusionStrategy::gated);
        bad.heads = 3;  // 3 does not divide 8
        Rng rng(0);
        CHECK_THROWS_AS(GvleLvitParams<double>::init(bad, rng), ConfigError);
    }
}

TEST_CASE("classification head") {
    GvleLvitParams<double> p = tiny_params<double>(9);
    const std::size_t c = p.config.classes;
    SUBCASE("zero weights give the uniform distribution") {
        fill_zero(p.cls_head_w);
        fill_zero(p.cls_head_b);
        Tensor<double> repr(Shape{2, p.config.dim}, 0.7);
        Tensor<double> probs = classify_head(repr, p);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            CHECK(probs.at(i) == doctest::Approx(1.0 / static_cast<double>(c)).epsilon(1e-9));
        }
    }
    SUBCASE("rows are distributions and argmax matches the logits") {
        Rng rng(10);
        Tensor<double> repr = random_tensor<double>({4, p.config.dim}, rng);
        Tensor<double> logits = classify_logits(repr, p);
        Tensor<double> probs = classify_head(repr, p);
        for (std::size_t r = 0; r < 4; ++r) {
            double sum = 0.0;
            std::size_t arg_l = 0, arg_p = 0;
            for (std::size_t j = 0; j < c; ++j) {
                sum += probs.at(r * c + j);
                if (logits.at(r * c + j) > logits.at(r * c + arg_l)) arg_l = j;
                if (probs.at(r * c + j) > probs.at(r * c + arg_p)) arg_p = j;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(arg_l == arg_p);
        }
    }
}

TEST_CASE("localization head") {
    SUBCASE("zero weights give the centered box") {
        GvleLvitParams<double> p = tiny_params<double>(11);
        fill_zero(p.loc1_w);
        fill_zero(p.loc1_b);
        fill_zero(p.loc2_w);
        fill_zero(p.loc2_b);
        fill_zero(p.loc3_w);
        fill_zero(p.loc3_b);
        Tensor<double> repr(Shape{1, p.config.dim}, 2.0);
        Tensor<double> box = localize_head(repr, p);
        for (std::size_t i = 0; i < 4; ++i) CHECK(box.at(i) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("outputs always land in the unit interval") {
        GvleLvitParams<double> p = tiny_params<double>(12);
        Rng rng(13);
        for (int trial = 0; trial < 20; ++trial) {
            Tensor<double> repr = random_tensor<double>({3, p.config.dim}, rng, -50.0, 50.0);
            Tensor<double> box = localize_head(repr, p);
            for (std::size_t i = 0; i < box.size(); ++i) {
                CHECK(box.at(i) >= 0.0);
                CHECK(box.at(i) <= 1.0);
            }
        }
    }
    SUBCASE("hand-set weights match a scalar recomputation") {
        ModelConfig cfg;
        cfg.dim = 2;
        cfg.layers = 1;
        cfg.heads = 1;
        cfg.seq_len = 2;
        cfg.patches = 2;
        cfg.classes = 2;
        cfg.vocab_size = 4;
        cfg.input_dim = 3;
        Rng rng(0);
        GvleLvitParams<double> p = GvleLvitParams<double>::init(cfg, rng);
        p.loc1_w.data() = {0.5, -0.3, 0.2, 0.8};
        p.loc1_b.data() = {0.1, -0.2};
        p.loc2_w.data() = {1.0, 0.4, -0.6, 0.3};
        p.loc2_b.data() = {0.0, 0.05};
        p.loc3_w.data() = {0.7, -0.1, 0.2, 0.4, -0.5, 0.6, 0.3, -0.2};
        p.loc3_b.data() = {0.01, 0.02, 0.03, 0.04};
        const double in0 = 0.9, in1 = -0.4;
        auto relu_s = [](double v) { return v > 0 ? v : 0.0; };
        const double h0 = relu_s(in0 * 0.5 + in1 * 0.2 + 0.1);
        const double h1 = relu_s(in0 * -0.3 + in1 * 0.8 - 0.2);
        const double g0 = relu_s(h0 * 1.0 + h1 * -0.6 + 0.0);
        const double g1 = relu_s(h0 * 0.4 + h1 * 0.3 + 0.05);
        const double o[4] = {g0 * 0.7 + g1 * -0.5 + 0.01, g0 * -0.1 + g1 * 0.6 + 0.02,
                             g0 * 0.2 + g1 * 0.3 + 0.03, g0 * 0.4 + g1 * -0.2 + 0.04};
        Tensor<double> repr(Shape{1, 2}, std::vector<double>{in0, in1});
        Tensor<double> box = localize_head(repr, p);
        for (std::size_t i = 0; i < 4; ++i) {
            const double expect = 1.0 / (1.0 + std::exp(-o[i]));
            CHECK(box.at(i) == doctest::Approx(expect).epsilon(1e-6));
        }
    }
}

TEST_CASE("model_forward") {
    const ModelConfig cfg = tiny_gradcheck_config(FusionStrategy::gated);
    Rng prng(20);
    GvleLvitParams<double> params = GvleLvitParams<double>::init(cfg, prng);
    Vocabulary vocab = build_vocab({"what is the red thing", "where is it"});

    Rng srng(21);
    std::vector<VqlaSample> samples;
    for (int i = 0; i < 3; ++i) {
        samples.push_back(feature_sample(srng, cfg, i % static_cast<int>(cfg.classes), "where is it"));
    }

    SUBCASE("output shapes are [batch x C] and [batch x 4]") {
        ModelBatch<double> batch = make_model_batch<double>(samples, {0, 1, 2}, vocab, cfg);
        ModelOutputs<double> out = model_forward(batch, params);
        CHECK(out.probabilities.shape() == Shape{3, cfg.classes});
        CHECK(out.boxes.shape() == Shape{3, 4});
        CHECK(out.logits.shape() == Shape{3, cfg.classes});
    }
    SUBCASE("permuting the batch permutes the outputs identically") {
        ModelBatch<double> fwd = make_model_batch<double>(samples, {0, 1, 2}, vocab, cfg);
        ModelBatch<double> rev = make_model_batch<double>(samples, {2, 0, 1}, vocab, cfg);
        ModelOutputs<double> a = model_forward(fwd, params);
        ModelOutputs<double> b = model_forward(rev, params);
        const std::size_t c = cfg.classes;
        const std::vector<std::pair<std::size_t, std::size_t>> pairs = {{0, 1}, {1, 2}, {2, 0}};
        for (auto [ai, bi] : pairs) {
            for (std::size_t j = 0; j < c; ++j) {
                CHECK(a.probabilities.at(ai * c + j) == doctest::Approx(b.probabilities.at(bi * c + j)).epsilon(1e-9));
            }
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(a.boxes.at(ai * 4 + j) == doctest::Approx(b.boxes.at(bi * 4 + j)).epsilon(1e-9));
            }
        }
    }
    SUBCASE("fused sequence lengths: gated P, concat L+P") {
        ModelBatch<double> batch = make_model_batch<double>(samples, {0, 1}, vocab, cfg);
        Tensor<double> e = embed_text(batch.token_ids, 2, params);
        Tensor<double> f = embed_visual(batch.visual, params);
        CHECK(gvle_fuse(f, e, params).shape() == Shape{2, cfg.patches, cfg.dim});
        CHECK(concat_fuse(f, e).shape() == Shape{2, cfg.seq_len + cfg.patches, cfg.dim});
    }
    SUBCASE("32-bit and 64-bit forwards agree within 1e-3") {
        GvleLvitParams<float> params32 = params.cast<float>();
        ModelBatch<double> b64 = make_model_batch<double>(samples, {0, 1, 2}, vocab, cfg);
        ModelBatch<float> b32 = make_model_batch<float>(samples, {0, 1, 2}, vocab, cfg);
        ModelOutputs<double> o64 = model_forward(b64, params);
        ModelOutputs<float> o32 = model_forward(b32, params32);
        for (std::size_t i = 0; i < o64.probabilities.size(); ++i) {
            CHECK(std::abs(o64.probabilities.at(i) - static_cast<double>(o32.probabilities.at(i))) < 1e-3);
        }
        for (std::size_t i = 0; i < o64.boxes.size(); ++i) {
            CHECK(std::abs(o64.boxes.at(i) - static_cast<double>(o32.boxes.at(i))) < 1e-3);
        }
    }
}

TEST_CASE("gate and output range laws over random evaluations") {
    GvleLvitParams<double> p = tiny_params<double>(30);
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor<double> f = random_tensor<double>({1, p.config.patches, p.config.dim}, rng, -3.0, 3.0);
        Tensor<double> e = random_tensor<double>({1, p.config.seq_len, p.config.dim}, rng, -3.0, 3.0);
        Tensor<double> fused = gvle_fuse(f, e, p);
        for (std::size_t i = 0; i < fused.size(); ++i) {
            CHECK(fused.at(i) >= -1.0);
            CHECK(fused.at(i) <= 1.0);
        }
    }
}

// Full-model gradient fidelity in 32-bit: float autodiff against a
// double-precision finite-difference oracle.
TEST_CASE("full-model 32-bit gradients within 1e-3") {
    const ModelConfig cfg = tiny_gradcheck_config(FusionStrategy::gated);
    Rng rng(40);
    GvleLvitParams<float> params = GvleLvitParams<float>::init(cfg, rng);
    ModelBatch<float> batch = make_gradcheck_batch<float>(cfg, rng);
    make_generic_gradcheck_point(params, batch);
    const LossWeights weights;

    params.zero_grads();
    {
        GradGraph<float> graph;
        ModelOutputs<float> out = model_forward(batch, params);
        LossParts<float> loss = total_loss(out.logits, out.boxes, batch.target_classes, batch.target_boxes, weights);
        graph.backward(loss.total);
    }

    // Mirror everything into doubles for the oracle side.
    GvleLvitParams<double> params64 = params.cast<double>();
    ModelBatch<double> batch64;
    batch64.batch = batch.batch;
    batch64.token_ids = batch.token_ids;
    batch64.visual = Tensor<double>(batch.visual.shape());
    for (std::size_t i = 0; i < batch.visual.size(); ++i) {
        batch64.visual.at(i) = static_cast<double>(batch.visual.at(i));
    }
    batch64.target_classes = batch.target_classes;
    batch64.target_boxes = Tensor<double>(batch.target_boxes.shape());
    for (std::size_t i = 0; i < batch.target_boxes.size(); ++i) {
        batch64.target_boxes.at(i) = static_cast<double>(batch.target_boxes.at(i));
    }
    batch64.target_boxes_norm = batch.target_boxes_norm;

    auto loss64 = [&]() {
        ModelOutputs<double> out = model_forward(batch64, params64);
        return total_loss(out.logits, out.boxes, batch64.target_classes, batch64.target_boxes, weights).total.item();
    };

    auto named32 = params.named_parameters();
    auto named64 = params64.named_parameters();
    const double h = 1e-5;
    for (std::size_t pi = 0; pi < named32.size(); ++pi) {
        auto& p32 = named32[pi].second;
        auto& p64 = named64[pi].second;
        std::vector<double> ad(p32.size(), 0.0);
        if (p32.has_grad()) {
            for (std::size_t i = 0; i < p32.size(); ++i) ad[i] = static_cast<double>(p32.grad_view()[i]);
        }
        std::vector<double> fd(p64.size());
        for (std::size_t i = 0; i < p64.size(); ++i) {
            const double keep = p64.at(i);
            p64.at(i) = keep + h;
            const double up = loss64();
            p64.at(i) = keep - h;
            const double down = loss64();
            p64.at(i) = keep;
            fd[i] = (up - down) / (2.0 * h);
        }
        INFO("parameter group ", named32[pi].first);
        CHECK(max_rel_err(ad, fd, 1e-3) < 1e-3);
    }
}
