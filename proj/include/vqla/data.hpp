#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqla/box.hpp"

namespace vqla {

// 8-bit RGB canvas, row-major, channel-last.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    bool operator==(const Image&) const = default;
};

// Precomputed visual feature sequence: `length` vectors of width `dim`.
struct FeatureSeq {
    std::size_t length = 0;
    std::size_t dim = 0;
    std::vector<float> values;

    bool operator==(const FeatureSeq&) const = default;
};

// One (visual input, question, answer, target box) record. The target box is
// stored in pixels and normalized by the frame size only at loss/metric time.
struct VqlaSample {
    std::string frame_id;
    std::optional<Image> image;
    std::optional<FeatureSeq> features;
    std::string question;
    std::string answer;
    int answer_class = -1;
    BoxXYXY target_box;
    int frame_width = 0;
    int frame_height = 0;
};

void validate_sample(const VqlaSample& s);

// Word-level vocabulary with reserved PAD=0 and UNK=1.
struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    std::vector<std::string> id_to_token{"<pad>", "<unk>"};
    std::unordered_map<std::string, int> token_to_id;

    std::size_t size() const { return id_to_token.size(); }
    int id_of(const std::string& token) const {
        auto it = token_to_id.find(token);
        return it == token_to_id.end() ? kUnk : it->second;
    }
};

// Lowercased, punctuation-stripped, whitespace-split words.
std::vector<std::string> split_words(const std::string& text);

// Ids by descending frequency, ties broken lexicographically.
Vocabulary build_vocab(const std::vector<std::string>& questions);

// Fixed-length id sequence: unknown words map to UNK, right-truncated or
// right-padded with PAD to exactly max_len.
std::vector<int> tokenize(const std::string& question, const Vocabulary& vocab, std::size_t max_len);

// Answer label -> class index, frozen in first-seen order over the training
// annotations.
struct ClassMap {
    std::vector<std::string> labels;
    std::unordered_map<std::string, int> index;

    std::size_t size() const { return labels.size(); }
    int intern(const std::string& label);
    int require(const std::string& label) const;  // DataError when absent
};

ClassMap build_class_map(const std::vector<VqlaSample>& samples);
void assign_answer_classes(std::vector<VqlaSample>& samples, const ClassMap& classes);

// Interaction targets: smallest box containing organ and tool.
BoxXYXY combined_target_box(const BoxXYXY& organ, const BoxXYXY& tool);

// ---------------------------------------------------------------------------
// File formats.
// ---------------------------------------------------------------------------

// JSON-lines annotations; image/features paths resolved relative to the file.
std::vector<VqlaSample> load_annotations(const std::string& path);

Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);

FeatureSeq read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const FeatureSeq& f);

// ---------------------------------------------------------------------------
// Synthetic scene/question generator.
// ---------------------------------------------------------------------------

struct SyntheticTaskConfig {
    int canvas = 64;
    std::vector<std::string> shapes = {"square", "circle", "triangle", "cross"};
    std::vector<std::string> colors = {"red", "green", "blue", "yellow", "magenta", "cyan"};
    std::size_t train_samples = 256;
    std::size_t val_samples = 64;
    std::uint64_t seed = 7;

    // Distinct answer labels the templates can emit:
    // shape identities + 4 location buckets + 4 relation buckets.
    std::size_t class_count() const { return shapes.size() + 8; }
};

// All shape kinds the renderer knows; configs pick a subset by name.
const std::vector<std::string>& known_shapes();
const std::vector<std::string>& known_colors();

struct SyntheticSplits {
    std::vector<VqlaSample> train;
    std::vector<VqlaSample> val;
};

SyntheticSplits generate_synthetic_dataset(const SyntheticTaskConfig& config);

// Location bucket for a shape center: argmax of the displacement from the
// canvas center over {left, right, top, bottom}, ties in that order.
std::string location_bucket(double cx, double cy, double canvas_w, double canvas_h);

// Relation of center 1 with respect to center 2, buckets
// {left_of, right_of, above, below} with the same argmax/tie rule.
std::string relation_bucket(double c1x, double c1y, double c2x, double c2y);

// ---------------------------------------------------------------------------
// Batching.
// ---------------------------------------------------------------------------

// Deterministically shuffled index batches; the final partial batch is kept.
// Fails on an empty dataset or heterogeneous visual sources.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<VqlaSample>& samples, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed);

void validate_homogeneous(const std::vector<VqlaSample>& samples);

}  // namespace vqla
