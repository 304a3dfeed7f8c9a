#include "vqla/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "vqla/errors.hpp"
#include "vqla/rng.hpp"

namespace vqla {

using nlohmann::json;

void validate_sample(const VqlaSample& s) {
    const auto& b = s.target_box;
    if (s.frame_width <= 0 || s.frame_height <= 0) {
        throw DataError("sample '" + s.frame_id + "': frame size must be positive");
    }
    if (!(b.x_min >= 0.0)) throw DataError("sample '" + s.frame_id + "': x_min must be >= 0");
    if (!(b.x_min < b.x_max)) throw DataError("sample '" + s.frame_id + "': x_min must be < x_max");
    if (!(b.x_max <= s.frame_width)) throw DataError("sample '" + s.frame_id + "': x_max must be <= width");
    if (!(b.y_min >= 0.0)) throw DataError("sample '" + s.frame_id + "': y_min must be >= 0");
    if (!(b.y_min < b.y_max)) throw DataError("sample '" + s.frame_id + "': y_min must be < y_max");
    if (!(b.y_max <= s.frame_height)) throw DataError("sample '" + s.frame_id + "': y_max must be <= height");
    if (s.image && s.features) {
        throw DataError("sample '" + s.frame_id + "': both image and features present");
    }
}

std::vector<std::string> split_words(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cleaned.push_back(static_cast<char>(std::tolower(c)));
        } else {
            cleaned.push_back(' ');
        }
    }
    std::vector<std::string> words;
    std::istringstream is(cleaned);
    std::string w;
    while (is >> w) words.push_back(w);
    return words;
}

Vocabulary build_vocab(const std::vector<std::string>& questions) {
    if (questions.empty()) throw DataError("build_vocab: empty corpus");
    std::map<std::string, std::size_t> freq;
    for (const std::string& q : questions) {
        for (const std::string& w : split_words(q)) ++freq[w];
    }
    std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary vocab;
    for (const auto& [token, count] : entries) {
        (void)count;
        vocab.token_to_id[token] = static_cast<int>(vocab.id_to_token.size());
        vocab.id_to_token.push_back(token);
    }
    return vocab;
}

std::vector<int> tokenize(const std::string& question, const Vocabulary& vocab, std::size_t max_len) {
    if (max_len == 0) throw DataError("tokenize: max_len must be >= 1");
    std::vector<int> ids;
    ids.reserve(max_len);
    for (const std::string& w : split_words(question)) {
        if (ids.size() == max_len) break;
        ids.push_back(vocab.id_of(w));
    }
    while (ids.size() < max_len) ids.push_back(Vocabulary::kPad);
    return ids;
}

int ClassMap::intern(const std::string& label) {
    auto it = index.find(label);
    if (it != index.end()) return it->second;
    const int id = static_cast<int>(labels.size());
    labels.push_back(label);
    index[label] = id;
    return id;
}

int ClassMap::require(const std::string& label) const {
    auto it = index.find(label);
    if (it == index.end()) throw DataError("answer label '" + label + "' not present in the frozen class map");
    return it->second;
}

ClassMap build_class_map(const std::vector<VqlaSample>& samples) {
    ClassMap map;
    for (const VqlaSample& s : samples) map.intern(s.answer);
    return map;
}

void assign_answer_classes(std::vector<VqlaSample>& samples, const ClassMap& classes) {
    for (VqlaSample& s : samples) s.answer_class = classes.require(s.answer);
}

BoxXYXY combined_target_box(const BoxXYXY& organ, const BoxXYXY& tool) { return enclosing_box(organ, tool); }

// ---------------------------------------------------------------------------
// File formats.
// ---------------------------------------------------------------------------

std::vector<VqlaSample> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotation file '" + path + "'");
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::vector<VqlaSample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        VqlaSample s;
        try {
            s.frame_id = rec.at("frame_id").get<std::string>();
            s.frame_width = rec.at("width").get<int>();
            s.frame_height = rec.at("height").get<int>();
            s.question = rec.at("question").get<std::string>();
            s.answer = rec.at("answer").get<std::string>();
            const auto& bbox = rec.at("bbox");
            if (!bbox.is_array() || bbox.size() != 4) {
                throw DataError("bbox must be an array of 4 reals");
            }
            s.target_box = {bbox[0].get<double>(), bbox[1].get<double>(), bbox[2].get<double>(),
                            bbox[3].get<double>()};
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        try {
            if (rec.contains("image") && !rec["image"].is_null()) {
                s.image = read_ppm((base / rec["image"].get<std::string>()).string());
            }
            if (rec.contains("features") && !rec["features"].is_null()) {
                s.features = read_feature_file((base / rec["features"].get<std::string>()).string());
            }
            validate_sample(s);
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P6") throw DataError("image '" + path + "' is not a binary PPM (P6)");
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval != 255) {
        throw DataError("image '" + path + "' has an unsupported PPM header");
    }
    in.get();  // single whitespace after header
    Image img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
        throw DataError("image '" + path + "' is truncated");
    }
    return img;
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image '" + path + "'");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!out) throw DataError("failed writing image '" + path + "'");
}

namespace {

std::uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

FeatureSeq read_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "VQLF", 4) != 0) {
        throw DataError("feature file '" + path + "' has a bad magic (expected VQLF)");
    }
    FeatureSeq f;
    f.length = read_u32_le(in);
    f.dim = read_u32_le(in);
    if (!in || f.length == 0 || f.dim == 0) {
        throw DataError("feature file '" + path + "' has an invalid header");
    }
    f.values.resize(f.length * f.dim);
    in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * 4));
    if (in.gcount() != static_cast<std::streamsize>(f.values.size() * 4)) {
        throw DataError("feature file '" + path + "' is truncated");
    }
    return f;
}

void write_feature_file(const std::string& path, const FeatureSeq& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature file '" + path + "'");
    out.write("VQLF", 4);
    write_u32_le(out, static_cast<std::uint32_t>(f.length));
    write_u32_le(out, static_cast<std::uint32_t>(f.dim));
    out.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * 4));
    if (!out) throw DataError("failed writing feature file '" + path + "'");
}

// ---------------------------------------------------------------------------
// Synthetic scenes.
// ---------------------------------------------------------------------------

namespace {

struct ColorRgb {
    std::uint8_t r, g, b;
};

const std::vector<std::pair<std::string, ColorRgb>>& color_table() {
    static const std::vector<std::pair<std::string, ColorRgb>> table = {
        {"red", {220, 40, 40}},     {"green", {40, 200, 60}},   {"blue", {50, 80, 220}},
        {"yellow", {230, 220, 50}}, {"magenta", {210, 60, 200}}, {"cyan", {60, 210, 210}},
        {"orange", {235, 140, 30}}, {"white", {235, 235, 235}},
    };
    return table;
}

// Every mask touches all four edges of its box, so the sampled box is the
// tight bounding box of the drawn pixels.
bool shape_mask(const std::string& kind, double u, double v, double w, double h) {
    const double nu = (u + 0.5) / w;  // (0,1) across the box
    const double nv = (v + 0.5) / h;
    const double du = nu - 0.5;
    const double dv = nv - 0.5;
    if (kind == "square") return true;
    if (kind == "circle") return du * du + dv * dv <= 0.25;
    if (kind == "triangle") return std::abs(du) <= 0.5 * nv;
    if (kind == "cross") return std::abs(du) <= 1.0 / 6.0 || std::abs(dv) <= 1.0 / 6.0;
    if (kind == "diamond") return std::abs(du) + std::abs(dv) <= 0.5;
    if (kind == "ring") {
        const double r2 = du * du + dv * dv;
        return r2 <= 0.25 && r2 >= 0.0625;
    }
    if (kind == "hourglass") return std::abs(du) <= std::abs(dv);
    if (kind == "checker") return (du < 0.0) == (dv < 0.0);
    if (kind == "frame") return std::abs(du) >= 0.25 || std::abs(dv) >= 0.25;
    if (kind == "stripes") return nu <= 0.2 || (nu >= 0.4 && nu <= 0.6) || nu >= 0.8;
    throw DataError("unknown shape kind '" + kind + "'");
}

struct PlacedShape {
    std::string kind;
    std::string color;
    int x0, y0, w, h;
    double cx() const { return x0 + w / 2.0; }
    double cy() const { return y0 + h / 2.0; }
    BoxXYXY box() const {
        return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0 + w),
                static_cast<double>(y0 + h)};
    }
};

bool boxes_overlap(const PlacedShape& a, const PlacedShape& b) {
    return a.x0 < b.x0 + b.w && b.x0 < a.x0 + a.w && a.y0 < b.y0 + b.h && b.y0 < a.y0 + a.h;
}

void draw_shape(Image& img, const PlacedShape& s) {
    ColorRgb rgb{200, 200, 200};
    for (const auto& [name, c] : color_table()) {
        if (name == s.color) rgb = c;
    }
    for (int v = 0; v < s.h; ++v) {
        for (int u = 0; u < s.w; ++u) {
            if (!shape_mask(s.kind, u, v, s.w, s.h)) continue;
            const std::size_t idx = (static_cast<std::size_t>(s.y0 + v) * img.width + (s.x0 + u)) * 3;
            img.rgb[idx] = rgb.r;
            img.rgb[idx + 1] = rgb.g;
            img.rgb[idx + 2] = rgb.b;
        }
    }
}

std::vector<PlacedShape> place_shapes(const SyntheticTaskConfig& cfg, std::size_t count, Rng& rng) {
    const int lo = std::max(4, cfg.canvas * 7 / 32);
    const int hi = std::max(lo, cfg.canvas * 7 / 16);
    // Distinct shape kinds and colors so questions identify shapes uniquely.
    std::vector<std::size_t> shape_idx(cfg.shapes.size());
    for (std::size_t i = 0; i < shape_idx.size(); ++i) shape_idx[i] = i;
    rng.shuffle(shape_idx);
    std::vector<std::size_t> color_idx(cfg.colors.size());
    for (std::size_t i = 0; i < color_idx.size(); ++i) color_idx[i] = i;
    rng.shuffle(color_idx);

    std::vector<PlacedShape> placed;
    for (std::size_t i = 0; i < count; ++i) {
        PlacedShape s;
        s.kind = cfg.shapes[shape_idx[i]];
        s.color = cfg.colors[color_idx[i]];
        bool ok = false;
        for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
            s.w = static_cast<int>(rng.next_int(lo, hi));
            s.h = static_cast<int>(rng.next_int(lo, hi));
            s.x0 = static_cast<int>(rng.next_int(0, cfg.canvas - s.w));
            s.y0 = static_cast<int>(rng.next_int(0, cfg.canvas - s.h));
            ok = true;
            for (const PlacedShape& other : placed) ok = ok && !boxes_overlap(s, other);
        }
        if (!ok) {
            throw DataError("cannot place " + std::to_string(count) + " non-overlapping shapes on a " +
                            std::to_string(cfg.canvas) + "px canvas");
        }
        placed.push_back(s);
    }
    return placed;
}

VqlaSample make_sample(const SyntheticTaskConfig& cfg, const std::string& frame_id, Rng& rng) {
    const int kind = static_cast<int>(rng.next_below(3));  // 0 identity, 1 location, 2 interaction
    const std::size_t n_shapes = kind == 2 ? 2 : 1 + rng.next_below(2);
    std::vector<PlacedShape> shapes = place_shapes(cfg, n_shapes, rng);

    VqlaSample s;
    s.frame_id = frame_id;
    s.frame_width = cfg.canvas;
    s.frame_height = cfg.canvas;
    Image img;
    img.width = cfg.canvas;
    img.height = cfg.canvas;
    img.rgb.assign(static_cast<std::size_t>(cfg.canvas) * cfg.canvas * 3, 24);
    for (const PlacedShape& sh : shapes) draw_shape(img, sh);
    s.image = std::move(img);

    if (kind == 0) {
        const PlacedShape& target = shapes[rng.next_below(shapes.size())];
        s.question = "what is the " + target.color + " object";
        s.answer = target.kind;
        s.target_box = target.box();
    } else if (kind == 1) {
        const PlacedShape& target = shapes[rng.next_below(shapes.size())];
        s.question = "where is the " + target.kind;
        s.answer = location_bucket(target.cx(), target.cy(), cfg.canvas, cfg.canvas);
        s.target_box = target.box();
    } else {
        const PlacedShape& a = shapes[0];
        const PlacedShape& b = shapes[1];
        s.question = "what is the relation between the " + a.color + " " + a.kind + " and the " + b.color + " " +
                     b.kind;
        s.answer = relation_bucket(a.cx(), a.cy(), b.cx(), b.cy());
        s.target_box = combined_target_box(a.box(), b.box());
    }
    validate_sample(s);
    return s;
}

}  // namespace

const std::vector<std::string>& known_shapes() {
    static const std::vector<std::string> kinds = {"square",    "circle",  "triangle", "cross",   "diamond",
                                                   "ring",      "hourglass", "checker",  "frame",   "stripes"};
    return kinds;
}

const std::vector<std::string>& known_colors() {
    static std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, rgb] : color_table()) {
            (void)rgb;
            out.push_back(name);
        }
        return out;
    }();
    return names;
}

std::string location_bucket(double cx, double cy, double canvas_w, double canvas_h) {
    const double dx = cx - canvas_w / 2.0;
    const double dy = cy - canvas_h / 2.0;
    const std::pair<std::string, double> candidates[] = {
        {"left", -dx}, {"right", dx}, {"top", -dy}, {"bottom", dy}};
    std::string best = candidates[0].first;
    double best_v = candidates[0].second;
    for (const auto& [name, v] : candidates) {
        if (v > best_v) {
            best = name;
            best_v = v;
        }
    }
    return best;
}

std::string relation_bucket(double c1x, double c1y, double c2x, double c2y) {
    const double dx = c1x - c2x;
    const double dy = c1y - c2y;
    const std::pair<std::string, double> candidates[] = {
        {"left_of", -dx}, {"right_of", dx}, {"above", -dy}, {"below", dy}};
    std::string best = candidates[0].first;
    double best_v = candidates[0].second;
    for (const auto& [name, v] : candidates) {
        if (v > best_v) {
            best = name;
            best_v = v;
        }
    }
    return best;
}

SyntheticSplits generate_synthetic_dataset(const SyntheticTaskConfig& cfg) {
    if (cfg.canvas < 8) throw DataError("synthetic config: canvas must be >= 8");
    if (cfg.shapes.size() < 2) throw DataError("synthetic config: need at least 2 shape kinds");
    if (cfg.colors.size() < 2) throw DataError("synthetic config: need at least 2 colors");
    for (const std::string& s : cfg.shapes) {
        if (std::find(known_shapes().begin(), known_shapes().end(), s) == known_shapes().end()) {
            throw DataError("synthetic config: unknown shape '" + s + "'");
        }
    }
    Rng rng(cfg.seed);
    SyntheticSplits splits;
    splits.train.reserve(cfg.train_samples);
    for (std::size_t i = 0; i < cfg.train_samples; ++i) {
        splits.train.push_back(make_sample(cfg, "syn-train-" + std::to_string(i), rng));
    }
    splits.val.reserve(cfg.val_samples);
    for (std::size_t i = 0; i < cfg.val_samples; ++i) {
        splits.val.push_back(make_sample(cfg, "syn-val-" + std::to_string(i), rng));
    }
    return splits;
}

// ---------------------------------------------------------------------------
// Batching.
// ---------------------------------------------------------------------------

void validate_homogeneous(const std::vector<VqlaSample>& samples) {
    if (samples.empty()) return;
    const bool use_image = samples[0].image.has_value();
    const bool use_features = samples[0].features.has_value();
    for (const VqlaSample& s : samples) {
        if (s.image.has_value() != use_image || s.features.has_value() != use_features) {
            throw DataError("heterogeneous visual sources: sample '" + s.frame_id +
                            "' differs from the first sample");
        }
        if (use_image && (s.image->width != samples[0].image->width || s.image->height != samples[0].image->height)) {
            throw DataError("heterogeneous visual sources: sample '" + s.frame_id + "' has a different image size");
        }
        if (use_features &&
            (s.features->length != samples[0].features->length || s.features->dim != samples[0].features->dim)) {
            throw DataError("heterogeneous visual sources: sample '" + s.frame_id +
                            "' has a different feature shape");
        }
    }
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<VqlaSample>& samples, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed) {
    if (samples.empty()) throw DataError("make_batches: empty dataset");
    if (batch_size == 0) throw DataError("make_batches: batch_size must be positive");
    validate_homogeneous(samples);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (shuffle_seed) {
        Rng rng(*shuffle_seed);
        rng.shuffle(order);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace vqla
