#include "vqla/box.hpp"

#include <algorithm>
#include <stdexcept>

namespace vqla {

BoxXYXY to_xyxy(const BoxCXCYWH& b) {
    if (b.w < 0.0 || b.h < 0.0) {
        throw std::invalid_argument("to_xyxy: negative width/height (w=" + std::to_string(b.w) +
                                    ", h=" + std::to_string(b.h) + ")");
    }
    return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

BoxCXCYWH to_cxcywh(const BoxXYXY& b) {
    if (!b.valid()) {
        throw std::invalid_argument("to_cxcywh: min exceeds max in box [" + std::to_string(b.x_min) + ", " +
                                    std::to_string(b.y_min) + ", " + std::to_string(b.x_max) + ", " +
                                    std::to_string(b.y_max) + "]");
    }
    return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0, b.x_max - b.x_min, b.y_max - b.y_min};
}

BoxXYXY enclosing_box(const BoxXYXY& a, const BoxXYXY& b) {
    return {std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min), std::max(a.x_max, b.x_max),
            std::max(a.y_max, b.y_max)};
}

double iou(const BoxXYXY& a, const BoxXYXY& b) {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double giou(const BoxXYXY& a, const BoxXYXY& b) {
    const BoxXYXY enc = enclosing_box(a, b);
    const double enc_area = enc.area();
    if (enc_area <= 0.0) return 0.0;  // both boxes degenerate and coincident
    const double inter_w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double inter_h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    const double inter = (inter_w > 0.0 && inter_h > 0.0) ? inter_w * inter_h : 0.0;
    const double uni = a.area() + b.area() - inter;
    const double iou_v = uni > 0.0 ? inter / uni : 0.0;
    return iou_v - (enc_area - uni) / enc_area;
}

RasterEstimate rasterized_iou_oracle(const BoxXYXY& a, const BoxXYXY& b, int grid) {
    if (grid < 64) throw std::invalid_argument("rasterized_iou_oracle: grid must be >= 64");
    const BoxXYXY frame = enclosing_box(a, b);
    if (frame.area() <= 0.0) return {0.0, 0.0};
    const double cw = frame.width() / grid;
    const double ch = frame.height() / grid;
    long long in_a = 0, in_b = 0, in_both = 0;
    for (int gy = 0; gy < grid; ++gy) {
        const double y = frame.y_min + (gy + 0.5) * ch;
        const bool ya = y >= a.y_min && y <= a.y_max;
        const bool yb = y >= b.y_min && y <= b.y_max;
        if (!ya && !yb) continue;
        for (int gx = 0; gx < grid; ++gx) {
            const double x = frame.x_min + (gx + 0.5) * cw;
            const bool ina = ya && x >= a.x_min && x <= a.x_max;
            const bool inb = yb && x >= b.x_min && x <= b.x_max;
            in_a += ina;
            in_b += inb;
            in_both += ina && inb;
        }
    }
    const long long in_union = in_a + in_b - in_both;
    const long long total = static_cast<long long>(grid) * grid;
    RasterEstimate est;
    est.iou_est = in_union > 0 ? static_cast<double>(in_both) / static_cast<double>(in_union) : 0.0;
    est.giou_est = est.iou_est - static_cast<double>(total - in_union) / static_cast<double>(total);
    return est;
}

}  // namespace vqla
