#pragma once

#include <vector>

#include "vqla/ops.hpp"
#include "vqla/tensor.hpp"

namespace vqla {

// Corner-form axis-aligned box. Coordinate units (pixels or normalized) are
// carried by context, not by the type.
struct BoxXYXY {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_min <= x_max && y_min <= y_max; }

    bool operator==(const BoxXYXY&) const = default;
};

// Center-size form.
struct BoxCXCYWH {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const BoxCXCYWH&) const = default;
};

BoxXYXY to_xyxy(const BoxCXCYWH& b);
BoxCXCYWH to_cxcywh(const BoxXYXY& b);

// Smallest box containing both inputs (the enclosing-box operation used by
// GIoU and by combined interaction targets).
BoxXYXY enclosing_box(const BoxXYXY& a, const BoxXYXY& b);

// Intersection over union; 0 for disjoint boxes and when both areas are 0.
double iou(const BoxXYXY& a, const BoxXYXY& b);

// Generalized IoU in [-1, 1]: iou minus the empty fraction of the enclosing
// box. Both boxes degenerate and coincident is defined as 0.
double giou(const BoxXYXY& a, const BoxXYXY& b);

// Estimate (iou, giou) by classifying the centers of a grid x grid
// rasterization of the enclosing box. Independent check for the analytic
// formulas; converges as the grid grows.
struct RasterEstimate {
    double iou_est = 0.0;
    double giou_est = 0.0;
};
RasterEstimate rasterized_iou_oracle(const BoxXYXY& a, const BoxXYXY& b, int grid);

// ---------------------------------------------------------------------------
// Differentiable batch losses over [batch x 4] cxcywh tensors.
// ---------------------------------------------------------------------------

namespace detail {

// Split [batch x 4] cxcywh into xyxy columns, clamping w/h at zero.
template <typename T>
struct XyxyCols {
    Tensor<T> x0, y0, x1, y1;
};

template <typename T>
XyxyCols<T> cxcywh_cols_to_xyxy(const Tensor<T>& boxes) {
    if (boxes.rank() != 2 || boxes.shape()[1] != 4) {
        throw std::invalid_argument("box loss: expected [batch x 4] boxes, got " + shape_str(boxes.shape()));
    }
    Tensor<T> cx = narrow(boxes, 1, 0, 1);
    Tensor<T> cy = narrow(boxes, 1, 1, 1);
    Tensor<T> w = relu(narrow(boxes, 1, 2, 1));
    Tensor<T> h = relu(narrow(boxes, 1, 3, 1));
    Tensor<T> hw = mul_scalar(w, T(0.5));
    Tensor<T> hh = mul_scalar(h, T(0.5));
    return {sub(cx, hw), sub(cy, hh), add(cx, hw), add(cy, hh)};
}

}  // namespace detail

// Mean over the batch of 1 - giou(pred, gt). Differentiable w.r.t. pred;
// denominators carry a tiny epsilon so the coincident-degenerate case yields
// giou 0 (loss 1) instead of dividing by zero.
template <typename T>
Tensor<T> giou_loss(const Tensor<T>& pred_cxcywh, const Tensor<T>& gt_cxcywh) {
    if (pred_cxcywh.shape() != gt_cxcywh.shape()) {
        throw std::invalid_argument("giou_loss: shape mismatch " + shape_str(pred_cxcywh.shape()) + " vs " +
                                    shape_str(gt_cxcywh.shape()));
    }
    constexpr T eps = T(1e-12);
    auto p = detail::cxcywh_cols_to_xyxy(pred_cxcywh);
    auto g = detail::cxcywh_cols_to_xyxy(gt_cxcywh);

    Tensor<T> iw = relu(sub(minimum(p.x1, g.x1), maximum(p.x0, g.x0)));
    Tensor<T> ih = relu(sub(minimum(p.y1, g.y1), maximum(p.y0, g.y0)));
    Tensor<T> inter = mul(iw, ih);

    Tensor<T> area_p = mul(sub(p.x1, p.x0), sub(p.y1, p.y0));
    Tensor<T> area_g = mul(sub(g.x1, g.x0), sub(g.y1, g.y0));
    Tensor<T> uni = sub(add(area_p, area_g), inter);

    Tensor<T> ew = sub(maximum(p.x1, g.x1), minimum(p.x0, g.x0));
    Tensor<T> eh = sub(maximum(p.y1, g.y1), minimum(p.y0, g.y0));
    Tensor<T> enclose = mul(ew, eh);

    Tensor<T> iou_t = div(inter, add_scalar(uni, eps));
    Tensor<T> penalty = div(sub(enclose, uni), add_scalar(enclose, eps));
    Tensor<T> giou_t = sub(iou_t, penalty);
    return mean(sub(Tensor<T>::full(giou_t.shape(), T(1)), giou_t));
}

// Mean absolute difference over the 4 components, averaged over the batch.
template <typename T>
Tensor<T> l1_box_loss(const Tensor<T>& pred_cxcywh, const Tensor<T>& gt_cxcywh) {
    if (pred_cxcywh.shape() != gt_cxcywh.shape()) {
        throw std::invalid_argument("l1_box_loss: shape mismatch " + shape_str(pred_cxcywh.shape()) + " vs " +
                                    shape_str(gt_cxcywh.shape()));
    }
    return mean(abs(sub(pred_cxcywh, gt_cxcywh)));
}

}  // namespace vqla
