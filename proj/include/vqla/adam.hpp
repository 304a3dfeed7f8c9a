#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vqla/tensor.hpp"

namespace vqla {

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed list of named parameters. Gradients are
// left untouched; the caller zeroes them between steps.
template <typename T>
class Adam {
public:
    Adam(std::vector<std::pair<std::string, Tensor<T>>> params, AdamConfig cfg)
        : cfg_(cfg), params_(std::move(params)) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (auto& [name, p] : params_) {
            (void)name;
            m_.emplace_back(p.size(), T(0));
            v_.emplace_back(p.size(), T(0));
        }
    }

    std::int64_t step_count() const { return t_; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& [name, p] = params_[pi];
            if (!p.has_grad()) {
                throw std::runtime_error("adam_step: parameter '" + name + "' has no gradient");
            }
            const std::vector<T>& g = p.grad_view();
            std::vector<T>& m = m_[pi];
            std::vector<T>& v = v_[pi];
            std::vector<T>& x = p.data();
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
                const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                x[i] = static_cast<T>(static_cast<double>(x[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
        }
    }

    void zero_grad() {
        for (auto& [name, p] : params_) {
            (void)name;
            p.zero_grad();
        }
    }

    // Moment access for checkpoint/resume.
    std::vector<std::vector<T>>& first_moments() { return m_; }
    std::vector<std::vector<T>>& second_moments() { return v_; }
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    AdamConfig cfg_;
    std::vector<std::pair<std::string, Tensor<T>>> params_;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
    std::int64_t t_ = 0;
};

}  // namespace vqla
