#ifndef EEGDM_NN_HPP
#define EEGDM_NN_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "eegdm/autodiff.hpp"

namespace eegdm {

Mat xavier_uniform(int rows, int cols, Rng& rng);

// Ties persistent parameter tensors to their per-step graph leaves so that
// gradients can be read back after a backward pass.
struct Bindings {
    std::vector<std::pair<Mat*, ad::Var>> entries;

    ad::Var bind(ad::Graph& g, Mat& m) {
        ad::Var v = g.param(m);
        entries.push_back({&m, v});
        return v;
    }

    // (parameter, gradient) pairs; untouched parameters get zero gradients.
    std::vector<std::pair<Mat*, const Mat*>> grads() const {
        std::vector<std::pair<Mat*, const Mat*>> out;
        out.reserve(entries.size());
        for (const auto& [m, v] : entries) {
            if (v->grad.size() == 0) v->grad = Mat::Zero(m->rows(), m->cols());
            out.push_back({m, &v->grad});
        }
        return out;
    }
};

class Adam {
  public:
    explicit Adam(double lr) : lr_(lr) {}

    double learning_rate() const { return lr_; }

    void step(const std::vector<std::pair<Mat*, const Mat*>>& params) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, double(t_));
        const double c2 = 1.0 - std::pow(beta2_, double(t_));
        for (const auto& [p, g] : params) {
            auto& s = state_[p];
            if (s.m.size() == 0) {
                s.m = Mat::Zero(p->rows(), p->cols());
                s.v = Mat::Zero(p->rows(), p->cols());
            }
            s.m = beta1_ * s.m + (1.0 - beta1_) * (*g);
            s.v = beta2_ * s.v + (1.0 - beta2_) * g->cwiseProduct(*g);
            Mat mhat = s.m / c1;
            Mat vhat = s.v / c2;
            *p -= lr_ * mhat.cwiseQuotient(vhat.cwiseSqrt().array().matrix() +
                                            Mat::Constant(p->rows(), p->cols(), eps_));
        }
    }

  private:
    struct State {
        Mat m, v;
    };
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int64_t t_ = 0;
    std::unordered_map<const Mat*, State> state_;
};

}  // namespace eegdm

#endif
