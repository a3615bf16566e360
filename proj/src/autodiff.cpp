#include "eegdm/autodiff.hpp"

namespace eegdm::ad {

void accumulate(Node& node, const Mat& g) {
    if (!node.needs_grad) return;
    if (node.grad.size() == 0)
        node.grad = g;
    else
        node.grad += g;
}

Var Graph::constant(Mat v) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    tape.push_back(n);
    return n;
}

Var Graph::param(const Mat& v) {
    auto n = std::make_shared<Node>();
    n->val = v;
    n->needs_grad = grad_enabled;
    tape.push_back(n);
    return n;
}

Var Graph::make(Mat val, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    if (grad_enabled) {
        bool need = false;
        for (const auto& p : parents)
            if (p->needs_grad) need = true;
        if (need) {
            n->needs_grad = true;
            n->parents = std::move(parents);
            n->backprop = std::move(backprop);
        }
    }
    tape.push_back(n);
    return n;
}

void Graph::backward(const Var& loss) {
    if (loss->val.rows() != 1 || loss->val.cols() != 1)
        throw NumericError("backward target must be scalar");
    loss->grad = Mat::Ones(1, 1);
    for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
        Node& n = **it;
        if (n.needs_grad && n.backprop && n.grad.size() != 0) n.backprop(n);
    }
}

Var add(Graph& g, const Var& a, const Var& b) {
    return g.make(a->val + b->val, {a, b}, [a = a.get(), b = b.get()](Node& n) {
        accumulate(*a, n.grad);
        accumulate(*b, n.grad);
    });
}

Var sub(Graph& g, const Var& a, const Var& b) {
    return g.make(a->val - b->val, {a, b}, [a = a.get(), b = b.get()](Node& n) {
        accumulate(*a, n.grad);
        accumulate(*b, -n.grad);
    });
}

Var mul(Graph& g, const Var& a, const Var& b) {
    return g.make(a->val.cwiseProduct(b->val), {a, b},
                  [a = a.get(), b = b.get()](Node& n) {
                      accumulate(*a, n.grad.cwiseProduct(b->val));
                      accumulate(*b, n.grad.cwiseProduct(a->val));
                  });
}

Var scalar_mul(Graph& g, const Var& a, double c) {
    return g.make(a->val * c, {a}, [a = a.get(), c](Node& n) { accumulate(*a, n.grad * c); });
}

Var add_scalar(Graph& g, const Var& a, double c) {
    return g.make(a->val.array() + c, {a}, [a = a.get()](Node& n) { accumulate(*a, n.grad); });
}

Var matmul(Graph& g, const Var& a, const Var& b) {
    return g.make(a->val * b->val, {a, b}, [a = a.get(), b = b.get()](Node& n) {
        accumulate(*a, n.grad * b->val.transpose());
        accumulate(*b, a->val.transpose() * n.grad);
    });
}

Var linear(Graph& g, const Var& x, const Var& w, const Var& b) {
    Mat y = x->val * w->val;
    y.rowwise() += b->val.row(0);
    return g.make(std::move(y), {x, w, b}, [x = x.get(), w = w.get(), b = b.get()](Node& n) {
        accumulate(*x, n.grad * w->val.transpose());
        accumulate(*w, x->val.transpose() * n.grad);
        accumulate(*b, n.grad.colwise().sum());
    });
}

namespace {

struct LnCache {
    Mat normed;
    Vec inv_std;
};

LnCache ln_forward(const Mat& x, double eps) {
    LnCache c;
    const int rows = int(x.rows()), cols = int(x.cols());
    c.normed = Mat(rows, cols);
    c.inv_std = Vec(rows);
    for (int r = 0; r < rows; ++r) {
        double mean = x.row(r).mean();
        double var = (x.row(r).array() - mean).square().mean();
        double inv = 1.0 / std::sqrt(var + eps);
        c.inv_std(r) = inv;
        c.normed.row(r) = (x.row(r).array() - mean) * inv;
    }
    return c;
}

// dL/dx for y = normalize(x) given dL/dy.
Mat ln_backward(const LnCache& c, const Mat& dy) {
    const int rows = int(dy.rows()), cols = int(dy.cols());
    Mat dx(rows, cols);
    for (int r = 0; r < rows; ++r) {
        double mean_dy = dy.row(r).mean();
        double mean_dyy = dy.row(r).cwiseProduct(c.normed.row(r)).mean();
        dx.row(r) =
            (c.inv_std(r) * (dy.row(r).array() - mean_dy - c.normed.row(r).array() * mean_dyy))
                .matrix();
    }
    return dx;
}

}  // namespace

Var layernorm(Graph& g, const Var& x, double eps) {
    auto cache = std::make_shared<LnCache>(ln_forward(x->val, eps));
    Mat y = cache->normed;
    return g.make(std::move(y), {x}, [x = x.get(), cache](Node& n) {
        accumulate(*x, ln_backward(*cache, n.grad));
    });
}

Var layernorm_affine(Graph& g, const Var& x, const Var& gamma, const Var& beta, double eps) {
    auto cache = std::make_shared<LnCache>(ln_forward(x->val, eps));
    Mat y = cache->normed;
    y.array().rowwise() *= gamma->val.row(0).array();
    y.rowwise() += beta->val.row(0);
    return g.make(std::move(y), {x, gamma, beta},
                  [x = x.get(), gm = gamma.get(), bt = beta.get(), cache](Node& n) {
                      accumulate(*bt, n.grad.colwise().sum());
                      accumulate(*gm, n.grad.cwiseProduct(cache->normed).colwise().sum());
                      Mat dnorm = n.grad.array().rowwise() * gm->val.row(0).array();
                      accumulate(*x, ln_backward(*cache, dnorm));
                  });
}

Var gelu(Graph& g, const Var& x) {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
    Mat y = x->val.unaryExpr([&](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
    return g.make(std::move(y), {x}, [x = x.get(), inv_sqrt2, inv_sqrt2pi](Node& n) {
        Mat d = x->val.unaryExpr([&](double v) {
            return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
        });
        accumulate(*x, n.grad.cwiseProduct(d));
    });
}

Var silu(Graph& g, const Var& x) {
    Mat y = x->val.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
    return g.make(std::move(y), {x}, [x = x.get()](Node& n) {
        Mat d = x->val.unaryExpr([](double v) {
            double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 + v * (1.0 - s));
        });
        accumulate(*x, n.grad.cwiseProduct(d));
    });
}

Var exp(Graph& g, const Var& x) {
    Mat y = x->val.array().exp();
    return g.make(y, {x}, [x = x.get(), y](Node& n) { accumulate(*x, n.grad.cwiseProduct(y)); });
}

Var square(Graph& g, const Var& x) {
    return g.make(x->val.array().square(), {x}, [x = x.get()](Node& n) {
        accumulate(*x, 2.0 * n.grad.cwiseProduct(x->val));
    });
}

Var mean_all(Graph& g, const Var& x) {
    Mat y(1, 1);
    y(0, 0) = x->val.mean();
    double inv = 1.0 / double(x->val.size());
    return g.make(std::move(y), {x}, [x = x.get(), inv](Node& n) {
        accumulate(*x, Mat::Constant(x->val.rows(), x->val.cols(), n.grad(0, 0) * inv));
    });
}

Var sum_all(Graph& g, const Var& x) {
    Mat y(1, 1);
    y(0, 0) = x->val.sum();
    return g.make(std::move(y), {x}, [x = x.get()](Node& n) {
        accumulate(*x, Mat::Constant(x->val.rows(), x->val.cols(), n.grad(0, 0)));
    });
}

Var mha(Graph& g, const Var& x, const Var& w_qkv, const Var& b_qkv, const Var& w_out,
        const Var& b_out, int heads, int seq_len) {
    const int d = int(x->val.cols());
    if (d % heads != 0) throw ConfigError("embed dim not divisible by heads");
    if (x->val.rows() % seq_len != 0) throw ConfigError("rows not divisible by seq_len");
    const int dh = d / heads;
    const int batch = int(x->val.rows()) / seq_len;
    const double scale = 1.0 / std::sqrt(double(dh));

    struct Cache {
        std::vector<Mat> qkv;      // per sample, S x 3d
        std::vector<Mat> probs;    // per sample*head, S x S
        std::vector<Mat> concat;   // per sample, S x d (pre-projection)
    };
    auto cache = std::make_shared<Cache>();
    cache->qkv.resize(batch);
    cache->probs.resize(size_t(batch) * heads);
    cache->concat.resize(batch);

    Mat y(x->val.rows(), d);
    for (int b = 0; b < batch; ++b) {
        Mat qkv = x->val.middleRows(b * seq_len, seq_len) * w_qkv->val;
        qkv.rowwise() += b_qkv->val.row(0);
        Mat concat(seq_len, d);
        for (int h = 0; h < heads; ++h) {
            auto Q = qkv.block(0, h * dh, seq_len, dh);
            auto K = qkv.block(0, d + h * dh, seq_len, dh);
            auto V = qkv.block(0, 2 * d + h * dh, seq_len, dh);
            Mat scores = Q * K.transpose() * scale;
            Mat probs(seq_len, seq_len);
            for (int r = 0; r < seq_len; ++r) {
                double m = scores.row(r).maxCoeff();
                Eigen::ArrayXd e = (scores.row(r).array() - m).exp();
                probs.row(r) = (e / e.sum()).matrix();
            }
            concat.block(0, h * dh, seq_len, dh) = probs * V;
            cache->probs[size_t(b) * heads + h] = std::move(probs);
        }
        Mat out = concat * w_out->val;
        out.rowwise() += b_out->val.row(0);
        y.middleRows(b * seq_len, seq_len) = out;
        cache->qkv[b] = std::move(qkv);
        cache->concat[b] = std::move(concat);
    }

    return g.make(std::move(y), {x, w_qkv, b_qkv, w_out, b_out},
                  [x = x.get(), wq = w_qkv.get(), bq = b_qkv.get(), wo = w_out.get(),
                   bo = b_out.get(), cache, heads, seq_len, d, dh, batch, scale](Node& n) {
                      Mat dx = Mat::Zero(x->val.rows(), d);
                      Mat dwq = Mat::Zero(d, 3 * d);
                      Mat dbq = Mat::Zero(1, 3 * d);
                      Mat dwo = Mat::Zero(d, d);
                      Mat dbo = n.grad.colwise().sum();
                      for (int b = 0; b < batch; ++b) {
                          Mat dy = n.grad.middleRows(b * seq_len, seq_len);
                          const Mat& concat = cache->concat[b];
                          const Mat& qkv = cache->qkv[b];
                          dwo += concat.transpose() * dy;
                          Mat dconcat = dy * wo->val.transpose();
                          Mat dqkv = Mat::Zero(seq_len, 3 * d);
                          for (int h = 0; h < heads; ++h) {
                              const Mat& probs = cache->probs[size_t(b) * heads + h];
                              auto Q = qkv.block(0, h * dh, seq_len, dh);
                              auto K = qkv.block(0, d + h * dh, seq_len, dh);
                              auto V = qkv.block(0, 2 * d + h * dh, seq_len, dh);
                              Mat dO = dconcat.block(0, h * dh, seq_len, dh);
                              Mat dP = dO * V.transpose();
                              Mat dV = probs.transpose() * dO;
                              // softmax backward per row
                              Mat dS(seq_len, seq_len);
                              for (int r = 0; r < seq_len; ++r) {
                                  double dot = dP.row(r).dot(probs.row(r));
                                  dS.row(r) =
                                      (probs.row(r).array() * (dP.row(r).array() - dot)).matrix();
                              }
                              dqkv.block(0, h * dh, seq_len, dh) += dS * K * scale;
                              dqkv.block(0, d + h * dh, seq_len, dh) +=
                                  dS.transpose() * Q * scale;
                              dqkv.block(0, 2 * d + h * dh, seq_len, dh) += dV;
                          }
                          dx.middleRows(b * seq_len, seq_len) = dqkv * wq->val.transpose();
                          dwq += x->val.middleRows(b * seq_len, seq_len).transpose() * dqkv;
                          dbq += dqkv.colwise().sum();
                      }
                      accumulate(*x, dx);
                      accumulate(*wq, dwq);
                      accumulate(*bq, dbq);
                      accumulate(*wo, dwo);
                      accumulate(*bo, dbo);
                  });
}

Var conv1d_same(Graph& g, const Var& x, const Var& w, const Var& b) {
    const int rows = int(x->val.rows()), width = int(x->val.cols());
    const int kernel = int(w->val.cols());
    const int offset = kernel / 2;
    Mat y = Mat::Constant(rows, width, b->val(0, 0));
    for (int k = 0; k < kernel; ++k) {
        const double wk = w->val(0, k);
        const int shift = k - offset;
        const int lo = std::max(0, -shift), hi = std::min(width, width - shift);
        for (int i = lo; i < hi; ++i) y.col(i) += wk * x->val.col(i + shift);
    }
    return g.make(std::move(y), {x, w, b},
                  [x = x.get(), w = w.get(), b = b.get(), kernel, offset, width](Node& n) {
                      Mat dw = Mat::Zero(1, kernel);
                      Mat dx = Mat::Zero(x->val.rows(), width);
                      for (int k = 0; k < kernel; ++k) {
                          const int shift = k - offset;
                          const int lo = std::max(0, -shift), hi = std::min(width, width - shift);
                          double acc = 0.0;
                          for (int i = lo; i < hi; ++i) {
                              acc += n.grad.col(i).dot(x->val.col(i + shift));
                              dx.col(i + shift) += w->val(0, k) * n.grad.col(i);
                          }
                          dw(0, k) = acc;
                      }
                      Mat db(1, 1);
                      db(0, 0) = n.grad.sum();
                      accumulate(*x, dx);
                      accumulate(*w, dw);
                      accumulate(*b, db);
                  });
}

Var broadcast_rows(Graph& g, const Var& v, int times) {
    const int rows = int(v->val.rows()), cols = int(v->val.cols());
    Mat y(rows * times, cols);
    for (int i = 0; i < rows; ++i)
        for (int s = 0; s < times; ++s) y.row(i * times + s) = v->val.row(i);
    return g.make(std::move(y), {v}, [v = v.get(), times, rows, cols](Node& n) {
        Mat dv = Mat::Zero(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int s = 0; s < times; ++s) dv.row(i) += n.grad.row(i * times + s);
        accumulate(*v, dv);
    });
}

Var mean_pool_rows(Graph& g, const Var& x, int group) {
    if (x->val.rows() % group != 0) throw ConfigError("rows not divisible by pooling group");
    const int out_rows = int(x->val.rows()) / group;
    const int cols = int(x->val.cols());
    Mat y = Mat::Zero(out_rows, cols);
    for (int i = 0; i < out_rows; ++i) {
        for (int s = 0; s < group; ++s) y.row(i) += x->val.row(i * group + s);
        y.row(i) /= double(group);
    }
    return g.make(std::move(y), {x}, [x = x.get(), group, out_rows, cols](Node& n) {
        Mat dx(out_rows * group, cols);
        for (int i = 0; i < out_rows; ++i)
            for (int s = 0; s < group; ++s) dx.row(i * group + s) = n.grad.row(i) / double(group);
        accumulate(*x, dx);
    });
}

Var add_table_rows(Graph& g, const Var& x, const Var& table, const std::vector<int>& idx) {
    if (int(idx.size()) != x->val.rows()) throw ConfigError("index count mismatch");
    Mat y = x->val;
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= table->val.rows())
            throw ConfigError("token position exceeds positional table");
        y.row(r) += table->val.row(idx[r]);
    }
    return g.make(std::move(y), {x, table}, [x = x.get(), t = table.get(), idx](Node& n) {
        accumulate(*x, n.grad);
        if (t->needs_grad) {
            Mat dt = Mat::Zero(t->val.rows(), t->val.cols());
            for (size_t r = 0; r < idx.size(); ++r) dt.row(idx[r]) += n.grad.row(r);
            accumulate(*t, dt);
        }
    });
}

Var select_rows(Graph& g, const std::vector<bool>& mask, const Var& a, const Var& b) {
    if (int(mask.size()) != a->val.rows() || a->val.rows() != b->val.rows())
        throw ConfigError("row mask mismatch");
    Mat y(a->val.rows(), a->val.cols());
    for (size_t i = 0; i < mask.size(); ++i) y.row(i) = mask[i] ? a->val.row(i) : b->val.row(i);
    return g.make(std::move(y), {a, b}, [a = a.get(), b = b.get(), mask](Node& n) {
        Mat da = Mat::Zero(a->val.rows(), a->val.cols());
        Mat db = Mat::Zero(b->val.rows(), b->val.cols());
        for (size_t i = 0; i < mask.size(); ++i)
            (mask[i] ? da : db).row(i) = n.grad.row(i);
        accumulate(*a, da);
        accumulate(*b, db);
    });
}

Var slice_cols(Graph& g, const Var& x, int col0, int cols) {
    Mat y = x->val.middleCols(col0, cols);
    return g.make(std::move(y), {x}, [x = x.get(), col0, cols](Node& n) {
        Mat dx = Mat::Zero(x->val.rows(), x->val.cols());
        dx.middleCols(col0, cols) = n.grad;
        accumulate(*x, dx);
    });
}

Var stop_grad(Graph& g, const Var& x) {
    return g.constant(x->val);
}

Var cross_entropy_logits(Graph& g, const Var& logits, const std::vector<int>& labels) {
    const int rows = int(logits->val.rows());
    if (int(labels.size()) != rows) throw ConfigError("label count mismatch");
    auto probs = std::make_shared<Mat>(softmax_rows(logits->val));
    double nll = 0.0;
    for (int r = 0; r < rows; ++r) nll -= std::log(std::max((*probs)(r, labels[r]), 1e-300));
    Mat y(1, 1);
    y(0, 0) = nll / rows;
    return g.make(std::move(y), {logits}, [l = logits.get(), probs, labels, rows](Node& n) {
        Mat d = *probs;
        for (int r = 0; r < rows; ++r) d(r, labels[r]) -= 1.0;
        accumulate(*l, n.grad(0, 0) / double(rows) * d);
    });
}

Mat softmax_rows(const Mat& logits) {
    Mat out(logits.rows(), logits.cols());
    for (int r = 0; r < logits.rows(); ++r) {
        double m = logits.row(r).maxCoeff();
        Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}

}  // namespace eegdm::ad
