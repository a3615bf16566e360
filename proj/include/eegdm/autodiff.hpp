#ifndef EEGDM_AUTODIFF_HPP
#define EEGDM_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <vector>

#include "eegdm/common.hpp"

namespace eegdm::ad {

// Reverse-mode tape over dense matrices. Nodes are created in topological
// order, so replaying the tape backwards is a valid backward pass.
struct Node {
    Mat val;
    Mat grad;  // lazily allocated; empty means "no gradient reached this node"
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;
};

using Var = std::shared_ptr<Node>;

class Graph {
  public:
    explicit Graph(bool grad_enabled = true) : grad_enabled(grad_enabled) {}

    bool grad_enabled;
    std::vector<Var> tape;

    Var constant(Mat v);
    Var param(const Mat& v);  // leaf that accumulates gradient
    Var make(Mat val, std::vector<Var> parents, std::function<void(Node&)> backprop);

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. loss must be 1x1.
    void backward(const Var& loss);
};

void accumulate(Node& node, const Mat& g);

Var add(Graph& g, const Var& a, const Var& b);
Var sub(Graph& g, const Var& a, const Var& b);
Var mul(Graph& g, const Var& a, const Var& b);  // elementwise
Var scalar_mul(Graph& g, const Var& a, double c);
Var add_scalar(Graph& g, const Var& a, double c);
Var matmul(Graph& g, const Var& a, const Var& b);
Var linear(Graph& g, const Var& x, const Var& w, const Var& b);  // x*w + row-broadcast b
Var layernorm(Graph& g, const Var& x, double eps = 1e-5);
Var layernorm_affine(Graph& g, const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var gelu(Graph& g, const Var& x);
Var silu(Graph& g, const Var& x);
Var exp(Graph& g, const Var& x);
Var square(Graph& g, const Var& x);
Var mean_all(Graph& g, const Var& x);
Var sum_all(Graph& g, const Var& x);

// Multi-head self-attention over per-sample blocks of seq_len consecutive
// rows. x is (B*seq_len) x d, w_qkv is d x 3d, w_out is d x d.
Var mha(Graph& g, const Var& x, const Var& w_qkv, const Var& b_qkv, const Var& w_out,
        const Var& b_out, int heads, int seq_len);

// Same-padded 1-D convolution applied to each row. w is 1 x kernel, b is 1 x 1.
Var conv1d_same(Graph& g, const Var& x, const Var& w, const Var& b);

// (B x d) -> (B*times x d), each row repeated `times` consecutive rows.
Var broadcast_rows(Graph& g, const Var& v, int times);

// (B*group x d) -> (B x d), mean over consecutive groups.
Var mean_pool_rows(Graph& g, const Var& x, int group);

// x + table[idx[r]] per row; the table accumulates scattered gradients.
Var add_table_rows(Graph& g, const Var& x, const Var& table, const std::vector<int>& idx);

// Rowwise selection: mask[i] ? a.row(i) : b.row(i).
Var select_rows(Graph& g, const std::vector<bool>& mask, const Var& a, const Var& b);

Var slice_cols(Graph& g, const Var& x, int col0, int cols);

Var stop_grad(Graph& g, const Var& x);

// Mean negative log-likelihood of labels under row-wise softmax of logits.
Var cross_entropy_logits(Graph& g, const Var& logits, const std::vector<int>& labels);

// Plain (non-graph) row softmax used at inference time.
Mat softmax_rows(const Mat& logits);

}  // namespace eegdm::ad

#endif
