#pragma once

// Minimal reverse-mode differentiation over dense double matrices.
//
// A Var is a handle to a graph node holding a value, an accumulated
// gradient and a closure that pushes the node's gradient to its parents.
// Sequences are stored one row per position.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qfs::ag {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(const Matrix& g);
};

class Var {
public:
    Var() = default;
    explicit Var(Matrix value, bool requires_grad = false);

    static Var scalar(double v) { return Var(Matrix::Constant(1, 1, v)); }

    const Matrix& value() const { return node_->value; }
    /// Mutable value access for parameters (initialization, checkpoint
    /// loading, optimizer updates, finite-difference probes).
    Matrix& mutable_value() { return node_->value; }
    const Matrix& grad() const { return node_->grad; }
    Matrix& mutable_grad() { return node_->grad; }
    bool has_grad() const { return node_->grad.size() > 0; }
    void zero_grad();

    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double item() const;

    /// Seeds d(self)/d(self) = 1 (self must be 1x1) and propagates.
    void backward() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    friend Var make_result(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn);
    std::shared_ptr<Node> node_;
};

/// While alive on the current thread, ops record no graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

Var make_result(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn);

// Elementwise and linear algebra.
Var add(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_constant(const Var& a, const Matrix& c);
Var matmul(const Var& a, const Var& b);
/// x * W + b with b broadcast over rows.
Var linear(const Var& x, const Var& weight, const Var& bias);
Var gelu(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var multiply_mask(const Var& a, const Matrix& mask);

// Shape manipulation.
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
/// Stacks 1x1 values into a column.
Var stack_scalars(std::span<const Var> parts);
Var embedding(const Var& table, std::span<const int> ids);

// Normalization.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

struct BatchStats {
    RowVector mean;
    RowVector variance;  // biased, as used for normalization
};
/// Normalizes every column over the rows (token positions) of x.
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps, BatchStats* stats);
Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const RowVector& running_mean,
                    const RowVector& running_var, double eps);

/// Scaled dot-product attention over `num_heads` column blocks of q, k, v.
/// With `causal`, query row i only sees key rows <= i.
Var multi_head_attention(const Var& q, const Var& k, const Var& v, int num_heads, bool causal);

// Reductions and losses (all return 1x1).
Var sum_scalars(std::span<const Var> parts, std::span<const double> weights);
Var mean_scalars(std::span<const Var> parts);
/// Sum over rows t of -log softmax(logits_t)[targets_t]; rows whose target
/// equals `ignore_index` contribute nothing.
Var cross_entropy_sum(const Var& logits, std::span<const int> targets, int ignore_index);
/// -sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)], p clamped to [eps, 1 - eps].
Var binary_cross_entropy_sum(const Var& probs, std::span<const double> labels, double eps);
/// Mean over the shared prefix of rows of the per-row cosine similarity.
/// Rows where either side has zero norm contribute 0.
Var tokenwise_cosine(const Var& a, const Var& b);
/// -log softmax(sims / tau)[positive] over the entries of a column.
Var info_nce(const Var& sims, Eigen::Index positive, double tau);

}  // namespace qfs::ag
