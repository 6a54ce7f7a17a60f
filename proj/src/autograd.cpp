#include "qfs/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "qfs/errors.hpp"

namespace qfs::ag {

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw StructuralError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()) + ")");
    }
}

}  // namespace

void Node::accumulate(const Matrix& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
    if (node_) node_->grad.resize(0, 0);
}

double Var::item() const {
    if (node_->value.size() != 1) throw StructuralError("item() on a non-scalar value");
    return node_->value(0, 0);
}

void Var::backward() const {
    if (node_->value.size() != 1) throw StructuralError("backward() requires a scalar root");
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->accumulate(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->grad.size() > 0) {
            n->backward(*n);
            n->grad.resize(0, 0);
        }
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var make_result(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn) {
    Var out(std::move(value));
    if (!g_grad_enabled) return out;
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (!needs) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node());
    out.node_->backward = std::move(fn);
    return out;
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
        n.parents[0]->accumulate(n.grad);
        n.parents[1]->accumulate(n.grad);
    });
}

Var scale(const Var& a, double s) {
    return make_result(a.value() * s, {a}, [s](Node& n) { n.parents[0]->accumulate(n.grad * s); });
}

Var add_constant(const Var& a, const Matrix& c) {
    require_same_shape(a.value(), c, "add_constant");
    return make_result(a.value() + c, {a}, [](Node& n) { n.parents[0]->accumulate(n.grad); });
}

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) throw StructuralError("matmul: inner dimensions differ");
    Matrix out;
    out.noalias() = a.value() * b.value();
    return make_result(std::move(out), {a, b}, [](Node& n) {
        auto& A = *n.parents[0];
        auto& B = *n.parents[1];
        if (A.requires_grad) A.accumulate(n.grad * B.value.transpose());
        if (B.requires_grad) B.accumulate(A.value.transpose() * n.grad);
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    if (x.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
        throw StructuralError("linear: input width " + std::to_string(x.cols()) + " does not match weight " +
                              std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()));
    }
    Matrix out;
    out.noalias() = x.value() * weight.value();
    out.rowwise() += bias.value().row(0);
    return make_result(std::move(out), {x, weight, bias}, [](Node& n) {
        auto& X = *n.parents[0];
        auto& W = *n.parents[1];
        auto& b = *n.parents[2];
        if (X.requires_grad) X.accumulate(n.grad * W.value.transpose());
        if (W.requires_grad) W.accumulate(X.value.transpose() * n.grad);
        if (b.requires_grad) b.accumulate(n.grad.colwise().sum());
    });
}

Var gelu(const Var& a) {
    const Matrix& x = a.value();
    Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
    return make_result(std::move(out), {a}, [](Node& n) {
        const Matrix& x = n.parents[0]->value;
        Matrix d = x.unaryExpr([](double v) {
            const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
            return cdf + v * pdf;
        });
        n.parents[0]->accumulate(n.grad.cwiseProduct(d));
    });
}

Var relu(const Var& a) {
    Matrix out = a.value().cwiseMax(0.0);
    return make_result(std::move(out), {a}, [](Node& n) {
        const Matrix& x = n.parents[0]->value;
        n.parents[0]->accumulate((x.array() > 0.0).select(n.grad, 0.0));
    });
}

Var sigmoid(const Var& a) {
    Matrix out = a.value().unaryExpr([](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    return make_result(std::move(out), {a}, [](Node& n) {
        const Matrix& y = n.value;
        n.parents[0]->accumulate(n.grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
    });
}

Var multiply_mask(const Var& a, const Matrix& mask) {
    require_same_shape(a.value(), mask, "multiply_mask");
    return make_result(a.value().cwiseProduct(mask), {a},
                       [mask](Node& n) { n.parents[0]->accumulate(n.grad.cwiseProduct(mask)); });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw StructuralError("concat_rows: no inputs");
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts.front().cols();
    for (const auto& p : parts) {
        if (p.cols() != cols) throw StructuralError("concat_rows: width mismatch");
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::vector<Eigen::Index> offsets;
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        offsets.push_back(r);
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    return make_result(std::move(out), {parts.begin(), parts.end()}, [offsets](Node& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
            auto& p = *n.parents[i];
            if (p.requires_grad) p.accumulate(n.grad.middleRows(offsets[i], p.value.rows()));
        }
    });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) throw StructuralError("slice_rows: out of range");
    return make_result(a.value().middleRows(start, count), {a}, [start, count](Node& n) {
        auto& p = *n.parents[0];
        Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
        g.middleRows(start, count) = n.grad;
        p.accumulate(g);
    });
}

Var stack_scalars(std::span<const Var> parts) {
    Matrix out(static_cast<Eigen::Index>(parts.size()), 1);
    for (std::size_t i = 0; i < parts.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = parts[i].item();
    return make_result(std::move(out), {parts.begin(), parts.end()}, [](Node& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
            n.parents[i]->accumulate(Matrix::Constant(1, 1, n.grad(static_cast<Eigen::Index>(i), 0)));
        }
    });
}

Var embedding(const Var& table, std::span<const int> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] < 0 || ids[t] >= table.rows()) {
            throw StructuralError("embedding: token id " + std::to_string(ids[t]) + " outside vocabulary of " +
                                  std::to_string(table.rows()));
        }
        out.row(static_cast<Eigen::Index>(t)) = table.value().row(ids[t]);
    }
    std::vector<int> idx(ids.begin(), ids.end());
    return make_result(std::move(out), {table}, [idx = std::move(idx)](Node& n) {
        auto& T = *n.parents[0];
        Matrix g = Matrix::Zero(T.value.rows(), T.value.cols());
        for (std::size_t t = 0; t < idx.size(); ++t) g.row(idx[t]) += n.grad.row(static_cast<Eigen::Index>(t));
        T.accumulate(g);
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Matrix& X = x.value();
    const Eigen::Index rows = X.rows();
    const Eigen::Index cols = X.cols();
    Matrix xhat(rows, cols);
    Eigen::VectorXd inv(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double mu = X.row(r).mean();
        const double var = (X.row(r).array() - mu).square().mean();
        inv(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (X.row(r).array() - mu) * inv(r);
    }
    Matrix out = xhat;
    out.array().rowwise() *= gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    return make_result(std::move(out), {x, gamma, beta}, [xhat, inv](Node& n) {
        auto& X = *n.parents[0];
        auto& G = *n.parents[1];
        auto& B = *n.parents[2];
        if (G.requires_grad) G.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
        if (B.requires_grad) B.accumulate(n.grad.colwise().sum());
        if (X.requires_grad) {
            Matrix dxhat = n.grad;
            dxhat.array().rowwise() *= G.value.row(0).array();
            Matrix dx(dxhat.rows(), dxhat.cols());
            for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                const double m1 = dxhat.row(r).mean();
                const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                dx.row(r) = inv(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
            }
            X.accumulate(dx);
        }
    });
}

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps, BatchStats* stats) {
    const Matrix& X = x.value();
    const RowVector mean = X.colwise().mean();
    Matrix centered = X.rowwise() - mean;
    const RowVector var = centered.array().square().colwise().mean();
    const RowVector inv = (var.array() + eps).rsqrt();
    Matrix xhat = centered.array().rowwise() * inv.array();
    if (stats) *stats = {mean, var};
    Matrix out = xhat;
    out.array().rowwise() *= gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    return make_result(std::move(out), {x, gamma, beta}, [xhat, inv](Node& n) {
        auto& X = *n.parents[0];
        auto& G = *n.parents[1];
        auto& B = *n.parents[2];
        if (G.requires_grad) G.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
        if (B.requires_grad) B.accumulate(n.grad.colwise().sum());
        if (X.requires_grad) {
            Matrix dxhat = n.grad;
            dxhat.array().rowwise() *= G.value.row(0).array();
            const RowVector m1 = dxhat.colwise().mean();
            const RowVector m2 = dxhat.cwiseProduct(xhat).colwise().mean();
            Matrix dx = (dxhat.rowwise() - m1) - Matrix(xhat.array().rowwise() * m2.array());
            dx.array().rowwise() *= inv.array();
            X.accumulate(dx);
        }
    });
}

Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const RowVector& running_mean,
                    const RowVector& running_var, double eps) {
    const RowVector inv = (running_var.array() + eps).rsqrt();
    Matrix xhat = (x.value().rowwise() - running_mean).array().rowwise() * inv.array();
    Matrix out = xhat;
    out.array().rowwise() *= gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    return make_result(std::move(out), {x, gamma, beta}, [xhat, inv](Node& n) {
        auto& X = *n.parents[0];
        auto& G = *n.parents[1];
        auto& B = *n.parents[2];
        if (G.requires_grad) G.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
        if (B.requires_grad) B.accumulate(n.grad.colwise().sum());
        if (X.requires_grad) {
            Matrix dx = n.grad;
            dx.array().rowwise() *= (G.value.row(0).array() * inv.array());
            X.accumulate(dx);
        }
    });
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, int num_heads, bool causal) {
    const Matrix& Q = q.value();
    const Matrix& K = k.value();
    const Matrix& V = v.value();
    if (Q.cols() != K.cols() || K.cols() != V.cols() || K.rows() != V.rows()) {
        throw StructuralError("attention: q/k/v shapes disagree");
    }
    if (num_heads <= 0 || Q.cols() % num_heads != 0) throw StructuralError("attention: bad head count");
    if (causal && Q.rows() > K.rows()) throw StructuralError("attention: causal query longer than keys");
    const Eigen::Index dk = Q.cols() / num_heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(dk));

    std::vector<Matrix> probs(static_cast<std::size_t>(num_heads));
    Matrix out(Q.rows(), Q.cols());
    for (int h = 0; h < num_heads; ++h) {
        const auto c0 = h * dk;
        Matrix s;
        s.noalias() = Q.middleCols(c0, dk) * K.middleCols(c0, dk).transpose();
        s *= scl;
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            const Eigen::Index visible = causal ? i + 1 : s.cols();
            const double m = s.row(i).head(visible).maxCoeff();
            double z = 0.0;
            for (Eigen::Index j = 0; j < s.cols(); ++j) {
                const double e = j < visible ? std::exp(s(i, j) - m) : 0.0;
                s(i, j) = e;
                z += e;
            }
            s.row(i) /= z;
        }
        out.middleCols(c0, dk).noalias() = s * V.middleCols(c0, dk);
        probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    return make_result(std::move(out), {q, k, v}, [probs = std::move(probs), dk, scl, num_heads](Node& n) {
        auto& Qn = *n.parents[0];
        auto& Kn = *n.parents[1];
        auto& Vn = *n.parents[2];
        Matrix dQ = Matrix::Zero(Qn.value.rows(), Qn.value.cols());
        Matrix dK = Matrix::Zero(Kn.value.rows(), Kn.value.cols());
        Matrix dV = Matrix::Zero(Vn.value.rows(), Vn.value.cols());
        for (int h = 0; h < num_heads; ++h) {
            const auto c0 = h * dk;
            const Matrix& P = probs[static_cast<std::size_t>(h)];
            const auto dO = n.grad.middleCols(c0, dk);
            dV.middleCols(c0, dk).noalias() = P.transpose() * dO;
            Matrix dP;
            dP.noalias() = dO * Vn.value.middleCols(c0, dk).transpose();
            const Eigen::VectorXd rowdot = dP.cwiseProduct(P).rowwise().sum();
            Matrix dS = P.cwiseProduct(dP.colwise() - rowdot);
            dS *= scl;
            dQ.middleCols(c0, dk).noalias() = dS * Kn.value.middleCols(c0, dk);
            dK.middleCols(c0, dk).noalias() = dS.transpose() * Qn.value.middleCols(c0, dk);
        }
        Qn.accumulate(dQ);
        Kn.accumulate(dK);
        Vn.accumulate(dV);
    });
}

Var sum_scalars(std::span<const Var> parts, std::span<const double> weights) {
    if (parts.size() != weights.size()) throw StructuralError("sum_scalars: weight count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) total += weights[i] * parts[i].item();
    std::vector<double> w(weights.begin(), weights.end());
    return make_result(Matrix::Constant(1, 1, total), {parts.begin(), parts.end()}, [w = std::move(w)](Node& n) {
        const double g = n.grad(0, 0);
        for (std::size_t i = 0; i < n.parents.size(); ++i) n.parents[i]->accumulate(Matrix::Constant(1, 1, g * w[i]));
    });
}

Var mean_scalars(std::span<const Var> parts) {
    if (parts.empty()) throw StructuralError("mean_scalars: no inputs");
    std::vector<double> w(parts.size(), 1.0 / static_cast<double>(parts.size()));
    return sum_scalars(parts, w);
}

Var cross_entropy_sum(const Var& logits, std::span<const int> targets, int ignore_index) {
    const Matrix& L = logits.value();
    if (static_cast<std::size_t>(L.rows()) != targets.size()) {
        throw StructuralError("cross_entropy: " + std::to_string(L.rows()) + " logit rows for " +
                              std::to_string(targets.size()) + " targets");
    }
    Matrix dlogits = Matrix::Zero(L.rows(), L.cols());
    double total = 0.0;
    for (Eigen::Index t = 0; t < L.rows(); ++t) {
        const int y = targets[static_cast<std::size_t>(t)];
        if (y == ignore_index) continue;
        if (y < 0 || y >= L.cols()) throw StructuralError("cross_entropy: target outside vocabulary");
        const double m = L.row(t).maxCoeff();
        const Eigen::RowVectorXd e = (L.row(t).array() - m).exp();
        const double z = e.sum();
        total += (m + std::log(z)) - L(t, y);
        dlogits.row(t) = e / z;
        dlogits(t, y) -= 1.0;
    }
    return make_result(Matrix::Constant(1, 1, total), {logits},
                       [dlogits = std::move(dlogits)](Node& n) { n.parents[0]->accumulate(dlogits * n.grad(0, 0)); });
}

Var binary_cross_entropy_sum(const Var& probs, std::span<const double> labels, double eps) {
    const Matrix& P = probs.value();
    if (static_cast<std::size_t>(P.size()) != labels.size()) {
        throw StructuralError("binary_cross_entropy: " + std::to_string(P.size()) + " probabilities for " +
                              std::to_string(labels.size()) + " labels");
    }
    Matrix dp = Matrix::Zero(P.rows(), P.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < P.size(); ++i) {
        const double raw = P(i);
        const double p = std::clamp(raw, eps, 1.0 - eps);
        const double y = labels[static_cast<std::size_t>(i)];
        total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        if (raw > eps && raw < 1.0 - eps) dp(i) = -y / p + (1.0 - y) / (1.0 - p);
    }
    return make_result(Matrix::Constant(1, 1, total), {probs},
                       [dp = std::move(dp)](Node& n) { n.parents[0]->accumulate(dp * n.grad(0, 0)); });
}

Var tokenwise_cosine(const Var& a, const Var& b) {
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    if (A.cols() != B.cols()) {
        throw StructuralError("tokenwise_cosine: embedding widths differ (" + std::to_string(A.cols()) + " vs " +
                              std::to_string(B.cols()) + ")");
    }
    const Eigen::Index n = std::min(A.rows(), B.rows());
    if (n == 0) throw StructuralError("tokenwise_cosine: empty sequence");
    Matrix dA = Matrix::Zero(A.rows(), A.cols());
    Matrix dB = Matrix::Zero(B.rows(), B.cols());
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double na = A.row(t).norm();
        const double nb = B.row(t).norm();
        if (na == 0.0 || nb == 0.0) continue;
        const double c = A.row(t).dot(B.row(t)) / (na * nb);
        total += c;
        dA.row(t) = inv_n * (B.row(t) / (na * nb) - c * A.row(t) / (na * na));
        dB.row(t) = inv_n * (A.row(t) / (na * nb) - c * B.row(t) / (nb * nb));
    }
    return make_result(Matrix::Constant(1, 1, total * inv_n), {a, b},
                       [dA = std::move(dA), dB = std::move(dB)](Node& n) {
                           const double g = n.grad(0, 0);
                           n.parents[0]->accumulate(dA * g);
                           n.parents[1]->accumulate(dB * g);
                       });
}

Var info_nce(const Var& sims, Eigen::Index positive, double tau) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
    const Matrix& S = sims.value();
    if (S.size() == 0 || positive < 0 || positive >= S.size()) {
        throw StructuralError("info_nce: positive index outside similarity set");
    }
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(S.data(), S.size()) / tau;
    const double m = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - m).exp();
    const double denom = e.sum();
    const double loss = (m + std::log(denom)) - z(positive);
    Eigen::VectorXd g = e / denom;
    g(positive) -= 1.0;
    g /= tau;
    Matrix dS = Eigen::Map<const Matrix>(g.data(), S.rows(), S.cols());
    return make_result(Matrix::Constant(1, 1, std::max(loss, 0.0)), {sims},
                       [dS = std::move(dS)](Node& n) { n.parents[0]->accumulate(dS * n.grad(0, 0)); });
}

}  // namespace qfs::ag
