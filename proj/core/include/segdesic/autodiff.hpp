#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "segdesic/grid_encoding.hpp" // NormKind
#include "segdesic/tensor.hpp"

namespace segdesic {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad; // allocated on demand, same shape as value
    bool requires_grad = false;
    std::string name;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad();
};

} // namespace detail

/// Handle to a node of the reverse-mode graph. Copies share the node.
class Variable {
public:
    Variable() = default;
    explicit Variable(Tensor value, bool requires_grad = false, std::string name = "");

    bool defined() const noexcept { return node_ != nullptr; }
    const Tensor& value() const;
    Tensor& value(); // in-place mutation is only meaningful on leaves
    const Tensor& grad() const;
    bool has_grad() const;
    bool requires_grad() const;
    const std::string& name() const;
    void zero_grad();

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Variable(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording for its scope (inference paths).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// ---- primitives -----------------------------------------------------------
// All forward ops validate shapes (ShapeError) and record a backward closure
// when recording is enabled and any input requires a gradient.

/// Cross-correlation, NCHW input, OIHW weight, optional bias (pass an
/// undefined Variable to skip).
Variable conv2d(const Variable& x, const Variable& weight, const Variable& bias,
                int stride = 1, int padding = 0);

/// Transposed convolution, NCHW input, IOHW weight. Forward equals the
/// input-gradient of conv2d with the same weight.
Variable conv2d_transpose(const Variable& x, const Variable& weight, const Variable& bias,
                          int stride = 1, int padding = 0);

/// 2x2 stride-2 window max; gradient routed to the first occurrence of the
/// maximum in row-major order.
Variable max_pool2(const Variable& x);

/// Per-channel global max over the spatial dims, output N x C.
Variable global_max_pool(const Variable& x);

/// Batch normalization over the channel dim (rank 2 or 4 input).
/// training=true normalizes by batch statistics (batch >= 2) and, when
/// update_running_stats is set, folds them into the running buffers with
/// the given momentum; training=false normalizes by the running buffers.
Variable batch_norm(const Variable& x, const Variable& gamma, const Variable& beta,
                    Variable& running_mean, Variable& running_var,
                    bool training, bool update_running_stats = true,
                    double momentum = 0.1, double eps = 1e-5);

Variable relu(const Variable& x);

/// x: N x In, weight: Out x In, bias: Out -> N x Out.
Variable linear(const Variable& x, const Variable& weight, const Variable& bias);

/// Concatenation along the channel dim of two NCHW tensors.
Variable concat_channels(const Variable& a, const Variable& b);

/// Softmax over dim 1 (classes), max-subtracted for stability.
Variable softmax_over_classes(const Variable& x);

/// Mean over non-ignored pixels of -log p[label]. probs: N x K x H x W in
/// (0, 1]; labels: N x H x W of integral class ids or ignore_value.
Variable cross_entropy(const Variable& probs, const Tensor& labels, int ignore_value = 255);

/// Row-wise L1 or L2 normalization of an N x D tensor.
Variable normalize_rows(const Variable& x, NormKind kind);

/// Mean over rows of 1 - cos(pred_row, target_row); target is constant.
Variable cosine_dissimilarity_mean(const Variable& pred, const Tensor& target);

Variable add(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);
Variable mul_const(const Variable& a, const Tensor& w);
Variable scale(const Variable& a, double k);
Variable sum(const Variable& x);

/// Reverse pass from a scalar loss: every requires-grad node reachable from
/// it receives d loss / d node, each node visited exactly once.
void backward(const Variable& loss);

} // namespace segdesic
