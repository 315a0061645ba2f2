#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "toytts/errors.hpp"

namespace toytts {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the gradient tape. Nodes only reference their parents, so a
// graph is released as soon as the last Tensor handle to its root goes away.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads self.grad and accumulates into self.parents[k]->grad.
    std::function<void(Node& self)> backward;
    const char* op = "leaf";
};

}  // namespace detail

/// Dense row-major array of doubles that can participate in the gradient tape.
///
/// A Tensor is a handle: copies share storage, which is what lets the tape
/// refer back to parameters. Use detach() for an independent value copy.
/// Ranks 0, 1 and 2 are what the ops support; conv1d weights use rank 3.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Shape (rows, cols) from nested rows; all rows must have equal length.
    static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    // In-place access for parameter updates and finite-difference probes.
    // Mutating a tensor that is already recorded on a live tape invalidates
    // that tape.
    std::span<double> mutable_data();

    double item() const;
    double at(std::size_t i) const;
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    Tensor detach() const;

    const detail::Node* id() const { return node_.get(); }

    // Used by the op implementations.
    static Tensor from_node(std::shared_ptr<detail::Node> node);
    const std::shared_ptr<detail::Node>& node() const;

private:
    std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; intermediate gradients are recomputed each call.
void backward(const Tensor& loss);

/// True when `target` is reachable from `root` along tape edges that carry
/// gradient (constant inputs are not followed).
bool graph_contains(const Tensor& root, const Tensor& target);

/// Number of recorded (non-leaf) nodes reachable from root.
std::size_t tape_size(const Tensor& root);

}  // namespace toytts
