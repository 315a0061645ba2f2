#include "toytts/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace toytts {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            os << ", ";
        }
        os << shape[i];
    }
    if (shape.size() == 1) {
        os << ',';
    }
    os << ')';
    return os.str();
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("Tensor: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
    }
    if (!std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); })) {
        throw NumericError("Tensor: non-finite value in data of shape " + shape_str(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return from_node(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), value);
    return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({}, {value}, requires_grad);
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.front().size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw ShapeError("Tensor::matrix: ragged rows");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return from_data({r, c}, std::move(data), requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

const std::shared_ptr<detail::Node>& Tensor::node() const {
    if (!node_) {
        throw ContractError("Tensor: use of undefined tensor");
    }
    return node_;
}

const Shape& Tensor::shape() const { return node()->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) {
        throw ShapeError("Tensor::dim: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return node()->data.size(); }

std::span<const double> Tensor::data() const { return node()->data; }

std::span<double> Tensor::mutable_data() { return node()->data; }

double Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("Tensor::item: expected a single value, shape " + shape_str(shape()));
    }
    return node()->data[0];
}

double Tensor::at(std::size_t i) const {
    if (i >= numel()) {
        throw ShapeError("Tensor::at: index " + std::to_string(i) + " out of range for shape " +
                         shape_str(shape()));
    }
    return node()->data[i];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    const Shape& s = shape();
    if (s.size() != 2 || row >= s[0] || col >= s[1]) {
        throw ShapeError("Tensor::at: (" + std::to_string(row) + ", " + std::to_string(col) +
                         ") out of range for shape " + shape_str(s));
    }
    return node()->data[row * s[1] + col];
}

bool Tensor::requires_grad() const { return node()->requires_grad; }

void Tensor::set_requires_grad(bool value) {
    if (!is_leaf()) {
        throw ContractError("Tensor::set_requires_grad: only leaves can be toggled");
    }
    node()->requires_grad = value;
}

bool Tensor::is_leaf() const { return node()->parents.empty(); }

bool Tensor::has_grad() const { return !node()->grad.empty(); }

std::span<const double> Tensor::grad() const { return node()->grad; }

std::span<double> Tensor::mutable_grad() {
    auto& n = *node();
    if (n.grad.empty()) {
        n.grad.assign(n.data.size(), 0.0);
    }
    return n.grad;
}

void Tensor::zero_grad() {
    auto& n = *node();
    n.grad.assign(n.data.size(), 0.0);
}

Tensor Tensor::detach() const { return from_data(shape(), node()->data, false); }

namespace {

std::vector<detail::Node*> topo_order(detail::Node* root) {
    // Iterative post-order DFS; parents precede children in the result.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward: loss is not connected to the gradient tape");
    }
    detail::Node* root = loss.node().get();
    const auto order = topo_order(root);
    for (detail::Node* n : order) {
        if (!n->parents.empty() || n->grad.empty()) {
            n->grad.assign(n->data.size(), 0.0);
        }
    }
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward) {
            n->backward(*n);
        }
    }
}

bool graph_contains(const Tensor& root, const Tensor& target) {
    if (!root.defined() || !target.defined()) {
        return false;
    }
    const detail::Node* goal = target.id();
    std::unordered_set<const detail::Node*> seen;
    std::vector<const detail::Node*> stack{root.id()};
    while (!stack.empty()) {
        const detail::Node* n = stack.back();
        stack.pop_back();
        if (n == goal) {
            return true;
        }
        if (!seen.insert(n).second) {
            continue;
        }
        for (const auto& p : n->parents) {
            if (p->requires_grad) {
                stack.push_back(p.get());
            }
        }
    }
    return false;
}

std::size_t tape_size(const Tensor& root) {
    if (!root.defined()) {
        return 0;
    }
    std::unordered_set<const detail::Node*> seen;
    std::vector<const detail::Node*> stack{root.id()};
    std::size_t count = 0;
    while (!stack.empty()) {
        const detail::Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) {
            continue;
        }
        if (!n->parents.empty()) {
            ++count;
        }
        for (const auto& p : n->parents) {
            stack.push_back(p.get());
        }
    }
    return count;
}

}  // namespace toytts
