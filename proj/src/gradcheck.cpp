#include "toytts/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace toytts {

double check_grad_params(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double h) {
    std::vector<bool> had_grad;
    for (Tensor& leaf : leaves) {
        if (!leaf.is_leaf()) {
            throw ContractError("check_grad: probe tensor must be a leaf");
        }
        had_grad.push_back(leaf.requires_grad());
        leaf.set_requires_grad(true);
        leaf.zero_grad();
    }
    backward(f());
    double worst = 0.0;
    for (Tensor& leaf : leaves) {
        const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
        auto x = leaf.mutable_data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x[i];
            x[i] = saved + h;
            const double fp = f().item();
            x[i] = saved - h;
            const double fm = f().item();
            x[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        leaves[k].zero_grad();
        leaves[k].set_requires_grad(had_grad[k]);
    }
    return worst;
}

double check_grad(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
    return check_grad_params([&] { return f(x); }, {x}, h);
}

}  // namespace toytts
