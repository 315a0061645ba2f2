#include "toytts/gradsuite.hpp"

#include <functional>

#include "toytts/duration.hpp"
#include "toytts/encoder.hpp"
#include "toytts/flows.hpp"
#include "toytts/gradcheck.hpp"
#include "toytts/ops.hpp"

namespace toytts {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) {
        v = rng.uniform(lo, hi);
    }
    return Tensor::from_data(std::move(shape), std::move(data));
}

// Random-weighted sum so every output coordinate gets a distinct upstream grad.
Tensor weighted(const Tensor& y, const Tensor& w) {
    return sum(mul(y, w));
}

void randomize(const std::vector<NamedParam>& params, Rng& rng, double width) {
    for (const auto& p : params) {
        Tensor t = p.tensor;
        for (double& v : t.mutable_data()) {
            v = rng.uniform(-width, width);
        }
    }
}

struct Builder {
    Rng& rng;
    std::vector<GradCase>& out;

    void unary(const std::string& name, Shape shape, const std::function<Tensor(const Tensor&)>& f,
               double lo = -1.0, double hi = 1.0) {
        const Tensor x = random_tensor(shape, rng, lo, hi);
        const Tensor probe = f(x);
        const Tensor w = random_tensor(probe.shape(), rng);
        out.push_back({name, check_grad([&](const Tensor& v) { return weighted(f(v), w); }, x)});
    }

    void binary(const std::string& name, Shape sa, Shape sb,
                const std::function<Tensor(const Tensor&, const Tensor&)>& f) {
        const Tensor a = random_tensor(sa, rng);
        const Tensor b = random_tensor(sb, rng);
        const Tensor w = random_tensor(f(a, b).shape(), rng);
        out.push_back({name, check_grad_params([&] { return weighted(f(a, b), w); }, {a, b})});
    }
};

}  // namespace

std::vector<GradCase> gradient_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCase> out;
    Builder b{rng, out};
    const auto dim = [&](int lo, int hi) { return static_cast<std::size_t>(rng.uniform_int(lo, hi)); };
    const std::size_t r = dim(1, 4);
    const std::size_t c = dim(1, 5);

    for (const auto& [label, sb] : std::vector<std::pair<std::string, Shape>>{
             {"same", {r, c}}, {"scalar", {}}, {"column", {r, 1}}, {"row", {1, c}}}) {
        b.binary("add/" + label, {r, c}, sb, [](const Tensor& x, const Tensor& y) { return add(x, y); });
        b.binary("sub/" + label, {r, c}, sb, [](const Tensor& x, const Tensor& y) { return sub(x, y); });
        b.binary("mul/" + label, {r, c}, sb, [](const Tensor& x, const Tensor& y) { return mul(x, y); });
    }
    b.unary("scale", {r, c}, [](const Tensor& x) { return scale(x, -1.7); });
    b.unary("add_scalar", {r, c}, [](const Tensor& x) { return add_scalar(x, 0.3); });
    b.unary("neg", {r, c}, [](const Tensor& x) { return neg(x); });
    b.unary("square", {r, c}, [](const Tensor& x) { return square(x); });
    b.unary("exp", {r, c}, [](const Tensor& x) { return exp(x); });
    b.unary("log", {r, c}, [](const Tensor& x) { return log(x); }, 0.2, 2.0);
    b.unary("tanh", {r, c}, [](const Tensor& x) { return tanh(x); });
    b.unary("sigmoid", {r, c}, [](const Tensor& x) { return sigmoid(x); });
    b.unary("relu", {r, c}, [](const Tensor& x) { return relu(x); });
    b.unary("clamp", {r, c}, [](const Tensor& x) { return clamp(x, -0.5, 0.5); });

    const std::size_t k = dim(1, 4);
    b.binary("matmul", {r, k}, {k, c}, [](const Tensor& x, const Tensor& y) { return matmul(x, y); });
    b.unary("transpose", {r, c}, [](const Tensor& x) { return transpose(x); });

    const std::size_t cin = dim(1, 3), cout = dim(1, 3), len = dim(1, 6);
    const std::size_t kw = 2 * dim(0, 2) + 1;
    {
        const Tensor x = random_tensor({cin, len}, rng);
        const Tensor w = random_tensor({cout, cin, kw}, rng);
        const Tensor bias = random_tensor({cout}, rng);
        const Tensor g = random_tensor({cout, len}, rng);
        out.push_back({"conv1d", check_grad_params([&] { return weighted(conv1d(x, w, bias), g); },
                                                   {x, w, bias})});
    }

    b.unary("softmax/axis0", {r, c}, [](const Tensor& x) { return softmax(x, 0); });
    b.unary("softmax/axis1", {r, c}, [](const Tensor& x) { return softmax(x, 1); });
    b.unary("softmax/rank1", {c}, [](const Tensor& x) { return softmax(x, 0); });
    // Groups of width 1 normalize to a constant; keep at least two elements.
    const std::size_t rn = r + 1, cn = c + 1;
    b.unary("layer_norm/axis0", {rn, cn}, [](const Tensor& x) { return layer_norm(x, 0); });
    b.unary("layer_norm/axis1", {rn, cn}, [](const Tensor& x) { return layer_norm(x, 1); });
    b.unary("layer_norm/rank1", {cn}, [](const Tensor& x) { return layer_norm(x, 0); });
    b.unary("sum", {r, c}, [](const Tensor& x) { return sum(x); });
    b.unary("mean", {r, c}, [](const Tensor& x) { return mean(x); });
    b.binary("mse", {r, c}, {r, c}, [](const Tensor& x, const Tensor& y) { return mse(x, y); });
    b.unary("reshape", {r, c}, [=](const Tensor& x) { return reshape(x, {c, r}); });
    b.binary("concat_rows", {r, c}, {k, c},
             [](const Tensor& x, const Tensor& y) { return concat_rows({x, y}); });
    b.unary("slice_rows", {r + 1, c}, [=](const Tensor& x) { return slice_rows(x, 1, r + 1); });
    b.unary("gather_rows", {r, c}, [=](const Tensor& x) { return gather_rows(x, {r - 1, 0, r - 1}); });
    b.unary("gather_cols", {r, c}, [=](const Tensor& x) { return gather_cols(x, {0, c - 1, c - 1}); });
    b.unary("flip_rows", {r, c}, [](const Tensor& x) { return flip_rows(x); });

    // Duration generator and discriminator over a partly padded sequence.
    {
        DurationConfig dc{.text_width = 3, .noise_width = 2, .filter_width = 4, .kernel = 3, .cond_width = 2};
        DurationGenerator gen(dc, rng);
        DurationDiscriminator disc(dc, rng);
        randomize(gen.parameters(), rng, 0.8);
        randomize(disc.parameters(), rng, 0.8);
        const std::size_t tokens = dim(2, 5);
        const Tensor h = random_tensor({3, tokens}, rng);
        const Tensor z = random_tensor({2, tokens}, rng);
        const Tensor cond = random_tensor({2, 1}, rng);
        std::vector<double> m(tokens, 1.0);
        m.back() = 0.0;
        const Tensor mask = Tensor::from_data({1, tokens}, m);
        const Tensor g = random_tensor({1, tokens}, rng);
        std::vector<Tensor> leaves = tensors_of(gen.parameters());
        leaves.insert(leaves.end(), {h, z, cond});
        out.push_back({"duration_generator",
                       check_grad_params([&] { return weighted(gen.generate(h, z, mask, cond), g); }, leaves)});
        const Tensor d = random_tensor({1, tokens}, rng);
        leaves = tensors_of(disc.parameters());
        leaves.insert(leaves.end(), {d, h});
        out.push_back({"duration_discriminator",
                       check_grad_params([&] { return weighted(disc.score(d, h, mask, false), g); }, leaves)});
    }

    // Coupling layer and a depth-2 stack, loss including the log-determinant.
    {
        CouplingConfig cc{.channels = 4, .hidden = 5, .kernel = 3, .key_width = 3, .cond_width = 2};
        CouplingLayer layer(cc, rng);
        randomize(layer.parameters(), rng, 0.5);
        const std::size_t t = dim(1, 5);
        const Tensor x = random_tensor({4, t}, rng);
        const Tensor cond = random_tensor({2, 1}, rng);
        const Tensor g = random_tensor({4, t}, rng);
        const auto loss = [&](const FlowOutput& f) { return add(weighted(f.y, g), f.logdet); };
        std::vector<Tensor> leaves = tensors_of(layer.parameters());
        leaves.insert(leaves.end(), {x, cond});
        out.push_back({"coupling_layer", check_grad_params([&] { return loss(layer.forward(x, cond)); }, leaves)});

        FlowStack stack(cc, 2, rng);
        randomize(stack.parameters(), rng, 0.5);
        leaves = tensors_of(stack.parameters());
        leaves.insert(leaves.end(), {x, cond});
        out.push_back({"flow_stack", check_grad_params([&] { return loss(stack.forward(x, cond)); }, leaves)});
    }

    // Text encoder: every block, the speaker path and both prior heads.
    {
        EncoderConfig ec{.vocab_size = 4, .hidden = 4, .heads = 2, .blocks = 3, .ffn = 6,
                         .out_channels = 2, .speaker_width = 3, .speaker_block = 2};
        TextEncoder enc(ec, rng);
        randomize(enc.parameters(), rng, 0.6);
        const std::size_t tokens = dim(2, 4);
        std::vector<int> ids(tokens + 1);
        for (int& id : ids) {
            id = static_cast<int>(rng.uniform_int(0, 3));
        }
        const Tensor spk = random_tensor({3, 1}, rng);
        const Tensor gh = random_tensor({4, tokens + 1}, rng);
        const Tensor gm = random_tensor({2, tokens + 1}, rng);
        const Tensor gs = random_tensor({2, tokens + 1}, rng);
        std::vector<Tensor> leaves = tensors_of(enc.parameters());
        leaves.push_back(spk);
        out.push_back({"text_encoder", check_grad_params(
                                           [&] {
                                               const EncoderOutput o = enc.encode(ids, tokens, spk);
                                               return add(add(weighted(o.h_text, gh), weighted(o.mu, gm)),
                                                          weighted(o.sigma, gs));
                                           },
                                           leaves)});
    }
    return out;
}

}  // namespace toytts
