#include "fractal/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "fractal/rng.hpp"

namespace fractal {

InitScheme InitScheme::paper_uniform(double bias) {
    if (bias < 0.0 || bias > 0.5)
        throw InvalidArgument("paper init bias must lie in [0, 1/2]");
    InitScheme s;
    s.kind = Kind::PaperUniform;
    s.bias = bias;
    return s;
}

InitScheme InitScheme::uniform(double scale) {
    InitScheme s;
    s.kind = Kind::Uniform;
    s.scale = scale;
    return s;
}

InitScheme InitScheme::literal_net(LayeredNet net) {
    InitScheme s;
    s.kind = Kind::NetLiteral;
    s.literal = std::move(net);
    return s;
}

LayeredNet init_net(const InitScheme& scheme, const std::vector<int>& widths,
                    std::uint64_t seed) {
    if (scheme.kind == InitScheme::Kind::NetLiteral) return scheme.literal;
    if (widths.size() < 2) throw ShapeMismatch("widths must chain input to output");
    for (int w : widths)
        if (w < 1) throw ShapeMismatch("widths must be positive");
    if (scheme.kind == InitScheme::Kind::PaperUniform &&
        (scheme.bias < 0.0 || scheme.bias > 0.5))
        throw InvalidArgument("paper init bias must lie in [0, 1/2]");
    LayeredNet net;
    Rng rng(derive_seed(seed, 0x1217));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        LayeredNet::Layer layer;
        layer.cols = widths[l];
        layer.rows = widths[l + 1];
        layer.w.resize(static_cast<std::size_t>(layer.rows) * layer.cols);
        layer.b.resize(static_cast<std::size_t>(layer.rows));
        if (scheme.kind == InitScheme::Kind::PaperUniform) {
            const double a = 1.0 / (2.0 * layer.cols);
            for (double& w : layer.w) w = rng.uniform(-a, a);
            for (double& b : layer.b) b = scheme.bias;
        } else {
            for (double& w : layer.w) w = rng.uniform(-scheme.scale, scheme.scale);
            for (double& b : layer.b) b = rng.uniform(-scheme.scale, scheme.scale);
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

namespace {

LayeredNet zeros_like(const LayeredNet& net) {
    LayeredNet z = net;
    for (auto& l : z.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    return z;
}

} // namespace

HingeBatchResult hinge_loss_and_grad(const LayeredNet& net,
                                     std::span<const LabeledSample> batch) {
    if (batch.empty()) throw InvalidArgument("hinge batch must be nonempty");
    net.check_shapes();
    if (net.output_dim() != 1) throw ShapeMismatch("hinge loss needs a scalar output");
    HingeBatchResult out;
    out.grad = zeros_like(net);
    const double inv_m = 1.0 / static_cast<double>(batch.size());
    const int t = net.depth();
    std::vector<std::vector<double>> delta(static_cast<std::size_t>(t));
    for (const auto& sample : batch) {
        if (static_cast<int>(sample.x.size()) != net.input_dim())
            throw ShapeMismatch("sample dimension mismatch");
        auto acts = forward_trace(net, sample.x);
        const double f = acts.back()[0];
        const double margin = 1.0 - sample.y * f;
        if (margin > 0.0) out.loss += margin * inv_m;
        if (margin <= 0.0) continue; // zero subgradient at and beyond the hinge
        // d(loss)/d(f) = -y / m for this sample.
        delta[static_cast<std::size_t>(t - 1)].assign(1, -sample.y * inv_m);
        for (int l = t - 1; l >= 1; --l) {
            const auto& layer = net.layers[static_cast<std::size_t>(l)];
            auto& below = delta[static_cast<std::size_t>(l - 1)];
            below.assign(static_cast<std::size_t>(layer.cols), 0.0);
            const auto& d = delta[static_cast<std::size_t>(l)];
            for (int r = 0; r < layer.rows; ++r) {
                const double dr = d[static_cast<std::size_t>(r)];
                if (dr == 0.0) continue;
                const double* wr = layer.w.data() + static_cast<std::size_t>(r) * layer.cols;
                for (int c = 0; c < layer.cols; ++c) below[static_cast<std::size_t>(c)] += dr * wr[c];
            }
            // ReLU mask of the layer below: post-activation > 0 iff pre > 0.
            const auto& post = acts[static_cast<std::size_t>(l - 1)];
            for (int c = 0; c < layer.cols; ++c)
                if (!(post[static_cast<std::size_t>(c)] > 0.0)) below[static_cast<std::size_t>(c)] = 0.0;
        }
        for (int l = 0; l < t; ++l) {
            auto& g = out.grad.layers[static_cast<std::size_t>(l)];
            const auto& d = delta[static_cast<std::size_t>(l)];
            const std::vector<double>& in = l == 0 ? sample.x : acts[static_cast<std::size_t>(l - 1)];
            for (int r = 0; r < g.rows; ++r) {
                const double dr = d[static_cast<std::size_t>(r)];
                if (dr == 0.0) continue;
                double* gr = g.w.data() + static_cast<std::size_t>(r) * g.cols;
                for (int c = 0; c < g.cols; ++c) gr[c] += dr * in[static_cast<std::size_t>(c)];
                g.b[static_cast<std::size_t>(r)] += dr;
            }
        }
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw InvalidArgument("Adam betas must lie in [0,1)");
    if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
    if (steps < 0) throw InvalidArgument("steps must be >= 0");
    if (eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
}

Optimizer::Optimizer(const TrainConfig& cfg, const LayeredNet& shape) : cfg_(cfg) {
    if (cfg_.optimizer == TrainConfig::Opt::Adam) {
        m_ = zeros_like(shape);
        v_ = zeros_like(shape);
    }
}

void Optimizer::step(LayeredNet& net, const LayeredNet& grad) {
    if (grad.layers.size() != net.layers.size()) throw ShapeMismatch("gradient/net layer count");
    if (cfg_.optimizer == TrainConfig::Opt::SGD) {
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            auto& nl = net.layers[l];
            const auto& gl = grad.layers[l];
            for (std::size_t i = 0; i < nl.w.size(); ++i) nl.w[i] -= cfg_.lr * gl.w[i];
            for (std::size_t i = 0; i < nl.b.size(); ++i) nl.b[i] -= cfg_.lr * gl.b[i];
        }
        return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto update = [&](double& theta, double& m, double& v, double g) {
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m / c1;
        const double vhat = v / c2;
        theta -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& nl = net.layers[l];
        const auto& gl = grad.layers[l];
        auto& ml = m_.layers[l];
        auto& vl = v_.layers[l];
        for (std::size_t i = 0; i < nl.w.size(); ++i) update(nl.w[i], ml.w[i], vl.w[i], gl.w[i]);
        for (std::size_t i = 0; i < nl.b.size(); ++i) update(nl.b[i], ml.b[i], vl.b[i], gl.b[i]);
    }
}

double evaluate_accuracy(const LayeredNet& net, const Dataset& dataset) {
    if (dataset.samples.empty()) throw InvalidArgument("evaluate_accuracy: empty dataset");
    std::size_t correct = 0;
    for (const auto& s : dataset.samples) {
        const double f = forward(net, s.x);
        const int sign = f >= 0.0 ? 1 : -1;
        if (sign == s.y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

TrainResult train(const Dataset& train_data, const Dataset& eval_data,
                  const std::vector<int>& widths, const InitScheme& scheme,
                  const TrainConfig& config) {
    config.validate();
    if (train_data.samples.empty()) throw InvalidArgument("train: empty training set");
    LayeredNet net = init_net(scheme, widths, config.seed);
    net.check_shapes();
    Optimizer opt(config, net);
    Rng rng(derive_seed(config.seed, 0x5a3u));

    TrainResult result;
    result.best_net = net;
    result.best_accuracy = evaluate_accuracy(net, eval_data);
    result.best_step = 0;
    result.history.push_back({0, 0.0, result.best_accuracy});

    const std::size_t m = train_data.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = m; // forces a shuffle before the first batch
    std::vector<LabeledSample> batch(static_cast<std::size_t>(config.batch_size));

    for (long step = 1; step <= config.steps; ++step) {
        for (int i = 0; i < config.batch_size; ++i) {
            if (cursor >= m) {
                for (std::size_t j = m; j > 1; --j)
                    std::swap(order[j - 1], order[static_cast<std::size_t>(rng.below(j))]);
                cursor = 0;
            }
            batch[static_cast<std::size_t>(i)] = train_data.samples[order[cursor++]];
        }
        auto res = hinge_loss_and_grad(net, batch);
        opt.step(net, res.grad);
        if (step % config.eval_every == 0 || step == config.steps) {
            const double acc = evaluate_accuracy(net, eval_data);
            result.history.push_back({step, res.loss, acc});
            if (acc > result.best_accuracy) {
                result.best_accuracy = acc;
                result.best_step = step;
                result.best_net = net;
            }
        }
    }
    result.final_net = std::move(net);
    return result;
}

void write_history_csv(std::ostream& os, const std::vector<TrainHistoryRow>& history) {
    os << "step,loss,accuracy\n";
    os.precision(17);
    for (const auto& row : history)
        os << row.step << "," << row.loss << "," << row.accuracy << "\n";
}

} // namespace fractal
