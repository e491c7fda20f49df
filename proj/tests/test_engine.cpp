#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fractal/build.hpp"
#include "fractal/rng.hpp"
#include "fractal/train.hpp"

using namespace fractal;

namespace {

LayeredNet make_net(const std::vector<int>& widths, Rng& rng, double scale) {
    LayeredNet net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        LayeredNet::Layer layer;
        layer.cols = widths[l];
        layer.rows = widths[l + 1];
        layer.w.resize(std::size_t(layer.rows) * layer.cols);
        layer.b.resize(std::size_t(layer.rows));
        for (double& w : layer.w) w = rng.uniform(-scale, scale);
        for (double& b : layer.b) b = rng.uniform(-scale, scale);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::vector<LabeledSample> random_batch(int m, int d, Rng& rng) {
    std::vector<LabeledSample> batch(static_cast<std::size_t>(m));
    for (auto& s : batch) {
        s.x.resize(std::size_t(d));
        for (double& v : s.x) v = rng.uniform(-1.0, 1.0);
        s.y = rng.bernoulli(0.5) ? 1 : -1;
    }
    return batch;
}

double flat_param(const LayeredNet& net, std::size_t idx, bool* is_weight = nullptr) {
    for (const auto& l : net.layers) {
        if (idx < l.w.size()) {
            if (is_weight) *is_weight = true;
            return l.w[idx];
        }
        idx -= l.w.size();
        if (idx < l.b.size()) {
            if (is_weight) *is_weight = false;
            return l.b[idx];
        }
        idx -= l.b.size();
    }
    throw IndexOutOfRange("flat parameter index");
}

void add_flat_param(LayeredNet& net, std::size_t idx, double delta) {
    for (auto& l : net.layers) {
        if (idx < l.w.size()) {
            l.w[idx] += delta;
            return;
        }
        idx -= l.w.size();
        if (idx < l.b.size()) {
            l.b[idx] += delta;
            return;
        }
        idx -= l.b.size();
    }
    throw IndexOutOfRange("flat parameter index");
}

double batch_loss(const LayeredNet& net, const std::vector<LabeledSample>& batch) {
    double loss = 0.0;
    for (const auto& s : batch) loss += std::max(1.0 - s.y * forward(net, s.x), 0.0);
    return loss / double(batch.size());
}

} // namespace

TEST_CASE("forward basics") {
    LayeredNet net;
    LayeredNet::Layer h{4, 3, std::vector<double>(12, 0.0), std::vector<double>(4, 0.0)};
    LayeredNet::Layer o{1, 4, std::vector<double>(4, 0.0), {2.5}};
    net.layers = {h, o};
    Rng rng(1);
    for (int it = 0; it < 50; ++it) {
        Vec x{rng.uniform01(), rng.uniform01(), rng.uniform01()};
        CHECK(forward(net, x) == 2.5);
    }
    CHECK_THROWS_AS(forward(net, {1.0}), ShapeMismatch);
}

TEST_CASE("paper init draws and determinism") {
    auto a = init_net(InitScheme::paper_uniform(0.5), {1, 16, 16, 1}, 7);
    auto b = init_net(InitScheme::paper_uniform(0.5), {1, 16, 16, 1}, 7);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].w == b.layers[l].w);
        CHECK(a.layers[l].b == b.layers[l].b);
    }
    // First layer has fan-in 1: weights live in [-1/2, 1/2]; all biases 1/2.
    for (double w : a.layers[0].w) {
        CHECK(w >= -0.5);
        CHECK(w <= 0.5);
    }
    for (const auto& l : a.layers) {
        const double bound = 1.0 / (2.0 * l.cols);
        for (double w : l.w) {
            CHECK(w >= -bound);
            CHECK(w <= bound);
        }
        for (double bias : l.b) CHECK(bias == 0.5);
    }
    CHECK_THROWS_AS(init_net(InitScheme::paper_uniform(0.9), {1, 4, 1}, 1), InvalidArgument);
}

TEST_CASE("paper init keeps activations, outputs and gradients in [-1,1]") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const int t = 2 + int(rng.below(4));
        const int k = 1 + int(rng.below(32));
        std::vector<int> widths(std::size_t(t) + 1, k);
        widths.front() = 1;
        widths.back() = 1;
        auto net = init_net(InitScheme::paper_uniform(0.5), widths, rng.next_u64());
        for (int it = 0; it < 40; ++it) {
            Vec x{rng.uniform01()};
            auto acts = forward_trace(net, x);
            for (const auto& layer : acts)
                for (double v : layer) CHECK(std::abs(v) <= 1.0 + 1e-12);
            LabeledSample s{x, rng.bernoulli(0.5) ? 1 : -1};
            auto res = hinge_loss_and_grad(net, std::span<const LabeledSample>(&s, 1));
            for (const auto& l : res.grad.layers) {
                for (double g : l.w) CHECK(std::abs(g) <= 1.0 + 1e-12);
                for (double g : l.b) CHECK(std::abs(g) <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("hinge loss on confidently correct batches is flat") {
    LayeredNet net;
    LayeredNet::Layer o{1, 1, {0.0}, {5.0}};
    net.layers = {o};
    std::vector<LabeledSample> batch{{Vec{0.3}, 1}, {Vec{0.9}, 1}};
    auto res = hinge_loss_and_grad(net, batch);
    CHECK(res.loss == 0.0);
    CHECK(res.grad.layers[0].w[0] == 0.0);
    CHECK(res.grad.layers[0].b[0] == 0.0);
}

TEST_CASE("hinge gradient of a linear model matches the closed form") {
    LayeredNet net;
    LayeredNet::Layer o{1, 2, {0.1, -0.2}, {0.0}};
    net.layers = {o};
    std::vector<LabeledSample> batch{{Vec{0.4, 0.7}, 1}, {Vec{-0.3, 0.2}, -1}};
    auto res = hinge_loss_and_grad(net, batch);
    // Both margins are active, so grad = mean of -y x and bias grad -y.
    CHECK(res.grad.layers[0].w[0] ==
          doctest::Approx(0.5 * (-1.0 * 0.4 + 1.0 * -0.3)));
    CHECK(res.grad.layers[0].w[1] ==
          doctest::Approx(0.5 * (-1.0 * 0.7 + 1.0 * 0.2)));
    CHECK(res.grad.layers[0].b[0] == doctest::Approx(0.5 * (-1.0 + 1.0)));
}

TEST_CASE("backprop matches central finite differences") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const int t = 2 + int(rng.below(3));
        const int k = 2 + int(rng.below(15));
        const int d = 1 + int(rng.below(3));
        std::vector<int> widths(std::size_t(t) + 1, k);
        widths.front() = d;
        widths.back() = 1;
        LayeredNet net = make_net(widths, rng, 0.7);
        auto batch = random_batch(8, d, rng);
        auto res = hinge_loss_and_grad(net, batch);
        std::size_t params = net.parameter_count();
        const double h = 1e-6;
        for (int probe = 0; probe < 25; ++probe) {
            const std::size_t idx = std::size_t(rng.below(params));
            LayeredNet up = net, dn = net;
            add_flat_param(up, idx, h);
            add_flat_param(dn, idx, -h);
            const double fd = (batch_loss(up, batch) - batch_loss(dn, batch)) / (2.0 * h);
            bool is_weight = false;
            double g = 0.0;
            std::size_t rem = idx;
            for (const auto& l : res.grad.layers) {
                if (rem < l.w.size()) {
                    g = l.w[rem];
                    is_weight = true;
                    break;
                }
                rem -= l.w.size();
                if (rem < l.b.size()) {
                    g = l.b[rem];
                    break;
                }
                rem -= l.b.size();
            }
            (void)is_weight;
            const double denom = std::max({1.0, std::abs(fd), std::abs(g)});
            CHECK(std::abs(fd - g) / denom <= 1e-5);
        }
    }
    (void)flat_param;
}

TEST_CASE("optimizer steps") {
    LayeredNet net;
    LayeredNet::Layer o{1, 1, {1.0}, {0.0}};
    net.layers = {o};
    LayeredNet grad = net;
    grad.layers[0].w[0] = 2.0;
    grad.layers[0].b[0] = 0.0;

    TrainConfig sgd;
    sgd.optimizer = TrainConfig::Opt::SGD;
    sgd.lr = 0.1;
    Optimizer opt(sgd, net);
    opt.step(net, grad);
    CHECK(net.layers[0].w[0] == doctest::Approx(0.8));

    // Zero gradient leaves both optimizers alone.
    LayeredNet zero = grad;
    zero.layers[0].w[0] = 0.0;
    LayeredNet before = net;
    opt.step(net, zero);
    CHECK(net.layers[0].w[0] == before.layers[0].w[0]);

    TrainConfig adam;
    adam.optimizer = TrainConfig::Opt::Adam;
    adam.lr = 0.01;
    LayeredNet anet = before;
    Optimizer aopt(adam, anet);
    aopt.step(anet, zero);
    CHECK(anet.layers[0].w[0] == before.layers[0].w[0]);
    // The first Adam step has magnitude lr regardless of the gradient scale:
    // the bias corrections make mhat/sqrt(vhat) = sign(g).
    for (double g0 : {2.0, 1234.5, 1e-3}) {
        LayeredNet fresh = before;
        Optimizer fresh_opt(adam, fresh);
        LayeredNet big = grad;
        big.layers[0].w[0] = g0;
        fresh_opt.step(fresh, big);
        CHECK(std::abs(fresh.layers[0].w[0] - (before.layers[0].w[0] - adam.lr)) <= 1e-5);
    }
}

TEST_CASE("train on a separable two-point set") {
    Dataset train_data;
    train_data.samples = {{Vec{0.2}, -1}, {Vec{0.8}, 1}};
    Dataset eval_data = train_data;
    TrainConfig cfg;
    cfg.optimizer = TrainConfig::Opt::Adam;
    cfg.lr = 0.05;
    cfg.batch_size = 2;
    cfg.steps = 200;
    cfg.eval_every = 10;
    cfg.seed = 3;
    TrainResult res = train(train_data, eval_data, {1, 8, 1}, InitScheme::uniform(0.5), cfg);
    CHECK(res.best_accuracy == 1.0);

    cfg.steps = 0;
    TrainResult frozen = train(train_data, eval_data, {1, 8, 1}, InitScheme::uniform(0.5), cfg);
    LayeredNet init = init_net(InitScheme::uniform(0.5), {1, 8, 1}, cfg.seed);
    for (std::size_t l = 0; l < init.layers.size(); ++l) {
        CHECK(frozen.final_net.layers[l].w == init.layers[l].w);
        CHECK(frozen.final_net.layers[l].b == init.layers[l].b);
    }
}

TEST_CASE("training is deterministic in the seeds") {
    auto ifs = builtin_ifs("cantor1d");
    FractalDistribution dist(ifs, 2, 0.25 * ifs.margin_cap(2), uniform_curve(2));
    Dataset train_data = dist.sample_dataset(512, 5);
    Dataset eval_data = dist.sample_dataset(128, 6);
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.batch_size = 32;
    cfg.steps = 50;
    cfg.eval_every = 10;
    cfg.seed = 11;
    TrainResult a = train(train_data, eval_data, {1, 8, 1}, InitScheme::paper_uniform(0.5), cfg);
    TrainResult b = train(train_data, eval_data, {1, 8, 1}, InitScheme::paper_uniform(0.5), cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].loss == b.history[i].loss);
        CHECK(a.history[i].accuracy == b.history[i].accuracy);
    }
    for (std::size_t l = 0; l < a.final_net.layers.size(); ++l)
        CHECK(a.final_net.layers[l].w == b.final_net.layers[l].w);
}

TEST_CASE("evaluate_accuracy semantics") {
    auto ifs = builtin_ifs("cantor1d");
    const int n = 3;
    const double gamma = 0.25 * ifs.margin_cap(n);
    FractalDistribution dist(ifs, n, gamma, uniform_curve(n));
    LayeredNet classifier = build_exact_classifier(ifs, n, gamma);
    Dataset ds = dist.sample_dataset(4000, 21);
    CHECK(evaluate_accuracy(classifier, ds) == 1.0);

    LayeredNet constant;
    LayeredNet::Layer o{1, 1, {0.0}, {1.0}};
    constant.layers = {o};
    const double acc = evaluate_accuracy(constant, ds);
    CHECK(std::abs(acc - 0.5) < 0.03);

    // Accuracy is one minus the mean 0/1 loss.
    int wrong = 0;
    for (const auto& s : ds.samples)
        if ((forward(constant, s.x) >= 0.0 ? 1 : -1) != s.y) ++wrong;
    CHECK(acc == doctest::Approx(1.0 - double(wrong) / double(ds.size())));
}
