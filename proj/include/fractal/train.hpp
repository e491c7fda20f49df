#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fractal/distribution.hpp"
#include "fractal/net.hpp"

namespace fractal {

struct InitScheme {
    enum class Kind { PaperUniform, Uniform, NetLiteral };
    Kind kind = Kind::PaperUniform;
    double bias = 0.5;   // PaperUniform: fixed bias value, must lie in [0, 1/2]
    double scale = 0.1;  // Uniform: weights and biases from U[-scale, scale]
    LayeredNet literal;  // NetLiteral

    static InitScheme paper_uniform(double bias = 0.5);
    static InitScheme uniform(double scale);
    static InitScheme literal_net(LayeredNet net);
};

// widths is the full chain {d, k_1, ..., k_{t-1}, out}. PaperUniform draws
// weights from U[-1/(2 fan_in), 1/(2 fan_in)] and sets every bias to `bias`.
LayeredNet init_net(const InitScheme& scheme, const std::vector<int>& widths,
                    std::uint64_t seed);

struct HingeBatchResult {
    double loss = 0.0;
    LayeredNet grad; // same shapes as the net
};

// Mean hinge loss max(1 - y f(x), 0) over the batch and its gradient by
// reverse accumulation. Subgradients at kinks are taken as 0.
HingeBatchResult hinge_loss_and_grad(const LayeredNet& net,
                                     std::span<const LabeledSample> batch);

struct TrainConfig {
    enum class Opt { SGD, Adam };
    Opt optimizer = Opt::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 100;
    long steps = 10000;
    long eval_every = 500;
    std::uint64_t seed = 0;

    void validate() const;
};

class Optimizer {
  public:
    Optimizer(const TrainConfig& cfg, const LayeredNet& shape);

    void step(LayeredNet& net, const LayeredNet& grad);

  private:
    TrainConfig cfg_;
    LayeredNet m_, v_; // Adam moments
    long t_ = 0;
};

struct TrainHistoryRow {
    long step;
    double loss;
    double accuracy;
};

struct TrainResult {
    LayeredNet best_net;
    double best_accuracy = 0.0;
    long best_step = 0;
    LayeredNet final_net;
    std::vector<TrainHistoryRow> history;
};

// Mini-batches by seeded shuffling; evaluates on eval_data every eval_every
// steps and keeps the best checkpoint.
TrainResult train(const Dataset& train_data, const Dataset& eval_data,
                  const std::vector<int>& widths, const InitScheme& scheme,
                  const TrainConfig& config);

// Fraction of samples with sign(forward(x)) == y; sign(0) counts as +1.
double evaluate_accuracy(const LayeredNet& net, const Dataset& dataset);

void write_history_csv(std::ostream& os, const std::vector<TrainHistoryRow>& history);

} // namespace fractal
