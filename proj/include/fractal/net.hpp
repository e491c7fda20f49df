#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fractal/errors.hpp"

namespace fractal {

// Feedforward ReLU network: every hidden layer applies max(.,0), the final
// layer is affine. Weight matrices are dense row-major.
struct LayeredNet {
    struct Layer {
        int rows = 0;
        int cols = 0;
        std::vector<double> w; // rows*cols
        std::vector<double> b; // rows

        double& at(int r, int c) { return w[static_cast<std::size_t>(r) * cols + c]; }
        double at(int r, int c) const { return w[static_cast<std::size_t>(r) * cols + c]; }
    };

    std::vector<Layer> layers;

    int depth() const { return static_cast<int>(layers.size()); }
    int input_dim() const { return layers.empty() ? 0 : layers.front().cols; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().rows; }
    int max_width() const; // max hidden-layer width (0 if no hidden layers)
    std::size_t parameter_count() const;

    void check_shapes() const; // throws ShapeMismatch on inconsistent chaining
};

// Full forward pass, vector output.
std::vector<double> forward_vector(const LayeredNet& net, const std::vector<double>& x);
// Scalar-output convenience; throws ShapeMismatch when output_dim != 1.
double forward(const LayeredNet& net, const std::vector<double>& x);

// Post-activation values of every layer (hidden layers after ReLU, final layer
// affine); out[k] is layer k's output.
std::vector<std::vector<double>> forward_trace(const LayeredNet& net,
                                               const std::vector<double>& x);

// Text format: "layers t", then per layer "rows cols", the weight rows, and
// the bias row; 17 significant digits.
void write_net(std::ostream& os, const LayeredNet& net);
LayeredNet read_net(std::istream& is);
void save_net(const std::string& path, const LayeredNet& net);
LayeredNet load_net(const std::string& path);

} // namespace fractal
