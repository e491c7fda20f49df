#include "fractal/net.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace fractal {

int LayeredNet::max_width() const {
    int w = 0;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) w = std::max(w, layers[i].rows);
    return w;
}

std::size_t LayeredNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

void LayeredNet::check_shapes() const {
    if (layers.empty()) throw ShapeMismatch("net has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.rows < 1 || l.cols < 1) throw ShapeMismatch("layer with empty shape");
        if (l.w.size() != static_cast<std::size_t>(l.rows) * l.cols ||
            l.b.size() != static_cast<std::size_t>(l.rows))
            throw ShapeMismatch("layer storage does not match declared shape");
        if (i > 0 && layers[i - 1].rows != l.cols)
            throw ShapeMismatch("layer " + std::to_string(i) + " expects " +
                                std::to_string(l.cols) + " inputs, previous layer has " +
                                std::to_string(layers[i - 1].rows));
    }
}

namespace {

void affine_into(const LayeredNet::Layer& l, const std::vector<double>& in,
                 std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(l.rows), 0.0);
    for (int r = 0; r < l.rows; ++r) {
        const double* wr = l.w.data() + static_cast<std::size_t>(r) * l.cols;
        double s = l.b[static_cast<std::size_t>(r)];
        for (int c = 0; c < l.cols; ++c) s += wr[c] * in[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = s;
    }
}

} // namespace

std::vector<double> forward_vector(const LayeredNet& net, const std::vector<double>& x) {
    if (net.layers.empty()) throw ShapeMismatch("net has no layers");
    if (static_cast<int>(x.size()) != net.input_dim())
        throw ShapeMismatch("forward: input has dim " + std::to_string(x.size()) +
                            ", net expects " + std::to_string(net.input_dim()));
    std::vector<double> cur = x, next;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        affine_into(net.layers[i], cur, next);
        if (i + 1 < net.layers.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        cur.swap(next);
    }
    return cur;
}

double forward(const LayeredNet& net, const std::vector<double>& x) {
    if (net.output_dim() != 1) throw ShapeMismatch("forward: net output is not scalar");
    return forward_vector(net, x)[0];
}

std::vector<std::vector<double>> forward_trace(const LayeredNet& net,
                                               const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != net.input_dim())
        throw ShapeMismatch("forward_trace: input dim mismatch");
    std::vector<std::vector<double>> acts(net.layers.size());
    const std::vector<double>* in = &x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        affine_into(net.layers[i], *in, acts[i]);
        if (i + 1 < net.layers.size())
            for (double& v : acts[i]) v = v > 0.0 ? v : 0.0;
        in = &acts[i];
    }
    return acts;
}

void write_net(std::ostream& os, const LayeredNet& net) {
    char buf[64];
    os << "layers " << net.depth() << "\n";
    for (const auto& l : net.layers) {
        os << l.rows << " " << l.cols << "\n";
        for (int r = 0; r < l.rows; ++r) {
            for (int c = 0; c < l.cols; ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", l.at(r, c));
                os << (c ? " " : "") << buf;
            }
            os << "\n";
        }
        for (int r = 0; r < l.rows; ++r) {
            std::snprintf(buf, sizeof(buf), "%.17g", l.b[static_cast<std::size_t>(r)]);
            os << (r ? " " : "") << buf;
        }
        os << "\n";
    }
}

LayeredNet read_net(std::istream& is) {
    std::string tag;
    int t = 0;
    if (!(is >> tag >> t) || tag != "layers" || t < 1)
        throw ParseError("net file must start with 'layers <t>'");
    LayeredNet net;
    net.layers.resize(static_cast<std::size_t>(t));
    for (auto& l : net.layers) {
        if (!(is >> l.rows >> l.cols) || l.rows < 1 || l.cols < 1)
            throw ParseError("bad layer shape");
        l.w.resize(static_cast<std::size_t>(l.rows) * l.cols);
        l.b.resize(static_cast<std::size_t>(l.rows));
        for (double& v : l.w)
            if (!(is >> v)) throw ParseError("truncated weight block");
        for (double& v : l.b)
            if (!(is >> v)) throw ParseError("truncated bias block");
    }
    net.check_shapes();
    return net;
}

void save_net(const std::string& path, const LayeredNet& net) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot open '" + path + "' for writing");
    write_net(os, net);
}

LayeredNet load_net(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open '" + path + "'");
    return read_net(is);
}

} // namespace fractal
