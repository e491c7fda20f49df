#include "fractal/distribution.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fractal {

std::string to_string(GapStyle style) {
    return style == GapStyle::FullComplement ? "full" : "central";
}

GapStyle gap_style_from_string(const std::string& s) {
    if (s == "full") return GapStyle::FullComplement;
    if (s == "central") return GapStyle::CentralGap;
    throw ParseError("unknown gap style '" + s + "'");
}

FractalDistribution::FractalDistribution(IteratedFunctionSystem ifs, int depth, double gamma,
                                         ApproximationCurve curve, GapStyle gap_style)
    : ifs_(std::move(ifs)), depth_(depth), gamma_(gamma), curve_(std::move(curve)),
      gap_style_(gap_style) {
    if (depth_ < 1) throw InvalidArgument("distribution depth must be >= 1");
    if (curve_.levels() != depth_)
        throw InvalidArgument("curve has " + std::to_string(curve_.levels()) +
                              " levels, distribution depth is " + std::to_string(depth_));
    const double cap = ifs_.margin_cap(depth_);
    if (!(gamma_ > 0.0) || gamma_ >= cap)
        throw MarginTooLarge("gamma " + std::to_string(gamma_) + " outside (0, " +
                             std::to_string(cap) + ")");
    if (!ifs_.assumption_report().all_ok())
        throw InvalidArgument("IFS violates the structural assumptions");
    map_weights_ = ifs_.map_abs_determinants();
    if (gap_style_ == GapStyle::CentralGap) {
        // The central cube's interior must sit inside the level-1 gap;
        // touching a map image along the boundary is measure zero and fine.
        const double w = 1.0 / 3.0 - 2.0 * kGeomTol;
        AffineMap center{Mat::diagonal(ifs_.dim(), w), Vec(ifs_.dim(), 1.0 / 3.0 + kGeomTol)};
        for (int i = 0; i < ifs_.map_count(); ++i) {
            if (!(image_distance(center, ifs_.map(i)) > 0.0))
                throw InvalidArgument("CentralGap: central cube intersects map image " +
                                      std::to_string(i + 1));
        }
    }
}

namespace {

// Level-wise draw with probability |det M_i| / sum |det|, which makes the
// induced address measure the uniform volume measure on K_level.
FractalAddress weighted_address(const std::vector<double>& weights, Rng& rng, int level) {
    FractalAddress addr;
    addr.indices.reserve(static_cast<std::size_t>(level));
    bool equal = true;
    for (double w : weights)
        if (std::abs(w - weights[0]) > 1e-12 * weights[0]) equal = false;
    for (int j = 0; j < level; ++j) {
        std::size_t i = equal ? static_cast<std::size_t>(rng.below(weights.size()))
                              : rng.categorical(weights);
        addr.indices.push_back(static_cast<int>(i) + 1);
    }
    return addr;
}

} // namespace

FractalAddress FractalDistribution::draw_address(Rng& rng, int level) const {
    return weighted_address(map_weights_, rng, level);
}

Vec sample_uniform_positive(const IteratedFunctionSystem& ifs, int n, double gamma, Rng& rng) {
    auto weights = ifs.map_abs_determinants();
    FractalAddress addr = weighted_address(weights, rng, n);
    const AffineMap cell = ifs.compose_address(addr);
    const Vec insets = ifs.margin_insets(cell, gamma);
    Vec u(static_cast<std::size_t>(ifs.dim()));
    for (int m = 0; m < ifs.dim(); ++m) {
        const double in = insets[static_cast<std::size_t>(m)];
        if (in >= 0.5) throw MarginTooLarge("margin inset swallows the cell");
        u[static_cast<std::size_t>(m)] = rng.uniform(in, 1.0 - in);
    }
    return cell.apply(u);
}

Vec FractalDistribution::sample_positive(Rng& rng) const {
    return sample_uniform_positive(ifs_, depth_, gamma_, rng);
}

Vec FractalDistribution::sample_negative(Rng& rng) const {
    const int level = static_cast<int>(rng.categorical(curve_.weights())) + 1;
    const FractalAddress addr = draw_address(rng, level - 1);
    const AffineMap cell = ifs_.compose_address(addr);
    const int d = ifs_.dim();
    Vec u(static_cast<std::size_t>(d));
    if (gap_style_ == GapStyle::CentralGap) {
        for (int m = 0; m < d; ++m)
            u[static_cast<std::size_t>(m)] = rng.uniform(1.0 / 3.0, 2.0 / 3.0);
        return cell.apply(u);
    }
    // Uniform over the level-(level-1) cell conditioned on missing K_level,
    // i.e. the unfolded point misses K_1.
    for (std::size_t attempt = 0; attempt < kRejectionBudget; ++attempt) {
        for (int m = 0; m < d; ++m) u[static_cast<std::size_t>(m)] = rng.uniform01();
        bool in_next = false;
        for (int i = 0; i < ifs_.map_count() && !in_next; ++i) {
            Vec w = ifs_.inverse_map(i).apply(u);
            if (linf_distance_to_unit_box(w) <= 0.0) in_next = true;
        }
        if (!in_next) return cell.apply(u);
    }
    throw RejectionBudgetExceeded("no gap point found in 10^6 proposals; degenerate geometry");
}

Dataset FractalDistribution::sample_dataset(std::size_t m, std::uint64_t seed) const {
    if (m < 1) throw InvalidArgument("dataset size must be >= 1");
    Dataset ds;
    ds.samples.reserve(m);
    Rng rng(derive_seed(seed, 0x5eed));
    for (std::size_t i = 0; i < m; ++i) {
        const bool positive = rng.bernoulli(0.5);
        LabeledSample s;
        s.y = positive ? 1 : -1;
        s.x = positive ? sample_positive(rng) : sample_negative(rng);
        ds.samples.push_back(std::move(s));
    }
    ds.meta = DatasetMeta{ifs_.name(), depth_, gamma_, curve_.weights(),
                          gap_style_, seed, m};
    return ds;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_dataset_csv(std::ostream& os, const Dataset& dataset) {
    const int d = dataset.dim();
    for (int m = 0; m < d; ++m) os << (m ? "," : "") << "x" << (m + 1);
    os << ",y\n";
    for (const auto& s : dataset.samples) {
        for (int m = 0; m < d; ++m) os << (m ? "," : "") << format_double(s.x[static_cast<std::size_t>(m)]);
        os << "," << s.y << "\n";
    }
}

void write_dataset_meta(std::ostream& os, const DatasetMeta& meta) {
    os << "ifs = " << meta.ifs_name << "\n";
    os << "n = " << meta.n << "\n";
    os << "gamma = " << format_double(meta.gamma) << "\n";
    os << "curve =";
    for (double w : meta.curve_weights) os << " " << format_double(w);
    os << "\n";
    os << "gap_style = " << to_string(meta.gap_style) << "\n";
    os << "seed = " << meta.seed << "\n";
    os << "m = " << meta.m << "\n";
}

void write_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream csv(path);
    if (!csv) throw ParseError("cannot open '" + path + "' for writing");
    write_dataset_csv(csv, dataset);
    std::ofstream meta(path + ".meta");
    if (!meta) throw ParseError("cannot open '" + path + ".meta' for writing");
    write_dataset_meta(meta, dataset.meta);
}

namespace {

DatasetMeta read_meta(const std::string& path) {
    DatasetMeta meta;
    std::ifstream in(path);
    if (!in) return meta; // sidecar is optional on read
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            auto last = s.find_last_not_of(" \t\r");
            s.erase(last == std::string::npos ? 0 : last + 1);
        };
        trim(key);
        trim(val);
        if (key == "ifs") meta.ifs_name = val;
        else if (key == "n") meta.n = std::stoi(val);
        else if (key == "gamma") meta.gamma = std::stod(val);
        else if (key == "gap_style") meta.gap_style = gap_style_from_string(val);
        else if (key == "seed") meta.seed = std::stoull(val);
        else if (key == "m") meta.m = std::stoull(val);
        else if (key == "curve") {
            std::istringstream ws(val);
            double w;
            meta.curve_weights.clear();
            while (ws >> w) meta.curve_weights.push_back(w);
        }
    }
    return meta;
}

} // namespace

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw ParseError(path + ":1: empty file");
    // Header must be x1,...,xd,y.
    std::vector<std::string> cols;
    {
        std::istringstream hs(header);
        std::string col;
        while (std::getline(hs, col, ',')) cols.push_back(col);
    }
    if (cols.size() < 2 || cols.back() != "y")
        throw ParseError(path + ":1: header must end with 'y'");
    const int d = static_cast<int>(cols.size()) - 1;
    for (int m = 0; m < d; ++m)
        if (cols[static_cast<std::size_t>(m)] != "x" + std::to_string(m + 1))
            throw ParseError(path + ":1: column " + std::to_string(m + 1) +
                             " must be x" + std::to_string(m + 1));
    Dataset ds;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        LabeledSample s;
        s.x.resize(static_cast<std::size_t>(d));
        std::string field;
        for (int m = 0; m < d; ++m) {
            if (!std::getline(ls, field, ','))
                throw ParseError(path + ":" + std::to_string(line_no) + ": too few fields");
            try {
                s.x[static_cast<std::size_t>(m)] = std::stod(field);
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" +
                                 field + "'");
            }
        }
        if (!std::getline(ls, field, ','))
            throw ParseError(path + ":" + std::to_string(line_no) + ": missing label");
        int y = 0;
        try {
            y = std::stoi(field);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad label '" + field + "'");
        }
        if (y != 1 && y != -1)
            throw ParseError(path + ":" + std::to_string(line_no) + ": label must be -1 or 1");
        s.y = y;
        ds.samples.push_back(std::move(s));
    }
    ds.meta = read_meta(path + ".meta");
    return ds;
}

} // namespace fractal
