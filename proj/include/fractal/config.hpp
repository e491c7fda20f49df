#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fractal/curve.hpp"
#include "fractal/distribution.hpp"

namespace fractal {

// Flat key = value text; '#' starts a comment; grid-valued keys repeat.
class KeyValueFile {
  public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse(std::istream& is, const std::string& origin);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const; // last occurrence
    std::vector<std::string> get_all(const std::string& key) const;

    std::string get_or(const std::string& key, const std::string& fallback) const;
    long get_long(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

struct ExperimentConfig {
    std::string fractal = "cantor2d";
    int n = 3;
    double gamma = 0.0; // resolved to margin_cap(n)/4 when left at 0
    std::string curve_spec = "preset:1";
    GapStyle gap_style = GapStyle::CentralGap;
    std::size_t train_size = 20000;
    std::size_t test_size = 4000;
    std::vector<int> depths{1, 2, 3, 4};
    std::vector<int> widths{16, 64};
    std::vector<double> lrs{1e-2, 1e-3};
    std::string optimizer = "adam";
    int batch_size = 100;
    long steps = 10000;
    long eval_every = 500;
    int seeds = 3;
    std::uint64_t master_seed = 1;
    // probe
    int probe_t = 2;
    int probe_k = 4;
    double probe_delta = 0.5;
    int probe_trials = 400;
    // build-verify
    int block_s = 0; // 0 -> exact classifier
    std::size_t verify_m = 20000;
    std::string net_path; // verify an existing net instead of compiling
    bool long_run = false;

    IteratedFunctionSystem make_ifs() const;
    double resolved_gamma(const IteratedFunctionSystem& ifs) const;
    ApproximationCurve make_curve() const;
    FractalDistribution make_distribution() const;
};

// Applies file keys over the desk-scale defaults; --long-run swaps in the
// paper-scale grid for any key the file does not pin.
ExperimentConfig resolve_config(const KeyValueFile& kv, bool long_run);

void write_resolved_config(std::ostream& os, const ExperimentConfig& cfg);

} // namespace fractal
