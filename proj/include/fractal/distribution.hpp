#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fractal/curve.hpp"
#include "fractal/ifs.hpp"
#include "fractal/rng.hpp"

namespace fractal {

enum class GapStyle { FullComplement, CentralGap };

std::string to_string(GapStyle style);
GapStyle gap_style_from_string(const std::string& s);

struct LabeledSample {
    Vec x;
    int y; // -1 or +1
};

struct DatasetMeta {
    std::string ifs_name;
    int n = 0;
    double gamma = 0.0;
    std::vector<double> curve_weights;
    GapStyle gap_style = GapStyle::FullComplement;
    std::uint64_t seed = 0;
    std::size_t m = 0;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    DatasetMeta meta;

    int dim() const { return samples.empty() ? 0 : static_cast<int>(samples[0].x.size()); }
    std::size_t size() const { return samples.size(); }
};

// Rejection budget per negative draw.
inline constexpr std::size_t kRejectionBudget = 1000000;

// The labeled distribution D_n: positives uniform on K_n^gamma, negatives on
// gap level j with probability p_j. CentralGap places level-j negatives in the
// central [1/3,2/3]^d cube of each level-(j-1) cell instead of the full
// complement piece.
class FractalDistribution {
  public:
    FractalDistribution(IteratedFunctionSystem ifs, int depth, double gamma,
                        ApproximationCurve curve,
                        GapStyle gap_style = GapStyle::FullComplement);

    const IteratedFunctionSystem& ifs() const { return ifs_; }
    int depth() const { return depth_; }
    double gamma() const { return gamma_; }
    const ApproximationCurve& curve() const { return curve_; }
    GapStyle gap_style() const { return gap_style_; }

    Vec sample_positive(Rng& rng) const;
    Vec sample_negative(Rng& rng) const;
    Dataset sample_dataset(std::size_t m, std::uint64_t seed) const;

    // Uniform level-`level` address; maps with unequal |det| are weighted so
    // the induced cell measure stays uniform over K_level.
    FractalAddress draw_address(Rng& rng, int level) const;

  private:
    IteratedFunctionSystem ifs_;
    int depth_;
    double gamma_;
    ApproximationCurve curve_;
    GapStyle gap_style_;
    std::vector<double> map_weights_; // |det M_i|
};

// Uniform point of K_n^gamma; shared by the distribution and the classifier
// verification harness.
Vec sample_uniform_positive(const IteratedFunctionSystem& ifs, int n, double gamma, Rng& rng);

// CSV with header "x1,...,xd,y"; companion ".meta" sidecar is key=value text.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

void write_dataset_csv(std::ostream& os, const Dataset& dataset);
void write_dataset_meta(std::ostream& os, const DatasetMeta& meta);

} // namespace fractal
