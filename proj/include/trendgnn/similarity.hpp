#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trendgnn/panel.hpp"

namespace trendgnn::sim {

/// Small orthonormal basis of local trend shapes. Projecting z-normalized
/// windows onto it summarizes "what the series is doing" over w weeks.
struct ShapeletDictionary {
    std::size_t window_length = 4;
    std::vector<std::string> names;
    std::vector<std::vector<double>> shapelets;  // unit norm, pairwise orthogonal

    /// flat / linear-up / peak over w=4, orthonormalized. Downward trends and
    /// troughs show up as negative coefficients.
    static ShapeletDictionary trend_basis(std::size_t window_length = 4);

    /// Gram-Schmidt over arbitrary raw vectors; drops near-dependent ones.
    static ShapeletDictionary from_raw(std::vector<std::string> names,
                                       std::vector<std::vector<double>> raw);

    std::size_t count() const { return shapelets.size(); }
};

/// Columns are sliding-window positions, rows are shapelet coefficients.
struct DescriptorMatrix {
    std::size_t n_shapelets = 0;
    std::size_t n_positions = 0;
    std::vector<double> coeffs;  // row-major [shapelet][position]

    double at(std::size_t s, std::size_t t) const { return coeffs[s * n_positions + t]; }
    std::vector<double> column(std::size_t t) const;
};

/// Projects every length-w window (z-normalized; constant windows map to the
/// zero vector) onto the dictionary.
DescriptorMatrix shapelet_transform(std::span<const double> x, const ShapeletDictionary& dict);

/// Classic dynamic-time-warping distance over scalar series with squared
/// Euclidean local cost; returns the square root of the optimal path cost.
/// `band` restricts |i - j| (Sakoe-Chiba) and must admit the length gap.
double dtw(std::span<const double> a, std::span<const double> b,
           std::optional<std::size_t> band = std::nullopt);

/// DTW over descriptor columns (vector-valued local cost).
double dtw_descriptors(const DescriptorMatrix& a, const DescriptorMatrix& b,
                       std::optional<std::size_t> band = std::nullopt);

/// Trend-shape similarity: DTW over shapelet descriptors mapped through
/// 1/(1+d) so the score lies in (0, 1] and rank order is preserved.
double dtw_s(std::span<const double> a, std::span<const double> b,
             const ShapeletDictionary& dict, std::optional<std::size_t> band = std::nullopt);

struct LagResult {
    double best_abs_corr = 0.0;
    int best_lag = 0;
};

/// Max-|Pearson| over lags 0..max_lag of corr(a[0..T-l), b[l..T)): the lag at
/// which b best follows a. Ties prefer the smallest lag; zero-variance
/// overlaps contribute correlation 0.
LagResult lagged_correlation(std::span<const double> a, std::span<const double> b, int max_lag);

enum class Measure { DtwS, Lagged };

std::string measure_name(Measure m);
Measure measure_from_name(const std::string& name);

struct SimilarityParams {
    Measure measure = Measure::DtwS;
    std::size_t shapelet_window = 4;
    int max_lag = 4;
    std::optional<std::size_t> band;  // unbounded by default
};

/// Row = destination signal, column = source: entry (i, j) scores how well
/// source j explains destination i. Symmetric for DTW+S; lagged correlation
/// is directional and stores the best lag per entry.
struct SimilarityMatrix {
    std::string state;
    std::vector<std::string> signal_names;
    Measure measure = Measure::DtwS;
    std::vector<double> scores;  // row-major n x n
    std::vector<int> best_lags;  // lagged only, else empty
    std::size_t train_weeks = 0;

    std::size_t size() const { return signal_names.size(); }
    double at(std::size_t dst, std::size_t src) const { return scores[dst * size() + src]; }
};

/// All pairs for one state. When `train_end` is set, only weeks before it
/// are consumed (keeps graph construction on the training side of a split).
SimilarityMatrix similarity_matrix(const signals::Panel& panel, const std::string& state,
                                   const SimilarityParams& params,
                                   std::optional<std::size_t> train_end = std::nullopt);

/// CSV with signal-name header row/column plus a JSON sidecar
/// (`<path>.meta.json`) recording measure, params, state and training range.
void save_similarity(const SimilarityMatrix& m, const SimilarityParams& params,
                     const std::string& path);

}  // namespace trendgnn::sim
