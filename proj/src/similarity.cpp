#include "trendgnn/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "trendgnn/csvio.hpp"

namespace trendgnn::sim {

ShapeletDictionary ShapeletDictionary::from_raw(std::vector<std::string> names,
                                                std::vector<std::vector<double>> raw) {
    if (raw.empty()) throw std::invalid_argument("shapelets: empty dictionary");
    const std::size_t w = raw[0].size();
    ShapeletDictionary dict;
    dict.window_length = w;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].size() != w) throw std::invalid_argument("shapelets: ragged lengths");
        auto v = raw[i];
        for (const auto& u : dict.shapelets) {
            double dot = 0.0;
            for (std::size_t k = 0; k < w; ++k) dot += v[k] * u[k];
            for (std::size_t k = 0; k < w; ++k) v[k] -= dot * u[k];
        }
        double norm = 0.0;
        for (const auto x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-9) continue;  // linearly dependent on earlier shapelets
        for (auto& x : v) x /= norm;
        dict.shapelets.push_back(std::move(v));
        dict.names.push_back(names[i]);
    }
    return dict;
}

ShapeletDictionary ShapeletDictionary::trend_basis(std::size_t w) {
    if (w < 2) throw std::invalid_argument("shapelets: window must be >= 2");
    std::vector<double> flat(w, 1.0);
    std::vector<double> linear(w), peak(w);
    const double mid = (static_cast<double>(w) - 1.0) / 2.0;
    for (std::size_t k = 0; k < w; ++k) {
        linear[k] = static_cast<double>(k) - mid;
        const double d = std::abs(static_cast<double>(k) - mid);
        peak[k] = mid - d;  // tent shape, maximal in the middle
    }
    return from_raw({"flat", "linear_up", "peak"}, {flat, linear, peak});
}

std::vector<double> DescriptorMatrix::column(std::size_t t) const {
    std::vector<double> col(n_shapelets);
    for (std::size_t s = 0; s < n_shapelets; ++s) col[s] = at(s, t);
    return col;
}

DescriptorMatrix shapelet_transform(std::span<const double> x, const ShapeletDictionary& dict) {
    const std::size_t w = dict.window_length;
    if (x.size() < w) {
        throw std::invalid_argument("shapelet_transform: series of length " +
                                    std::to_string(x.size()) + " shorter than window " +
                                    std::to_string(w));
    }
    DescriptorMatrix out;
    out.n_shapelets = dict.count();
    out.n_positions = x.size() - w + 1;
    out.coeffs.assign(out.n_shapelets * out.n_positions, 0.0);
    std::vector<double> win(w);
    for (std::size_t t = 0; t < out.n_positions; ++t) {
        double mean = 0.0;
        for (std::size_t k = 0; k < w; ++k) mean += x[t + k];
        mean /= static_cast<double>(w);
        double var = 0.0;
        for (std::size_t k = 0; k < w; ++k) {
            win[k] = x[t + k] - mean;
            var += win[k] * win[k];
        }
        var /= static_cast<double>(w);
        if (var <= 1e-24) {
            continue;  // constant window -> zero descriptor column
        }
        const double inv_sd = 1.0 / std::sqrt(var);
        for (std::size_t s = 0; s < dict.count(); ++s) {
            double dot = 0.0;
            for (std::size_t k = 0; k < w; ++k) dot += win[k] * dict.shapelets[s][k];
            out.coeffs[s * out.n_positions + t] = dot * inv_sd;
        }
    }
    return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Shared DP over an abstract local cost. Returns the optimal accumulated
/// cost (not yet square-rooted).
template <typename CostFn>
double dtw_dp(std::size_t n, std::size_t m, std::optional<std::size_t> band, CostFn cost) {
    if (n == 0 || m == 0) throw std::invalid_argument("dtw: empty series");
    if (band) {
        const std::size_t gap = n > m ? n - m : m - n;
        if (*band < gap) {
            throw std::invalid_argument("dtw: band " + std::to_string(*band) +
                                        " narrower than length gap " + std::to_string(gap));
        }
    }
    std::vector<double> prev(m + 1, kInf), curr(m + 1, kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        std::fill(curr.begin(), curr.end(), kInf);
        std::size_t j_lo = 1, j_hi = m;
        if (band) {
            j_lo = i > *band ? i - *band : 1;
            j_hi = std::min(m, i + *band);
        }
        for (std::size_t j = j_lo; j <= j_hi; ++j) {
            const double best = std::min({prev[j], curr[j - 1], prev[j - 1]});
            if (best == kInf) continue;
            curr[j] = cost(i - 1, j - 1) + best;
        }
        std::swap(prev, curr);
    }
    return prev[m];
}

}  // namespace

double dtw(std::span<const double> a, std::span<const double> b,
           std::optional<std::size_t> band) {
    const double d2 = dtw_dp(a.size(), b.size(), band, [&](std::size_t i, std::size_t j) {
        const double d = a[i] - b[j];
        return d * d;
    });
    return std::sqrt(d2);
}

double dtw_descriptors(const DescriptorMatrix& a, const DescriptorMatrix& b,
                       std::optional<std::size_t> band) {
    if (a.n_shapelets != b.n_shapelets) {
        throw std::invalid_argument("dtw_descriptors: shapelet counts differ");
    }
    const std::size_t S = a.n_shapelets;
    const double d2 = dtw_dp(a.n_positions, b.n_positions, band,
                             [&](std::size_t i, std::size_t j) {
                                 double acc = 0.0;
                                 for (std::size_t s = 0; s < S; ++s) {
                                     const double d = a.at(s, i) - b.at(s, j);
                                     acc += d * d;
                                 }
                                 return acc;
                             });
    return std::sqrt(d2);
}

double dtw_s(std::span<const double> a, std::span<const double> b,
             const ShapeletDictionary& dict, std::optional<std::size_t> band) {
    const auto da = shapelet_transform(a, dict);
    const auto db = shapelet_transform(b, dict);
    return 1.0 / (1.0 + dtw_descriptors(da, db, band));
}

LagResult lagged_correlation(std::span<const double> a, std::span<const double> b, int max_lag) {
    if (max_lag < 0) throw std::invalid_argument("lagged_correlation: negative max_lag");
    const std::size_t T = std::min(a.size(), b.size());
    if (T <= static_cast<std::size_t>(max_lag) + 2) {
        throw std::invalid_argument("lagged_correlation: series of length " + std::to_string(T) +
                                    " too short for max_lag " + std::to_string(max_lag));
    }
    LagResult best;
    best.best_abs_corr = -1.0;
    for (int lag = 0; lag <= max_lag; ++lag) {
        const std::size_t n = T - static_cast<std::size_t>(lag);
        double ma = 0.0, mb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ma += a[i];
            mb += b[i + lag];
        }
        ma /= static_cast<double>(n);
        mb /= static_cast<double>(n);
        double saa = 0.0, sbb = 0.0, sab = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double da = a[i] - ma;
            const double db = b[i + lag] - mb;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
        }
        const double corr = (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
        if (std::abs(corr) > best.best_abs_corr) {
            best.best_abs_corr = std::abs(corr);
            best.best_lag = lag;
        }
    }
    if (best.best_abs_corr < 0.0) best.best_abs_corr = 0.0;
    return best;
}

std::string measure_name(Measure m) {
    return m == Measure::DtwS ? "dtw_s" : "lagged";
}

Measure measure_from_name(const std::string& name) {
    if (name == "dtw_s") return Measure::DtwS;
    if (name == "lagged") return Measure::Lagged;
    throw std::runtime_error("unknown similarity measure '" + name + "'");
}

SimilarityMatrix similarity_matrix(const signals::Panel& panel, const std::string& state,
                                   const SimilarityParams& params,
                                   std::optional<std::size_t> train_end) {
    const std::size_t si = panel.state_index(state);
    const std::size_t T = train_end ? std::min(*train_end, panel.n_steps()) : panel.n_steps();
    if (T == 0) throw std::invalid_argument("similarity_matrix: empty training range");
    const std::size_t n = panel.n_signals();

    SimilarityMatrix out;
    out.state = state;
    out.signal_names = panel.signal_names;
    out.measure = params.measure;
    out.train_weeks = T;
    out.scores.assign(n * n, 0.0);

    std::vector<std::vector<double>> series(n);
    for (std::size_t g = 0; g < n; ++g) {
        auto full = panel.series(si, g);
        series[g].assign(full.begin(), full.begin() + T);
    }

    if (params.measure == Measure::DtwS) {
        const auto dict = ShapeletDictionary::trend_basis(params.shapelet_window);
        std::vector<DescriptorMatrix> desc(n);
        for (std::size_t g = 0; g < n; ++g) desc[g] = shapelet_transform(series[g], dict);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                const double s = 1.0 / (1.0 + dtw_descriptors(desc[i], desc[j], params.band));
                out.scores[i * n + j] = s;
                out.scores[j * n + i] = s;
            }
        }
    } else {
        out.best_lags.assign(n * n, 0);
        for (std::size_t dst = 0; dst < n; ++dst) {
            for (std::size_t src = 0; src < n; ++src) {
                // source leads, destination follows
                const auto r = lagged_correlation(series[src], series[dst], params.max_lag);
                out.scores[dst * n + src] = r.best_abs_corr;
                out.best_lags[dst * n + src] = r.best_lag;
            }
        }
    }
    return out;
}

void save_similarity(const SimilarityMatrix& m, const SimilarityParams& params,
                     const std::string& path) {
    std::string out = "signal";
    for (const auto& s : m.signal_names) out += "," + s;
    out += "\n";
    const std::size_t n = m.size();
    for (std::size_t i = 0; i < n; ++i) {
        out += m.signal_names[i];
        for (std::size_t j = 0; j < n; ++j) out += "," + csvio::format_double(m.at(i, j));
        out += "\n";
    }
    csvio::write_text_file(path, out);

    nlohmann::json meta;
    meta["measure"] = measure_name(m.measure);
    meta["state"] = m.state;
    meta["train_weeks"] = m.train_weeks;
    meta["params"]["shapelet_window"] = params.shapelet_window;
    meta["params"]["max_lag"] = params.max_lag;
    if (params.band) meta["params"]["band"] = *params.band;
    csvio::write_text_file(path + ".meta.json", meta.dump(2) + "\n");
}

}  // namespace trendgnn::sim
