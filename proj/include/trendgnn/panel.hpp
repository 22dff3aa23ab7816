#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trendgnn/tensor.hpp"

namespace trendgnn::signals {

/// The four indicator groups used for reporting.
enum class Category { H, B, TV, DB };

std::string category_name(Category c);
Category category_from_name(const std::string& name);

using CategoryMap = std::map<std::string, Category>;

/// Checks that `map` categorizes exactly the given signals (each one, once).
void validate_category_partition(const CategoryMap& map,
                                 const std::vector<std::string>& signal_names);

CategoryMap load_category_map(const std::string& path);
void save_category_map(const CategoryMap& map, const std::string& path);

/// Train/test split point for rolling-origin evaluation: weeks [0, tau_start)
/// train, weeks [tau_start, tau_start + horizon) test.
struct SplitSpec {
    std::size_t tau_start = 20;
    std::size_t horizon = 4;

    void validate(std::size_t total_weeks) const;
};

/// Value cube over (state, signal, time) with optional category labels.
/// Time steps are daily after ingestion and weekly after resampling; each
/// step carries its ISO start date. Panels are immutable by convention once
/// built: operations return new panels.
class Panel {
public:
    std::vector<std::string> states;
    std::vector<std::string> signal_names;
    std::vector<std::string> dates;  // ISO yyyy-mm-dd per time step
    bool weekly = false;
    CategoryMap categories;  // may be empty until attached

    Panel() = default;
    Panel(std::vector<std::string> states_, std::vector<std::string> signals_,
          std::vector<std::string> dates_, bool weekly_);

    std::size_t n_states() const { return states.size(); }
    std::size_t n_signals() const { return signal_names.size(); }
    std::size_t n_steps() const { return dates.size(); }
    std::size_t n_nodes() const { return n_states() * n_signals(); }

    double value(std::size_t state, std::size_t signal, std::size_t t) const {
        return values_[(state * n_signals() + signal) * n_steps() + t];
    }
    void set_value(std::size_t state, std::size_t signal, std::size_t t, double v) {
        values_[(state * n_signals() + signal) * n_steps() + t] = v;
    }

    /// One (state, signal) series as a contiguous copy.
    std::vector<double> series(std::size_t state, std::size_t signal) const;

    std::size_t state_index(const std::string& name) const;
    std::size_t signal_index(const std::string& name) const;

    /// Global node id convention: state_index * n_signals + signal_index.
    std::size_t node_id(std::size_t state, std::size_t signal) const {
        return state * n_signals() + signal;
    }

    /// Copy restricted to time steps [begin, end).
    Panel slice_steps(std::size_t begin, std::size_t end) const;

    bool operator==(const Panel& o) const;

private:
    std::vector<double> values_;  // [(state*n_signals+signal)*T + t]
};

enum class Schema { Wide, Long };

/// Reads a daily panel in raw units. Wide: `state,date,<sig1>,...`; long:
/// `state,date,signal,value`. Every (state, signal) series must be complete
/// over a gap-free daily date axis; violations name the offending
/// state/signal/date.
Panel load_panel(const std::string& path, Schema schema);

/// Writes the canonical wide export (UTF-8, ISO dates).
void save_panel_wide(const Panel& panel, const std::string& path);
void save_panel_long(const Panel& panel, const std::string& path);

/// Aggregates consecutive 7-day blocks by arithmetic mean; a trailing
/// partial week is dropped. Errors when fewer than 7 days are present.
Panel resample_weekly(const Panel& daily);

enum class NormMode { FullSeries, TrainOnly };
enum class NormScope { PerSeries, PooledAcrossStates };
enum class ConstantSeriesPolicy { Error, MapToHalf };

struct NormParams {
    struct Entry {
        std::string state;  // empty for pooled scope
        std::string signal;
        double min = 0.0;
        double max = 1.0;
    };
    std::vector<Entry> entries;
    NormScope scope = NormScope::PerSeries;
};

/// Min-max rescaling to [0, 1]. FullSeries uses the whole series (the
/// default; note it lets test weeks influence the scale). TrainOnly fits
/// min/max on weeks before split->tau_start and clips transformed test
/// values into [0, 1].
std::pair<Panel, NormParams> normalize(const Panel& panel, NormMode mode,
                                       const std::optional<SplitSpec>& split = std::nullopt,
                                       NormScope scope = NormScope::PerSeries,
                                       ConstantSeriesPolicy constant_policy =
                                           ConstantSeriesPolicy::MapToHalf);

Panel denormalize(const Panel& panel, const NormParams& params);

void save_norm_params(const NormParams& params, const std::string& path);
NormParams load_norm_params(const std::string& path);

/// One rolling-window training sample: 4 input weeks followed by 4 target
/// weeks. Rows of input/target are global nodes, columns are weeks.
struct WindowSample {
    std::size_t window_start = 0;
    ad::Tensor input;   // n_nodes x 4
    ad::Tensor target;  // n_nodes x 4
};

inline constexpr std::size_t kWindowWeeks = 4;

/// All stride-1 windows whose 8 weeks fit inside [region_begin, region_end).
/// A too-short region yields an empty list (with a warning), not an error.
std::vector<WindowSample> rolling_windows(const Panel& panel, std::size_t region_begin,
                                          std::size_t region_end);

/// Node features for the 4 weeks starting at t0 (the model input layout).
ad::Tensor window_features(const Panel& panel, std::size_t t0);

}  // namespace trendgnn::signals
