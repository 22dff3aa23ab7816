#include "trendgnn/panel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>

#include "trendgnn/csvio.hpp"

namespace trendgnn::signals {

std::string category_name(Category c) {
    switch (c) {
        case Category::H: return "H";
        case Category::B: return "B";
        case Category::TV: return "TV";
        case Category::DB: return "DB";
    }
    throw std::logic_error("category_name: bad enum");
}

Category category_from_name(const std::string& name) {
    if (name == "H") return Category::H;
    if (name == "B") return Category::B;
    if (name == "TV") return Category::TV;
    if (name == "DB") return Category::DB;
    throw std::runtime_error("unknown category '" + name + "' (expected H, B, TV or DB)");
}

void validate_category_partition(const CategoryMap& map,
                                 const std::vector<std::string>& signal_names) {
    for (const auto& s : signal_names) {
        if (!map.count(s)) throw std::runtime_error("signal '" + s + "' has no category");
    }
    for (const auto& [s, c] : map) {
        (void)c;
        if (std::find(signal_names.begin(), signal_names.end(), s) == signal_names.end()) {
            throw std::runtime_error("category map names unknown signal '" + s + "'");
        }
    }
}

CategoryMap load_category_map(const std::string& path) {
    const auto rows = csvio::read_rows(path);
    if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "signal" ||
        rows[0][1] != "category") {
        throw std::runtime_error(path + ": expected header 'signal,category'");
    }
    CategoryMap map;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) {
            throw std::runtime_error(path + ": bad row " + std::to_string(i + 1));
        }
        if (!map.emplace(rows[i][0], category_from_name(rows[i][1])).second) {
            throw std::runtime_error(path + ": duplicate signal '" + rows[i][0] + "'");
        }
    }
    return map;
}

void save_category_map(const CategoryMap& map, const std::string& path) {
    std::string out = "signal,category\n";
    for (const auto& [s, c] : map) out += s + "," + category_name(c) + "\n";
    csvio::write_text_file(path, out);
}

void SplitSpec::validate(std::size_t total_weeks) const {
    if (tau_start < 2 * kWindowWeeks) {
        throw std::invalid_argument("split: tau_start must be >= 8 (one full training window), got " +
                                    std::to_string(tau_start));
    }
    if (tau_start + horizon > total_weeks) {
        throw std::invalid_argument("split: tau_start " + std::to_string(tau_start) + " + horizon " +
                                    std::to_string(horizon) + " exceeds " +
                                    std::to_string(total_weeks) + " weeks");
    }
}

Panel::Panel(std::vector<std::string> states_, std::vector<std::string> signals_,
             std::vector<std::string> dates_, bool weekly_)
    : states(std::move(states_)),
      signal_names(std::move(signals_)),
      dates(std::move(dates_)),
      weekly(weekly_),
      values_(states.size() * signal_names.size() * dates.size(), 0.0) {}

std::vector<double> Panel::series(std::size_t state, std::size_t signal) const {
    const std::size_t base = (state * n_signals() + signal) * n_steps();
    return std::vector<double>(values_.begin() + base, values_.begin() + base + n_steps());
}

std::size_t Panel::state_index(const std::string& name) const {
    const auto it = std::find(states.begin(), states.end(), name);
    if (it == states.end()) throw std::invalid_argument("unknown state '" + name + "'");
    return static_cast<std::size_t>(it - states.begin());
}

std::size_t Panel::signal_index(const std::string& name) const {
    const auto it = std::find(signal_names.begin(), signal_names.end(), name);
    if (it == signal_names.end()) throw std::invalid_argument("unknown signal '" + name + "'");
    return static_cast<std::size_t>(it - signal_names.begin());
}

Panel Panel::slice_steps(std::size_t begin, std::size_t end) const {
    if (begin > end || end > n_steps()) {
        throw std::invalid_argument("slice_steps: bad range [" + std::to_string(begin) + ", " +
                                    std::to_string(end) + ") of " + std::to_string(n_steps()));
    }
    Panel out(states, signal_names,
              std::vector<std::string>(dates.begin() + begin, dates.begin() + end), weekly);
    out.categories = categories;
    for (std::size_t s = 0; s < n_states(); ++s)
        for (std::size_t g = 0; g < n_signals(); ++g)
            for (std::size_t t = begin; t < end; ++t)
                out.set_value(s, g, t - begin, value(s, g, t));
    return out;
}

bool Panel::operator==(const Panel& o) const {
    return states == o.states && signal_names == o.signal_names && dates == o.dates &&
           weekly == o.weekly && categories == o.categories && values_ == o.values_;
}

namespace {

struct CellKey {
    std::size_t state, signal, date;
    bool operator<(const CellKey& o) const {
        if (state != o.state) return state < o.state;
        if (signal != o.signal) return signal < o.signal;
        return date < o.date;
    }
};

Panel assemble_panel(const std::string& path, std::vector<std::string> states,
                     std::vector<std::string> signal_names, std::vector<std::int64_t> day_numbers,
                     const std::map<CellKey, double>& cells) {
    std::sort(day_numbers.begin(), day_numbers.end());
    day_numbers.erase(std::unique(day_numbers.begin(), day_numbers.end()), day_numbers.end());
    if (day_numbers.empty()) throw std::runtime_error(path + ": no data rows");
    // The date axis must be gap-free daily.
    for (std::size_t i = 1; i < day_numbers.size(); ++i) {
        if (day_numbers[i] != day_numbers[i - 1] + 1) {
            throw std::runtime_error(path + ": gap in series at date " +
                                     csvio::format_iso_date(day_numbers[i - 1] + 1) +
                                     " (missing day)");
        }
    }
    std::vector<std::string> dates;
    dates.reserve(day_numbers.size());
    for (const auto d : day_numbers) dates.push_back(csvio::format_iso_date(d));

    Panel panel(std::move(states), std::move(signal_names), std::move(dates), false);
    for (std::size_t s = 0; s < panel.n_states(); ++s) {
        for (std::size_t g = 0; g < panel.n_signals(); ++g) {
            for (std::size_t t = 0; t < panel.n_steps(); ++t) {
                const auto it = cells.find(
                    CellKey{s, g, static_cast<std::size_t>(day_numbers[t] - day_numbers[0])});
                if (it == cells.end()) {
                    throw std::runtime_error(path + ": gap in series: state '" + panel.states[s] +
                                             "', signal '" + panel.signal_names[g] + "', date " +
                                             panel.dates[t]);
                }
                panel.set_value(s, g, t, it->second);
            }
        }
    }
    return panel;
}

}  // namespace

Panel load_panel(const std::string& path, Schema schema) {
    const auto rows = csvio::read_rows(path);
    if (rows.empty()) throw std::runtime_error(path + ": empty file");
    const auto& header = rows[0];

    std::vector<std::string> states;
    std::vector<std::string> signal_names;
    std::vector<std::int64_t> days;
    std::map<std::string, std::size_t> state_ix, signal_ix;
    std::map<CellKey, double> cells;
    std::int64_t min_day = 0;
    bool have_min = false;

    auto intern = [](std::vector<std::string>& list, std::map<std::string, std::size_t>& ix,
                     const std::string& name) {
        const auto it = ix.find(name);
        if (it != ix.end()) return it->second;
        ix.emplace(name, list.size());
        list.push_back(name);
        return list.size() - 1;
    };

    if (schema == Schema::Wide) {
        if (header.size() < 3 || header[0] != "state" || header[1] != "date") {
            throw std::runtime_error(path + ": wide header must start 'state,date,<signals...>'");
        }
        for (std::size_t j = 2; j < header.size(); ++j) {
            if (signal_ix.count(header[j])) {
                throw std::runtime_error(path + ": duplicate signal column '" + header[j] + "'");
            }
            intern(signal_names, signal_ix, header[j]);
        }
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() != header.size()) {
                throw std::runtime_error(path + ": row " + std::to_string(i + 1) + " has " +
                                         std::to_string(r.size()) + " fields, header has " +
                                         std::to_string(header.size()));
            }
            const std::size_t s = intern(states, state_ix, r[0]);
            const std::int64_t day = csvio::parse_iso_date(r[1]);
            if (!have_min || day < min_day) { min_day = day; have_min = true; }
            days.push_back(day);
            for (std::size_t j = 2; j < r.size(); ++j) {
                if (r[j].empty()) {
                    throw std::runtime_error(path + ": gap in series: state '" + r[0] +
                                             "', signal '" + header[j] + "', date " + r[1]);
                }
                const double v =
                    csvio::parse_double(r[j], path + " row " + std::to_string(i + 1));
                CellKey key{s, j - 2, static_cast<std::size_t>(day)};
                if (!cells.emplace(key, v).second) {
                    throw std::runtime_error(path + ": duplicate entry: state '" + r[0] +
                                             "', signal '" + header[j] + "', date " + r[1]);
                }
            }
        }
    } else {
        if (header.size() != 4 || header[0] != "state" || header[1] != "date" ||
            header[2] != "signal" || header[3] != "value") {
            throw std::runtime_error(path + ": long header must be 'state,date,signal,value'");
        }
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() != 4) {
                throw std::runtime_error(path + ": row " + std::to_string(i + 1) +
                                         " must have 4 fields");
            }
            const std::size_t s = intern(states, state_ix, r[0]);
            const std::int64_t day = csvio::parse_iso_date(r[1]);
            if (!have_min || day < min_day) { min_day = day; have_min = true; }
            days.push_back(day);
            const std::size_t g = intern(signal_names, signal_ix, r[2]);
            const double v = csvio::parse_double(r[3], path + " row " + std::to_string(i + 1));
            CellKey key{s, g, static_cast<std::size_t>(day)};
            if (!cells.emplace(key, v).second) {
                throw std::runtime_error(path + ": duplicate entry: state '" + r[0] +
                                         "', signal '" + r[2] + "', date " + r[1]);
            }
        }
    }

    if (!have_min) throw std::runtime_error(path + ": no data rows");
    // Re-key cells relative to the first day so assembly can index directly.
    std::map<CellKey, double> rekeyed;
    for (const auto& [k, v] : cells) {
        rekeyed.emplace(CellKey{k.state, k.signal,
                                static_cast<std::size_t>(static_cast<std::int64_t>(k.date) - min_day)},
                        v);
    }
    return assemble_panel(path, std::move(states), std::move(signal_names), std::move(days),
                          rekeyed);
}

void save_panel_wide(const Panel& panel, const std::string& path) {
    std::string out = "state,date";
    for (const auto& s : panel.signal_names) out += "," + s;
    out += "\n";
    for (std::size_t s = 0; s < panel.n_states(); ++s) {
        for (std::size_t t = 0; t < panel.n_steps(); ++t) {
            out += panel.states[s] + "," + panel.dates[t];
            for (std::size_t g = 0; g < panel.n_signals(); ++g) {
                out += "," + csvio::format_double(panel.value(s, g, t));
            }
            out += "\n";
        }
    }
    csvio::write_text_file(path, out);
}

void save_panel_long(const Panel& panel, const std::string& path) {
    std::string out = "state,date,signal,value\n";
    for (std::size_t s = 0; s < panel.n_states(); ++s)
        for (std::size_t t = 0; t < panel.n_steps(); ++t)
            for (std::size_t g = 0; g < panel.n_signals(); ++g)
                out += panel.states[s] + "," + panel.dates[t] + "," + panel.signal_names[g] + "," +
                       csvio::format_double(panel.value(s, g, t)) + "\n";
    csvio::write_text_file(path, out);
}

Panel resample_weekly(const Panel& daily) {
    if (daily.weekly) throw std::invalid_argument("resample_weekly: panel is already weekly");
    const std::size_t weeks = daily.n_steps() / 7;
    if (weeks == 0) {
        throw std::invalid_argument("resample_weekly: need at least 7 days, got " +
                                    std::to_string(daily.n_steps()));
    }
    std::vector<std::string> week_dates;
    week_dates.reserve(weeks);
    for (std::size_t w = 0; w < weeks; ++w) week_dates.push_back(daily.dates[w * 7]);
    Panel out(daily.states, daily.signal_names, std::move(week_dates), true);
    out.categories = daily.categories;
    for (std::size_t s = 0; s < daily.n_states(); ++s) {
        for (std::size_t g = 0; g < daily.n_signals(); ++g) {
            for (std::size_t w = 0; w < weeks; ++w) {
                double acc = 0.0;
                for (std::size_t d = 0; d < 7; ++d) acc += daily.value(s, g, w * 7 + d);
                out.set_value(s, g, w, acc / 7.0);
            }
        }
    }
    return out;
}

namespace {

struct MinMax {
    double lo, hi;
};

MinMax series_minmax(const Panel& p, std::size_t state, std::size_t signal, std::size_t t_end) {
    double lo = p.value(state, signal, 0), hi = lo;
    for (std::size_t t = 1; t < t_end; ++t) {
        const double v = p.value(state, signal, t);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

}  // namespace

std::pair<Panel, NormParams> normalize(const Panel& panel, NormMode mode,
                                       const std::optional<SplitSpec>& split, NormScope scope,
                                       ConstantSeriesPolicy constant_policy) {
    if (mode == NormMode::TrainOnly && !split) {
        throw std::invalid_argument("normalize: train_only mode requires a split");
    }
    const std::size_t fit_end =
        mode == NormMode::TrainOnly ? std::min<std::size_t>(split->tau_start, panel.n_steps())
                                    : panel.n_steps();
    if (fit_end == 0) throw std::invalid_argument("normalize: empty fit region");

    Panel out = panel;
    NormParams params;
    params.scope = scope;

    auto apply = [&](std::size_t state, std::size_t signal, double lo, double hi) {
        if (hi == lo) {
            if (constant_policy == ConstantSeriesPolicy::Error) {
                throw std::runtime_error("normalize: constant series: state '" +
                                         panel.states[state] + "', signal '" +
                                         panel.signal_names[signal] + "'");
            }
            std::cerr << "warning: constant series (state '" << panel.states[state]
                      << "', signal '" << panel.signal_names[signal] << "') mapped to 0.5\n";
            for (std::size_t t = 0; t < panel.n_steps(); ++t) out.set_value(state, signal, t, 0.5);
            return;
        }
        const double denom = hi - lo;
        for (std::size_t t = 0; t < panel.n_steps(); ++t) {
            double v = (panel.value(state, signal, t) - lo) / denom;
            if (mode == NormMode::TrainOnly) v = std::clamp(v, 0.0, 1.0);
            out.set_value(state, signal, t, v);
        }
    };

    if (scope == NormScope::PerSeries) {
        for (std::size_t s = 0; s < panel.n_states(); ++s) {
            for (std::size_t g = 0; g < panel.n_signals(); ++g) {
                const auto mm = series_minmax(panel, s, g, fit_end);
                params.entries.push_back(
                    {panel.states[s], panel.signal_names[g], mm.lo, mm.hi});
                apply(s, g, mm.lo, mm.hi);
            }
        }
    } else {
        for (std::size_t g = 0; g < panel.n_signals(); ++g) {
            double lo = panel.value(0, g, 0), hi = lo;
            for (std::size_t s = 0; s < panel.n_states(); ++s) {
                const auto mm = series_minmax(panel, s, g, fit_end);
                lo = std::min(lo, mm.lo);
                hi = std::max(hi, mm.hi);
            }
            params.entries.push_back({"", panel.signal_names[g], lo, hi});
            for (std::size_t s = 0; s < panel.n_states(); ++s) apply(s, g, lo, hi);
        }
    }
    return {std::move(out), std::move(params)};
}

Panel denormalize(const Panel& panel, const NormParams& params) {
    Panel out = panel;
    auto entry_for = [&](std::size_t s, std::size_t g) -> const NormParams::Entry& {
        if (params.scope == NormScope::PerSeries) {
            for (const auto& e : params.entries) {
                if (e.state == panel.states[s] && e.signal == panel.signal_names[g]) return e;
            }
        } else {
            for (const auto& e : params.entries) {
                if (e.signal == panel.signal_names[g]) return e;
            }
        }
        throw std::invalid_argument("denormalize: no parameters for state '" + panel.states[s] +
                                    "', signal '" + panel.signal_names[g] + "'");
    };
    for (std::size_t s = 0; s < panel.n_states(); ++s) {
        for (std::size_t g = 0; g < panel.n_signals(); ++g) {
            const auto& e = entry_for(s, g);
            if (e.max == e.min) continue;  // constant series carry no scale back
            for (std::size_t t = 0; t < panel.n_steps(); ++t) {
                out.set_value(s, g, t, panel.value(s, g, t) * (e.max - e.min) + e.min);
            }
        }
    }
    return out;
}

void save_norm_params(const NormParams& params, const std::string& path) {
    std::string out = "state,signal,min,max\n";
    for (const auto& e : params.entries) {
        out += e.state + "," + e.signal + "," + csvio::format_double(e.min) + "," +
               csvio::format_double(e.max) + "\n";
    }
    csvio::write_text_file(path, out);
}

NormParams load_norm_params(const std::string& path) {
    const auto rows = csvio::read_rows(path);
    if (rows.empty() || rows[0] != std::vector<std::string>{"state", "signal", "min", "max"}) {
        throw std::runtime_error(path + ": expected header 'state,signal,min,max'");
    }
    NormParams params;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 4) throw std::runtime_error(path + ": bad row " + std::to_string(i + 1));
        params.entries.push_back({r[0], r[1], csvio::parse_double(r[2], path),
                                  csvio::parse_double(r[3], path)});
    }
    params.scope = (!params.entries.empty() && params.entries[0].state.empty())
                       ? NormScope::PooledAcrossStates
                       : NormScope::PerSeries;
    return params;
}

std::vector<WindowSample> rolling_windows(const Panel& panel, std::size_t region_begin,
                                          std::size_t region_end) {
    if (region_end > panel.n_steps() || region_begin > region_end) {
        throw std::invalid_argument("rolling_windows: bad region [" +
                                    std::to_string(region_begin) + ", " +
                                    std::to_string(region_end) + ") of " +
                                    std::to_string(panel.n_steps()));
    }
    std::vector<WindowSample> samples;
    const std::size_t len = region_end - region_begin;
    if (len < 2 * kWindowWeeks) {
        std::cerr << "warning: region of " << len << " weeks is too short for a window\n";
        return samples;
    }
    for (std::size_t t = region_begin; t + 2 * kWindowWeeks <= region_end; ++t) {
        WindowSample ws;
        ws.window_start = t;
        ws.input = window_features(panel, t);
        ws.target = window_features(panel, t + kWindowWeeks);
        samples.push_back(std::move(ws));
    }
    return samples;
}

ad::Tensor window_features(const Panel& panel, std::size_t t0) {
    if (t0 + kWindowWeeks > panel.n_steps()) {
        throw std::invalid_argument("window_features: weeks [" + std::to_string(t0) + ", " +
                                    std::to_string(t0 + kWindowWeeks) + ") exceed " +
                                    std::to_string(panel.n_steps()));
    }
    ad::Tensor f = ad::Tensor::zeros(panel.n_nodes(), kWindowWeeks);
    for (std::size_t s = 0; s < panel.n_states(); ++s)
        for (std::size_t g = 0; g < panel.n_signals(); ++g)
            for (std::size_t w = 0; w < kWindowWeeks; ++w)
                f.at(panel.node_id(s, g), w) = panel.value(s, g, t0 + w);
    return f;
}

}  // namespace trendgnn::signals
