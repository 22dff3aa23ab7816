#include "trendgnn/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "trendgnn/csvio.hpp"
#include "trendgnn/rng.hpp"

namespace trendgnn::signals {

void SynthSpec::validate() const {
    if (n_states == 0 || n_signals == 0) throw std::invalid_argument("synth: empty panel");
    if (weeks < 2 * kWindowWeeks) {
        throw std::invalid_argument("synth: need at least 8 weeks, got " + std::to_string(weeks));
    }
    for (const auto& r : relations) {
        if (r.src >= n_signals || r.dst >= n_signals) {
            throw std::invalid_argument("synth: relation names signal out of range");
        }
        if (r.src == r.dst) throw std::invalid_argument("synth: self-relation");
        if (r.lag < 0 || r.lag > 3) {
            throw std::invalid_argument("synth: lag must be 0..3, got " + std::to_string(r.lag));
        }
    }
}

namespace {

/// Topological order of signals under the instantaneous (lag 0) relations;
/// throws on a cycle.
std::vector<std::size_t> instantaneous_order(const SynthSpec& spec) {
    std::vector<std::vector<std::size_t>> deps(spec.n_signals);
    for (const auto& r : spec.relations) {
        if (r.lag == 0) deps[r.dst].push_back(r.src);
    }
    std::vector<int> mark(spec.n_signals, 0);  // 0 new, 1 visiting, 2 done
    std::vector<std::size_t> order;
    auto visit = [&](auto&& self, std::size_t v) -> void {
        if (mark[v] == 2) return;
        if (mark[v] == 1) {
            throw std::invalid_argument("synth: cyclic instantaneous (lag 0) dependencies");
        }
        mark[v] = 1;
        for (const auto u : deps[v]) self(self, u);
        mark[v] = 2;
        order.push_back(v);
    };
    for (std::size_t v = 0; v < spec.n_signals; ++v) visit(visit, v);
    return order;
}

std::string zero_padded(std::size_t v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

std::pair<Panel, std::vector<PlantedEdge>> synth_panel(const SynthSpec& spec,
                                                       std::uint64_t seed) {
    spec.validate();
    const auto order = instantaneous_order(spec);

    std::vector<std::string> states, names, dates;
    for (std::size_t s = 0; s < spec.n_states; ++s) states.push_back("S" + zero_padded(s, 2));
    for (std::size_t g = 0; g < spec.n_signals; ++g) names.push_back("sig" + zero_padded(g, 2));
    const std::int64_t day0 = csvio::parse_iso_date("2020-05-20");
    for (std::size_t w = 0; w < spec.weeks; ++w) {
        dates.push_back(csvio::format_iso_date(day0 + static_cast<std::int64_t>(w) * 7));
    }

    Panel panel(std::move(states), std::move(names), std::move(dates), true);
    // Round-robin categories so any synthetic run can be aggregated.
    static const Category cats[4] = {Category::H, Category::B, Category::TV, Category::DB};
    for (std::size_t g = 0; g < spec.n_signals; ++g) {
        panel.categories[panel.signal_names[g]] = cats[g % 4];
    }

    std::vector<std::vector<const Relation*>> incoming(spec.n_signals);
    for (const auto& r : spec.relations) incoming[r.dst].push_back(&r);

    const std::size_t T = spec.weeks;
    for (std::size_t s = 0; s < spec.n_states; ++s) {
        Rng rng(Rng::mix(seed, s));
        // Per-signal base dynamics parameters.
        std::vector<double> phase(spec.n_signals), period(spec.n_signals);
        for (std::size_t g = 0; g < spec.n_signals; ++g) {
            phase[g] = rng.uniform(0.0, 6.283185307179586);
            period[g] = spec.season_period *
                        (1.0 + spec.season_period_jitter * rng.uniform(-1.0, 1.0));
        }
        std::vector<std::vector<double>> base(spec.n_signals, std::vector<double>(T, 0.0));
        for (std::size_t g = 0; g < spec.n_signals; ++g) {
            double ar = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                ar = spec.ar_coeff * ar + spec.ar_noise * rng.gaussian();
                base[g][t] = ar + spec.season_amp *
                                      std::sin(6.283185307179586 * t / period[g] + phase[g]);
            }
        }
        // Driven values, respecting instantaneous topological order.
        std::vector<std::vector<double>> x(spec.n_signals, std::vector<double>(T, 0.0));
        std::vector<std::vector<double>> noise(spec.n_signals, std::vector<double>(T, 0.0));
        for (std::size_t g = 0; g < spec.n_signals; ++g) {
            for (std::size_t t = 0; t < T; ++t) noise[g][t] = spec.noise_sigma * rng.gaussian();
        }
        for (std::size_t t = 0; t < T; ++t) {
            for (const auto g : order) {
                double v = base[g][t] + noise[g][t];
                for (const auto* r : incoming[g]) {
                    const std::int64_t ts = static_cast<std::int64_t>(t) - r->lag;
                    if (ts >= 0) v += r->gain * x[r->src][static_cast<std::size_t>(ts)];
                }
                x[g][t] = v;
            }
        }
        // Min-max normalize each series into [0, 1].
        for (std::size_t g = 0; g < spec.n_signals; ++g) {
            double lo = x[g][0], hi = x[g][0];
            for (std::size_t t = 1; t < T; ++t) {
                lo = std::min(lo, x[g][t]);
                hi = std::max(hi, x[g][t]);
            }
            const double denom = hi > lo ? hi - lo : 1.0;
            for (std::size_t t = 0; t < T; ++t) {
                panel.set_value(s, g, t, (x[g][t] - lo) / denom);
            }
        }
    }

    std::vector<PlantedEdge> planted;
    for (std::size_t s = 0; s < spec.n_states; ++s) {
        for (const auto& r : spec.relations) {
            if (r.gain == 0.0) continue;  // carries no signal
            planted.push_back({panel.states[s], panel.signal_names[r.src],
                               panel.signal_names[r.dst], r.gain, r.lag});
        }
    }
    return {std::move(panel), std::move(planted)};
}

void save_planted_edges(const std::vector<PlantedEdge>& edges, const std::string& path) {
    std::string out = "state,src,dst,gain,lag\n";
    for (const auto& e : edges) {
        out += e.state + "," + e.src + "," + e.dst + "," + csvio::format_double(e.gain) + "," +
               std::to_string(e.lag) + "\n";
    }
    csvio::write_text_file(path, out);
}

}  // namespace trendgnn::signals
