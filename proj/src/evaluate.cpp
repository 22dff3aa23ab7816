#include "trendgnn/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "trendgnn/csvio.hpp"
#include "trendgnn/rng.hpp"

namespace trendgnn::eval {

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Flat: return "flat";
        case ModelKind::AR: return "ar";
        case ModelKind::SageRandom: return "sage_random";
        case ModelKind::SageFull: return "sage_full";
        case ModelKind::SageLagged: return "sage_lagged";
        case ModelKind::SageDtwS: return "sage_dtw_s";
    }
    throw std::logic_error("model_kind_name: bad enum");
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "flat") return ModelKind::Flat;
    if (name == "ar") return ModelKind::AR;
    if (name == "sage_random") return ModelKind::SageRandom;
    if (name == "sage_full") return ModelKind::SageFull;
    if (name == "sage_lagged") return ModelKind::SageLagged;
    if (name == "sage_dtw_s") return ModelKind::SageDtwS;
    throw std::runtime_error("unknown model '" + name + "'");
}

void ExperimentConfig::validate(std::size_t total_weeks) const {
    if (tau_schedule.empty()) throw std::invalid_argument("experiment: empty tau schedule");
    for (std::size_t i = 0; i < tau_schedule.size(); ++i) {
        if (i > 0 && tau_schedule[i] <= tau_schedule[i - 1]) {
            throw std::invalid_argument("experiment: tau schedule must be strictly increasing");
        }
        signals::SplitSpec spec{tau_schedule[i], models::kHorizons};
        spec.validate(total_weeks);
    }
    if (!model.deterministic() && n_seeds == 0) {
        throw std::invalid_argument("experiment: sage models need at least one seed");
    }
}

std::vector<std::size_t> default_tau_schedule(std::size_t total_weeks) {
    std::vector<std::size_t> taus;
    if (total_weeks < 24) return taus;
    for (std::size_t tau = 20; tau + models::kHorizons <= total_weeks; ++tau) {
        taus.push_back(tau);
    }
    return taus;
}

graphs::BlockAdjacency build_strategy_graph(const ModelSpec& spec, const signals::Panel& panel,
                                            std::size_t train_end, std::uint64_t seed) {
    std::vector<graphs::SignalGraph> per_state;
    per_state.reserve(panel.n_states());
    for (std::size_t s = 0; s < panel.n_states(); ++s) {
        switch (spec.kind) {
            case ModelKind::SageRandom: {
                const auto state_seed = Rng::mix(seed, 0x9000 + s);
                per_state.push_back(
                    spec.random_exact_out_degree
                        ? graphs::random_graph_exact(panel.n_signals(),
                                                     static_cast<std::size_t>(spec.k_avg),
                                                     state_seed, panel.signal_names,
                                                     panel.states[s])
                        : graphs::random_graph(panel.n_signals(), spec.k_avg, state_seed,
                                               panel.signal_names, panel.states[s]));
                break;
            }
            case ModelKind::SageFull:
                per_state.push_back(
                    graphs::full_graph(panel.n_signals(), panel.signal_names, panel.states[s]));
                break;
            case ModelKind::SageLagged:
            case ModelKind::SageDtwS: {
                sim::SimilarityParams params = spec.similarity;
                params.measure = spec.kind == ModelKind::SageLagged ? sim::Measure::Lagged
                                                                    : sim::Measure::DtwS;
                const auto m =
                    sim::similarity_matrix(panel, panel.states[s], params, train_end);
                per_state.push_back(graphs::topk_graph(m, spec.top_k));
                break;
            }
            default:
                throw std::invalid_argument("build_strategy_graph: not a graph model");
        }
    }
    return graphs::assemble_block(std::move(per_state));
}

namespace {

/// Records for one (tau, seed) job, in (state, signal, horizon) order.
std::vector<ForecastRecord> run_single(const ModelSpec& spec, const signals::Panel& panel,
                                       const graphs::BlockAdjacency* shared_graph,
                                       std::size_t tau, std::uint64_t seed) {
    const std::size_t ns = panel.n_states(), ng = panel.n_signals();
    std::vector<ForecastRecord> records;
    records.reserve(ns * ng * models::kHorizons);

    // Everything the model may consume lives strictly before tau.
    const signals::Panel train = panel.slice_steps(0, tau);

    ad::Tensor pred;  // n_nodes x 4
    if (spec.kind == ModelKind::Flat) {
        pred = ad::Tensor::zeros(panel.n_nodes(), models::kHorizons);
        for (std::size_t s = 0; s < ns; ++s) {
            for (std::size_t g = 0; g < ng; ++g) {
                const double last = train.value(s, g, tau - 1);
                for (std::size_t h = 0; h < models::kHorizons; ++h) {
                    pred.at(panel.node_id(s, g), h) = last;
                }
            }
        }
    } else if (spec.kind == ModelKind::AR) {
        pred = ad::Tensor::zeros(panel.n_nodes(), models::kHorizons);
        for (std::size_t s = 0; s < ns; ++s) {
            for (std::size_t g = 0; g < ng; ++g) {
                const auto series = train.series(s, g);
                const auto model = models::ar_fit(series);
                const auto f = models::ar_predict(model, series);
                for (std::size_t h = 0; h < models::kHorizons; ++h) {
                    pred.at(panel.node_id(s, g), h) = f[h];
                }
            }
        }
    } else {
        graphs::BlockAdjacency local_graph;
        const graphs::BlockAdjacency* graph = shared_graph;
        if (!graph) {
            local_graph = build_strategy_graph(spec, train, tau, seed);
            graph = &local_graph;
        }
        auto model = models::SageForecaster::init(spec.sage, seed);
        sage_train(model, train, *graph, signals::SplitSpec{tau, models::kHorizons});
        const auto features = signals::window_features(train, tau - signals::kWindowWeeks);
        pred = sage_forward(model, features, *graph);
    }

    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t g = 0; g < ng; ++g) {
            for (int h = 1; h <= static_cast<int>(models::kHorizons); ++h) {
                ForecastRecord r;
                r.model = spec.name();
                r.seed = spec.deterministic() ? 0 : seed;
                r.tau_start = tau;
                r.state = panel.states[s];
                r.signal = panel.signal_names[g];
                r.horizon = h;
                r.pred = std::clamp(
                    pred.at(panel.node_id(s, g), static_cast<std::size_t>(h - 1)), 0.0, 1.0);
                r.truth = panel.value(s, g, tau + static_cast<std::size_t>(h) - 1);
                records.push_back(std::move(r));
            }
        }
    }
    return records;
}

}  // namespace

std::vector<ForecastRecord> run_experiment(const ExperimentConfig& config,
                                           const signals::Panel& panel) {
    struct Job {
        std::size_t tau;
        std::uint64_t seed;
        const graphs::BlockAdjacency* graph;  // shared across seeds when deterministic
    };

    ExperimentConfig cfg = config;
    cfg.validate(panel.n_steps());
    const ModelSpec& spec = cfg.model;

    // Similarity graphs depend only on tau; build them once and share them
    // across seed jobs. Random graphs depend on the seed and are built
    // inside each job.
    std::map<std::size_t, graphs::BlockAdjacency> graphs_by_tau;
    if (spec.kind == ModelKind::SageLagged || spec.kind == ModelKind::SageDtwS ||
        spec.kind == ModelKind::SageFull) {
        for (const auto tau : cfg.tau_schedule) {
            graphs_by_tau.emplace(tau,
                                  build_strategy_graph(spec, panel.slice_steps(0, tau), tau, 0));
        }
    }

    std::vector<Job> jobs;
    const std::size_t seeds = spec.deterministic() ? 1 : cfg.n_seeds;
    for (const auto tau : cfg.tau_schedule) {
        const auto it = graphs_by_tau.find(tau);
        for (std::size_t i = 0; i < seeds; ++i) {
            jobs.push_back(
                {tau, cfg.seed_base + i, it == graphs_by_tau.end() ? nullptr : &it->second});
        }
    }

    std::vector<std::vector<ForecastRecord>> slots(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size() || failed.load()) break;
            try {
                slots[i] = run_single(spec, panel, jobs[i].graph, jobs[i].tau, jobs[i].seed);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                if (failure.empty()) {
                    failure = spec.name() + " @ tau " + std::to_string(jobs[i].tau) + " seed " +
                              std::to_string(jobs[i].seed) + ": " + e.what();
                }
            }
        }
    };

    unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                         : std::thread::hardware_concurrency();
    n_threads = std::max(1u, std::min<unsigned>(n_threads, jobs.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw std::runtime_error("run_experiment: " + failure);

    std::vector<ForecastRecord> records;
    for (auto& slot : slots) {
        records.insert(records.end(), std::make_move_iterator(slot.begin()),
                       std::make_move_iterator(slot.end()));
    }
    return records;
}

// ---- aggregation -----------------------------------------------------------

std::size_t MetricsTable::model_index(const std::string& name) const {
    for (std::size_t i = 0; i < models.size(); ++i) {
        if (models[i] == name) return i;
    }
    throw std::invalid_argument("metrics table: unknown model '" + name + "'");
}

namespace {

std::size_t category_slot(signals::Category c) {
    for (std::size_t i = 0; i < kCategoryOrder.size(); ++i) {
        if (kCategoryOrder[i] == c) return i;
    }
    throw std::logic_error("category_slot");
}

Cell summarize(const std::vector<double>& per_seed) {
    Cell cell;
    double sum = 0.0;
    for (const auto v : per_seed) sum += v;
    cell.mean = sum / static_cast<double>(per_seed.size());
    if (per_seed.size() > 1) {
        double ss = 0.0;
        for (const auto v : per_seed) ss += (v - cell.mean) * (v - cell.mean);
        cell.stddev = std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
    }
    return cell;
}

}  // namespace

MetricsTable aggregate(const std::vector<ForecastRecord>& records,
                       const signals::CategoryMap& categories) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");

    struct Acc {
        double abs_sum = 0.0;
        std::size_t count = 0;
    };
    // (model, seed) -> [horizon][category] accumulators, with models and
    // seeds kept in first-appearance order for determinism.
    std::vector<std::string> model_order;
    std::map<std::string, std::map<std::uint64_t, std::array<std::array<Acc, 4>, 4>>> pools;
    for (const auto& r : records) {
        const auto it = categories.find(r.signal);
        if (it == categories.end()) {
            throw std::runtime_error("aggregate: signal '" + r.signal + "' has no category");
        }
        if (r.horizon < 1 || r.horizon > 4) {
            throw std::runtime_error("aggregate: horizon out of range");
        }
        if (!pools.count(r.model)) model_order.push_back(r.model);
        auto& acc = pools[r.model][r.seed][static_cast<std::size_t>(r.horizon - 1)]
                         [category_slot(it->second)];
        acc.abs_sum += std::abs(r.pred - r.truth);
        acc.count += 1;
    }

    MetricsTable table;
    table.models = model_order;
    table.cells.resize(model_order.size());
    table.avg.resize(model_order.size());
    for (std::size_t m = 0; m < model_order.size(); ++m) {
        const auto& by_seed = pools[model_order[m]];
        for (std::size_t h = 0; h < 4; ++h) {
            std::array<std::vector<double>, 4> seed_cat;
            std::vector<double> seed_avg;
            for (const auto& [seed, grid] : by_seed) {
                (void)seed;
                double cat_sum = 0.0;
                for (std::size_t c = 0; c < 4; ++c) {
                    const auto& acc = grid[h][c];
                    if (acc.count == 0) {
                        throw std::runtime_error("aggregate: no records for model '" +
                                                 model_order[m] + "', horizon " +
                                                 std::to_string(h + 1) + ", category " +
                                                 signals::category_name(kCategoryOrder[c]));
                    }
                    const double mae = acc.abs_sum / static_cast<double>(acc.count);
                    seed_cat[c].push_back(mae);
                    cat_sum += mae;
                }
                seed_avg.push_back(cat_sum / 4.0);
            }
            double mean_sum = 0.0;
            for (std::size_t c = 0; c < 4; ++c) {
                table.cells[m][h][c] = summarize(seed_cat[c]);
                mean_sum += table.cells[m][h][c].mean;
            }
            // AVG is definitionally the mean of the four category cells.
            table.avg[m][h] = summarize(seed_avg);
            table.avg[m][h].mean = mean_sum / 4.0;
        }
    }
    return table;
}

namespace {

std::vector<std::string> column_labels() {
    std::vector<std::string> cols;
    for (int h = 1; h <= 4; ++h) {
        for (const auto c : kCategoryOrder) {
            cols.push_back("h" + std::to_string(h) + "_" + signals::category_name(c));
        }
        cols.push_back("h" + std::to_string(h) + "_AVG");
    }
    return cols;
}

/// All 20 cells of a model row in column order (B, DB, H, TV, AVG per horizon).
std::vector<Cell> row_cells(const MetricsTable& t, std::size_t m) {
    std::vector<Cell> rows;
    for (std::size_t h = 0; h < 4; ++h) {
        for (std::size_t c = 0; c < 4; ++c) rows.push_back(t.cells[m][h][c]);
        rows.push_back(t.avg[m][h]);
    }
    return rows;
}

enum class Rank { None, Best, Second, Worst };

std::vector<std::vector<Rank>> rank_columns(const MetricsTable& t) {
    const std::size_t n = t.models.size();
    std::vector<std::vector<Rank>> ranks(n, std::vector<Rank>(20, Rank::None));
    if (n < 2) return ranks;
    for (std::size_t col = 0; col < 20; ++col) {
        std::vector<double> vals(n);
        for (std::size_t m = 0; m < n; ++m) vals[m] = row_cells(t, m)[col].mean;
        auto sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        if (sorted.size() < 2) continue;  // all tied: no meaningful marks
        const double best = sorted[0];
        const double second = sorted[1];
        const double worst = sorted.back();
        for (std::size_t m = 0; m < n; ++m) {
            if (vals[m] == best) ranks[m][col] = Rank::Best;
            else if (vals[m] == second) ranks[m][col] = Rank::Second;
            else if (vals[m] == worst) ranks[m][col] = Rank::Worst;
        }
    }
    return ranks;
}

}  // namespace

std::string render_table(const MetricsTable& table, TableFormat format) {
    const auto cols = column_labels();
    if (format == TableFormat::Csv) {
        std::string out = "model";
        for (const auto& c : cols) out += "," + c + "," + c + "_std";
        out += "\n";
        for (std::size_t m = 0; m < table.models.size(); ++m) {
            out += table.models[m];
            for (const auto& cell : row_cells(table, m)) {
                out += "," + csvio::format_double(cell.mean);
                out += ",";
                if (cell.stddev) out += csvio::format_double(*cell.stddev);
            }
            out += "\n";
        }
        return out;
    }

    const auto ranks = rank_columns(table);
    std::string out = "| model |";
    for (const auto& c : cols) out += " " + c + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) out += "---|";
    out += "\n";
    for (std::size_t m = 0; m < table.models.size(); ++m) {
        out += "| " + table.models[m] + " |";
        const auto cells = row_cells(table, m);
        for (std::size_t col = 0; col < cells.size(); ++col) {
            std::string v = csvio::format_fixed(cells[col].mean, 4);
            if (cells[col].stddev) {
                v += " ± " + csvio::format_fixed(*cells[col].stddev, 4);
            } else {
                v += " ± NA";
            }
            switch (ranks[m][col]) {
                case Rank::Best: v = "**" + v + "**"; break;
                case Rank::Second: v = "_" + v + "_"; break;
                case Rank::Worst: v = "!" + v + "!"; break;
                case Rank::None: break;
            }
            out += " " + v + " |";
        }
        out += "\n";
    }
    return out;
}

MetricsTable parse_table_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    for (std::size_t pos = 0; pos <= text.size();) {
        const auto nl = text.find('\n', pos);
        line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        rows.push_back(std::move(fields));
    }
    if (rows.empty() || rows[0].size() != 41) {
        throw std::runtime_error("metrics csv: expected 41 columns");
    }
    MetricsTable table;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 41) throw std::runtime_error("metrics csv: bad row");
        table.models.push_back(r[0]);
        std::array<std::array<Cell, 4>, 4> grid;
        std::array<Cell, 4> avg;
        std::size_t f = 1;
        for (std::size_t h = 0; h < 4; ++h) {
            for (std::size_t c = 0; c < 5; ++c) {
                Cell cell;
                cell.mean = csvio::parse_double(r[f++], "metrics csv");
                const auto& sd = r[f++];
                if (!sd.empty()) cell.stddev = csvio::parse_double(sd, "metrics csv");
                if (c < 4) grid[h][c] = cell;
                else avg[h] = cell;
            }
        }
        table.cells.push_back(grid);
        table.avg.push_back(avg);
    }
    return table;
}

void export_records(const std::vector<ForecastRecord>& records, const std::string& path) {
    std::string out = "model,seed,tau_start,state,signal,horizon,pred,true\n";
    for (const auto& r : records) {
        out += r.model + "," + std::to_string(r.seed) + "," + std::to_string(r.tau_start) + "," +
               r.state + "," + r.signal + "," + std::to_string(r.horizon) + "," +
               csvio::format_double(r.pred) + "," + csvio::format_double(r.truth) + "\n";
    }
    csvio::write_text_file(path, out);
}

std::vector<ForecastRecord> load_records(const std::string& path) {
    const auto rows = csvio::read_rows(path);
    const std::vector<std::string> header = {"model", "seed",    "tau_start", "state",
                                             "signal", "horizon", "pred",      "true"};
    if (rows.empty() || rows[0] != header) {
        throw std::runtime_error(path + ": expected forecast record header");
    }
    std::vector<ForecastRecord> records;
    records.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 8) throw std::runtime_error(path + ": bad row " + std::to_string(i + 1));
        ForecastRecord rec;
        rec.model = r[0];
        rec.seed = static_cast<std::uint64_t>(csvio::parse_long(r[1], path));
        rec.tau_start = static_cast<std::size_t>(csvio::parse_long(r[2], path));
        rec.state = r[3];
        rec.signal = r[4];
        rec.horizon = static_cast<int>(csvio::parse_long(r[5], path));
        rec.pred = csvio::parse_double(r[6], path);
        rec.truth = csvio::parse_double(r[7], path);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace trendgnn::eval
