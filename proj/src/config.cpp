#include "trendgnn/config.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "trendgnn/csvio.hpp"

namespace trendgnn::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config: key '" + key + "' wants a boolean, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string::npos) {
            const auto part = trim(s.substr(start));
            if (!part.empty()) parts.push_back(part);
            break;
        }
        const auto part = trim(s.substr(start, pos - start));
        if (!part.empty()) parts.push_back(part);
        start = pos + 1;
    }
    return parts;
}

}  // namespace

std::vector<signals::Relation> parse_relations(const std::string& text, std::size_t n_signals) {
    std::vector<signals::Relation> relations;
    auto parse_signal = [&](const std::string& tok) -> std::size_t {
        std::string t = trim(tok);
        if (t.rfind("sig", 0) == 0) t = t.substr(3);
        const long v = csvio::parse_long(t, "relations");
        if (v < 0 || static_cast<std::size_t>(v) >= n_signals) {
            throw std::runtime_error("relations: signal index " + std::to_string(v) +
                                     " out of range");
        }
        return static_cast<std::size_t>(v);
    };
    for (const auto& item : split(text, ';')) {
        const auto arrow = item.find("->");
        if (arrow == std::string::npos) {
            throw std::runtime_error("relations: expected 'src->dst:lag:gain' in '" + item + "'");
        }
        const auto rest = item.substr(arrow + 2);
        const auto parts = split(rest, ':');
        if (parts.size() != 3) {
            throw std::runtime_error("relations: expected 'src->dst:lag:gain' in '" + item + "'");
        }
        signals::Relation r;
        r.src = parse_signal(item.substr(0, arrow));
        r.dst = parse_signal(parts[0]);
        r.lag = static_cast<int>(csvio::parse_long(parts[1], "relations"));
        r.gain = csvio::parse_double(parts[2], "relations");
        relations.push_back(r);
    }
    return relations;
}

std::vector<std::size_t> RunConfig::parse_tau_schedule(const std::string& raw,
                                                       std::size_t total_weeks) {
    if (trim(raw) == "auto") return eval::default_tau_schedule(total_weeks);
    std::vector<std::size_t> taus;
    for (const auto& item : split(raw, ',')) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            taus.push_back(static_cast<std::size_t>(csvio::parse_long(item, "tau_start")));
            continue;
        }
        const auto lo = csvio::parse_long(trim(item.substr(0, dots)), "tau_start");
        std::string rest = trim(item.substr(dots + 2));
        long step = 1;
        const auto colon = rest.find(':');
        if (colon != std::string::npos) {
            step = csvio::parse_long(trim(rest.substr(colon + 1)), "tau_start step");
            rest = trim(rest.substr(0, colon));
        }
        const auto hi = csvio::parse_long(rest, "tau_start");
        if (step < 1 || hi < lo) throw std::runtime_error("config: bad tau range '" + item + "'");
        for (long t = lo; t <= hi; t += step) taus.push_back(static_cast<std::size_t>(t));
    }
    if (!std::is_sorted(taus.begin(), taus.end()) ||
        std::adjacent_find(taus.begin(), taus.end()) != taus.end()) {
        throw std::runtime_error("config: tau_start values must be strictly increasing");
    }
    return taus;
}

eval::ModelSpec RunConfig::model_spec_for(const std::string& name) const {
    eval::ModelSpec spec;
    spec.kind = eval::model_kind_from_name(name);
    spec.sage = model;
    spec.similarity = similarity;
    spec.top_k = graph_k;
    spec.k_avg = graph_k_avg;
    spec.random_exact_out_degree = graph_random_exact;
    return spec;
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string line =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            static const std::vector<std::string> known = {
                "data", "synth", "similarity", "graph", "model", "eval", "train", "explain"};
            if (std::find(known.begin(), known.end(), section) == known.end()) {
                throw std::runtime_error("config: unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qual = section + "." + key;

        if (qual == "data.panel") c.data_panel = value;
        else if (qual == "data.schema") {
            if (value == "wide") c.data_schema = signals::Schema::Wide;
            else if (value == "long") c.data_schema = signals::Schema::Long;
            else throw std::runtime_error("config: schema must be wide or long");
        } else if (qual == "data.categories") c.data_categories = value;
        else if (qual == "data.weekly_resample") c.data_weekly_resample = parse_bool(value, qual);
        else if (qual == "data.normalization") {
            if (value == "full_series") c.data_normalization = signals::NormMode::FullSeries;
            else if (value == "train_only") c.data_normalization = signals::NormMode::TrainOnly;
            else throw std::runtime_error("config: normalization must be full_series or train_only");
        } else if (qual == "data.norm_scope") {
            if (value == "per_series") c.data_norm_scope = signals::NormScope::PerSeries;
            else if (value == "pooled") c.data_norm_scope = signals::NormScope::PooledAcrossStates;
            else throw std::runtime_error("config: norm_scope must be per_series or pooled");
        } else if (qual == "data.constant_series") {
            if (value == "map_to_half")
                c.data_constant_series = signals::ConstantSeriesPolicy::MapToHalf;
            else if (value == "error")
                c.data_constant_series = signals::ConstantSeriesPolicy::Error;
            else throw std::runtime_error("config: constant_series must be map_to_half or error");
        } else if (qual == "synth.states") {
            c.synth.n_states = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "synth.signals") {
            c.synth.n_signals = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "synth.weeks") {
            c.synth.weeks = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "synth.relations") {
            c.synth_relations_raw = value;
        } else if (qual == "synth.noise") c.synth.noise_sigma = csvio::parse_double(value, qual);
        else if (qual == "synth.ar_coeff") c.synth.ar_coeff = csvio::parse_double(value, qual);
        else if (qual == "synth.ar_noise") c.synth.ar_noise = csvio::parse_double(value, qual);
        else if (qual == "synth.season_amp") c.synth.season_amp = csvio::parse_double(value, qual);
        else if (qual == "synth.season_period")
            c.synth.season_period = csvio::parse_double(value, qual);
        else if (qual == "synth.season_jitter")
            c.synth.season_period_jitter = csvio::parse_double(value, qual);
        else if (qual == "similarity.measure") c.similarity.measure = sim::measure_from_name(value);
        else if (qual == "similarity.window") {
            c.similarity.shapelet_window = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "similarity.max_lag") {
            c.similarity.max_lag = static_cast<int>(csvio::parse_long(value, qual));
        } else if (qual == "similarity.band") {
            if (value.empty() || value == "none") c.similarity.band.reset();
            else c.similarity.band = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "graph.strategy") c.graph_strategy = graphs::strategy_from_name(value);
        else if (qual == "graph.k") {
            c.graph_k = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "graph.k_avg") c.graph_k_avg = csvio::parse_double(value, qual);
        else if (qual == "graph.random_exact") c.graph_random_exact = parse_bool(value, qual);
        else if (qual == "graph.seed") {
            c.graph_seed = static_cast<std::uint64_t>(csvio::parse_long(value, qual));
        } else if (qual == "model.layers") {
            c.model.layers = static_cast<int>(csvio::parse_long(value, qual));
        } else if (qual == "model.hidden") {
            c.model.hidden = static_cast<int>(csvio::parse_long(value, qual));
        } else if (qual == "model.epochs") {
            c.model.epochs = static_cast<int>(csvio::parse_long(value, qual));
        } else if (qual == "model.lr") c.model.lr = csvio::parse_double(value, qual);
        else if (qual == "model.loss") {
            if (value == "mae") c.model.mse_loss = false;
            else if (value == "mse") c.model.mse_loss = true;
            else throw std::runtime_error("config: loss must be mae or mse");
        } else if (qual == "model.aggregator_weighted") {
            c.model.aggregator_weighted = parse_bool(value, qual);
        } else if (qual == "eval.models") {
            c.eval_models = split(value, ',');
            if (c.eval_models.empty()) throw std::runtime_error("config: eval.models is empty");
            for (const auto& m : c.eval_models) eval::model_kind_from_name(m);
        } else if (qual == "eval.tau_start") c.eval_tau_raw = value;
        else if (qual == "eval.seeds") {
            c.eval_seeds = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "eval.seed_base") {
            c.eval_seed_base = static_cast<std::uint64_t>(csvio::parse_long(value, qual));
        } else if (qual == "eval.threads") {
            c.eval_threads = static_cast<int>(csvio::parse_long(value, qual));
        } else if (qual == "train.tau_start") {
            c.train_tau_start = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "explain.beta") c.mask.beta = csvio::parse_double(value, qual);
        else if (qual == "explain.budget") {
            c.mask.budget = static_cast<int>(csvio::parse_long(value, qual));
        } else if (qual == "explain.mask_lr") c.mask.lr = csvio::parse_double(value, qual);
        else if (qual == "explain.focus_signal") c.explain_focus_signal = value;
        else if (qual == "explain.top_n") {
            c.explain_top_n = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else if (qual == "explain.tau_start") c.explain_tau_raw = value;
        else if (qual == "explain.random_seeds") {
            c.explain_random_seeds = static_cast<std::size_t>(csvio::parse_long(value, qual));
        } else {
            throw std::runtime_error("config: unknown key '" + key + "' in section [" + section +
                                     "]");
        }
    }
    if (!c.synth_relations_raw.empty()) {
        c.synth.relations = parse_relations(c.synth_relations_raw, c.synth.n_signals);
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    return parse_config(csvio::read_text_file(path));
}

std::string serialize_config(const RunConfig& c) {
    std::string o;
    o += "[data]\n";
    o += "panel = " + c.data_panel + "\n";
    o += std::string("schema = ") + (c.data_schema == signals::Schema::Wide ? "wide" : "long") +
         "\n";
    o += "categories = " + c.data_categories + "\n";
    o += std::string("weekly_resample = ") + (c.data_weekly_resample ? "true" : "false") + "\n";
    o += std::string("normalization = ") +
         (c.data_normalization == signals::NormMode::FullSeries ? "full_series" : "train_only") +
         "\n";
    o += std::string("norm_scope = ") +
         (c.data_norm_scope == signals::NormScope::PerSeries ? "per_series" : "pooled") + "\n";
    o += std::string("constant_series = ") +
         (c.data_constant_series == signals::ConstantSeriesPolicy::MapToHalf ? "map_to_half"
                                                                             : "error") +
         "\n";
    o += "\n[synth]\n";
    o += "states = " + std::to_string(c.synth.n_states) + "\n";
    o += "signals = " + std::to_string(c.synth.n_signals) + "\n";
    o += "weeks = " + std::to_string(c.synth.weeks) + "\n";
    o += "relations = " + c.synth_relations_raw + "\n";
    o += "noise = " + csvio::format_double(c.synth.noise_sigma) + "\n";
    o += "ar_coeff = " + csvio::format_double(c.synth.ar_coeff) + "\n";
    o += "ar_noise = " + csvio::format_double(c.synth.ar_noise) + "\n";
    o += "season_amp = " + csvio::format_double(c.synth.season_amp) + "\n";
    o += "season_period = " + csvio::format_double(c.synth.season_period) + "\n";
    o += "season_jitter = " + csvio::format_double(c.synth.season_period_jitter) + "\n";
    o += "\n[similarity]\n";
    o += "measure = " + sim::measure_name(c.similarity.measure) + "\n";
    o += "window = " + std::to_string(c.similarity.shapelet_window) + "\n";
    o += "max_lag = " + std::to_string(c.similarity.max_lag) + "\n";
    o += "band = " + (c.similarity.band ? std::to_string(*c.similarity.band) : "") + "\n";
    o += "\n[graph]\n";
    o += "strategy = " + graphs::strategy_name(c.graph_strategy) + "\n";
    o += "k = " + std::to_string(c.graph_k) + "\n";
    o += "k_avg = " + csvio::format_double(c.graph_k_avg) + "\n";
    o += std::string("random_exact = ") + (c.graph_random_exact ? "true" : "false") + "\n";
    o += "seed = " + std::to_string(c.graph_seed) + "\n";
    o += "\n[model]\n";
    o += "layers = " + std::to_string(c.model.layers) + "\n";
    o += "hidden = " + std::to_string(c.model.hidden) + "\n";
    o += "epochs = " + std::to_string(c.model.epochs) + "\n";
    o += "lr = " + csvio::format_double(c.model.lr) + "\n";
    o += std::string("loss = ") + (c.model.mse_loss ? "mse" : "mae") + "\n";
    o += std::string("aggregator_weighted = ") +
         (c.model.aggregator_weighted ? "true" : "false") + "\n";
    o += "\n[eval]\n";
    std::string models;
    for (std::size_t i = 0; i < c.eval_models.size(); ++i) {
        if (i) models += ",";
        models += c.eval_models[i];
    }
    o += "models = " + models + "\n";
    o += "tau_start = " + c.eval_tau_raw + "\n";
    o += "seeds = " + std::to_string(c.eval_seeds) + "\n";
    o += "seed_base = " + std::to_string(c.eval_seed_base) + "\n";
    o += "threads = " + std::to_string(c.eval_threads) + "\n";
    o += "\n[train]\n";
    o += "tau_start = " + std::to_string(c.train_tau_start) + "\n";
    o += "\n[explain]\n";
    o += "beta = " + csvio::format_double(c.mask.beta) + "\n";
    o += "budget = " + std::to_string(c.mask.budget) + "\n";
    o += "mask_lr = " + csvio::format_double(c.mask.lr) + "\n";
    o += "focus_signal = " + c.explain_focus_signal + "\n";
    o += "top_n = " + std::to_string(c.explain_top_n) + "\n";
    o += "tau_start = " + c.explain_tau_raw + "\n";
    o += "random_seeds = " + std::to_string(c.explain_random_seeds) + "\n";
    return o;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

}  // namespace trendgnn::config
