#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trendgnn/panel.hpp"

namespace trendgnn::signals {

/// One planted driver relation inside every state: signal `src` feeds signal
/// `dst` with the given lag (weeks) and gain.
struct Relation {
    std::size_t src = 0;
    std::size_t dst = 0;
    int lag = 1;  // 0..3
    double gain = 1.0;
};

/// Planted ground-truth edge, in the same shape the graph builders use.
struct PlantedEdge {
    std::string state;
    std::string src;
    std::string dst;
    double gain;
    int lag;
};

struct SynthSpec {
    std::size_t n_states = 5;
    std::size_t n_signals = 8;
    std::size_t weeks = 80;
    std::vector<Relation> relations;  // applied within every state

    double noise_sigma = 0.02;     // observation noise on driven values
    double ar_coeff = 0.6;         // base AR(1) memory
    double ar_noise = 0.12;        // base AR(1) innovation scale
    double season_amp = 0.5;       // seasonal sinusoid amplitude
    double season_period = 26.0;   // weeks
    double season_period_jitter = 0.15;  // relative per-signal period spread

    void validate() const;
};

/// Generates a weekly panel of coupled signals: per-signal seasonal + AR(1)
/// base dynamics plus the planted driver relations, min-max normalized per
/// series. Returns the planted edges as recovery ground truth. Bit-identical
/// for a fixed (spec, seed). Instantaneous (lag 0) relations must be acyclic.
std::pair<Panel, std::vector<PlantedEdge>> synth_panel(const SynthSpec& spec, std::uint64_t seed);

void save_planted_edges(const std::vector<PlantedEdge>& edges, const std::string& path);

}  // namespace trendgnn::signals
