#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "simex/errors.hpp"
#include "simex/param_space.hpp"

namespace simex {

enum class TaskKind { Classification, Regression };

/// Scenario = parameter space + rendering recipe + labeling rule. The
/// reference scenario ("bench9") is a deterministic synthetic renderer; any
/// real simulator can be plugged in behind the same call shape.
struct ScenarioConfig {
    std::string name = "bench9";
    SpacePtr space;
    std::size_t input_dim = 24;
    std::size_t class_count = 9;
    TaskKind task = TaskKind::Classification;
    double regression_threshold = 4.0; // failure if error norm exceeds this
    bool noise_free = true;
    // optional artificial latency, for rehearsing budgeted runs
    std::chrono::microseconds render_sleep{0};
};

struct RenderedSample {
    std::vector<double> input;
    int label = 0;                 // classification
    std::vector<double> target;    // regression
    Chromosome chromosome;
};

namespace detail {

// Fixed per-feature coefficient table for the bench9 renderer. Derived from
// hashed constants so the scenario is identical across runs and builds.
struct Bench9Coeffs {
    std::vector<double> ax, ay, az, phix, phiy, phiz, ua, ub;
    std::vector<std::vector<double>> template_offset; // [level][feature]

    explicit Bench9Coeffs(std::size_t dim, std::size_t levels) {
        auto unit = [](std::uint64_t h) { return (h >> 11) * 0x1.0p-53; };
        std::uint64_t h = 0x9a3cb1d577e04f21ULL;
        auto next = [&] { h = splitmix64(h); return unit(h); };
        for (std::size_t k = 0; k < dim; ++k) {
            ax.push_back(1.0 + std::floor(next() * 2.0));   // 1 or 2
            ay.push_back(1.0 + std::floor(next() * 2.0));
            az.push_back(1.0 + next());
            phix.push_back(next() * 2.0 * std::numbers::pi);
            phiy.push_back(next() * 2.0 * std::numbers::pi);
            phiz.push_back(next() * 2.0 * std::numbers::pi);
            ua.push_back(next() * 2.0 - 1.0);
            ub.push_back(next() * 2.0 - 1.0);
        }
        template_offset.resize(levels);
        for (auto& row : template_offset)
            for (std::size_t k = 0; k < dim; ++k) row.push_back(0.15 * (next() * 2.0 - 1.0));
    }
};

inline const Bench9Coeffs& bench9_coeffs(std::size_t dim, std::size_t levels) {
    static const Bench9Coeffs table(dim, levels);
    if (table.ax.size() != dim || table.template_offset.size() != levels)
        throw contract_error("bench9 coefficient table built for a different shape");
    return table;
}

inline int angle_bin(double deg) { return deg < -30.0 ? 0 : (deg <= 30.0 ? 1 : 2); }

} // namespace detail

inline SpacePtr bench9_space() {
    std::vector<ParameterSpec> specs;
    specs.push_back(ParameterSpec::continuous("pose_x", -90.0, 90.0));
    specs.push_back(ParameterSpec::continuous("pose_y", -90.0, 90.0));
    specs.push_back(ParameterSpec::continuous("pose_z", -60.0, 60.0));
    specs.push_back(ParameterSpec::continuous("light", 0.2, 1.0));
    specs.push_back(ParameterSpec::continuous("clutter_a", -1.0, 1.0));
    specs.push_back(ParameterSpec::continuous("clutter_b", -1.0, 1.0));
    specs.push_back(ParameterSpec::categorical("template", {"slim", "round", "wide"}));
    return std::make_shared<ParameterSpace>(std::move(specs));
}

inline ScenarioConfig bench9_scenario() {
    ScenarioConfig cfg;
    cfg.name = "bench9";
    cfg.space = bench9_space();
    cfg.input_dim = 24;
    cfg.class_count = 9;
    return cfg;
}

/// Deterministic renderer: smooth trigonometric features of the pose
/// parameters, scaled by the light factor, plus clutter components and a
/// per-template offset. The label is the 3x3 binning of (pose_x, pose_y).
inline RenderedSample render(const Chromosome& c, const ScenarioConfig& cfg) {
    check_valid(c);
    if (cfg.name != "bench9") throw config_error("unknown scenario: " + cfg.name);
    if (cfg.render_sleep.count() > 0) std::this_thread::sleep_for(cfg.render_sleep);

    const auto& t = detail::bench9_coeffs(cfg.input_dim, 3);
    const double deg = std::numbers::pi / 180.0;
    const double tx = c.values[0] * deg;
    const double ty = c.values[1] * deg;
    const double tz = c.values[2] * deg;
    const double light = c.values[3];
    const double ca = c.values[4];
    const double cb = c.values[5];
    const auto tmpl = static_cast<std::size_t>(c.values[6]);

    RenderedSample s;
    s.chromosome = c;
    s.input.reserve(cfg.input_dim);
    for (std::size_t k = 0; k < cfg.input_dim; ++k) {
        // pose_z shifts the apparent pose_x, so large tilts confuse the
        // horizontal reading unless the model saw them during training
        double base = std::sin(t.ax[k] * tx + t.phix[k])
                    + std::sin(t.ay[k] * ty + t.phiy[k])
                    + 0.45 * std::sin(t.az[k] * (tx - 1.5 * tz) + t.phiz[k]);
        s.input.push_back(light * base + 0.3 * (t.ua[k] * ca + t.ub[k] * cb)
                          + t.template_offset[tmpl][k]);
    }
    s.label = 3 * detail::angle_bin(c.values[0]) + detail::angle_bin(c.values[1]);
    return s;
}

/// True iff the model output disagrees with the simulator ground truth.
inline bool ground_truth_failure(const RenderedSample& sample,
                                 const std::vector<double>& model_output,
                                 const ScenarioConfig& cfg) {
    if (cfg.task == TaskKind::Classification) {
        if (model_output.size() != cfg.class_count)
            throw contract_error("model output size does not match class count");
        std::size_t best = 0;
        for (std::size_t k = 1; k < model_output.size(); ++k)
            if (model_output[k] > model_output[best]) best = k;
        return static_cast<int>(best) != sample.label;
    }
    if (model_output.size() != sample.target.size())
        throw contract_error("model output size does not match regression target");
    double err = 0.0;
    for (std::size_t k = 0; k < model_output.size(); ++k) {
        const double d = model_output[k] - sample.target[k];
        err += d * d;
    }
    return std::sqrt(err) > cfg.regression_threshold;
}

// Unsafe sub-boxes that the bench9 training sampler under-represents.
// Failures of the trained reference model concentrate here.
inline bool bench9_in_undertrained_region(const Chromosome& c) {
    const bool r1 = c.values[1] > 45.0 && c.values[3] < 0.5;   // turned far, dim light
    const bool r2 = c.values[0] < -45.0 && c.values[2] > 20.0; // looking down, tilted
    return r1 || r2;
}

/// Training distribution: uniform draws, but the two unsafe sub-boxes are
/// kept with probability 1/20 to plant an incomplete-training-set root cause.
inline Chromosome bench9_training_chromosome(const ScenarioConfig& cfg, Rng& rng) {
    for (;;) {
        Chromosome c = random_chromosome(cfg.space, rng);
        if (!bench9_in_undertrained_region(c)) return c;
        if (uniform_real(rng, 0.0, 1.0) < 0.05) return c;
    }
}

} // namespace simex
