#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "implet/core.hpp"
#include "implet/error.hpp"
#include "implet/removal.hpp"
#include "implet/rng.hpp"

namespace implet {

enum class MotifKind { gaussian_bump, two_motifs };

inline std::string to_string(MotifKind m) { return m == MotifKind::gaussian_bump ? "gaussian_bump" : "two_motifs"; }

inline MotifKind parse_motif_kind(const std::string& s) {
    if (s == "gaussian_bump") return MotifKind::gaussian_bump;
    if (s == "two_motifs") return MotifKind::two_motifs;
    throw ConfigError("unknown motif '" + s + "'");
}

/// Synthetic two-class data. Positions are 1-based timesteps.
struct SynthSpec {
    std::size_t n_per_class = 100;
    std::size_t T = 100;
    MotifKind motif = MotifKind::gaussian_bump;
    double bump_center = 50.0;
    double bump_width = 5.0;
    double amplitude = 2.0;
    double noise_std = 0.5;
    // two_motifs: center of the dip carried by the second sub-population.
    double dip_center = 25.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (T < 1 || n_per_class < 1) throw ConfigError("synthetic spec needs T >= 1 and n_per_class >= 1");
        if (!(bump_width > 0.0) || noise_std < 0.0) throw ConfigError("bump width must be > 0 and noise_std >= 0");
        auto inside = [&](double c) { return c - 2 * bump_width >= 1.0 && c + 2 * bump_width <= static_cast<double>(T); };
        if (!inside(bump_center)) throw ConfigError("bump interval must lie within [1, T]");
        if (motif == MotifKind::two_motifs && !inside(dip_center)) throw ConfigError("dip interval must lie within [1, T]");
    }
};

struct SynthData {
    LabeledDataset dataset;
    /// Per sample: 0 for class 0, 1 for the bump sub-population, 2 for the dip.
    std::vector<int> subpopulation;
    /// Ground-truth discriminative interval per sample (center +- 2 width, rounded
    /// inward); {0, 0} for class-0 samples.
    std::vector<Interval> truth;
    std::size_t n_bump = 0;
    std::size_t n_dip = 0;
};

inline Interval motif_interval(double center, double width) {
    return {static_cast<std::size_t>(std::ceil(center - 2 * width)), static_cast<std::size_t>(std::floor(center + 2 * width))};
}

/// Class 0 is white noise; class 1 adds a gaussian bump (two_motifs: half the
/// class carries the bump, the other half a dip at dip_center). Samples
/// alternate class 0, class 1.
inline SynthData generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    SynthData out;
    auto& ds = out.dataset;
    ds.n_classes = 2;
    ds.class_values = {0.0, 1.0};

    auto shape = [&](double center, std::size_t t) {
        const double d = static_cast<double>(t) - center;
        return std::exp(-d * d / (2 * spec.bump_width * spec.bump_width));
    };
    std::size_t class1_seen = 0;
    for (std::size_t n = 0; n < 2 * spec.n_per_class; ++n) {
        const int label = static_cast<int>(n % 2);
        TimeSeries ts;
        ts.id = n;
        ts.values.resize(spec.T);
        for (auto& v : ts.values) v = spec.noise_std * noise(rng);
        int sub = 0;
        Interval truth{0, 0};
        if (label == 1) {
            const bool dip = spec.motif == MotifKind::two_motifs && class1_seen % 2 == 1;
            const double center = dip ? spec.dip_center : spec.bump_center;
            const double sign = dip ? -1.0 : 1.0;
            for (std::size_t t = 1; t <= spec.T; ++t) ts.values[t - 1] += sign * spec.amplitude * shape(center, t);
            sub = dip ? 2 : 1;
            truth = motif_interval(center, spec.bump_width);
            ++(dip ? out.n_dip : out.n_bump);
            ++class1_seen;
        }
        ds.samples.push_back(std::move(ts));
        ds.labels.push_back(label);
        out.subpopulation.push_back(sub);
        out.truth.push_back(truth);
    }
    return out;
}

inline nlohmann::json synth_metadata(const SynthSpec& spec, const SynthData& d) {
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < d.dataset.size(); ++i) {
        nlohmann::json s{{"sample_index", d.dataset.samples[i].id},
                         {"label", d.dataset.labels[i]},
                         {"subpopulation", d.subpopulation[i]}};
        s["interval"] = d.truth[i].l == 0 ? nlohmann::json(nullptr) : nlohmann::json{d.truth[i].l, d.truth[i].r};
        samples.push_back(std::move(s));
    }
    return {{"spec",
             {{"n_per_class", spec.n_per_class},
              {"T", spec.T},
              {"motif", to_string(spec.motif)},
              {"bump_center", spec.bump_center},
              {"bump_width", spec.bump_width},
              {"amplitude", spec.amplitude},
              {"noise_std", spec.noise_std},
              {"dip_center", spec.dip_center},
              {"seed", spec.seed}}},
            {"n_bump", d.n_bump},
            {"n_dip", d.n_dip},
            {"samples", samples}};
}

/// Intersection over union of two closed intervals.
inline double interval_iou(Interval a, Interval b) {
    const std::size_t lo = std::max(a.l, b.l);
    const std::size_t hi = std::min(a.r, b.r);
    const double inter = hi >= lo ? static_cast<double>(hi - lo + 1) : 0.0;
    const double uni = static_cast<double>(a.length() + b.length()) - inter;
    return uni > 0 ? inter / uni : 0.0;
}

}  // namespace implet
