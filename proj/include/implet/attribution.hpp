#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "implet/core.hpp"
#include "implet/error.hpp"
#include "implet/models.hpp"
#include "implet/parallel.hpp"

namespace implet {

enum class AttributionMethod { occlusion, saliency_linear, inputxgrad_linear, file };
enum class OcclusionBaseline { zero, sample_mean };

/// Which class an attribution is computed for.
struct TargetClass {
    enum class Mode { predicted, true_label, fixed };
    Mode mode = Mode::predicted;
    int fixed_class = 0;

    static TargetClass predicted() { return {}; }
    static TargetClass true_label() { return {Mode::true_label, 0}; }
    static TargetClass fixed(int c) { return {Mode::fixed, c}; }

    std::string to_string() const {
        switch (mode) {
            case Mode::predicted: return "predicted";
            case Mode::true_label: return "true";
            case Mode::fixed: return std::to_string(fixed_class);
        }
        return "predicted";
    }
};

struct AttributionConfig {
    AttributionMethod method = AttributionMethod::occlusion;
    std::size_t window = 0;  // 0 selects max(3, ceil(T/20))
    std::size_t stride = 1;
    OcclusionBaseline baseline = OcclusionBaseline::zero;
    TargetClass target;
};

inline std::string to_string(AttributionMethod m) {
    switch (m) {
        case AttributionMethod::occlusion: return "occlusion";
        case AttributionMethod::saliency_linear: return "saliency_linear";
        case AttributionMethod::inputxgrad_linear: return "inputxgrad_linear";
        case AttributionMethod::file: return "file";
    }
    return "unknown";
}

inline AttributionMethod parse_attribution_method(const std::string& s) {
    if (s == "occlusion") return AttributionMethod::occlusion;
    if (s == "saliency_linear") return AttributionMethod::saliency_linear;
    if (s == "inputxgrad_linear") return AttributionMethod::inputxgrad_linear;
    if (s == "file") return AttributionMethod::file;
    throw ConfigError("unknown attribution method '" + s + "'");
}

inline std::size_t default_occlusion_window(std::size_t T) {
    const std::size_t w = std::max<std::size_t>(3, (T + 19) / 20);
    return std::min(w, T);
}

/// Occlusion: slide a window (stride-stepped, final window clamped to the end),
/// replace it with the baseline and record the drop in class probability.
/// Each timestep's raw score is the mean delta over the windows covering it.
inline AttributionSeries occlusion_attribution(const Model& model, const TimeSeries& x, int class_id,
                                               const AttributionConfig& cfg) {
    const std::size_t T = x.size();
    if (model.input_length() != 0 && T != model.input_length())
        throw ShapeError("series length " + std::to_string(T) + " does not match model input " +
                         std::to_string(model.input_length()));
    if (class_id < 0 || class_id >= model.n_classes()) throw ConfigError("class id out of range");
    const std::size_t window = cfg.window == 0 ? default_occlusion_window(T) : cfg.window;
    if (window < 1 || window > T) throw ConfigError("occlusion window must be in [1, T]");
    if (cfg.stride < 1 || cfg.stride > window) throw ConfigError("occlusion stride must be in [1, window]");

    std::vector<std::size_t> starts;
    for (std::size_t p = 0; p + window <= T; p += cfg.stride) starts.push_back(p);
    if (starts.back() + window < T) starts.push_back(T - window);

    const double fill = cfg.baseline == OcclusionBaseline::zero ? 0.0 : mean_of(x.values);
    std::vector<TimeSeries> batch;
    batch.reserve(starts.size() + 1);
    batch.push_back(x);
    for (auto p : starts) {
        TimeSeries v = x;
        std::fill(v.values.begin() + static_cast<std::ptrdiff_t>(p),
                  v.values.begin() + static_cast<std::ptrdiff_t>(p + window), fill);
        batch.push_back(std::move(v));
    }
    const Matrix proba = model.predict_proba(batch);
    const auto c = static_cast<std::size_t>(class_id);
    const double clean = proba(0, c);

    std::vector<double> sum(T, 0.0);
    std::vector<std::size_t> cover(T, 0);
    for (std::size_t k = 0; k < starts.size(); ++k) {
        const double delta = clean - proba(k + 1, c);
        for (std::size_t t = starts[k]; t < starts[k] + window; ++t) {
            sum[t] += delta;
            ++cover[t];
        }
    }
    for (std::size_t t = 0; t < T; ++t) sum[t] /= static_cast<double>(cover[t]);
    return AttributionSeries(x.id, class_id, std::move(sum));
}

enum class GradientVariant { saliency, inputxgrad };

/// Closed-form gradient attributions of the linear model's class logit.
/// saliency: |coef_c[t]|; inputxgrad: coef_c[t] * x_t.
inline AttributionSeries gradient_attribution_linear(const Model& model, const TimeSeries& x, int class_id,
                                                     GradientVariant variant) {
    const auto& p = model.linear_params();
    if (x.size() != model.input_length()) throw ShapeError("series length does not match model input");
    if (class_id < 0 || class_id >= model.n_classes()) throw ConfigError("class id out of range");
    const auto& coef = p.coef[static_cast<std::size_t>(class_id)];
    std::vector<double> raw(x.size());
    for (std::size_t t = 0; t < x.size(); ++t)
        raw[t] = variant == GradientVariant::saliency ? std::abs(coef[t]) : coef[t] * x[t];
    return AttributionSeries(x.id, class_id, std::move(raw));
}

inline int resolve_target_class(const Model& model, const TimeSeries& x, int label, const TargetClass& target) {
    switch (target.mode) {
        case TargetClass::Mode::predicted: return argmax(model.predict_proba(x).row(0));
        case TargetClass::Mode::true_label: return label;
        case TargetClass::Mode::fixed:
            if (target.fixed_class < 0 || target.fixed_class >= model.n_classes())
                throw ConfigError("fixed target class out of range");
            return target.fixed_class;
    }
    return label;
}

/// Attributes every sample of a dataset toward its configured target class.
inline std::vector<AttributionSeries> attribute_dataset(const Model& model, const LabeledDataset& ds,
                                                        const AttributionConfig& cfg) {
    std::vector<AttributionSeries> out(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
        const auto& x = ds.samples[i];
        const int cls = resolve_target_class(model, x, ds.labels[i], cfg.target);
        switch (cfg.method) {
            case AttributionMethod::occlusion: out[i] = occlusion_attribution(model, x, cls, cfg); break;
            case AttributionMethod::saliency_linear:
                out[i] = gradient_attribution_linear(model, x, cls, GradientVariant::saliency);
                break;
            case AttributionMethod::inputxgrad_linear:
                out[i] = gradient_attribution_linear(model, x, cls, GradientVariant::inputxgrad);
                break;
            case AttributionMethod::file: throw ConfigError("file attributions are loaded, not computed");
        }
    });
    return out;
}

/// Attribution file: {"method": str, "entries": [{"sample_index", "class", "attributions"}]}.
/// `sample_index` refers to TimeSeries::id.
inline nlohmann::json attributions_to_json(const std::string& method, const std::vector<AttributionSeries>& attrs) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& a : attrs)
        entries.push_back({{"sample_index", a.sample_id}, {"class", a.class_id}, {"attributions", a.raw}});
    return {{"method", method}, {"entries", std::move(entries)}};
}

inline std::vector<AttributionSeries> attributions_from_json(const nlohmann::json& j, const LabeledDataset& ds) {
    std::vector<AttributionSeries> out;
    try {
        for (const auto& e : j.at("entries")) {
            const auto sid = e.at("sample_index").get<long long>();
            const auto pos = sid < 0 ? ds.size() : ds.find(static_cast<std::size_t>(sid));
            if (pos == ds.size()) throw ReferenceError("unknown sample_index " + std::to_string(sid));
            auto raw = e.at("attributions").get<std::vector<double>>();
            if (raw.size() != ds.samples[pos].size())
                throw ShapeError("attribution length " + std::to_string(raw.size()) + " for sample_index " +
                                 std::to_string(sid) + ", expected " + std::to_string(ds.samples[pos].size()));
            for (double v : raw)
                if (!std::isfinite(v)) throw FormatError("non-finite attribution for sample_index " + std::to_string(sid));
            out.emplace_back(static_cast<std::size_t>(sid), e.at("class").get<int>(), std::move(raw));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed attribution file: ") + e.what());
    }
    return out;
}

inline std::vector<AttributionSeries> load_attributions(const std::string& path, const LabeledDataset& ds) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("invalid JSON in ") + path + ": " + e.what());
    }
    return attributions_from_json(j, ds);
}

}  // namespace implet
