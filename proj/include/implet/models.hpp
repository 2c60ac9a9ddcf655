#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "implet/core.hpp"
#include "implet/error.hpp"
#include "implet/rng.hpp"
#include "implet/subprocess.hpp"

namespace implet {

/// Dense row-major matrix of probabilities, one row per input series.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

/// Index of the largest entry; ties go to the lowest index.
inline int argmax(std::span<const double> row) {
    int best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
    return best;
}

inline void softmax_inplace(std::span<double> z) {
    const double hi = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double& v : z) {
        v = std::exp(v - hi);
        total += v;
    }
    for (double& v : z) v /= total;
}

enum class ModelKind { builtin_linear, builtin_centroid, external };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::builtin_linear: return "builtin_linear";
        case ModelKind::builtin_centroid: return "builtin_centroid";
        case ModelKind::external: return "external";
    }
    return "unknown";
}

/// Multinomial logistic regression on raw timesteps: logit_c = bias_c + coef_c . x
struct LinearParams {
    std::vector<std::vector<double>> coef;  // [class][t]
    std::vector<double> bias;               // [class]

    double logit(std::size_t c, std::span<const double> x) const {
        double z = bias[c];
        const auto& w = coef[c];
        for (std::size_t t = 0; t < x.size(); ++t) z += w[t] * x[t];
        return z;
    }
};

/// Per-class mean series; probabilities are a softmin over Euclidean distances.
struct CentroidParams {
    std::vector<std::vector<double>> centroids;  // [class][t]
};

/// Client for a classifier living in another process, speaking line-delimited JSON
/// over the process's standard streams. Requests are serialized.
class ExternalModel {
public:
    explicit ExternalModel(const std::string& command, std::chrono::milliseconds timeout = std::chrono::seconds(30))
        : command_(command), timeout_(timeout), proc_(command) {
        auto reply = call({{"op", "info"}});
        try {
            n_classes_ = reply.at("n_classes").get<int>();
            if (reply.contains("input_length") && !reply.at("input_length").is_null())
                input_length_ = reply.at("input_length").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("malformed info response: ") + e.what());
        }
        if (n_classes_ < 1) throw ProtocolError("model reported n_classes < 1");
    }

    int n_classes() const noexcept { return n_classes_; }
    std::optional<std::size_t> input_length() const noexcept { return input_length_; }
    const std::string& command() const noexcept { return command_; }

    Matrix predict_proba(std::span<const TimeSeries> batch) {
        Matrix out(batch.size(), static_cast<std::size_t>(n_classes_));
        if (batch.empty()) return out;
        nlohmann::json series = nlohmann::json::array();
        for (const auto& s : batch) series.push_back(s.values);
        auto reply = call({{"op", "predict_proba"}, {"series", std::move(series)}});
        if (!reply.contains("proba") || !reply["proba"].is_array())
            throw ProtocolError("response lacks a 'proba' array");
        const auto& proba = reply["proba"];
        if (proba.size() != batch.size())
            throw ProtocolError("expected " + std::to_string(batch.size()) + " probability rows, got " +
                                std::to_string(proba.size()));
        for (std::size_t i = 0; i < proba.size(); ++i) {
            const auto& row = proba[i];
            if (!row.is_array() || row.size() != out.cols)
                throw ProtocolError("probability row " + std::to_string(i) + " has wrong shape");
            double total = 0.0;
            for (std::size_t j = 0; j < out.cols; ++j) {
                if (!row[j].is_number()) throw ProtocolError("non-numeric probability in row " + std::to_string(i));
                double p = row[j].get<double>();
                if (!std::isfinite(p) || p < 0.0)
                    throw ProtocolError("invalid probability in row " + std::to_string(i));
                out(i, j) = p;
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-6)
                throw ProtocolError("probability row " + std::to_string(i) + " sums to " + std::to_string(total));
        }
        return out;
    }

private:
    nlohmann::json call(nlohmann::json request) {
        std::lock_guard lock(mutex_);
        const std::int64_t id = next_id_++;
        request["id"] = id;
        proc_.write_line(request.dump());
        const std::string line = proc_.read_line(timeout_);
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ProtocolError("malformed response line: '" + line + "'");
        }
        if (!reply.is_object()) throw ProtocolError("response is not a JSON object: '" + line + "'");
        if (!reply.contains("id") || !reply["id"].is_number_integer() || reply["id"].get<std::int64_t>() != id)
            throw ProtocolError("response id mismatch (expected " + std::to_string(id) + "): '" + line + "'");
        if (reply.contains("error"))
            throw ProtocolError("model process reported error: " +
                                (reply["error"].is_string() ? reply["error"].get<std::string>() : reply["error"].dump()));
        return reply;
    }

    std::string command_;
    std::chrono::milliseconds timeout_;
    Subprocess proc_;
    std::mutex mutex_;
    std::int64_t next_id_ = 0;
    int n_classes_ = 0;
    std::optional<std::size_t> input_length_;
};

/// A classifier: built-in parameters or a handle to an external process.
/// Immutable after construction (the external client serializes internally).
class Model {
public:
    static Model linear(LinearParams p) {
        Model m;
        m.kind_ = ModelKind::builtin_linear;
        m.n_classes_ = static_cast<int>(p.coef.size());
        m.input_length_ = p.coef.empty() ? 0 : p.coef.front().size();
        if (p.bias.size() != p.coef.size()) throw ShapeError("bias and coefficient class counts differ");
        for (const auto& c : p.coef)
            if (c.size() != m.input_length_) throw ShapeError("ragged coefficient matrix");
        m.params_ = std::move(p);
        return m;
    }

    static Model centroid(CentroidParams p) {
        Model m;
        m.kind_ = ModelKind::builtin_centroid;
        m.n_classes_ = static_cast<int>(p.centroids.size());
        m.input_length_ = p.centroids.empty() ? 0 : p.centroids.front().size();
        for (const auto& c : p.centroids)
            if (c.size() != m.input_length_) throw ShapeError("ragged centroid matrix");
        m.params_ = std::move(p);
        return m;
    }

    static Model external(const std::string& command, std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
        Model m;
        auto client = std::make_shared<ExternalModel>(command, timeout);
        m.kind_ = ModelKind::external;
        m.n_classes_ = client->n_classes();
        m.input_length_ = client->input_length().value_or(0);
        m.params_ = std::move(client);
        return m;
    }

    ModelKind kind() const noexcept { return kind_; }
    int n_classes() const noexcept { return n_classes_; }
    /// 0 when an external model accepts any length.
    std::size_t input_length() const noexcept { return input_length_; }

    const LinearParams& linear_params() const {
        if (auto* p = std::get_if<LinearParams>(&params_)) return *p;
        throw UnsupportedError("model is " + to_string(kind_) + ", not builtin_linear");
    }
    const CentroidParams& centroid_params() const {
        if (auto* p = std::get_if<CentroidParams>(&params_)) return *p;
        throw UnsupportedError("model is " + to_string(kind_) + ", not builtin_centroid");
    }
    const ExternalModel* external_client() const {
        auto* p = std::get_if<std::shared_ptr<ExternalModel>>(&params_);
        return p ? p->get() : nullptr;
    }

    Matrix predict_proba(std::span<const TimeSeries> batch) const {
        for (const auto& s : batch)
            if (input_length_ != 0 && s.size() != input_length_)
                throw ShapeError("series " + std::to_string(s.id) + " has length " + std::to_string(s.size()) +
                                 ", model expects " + std::to_string(input_length_));
        const auto K = static_cast<std::size_t>(n_classes_);
        if (auto* ext = std::get_if<std::shared_ptr<ExternalModel>>(&params_)) return (*ext)->predict_proba(batch);

        Matrix out(batch.size(), K);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto row = out.row(i);
            const auto& x = batch[i].values;
            if (auto* lin = std::get_if<LinearParams>(&params_)) {
                for (std::size_t c = 0; c < K; ++c) row[c] = lin->logit(c, x);
            } else {
                const auto& cen = std::get<CentroidParams>(params_);
                for (std::size_t c = 0; c < K; ++c) {
                    double d2 = 0.0;
                    for (std::size_t t = 0; t < x.size(); ++t) {
                        const double d = x[t] - cen.centroids[c][t];
                        d2 += d * d;
                    }
                    row[c] = -std::sqrt(d2);
                }
            }
            softmax_inplace(row);
        }
        return out;
    }

    Matrix predict_proba(const TimeSeries& x) const { return predict_proba(std::span<const TimeSeries>(&x, 1)); }

    std::vector<int> predict(std::span<const TimeSeries> batch) const {
        auto p = predict_proba(batch);
        std::vector<int> labels(p.rows);
        for (std::size_t i = 0; i < p.rows; ++i) labels[i] = argmax(p.row(i));
        return labels;
    }

private:
    Model() = default;

    ModelKind kind_ = ModelKind::builtin_linear;
    int n_classes_ = 0;
    std::size_t input_length_ = 0;
    std::variant<LinearParams, CentroidParams, std::shared_ptr<ExternalModel>> params_;
};

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 500;
    double l2 = 1e-2;
    std::uint64_t seed = 0;
};

/// Fits a built-in model. Linear: full-batch gradient descent on the mean
/// cross-entropy plus (l2/2)||W||^2. Centroid: per-class mean series.
inline Model train_builtin(const LabeledDataset& ds, ModelKind kind, const TrainConfig& cfg = {}) {
    if (ds.empty()) throw TrainError("cannot train on an empty dataset");
    validate(ds);
    const std::size_t K = static_cast<std::size_t>(ds.n_classes);
    const std::size_t T = ds.length();
    const std::size_t N = ds.size();
    std::vector<std::size_t> counts(K, 0);
    for (int l : ds.labels) ++counts[static_cast<std::size_t>(l)];
    if (K < 2) throw TrainError("need at least two classes, got " + std::to_string(K));
    for (std::size_t c = 0; c < K; ++c)
        if (counts[c] == 0) throw TrainError("class " + std::to_string(c) + " has no samples");

    if (kind == ModelKind::builtin_centroid) {
        CentroidParams p;
        p.centroids.assign(K, std::vector<double>(T, 0.0));
        for (std::size_t i = 0; i < N; ++i) {
            auto& c = p.centroids[static_cast<std::size_t>(ds.labels[i])];
            for (std::size_t t = 0; t < T; ++t) c[t] += ds.samples[i].values[t];
        }
        for (std::size_t c = 0; c < K; ++c)
            for (auto& v : p.centroids[c]) v /= static_cast<double>(counts[c]);
        return Model::centroid(std::move(p));
    }
    if (kind != ModelKind::builtin_linear) throw TrainError("only built-in models can be trained");
    if (cfg.epochs < 0 || !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0) throw TrainError("invalid training config");

    LinearParams p;
    p.coef.assign(K, std::vector<double>(T, 0.0));
    p.bias.assign(K, 0.0);
    Rng rng(cfg.seed);
    std::normal_distribution<double> init(0.0, 0.01);
    for (auto& row : p.coef)
        for (auto& v : row) v = init(rng);

    std::vector<std::vector<double>> grad_w(K, std::vector<double>(T));
    std::vector<double> grad_b(K);
    std::vector<double> z(K);
    const double inv_n = 1.0 / static_cast<double>(N);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t t = 0; t < T; ++t) grad_w[c][t] = cfg.l2 * p.coef[c][t];
            grad_b[c] = 0.0;
        }
        for (std::size_t i = 0; i < N; ++i) {
            const auto& x = ds.samples[i].values;
            for (std::size_t c = 0; c < K; ++c) z[c] = p.logit(c, x);
            softmax_inplace(z);
            for (std::size_t c = 0; c < K; ++c) {
                const double err = (z[c] - (ds.labels[i] == static_cast<int>(c) ? 1.0 : 0.0)) * inv_n;
                grad_b[c] += err;
                auto& g = grad_w[c];
                for (std::size_t t = 0; t < T; ++t) g[t] += err * x[t];
            }
        }
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t t = 0; t < T; ++t) p.coef[c][t] -= cfg.learning_rate * grad_w[c][t];
            p.bias[c] -= cfg.learning_rate * grad_b[c];
        }
    }
    return Model::linear(std::move(p));
}

/// Fraction of predictions equal to the targets.
inline double accuracy_of(std::span<const int> predicted, std::span<const int> targets) {
    if (predicted.size() != targets.size()) throw ShapeError("prediction/target count mismatch");
    if (predicted.empty()) throw EvalError("accuracy of an empty set is undefined");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == targets[i];
    return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

/// Fraction of samples whose argmax class (ties toward the lowest index) equals the label.
inline double accuracy(const Model& model, const LabeledDataset& ds) {
    if (ds.empty()) throw EvalError("accuracy of an empty dataset is undefined");
    auto pred = model.predict(ds.samples);
    return accuracy_of(pred, ds.labels);
}

inline nlohmann::json model_to_json(const Model& m) {
    nlohmann::json j;
    j["kind"] = to_string(m.kind());
    j["n_classes"] = m.n_classes();
    j["input_length"] = m.input_length();
    if (m.kind() == ModelKind::builtin_linear) {
        j["coef"] = m.linear_params().coef;
        j["bias"] = m.linear_params().bias;
    } else if (m.kind() == ModelKind::builtin_centroid) {
        j["centroids"] = m.centroid_params().centroids;
    } else {
        throw UnsupportedError("external models have no parameter dump");
    }
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "builtin_linear") {
            LinearParams p;
            p.coef = j.at("coef").get<std::vector<std::vector<double>>>();
            p.bias = j.at("bias").get<std::vector<double>>();
            return Model::linear(std::move(p));
        }
        if (kind == "builtin_centroid") {
            CentroidParams p;
            p.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
            return Model::centroid(std::move(p));
        }
        throw ConfigError("unknown model kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed model file: ") + e.what());
    }
}

}  // namespace implet
