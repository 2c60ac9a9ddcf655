// implet: command-line front end for attribution, implet extraction,
// clustering and faithfulness evaluation.
//
// Exit codes: 0 success, 2 usage/config/input error, 3 external model protocol
// failure, 4 internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "implet/implet.hpp"

namespace {

using nlohmann::json;
using namespace implet;

constexpr int exit_config = 2;
constexpr int exit_protocol = 3;
constexpr int exit_internal = 4;

/// Resolved flags of one invocation, in declaration order. Output paths and
/// worker counts are left out: they do not influence results.
class ResolvedConfig {
public:
    template <class T>
    void set(const std::string& flag, const T& value) {
        entries_.emplace_back(flag, json(value));
    }
    void set_flag(const std::string& flag, bool on) { entries_.emplace_back(flag, json(on)); }

    json to_json() const {
        json obj = json::object();
        for (const auto& [k, v] : entries_) obj[k] = v;
        return obj;
    }

    /// Command-line arguments that reproduce this configuration.
    json argv() const {
        json args = json::array();
        for (const auto& [k, v] : entries_) {
            if (v.is_boolean()) {
                if (v.get<bool>()) args.push_back("--" + k);
                continue;
            }
            args.push_back("--" + k);
            args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
        return args;
    }

private:
    std::vector<std::pair<std::string, json>> entries_;
};

json header(const std::string& command, std::uint64_t seed, const ResolvedConfig& cfg) {
    return {{"tool", "implet"}, {"version", implet::version}, {"command", command}, {"seed", seed},
            {"config", cfg.to_json()}, {"argv", cfg.argv()}};
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("write failed for " + path);
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("invalid JSON in " + path + ": " + e.what());
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("IMPLET_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("IMPLET_SEED is not an unsigned integer: ") + env);
        }
    }
    return 0;
}

/// builtin:linear | builtin:centroid   train on the given data
/// file:<path>                         load a parameter dump written by `train`
/// exec:<command>                      external model process
Model resolve_model(const std::string& spec, const LabeledDataset& data, std::uint64_t seed, double timeout_s) {
    if (spec == "builtin:linear" || spec == "builtin:centroid") {
        TrainConfig tc;
        tc.seed = seed;
        return train_builtin(data, spec == "builtin:linear" ? ModelKind::builtin_linear : ModelKind::builtin_centroid, tc);
    }
    if (spec.rfind("file:", 0) == 0) return model_from_json(read_json(spec.substr(5)));
    if (spec.rfind("exec:", 0) == 0)
        return Model::external(spec.substr(5), std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000)));
    throw ConfigError("unknown model spec '" + spec + "' (expected builtin:linear, builtin:centroid, file:<path> or exec:<cmd>)");
}

TargetClass parse_target_class(const std::string& s) {
    if (s == "predicted") return TargetClass::predicted();
    if (s == "true") return TargetClass::true_label();
    try {
        std::size_t pos = 0;
        int c = std::stoi(s, &pos);
        if (pos == s.size() && c >= 0) return TargetClass::fixed(c);
    } catch (const std::exception&) {
    }
    throw ConfigError("--class must be predicted, true or a class index, got '" + s + "'");
}

std::vector<Implet> read_implets(const std::string& path) {
    const json j = read_json(path);
    std::vector<Implet> out;
    try {
        for (const auto& e : j.at("implets")) out.push_back(implet_from_json(e));
    } catch (const json::exception& e) {
        throw FormatError("malformed implet file " + path + ": " + e.what());
    }
    return out;
}

struct Common {
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    bool verbose = false;

    void add_to(CLI::App* cmd, bool with_seed = true) {
        cmd->add_option("--out", out, "Output path")->required();
        if (with_seed) cmd->add_option("--seed", seed, "Random seed (falls back to IMPLET_SEED, then 0)");
        cmd->add_option("--threads", threads, "Worker cap (0 = hardware concurrency)");
        cmd->add_flag("-v,--verbose", verbose, "Progress output on stderr");
    }
};

// ---------------------------------------------------------------- synth

struct SynthCmd {
    Common common;
    SynthSpec spec;
    std::string motif = "gaussian_bump";
    std::string meta;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("synth", "Generate a synthetic two-class dataset (UCR format + metadata JSON)");
        common.add_to(c);
        c->add_option("--motif", motif, "gaussian_bump | two_motifs")->capture_default_str();
        c->add_option("--n-per-class", spec.n_per_class)->capture_default_str();
        c->add_option("--length", spec.T)->capture_default_str();
        c->add_option("--center", spec.bump_center)->capture_default_str();
        c->add_option("--width", spec.bump_width)->capture_default_str();
        c->add_option("--amplitude", spec.amplitude)->capture_default_str();
        c->add_option("--noise", spec.noise_std)->capture_default_str();
        c->add_option("--dip-center", spec.dip_center)->capture_default_str();
        c->add_option("--meta", meta, "Metadata JSON path (default: <out>.meta.json)");
        c->callback([this] { run(); });
    }

    void run() {
        spec.motif = parse_motif_kind(motif);
        spec.seed = resolve_seed(common.seed);
        const auto data = generate(spec);
        write_ucr_tsv(data.dataset, common.out);
        ResolvedConfig cfg;
        cfg.set("motif", motif);
        cfg.set("n-per-class", spec.n_per_class);
        cfg.set("length", spec.T);
        cfg.set("center", spec.bump_center);
        cfg.set("width", spec.bump_width);
        cfg.set("amplitude", spec.amplitude);
        cfg.set("noise", spec.noise_std);
        cfg.set("dip-center", spec.dip_center);
        cfg.set("seed", spec.seed);
        json j = header("synth", spec.seed, cfg);
        j["metadata"] = synth_metadata(spec, data);
        write_json(meta.empty() ? common.out + ".meta.json" : meta, j);
    }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
    Common common;
    std::string data;
    std::string kind = "linear";
    TrainConfig tc;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("train", "Train a built-in model and write its parameter dump");
        common.add_to(c);
        c->add_option("--data", data, "UCR-format training data")->required();
        c->add_option("--kind", kind, "linear | centroid")->capture_default_str();
        c->add_option("--lr", tc.learning_rate)->capture_default_str();
        c->add_option("--epochs", tc.epochs)->capture_default_str();
        c->add_option("--l2", tc.l2)->capture_default_str();
        c->callback([this] { run(); });
    }

    void run() {
        if (kind != "linear" && kind != "centroid") throw ConfigError("--kind must be linear or centroid");
        tc.seed = resolve_seed(common.seed);
        const auto ds = load_ucr_tsv(data);
        const auto model = train_builtin(ds, kind == "linear" ? ModelKind::builtin_linear : ModelKind::builtin_centroid, tc);
        ResolvedConfig cfg;
        cfg.set("data", data);
        cfg.set("kind", kind);
        cfg.set("lr", tc.learning_rate);
        cfg.set("epochs", tc.epochs);
        cfg.set("l2", tc.l2);
        cfg.set("seed", tc.seed);
        json j = header("train", tc.seed, cfg);
        j.update(model_to_json(model));
        j["train_accuracy"] = accuracy(model, ds);
        write_json(common.out, j);
    }
};

// ---------------------------------------------------------------- attribute

struct AttributeCmd {
    Common common;
    std::string data;
    std::string model = "builtin:linear";
    std::string method = "occlusion";
    std::string target = "predicted";
    std::size_t window = 0;
    std::size_t stride = 1;
    std::string baseline = "zero";
    double timeout = 30.0;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("attribute", "Compute per-timestep attributions for every sample");
        common.add_to(c);
        c->add_option("--data", data)->required();
        c->add_option("--model", model, "builtin:linear | builtin:centroid | file:<path> | exec:<cmd>")->capture_default_str();
        c->add_option("--method", method, "occlusion | saliency_linear | inputxgrad_linear")->capture_default_str();
        c->add_option("--class", target, "predicted | true | <int>")->capture_default_str();
        c->add_option("--window", window, "Occlusion window (0 = max(3, ceil(T/20)))")->capture_default_str();
        c->add_option("--stride", stride)->capture_default_str();
        c->add_option("--baseline", baseline, "zero | sample_mean")->capture_default_str();
        c->add_option("--timeout", timeout, "External model timeout per request, seconds")->capture_default_str();
        c->callback([this] { run(); });
    }

    void run() {
        AttributionConfig ac;
        ac.method = parse_attribution_method(method);
        if (ac.method == AttributionMethod::file) throw ConfigError("--method file is not computable");
        if (baseline != "zero" && baseline != "sample_mean") throw ConfigError("--baseline must be zero or sample_mean");
        ac.baseline = baseline == "zero" ? OcclusionBaseline::zero : OcclusionBaseline::sample_mean;
        ac.target = parse_target_class(target);
        ac.stride = stride;
        const std::uint64_t seed = resolve_seed(common.seed);
        const auto ds = load_ucr_tsv(data);
        ac.window = window == 0 && ac.method == AttributionMethod::occlusion ? default_occlusion_window(ds.length()) : window;
        const auto m = resolve_model(model, ds, seed, timeout);
        const auto attrs = attribute_dataset(m, ds, ac);

        ResolvedConfig cfg;
        cfg.set("data", data);
        cfg.set("model", model);
        cfg.set("method", method);
        cfg.set("class", target);
        cfg.set("window", ac.window);
        cfg.set("stride", stride);
        cfg.set("baseline", baseline);
        cfg.set("timeout", timeout);
        cfg.set("seed", seed);
        json j = header("attribute", seed, cfg);
        j.update(attributions_to_json(method, attrs));
        write_json(common.out, j);
    }
};

// ---------------------------------------------------------------- extract

struct ExtractCmd {
    Common common;
    std::string data;
    std::string attr;
    ImpletParams params;
    std::optional<std::size_t> len_max;
    std::string scoring = "sum";

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("extract", "Extract implets from attributions");
        common.add_to(c, false);
        c->add_option("--data", data)->required();
        c->add_option("--attr", attr, "Attribution JSON")->required();
        c->add_option("--lambda", params.lambda)->capture_default_str();
        c->add_option("--phi", params.phi)->capture_default_str();
        c->add_option("--len-min", params.len_min)->capture_default_str();
        c->add_option("--len-max", len_max, "Default floor(T/2)");
        c->add_option("--scoring", scoring, "sum | mean")->capture_default_str();
        c->callback([this] { run(); });
    }

    void run() {
        params.scoring = parse_scoring_mode(scoring);
        const auto ds = load_ucr_tsv(data);
        params.len_max = len_max.value_or(ds.length() / 2);
        params.validate();
        const auto attrs = load_attributions(attr, ds);
        const auto per_sample = extract_dataset(ds, attrs, params);

        json list = json::array();
        std::map<int, std::size_t> per_class;
        for (const auto& v : per_sample)
            for (const auto& im : v) {
                list.push_back(implet_to_json(im));
                ++per_class[im.class_id];
            }
        ResolvedConfig cfg;
        cfg.set("data", data);
        cfg.set("attr", attr);
        cfg.set("lambda", params.lambda);
        cfg.set("phi", params.phi);
        cfg.set("len-min", params.len_min);
        cfg.set("len-max", *params.len_max);
        cfg.set("scoring", scoring);
        json j = header("extract", 0, cfg);
        j["params"] = params_to_json(params);
        j["index_base"] = 1;
        j["implets"] = std::move(list);
        write_json(common.out, j);

        std::cout << "implets:";
        if (per_class.empty()) std::cout << " none";
        for (const auto& [c, n] : per_class) std::cout << " class " << c << "=" << n;
        std::cout << '\n';
    }
};

// ---------------------------------------------------------------- cluster

struct ClusterCmd {
    Common common;
    std::string implets;
    ClusterParams params;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("cluster", "Cluster implets per class into cohort centroids");
        common.add_to(c);
        c->add_option("--implets", implets)->required();
        c->add_option("--k-max", params.k_max)->capture_default_str();
        c->add_option("--repeats", params.repeats)->capture_default_str();
        c->add_option("--max-iter", params.max_kmeans_iter)->capture_default_str();
        c->add_option("--dba-iter", params.dba_iter)->capture_default_str();
        c->add_option("--value-weight", params.weights[0])->capture_default_str();
        c->add_option("--attr-weight", params.weights[1])->capture_default_str();
        c->add_flag("--znorm-values", params.znormalize_values, "Z-normalize implet values before clustering");
        c->callback([this] { run(); });
    }

    void run() {
        params.seed = resolve_seed(common.seed);
        const auto list = read_implets(implets);
        if (list.empty()) throw ClusterError("implet file " + implets + " contains no implets");
        const auto cohorts = cluster_by_class(list, params);

        ResolvedConfig cfg;
        cfg.set("implets", implets);
        cfg.set("k-max", params.k_max);
        cfg.set("repeats", params.repeats);
        cfg.set("max-iter", params.max_kmeans_iter);
        cfg.set("dba-iter", params.dba_iter);
        cfg.set("value-weight", params.weights[0]);
        cfg.set("attr-weight", params.weights[1]);
        cfg.set_flag("znorm-values", params.znormalize_values);
        cfg.set("seed", params.seed);
        json j = header("cluster", params.seed, cfg);
        json arr = json::array();
        for (const auto& c : cohorts) arr.push_back(cohort_to_json(c));
        j["cohorts"] = std::move(arr);
        write_json(common.out, j);
        for (const auto& c : cohorts)
            std::cout << "class " << c.class_id << ": k*=" << c.k_star << " silhouette=" << c.silhouette << '\n';
    }
};

// ---------------------------------------------------------------- eval

struct EvalCmd {
    Common common;
    std::string data;
    std::string model = "builtin:linear";
    std::string implets;
    std::string cohort;
    std::string attr;
    std::string removal = "smooth";
    bool multi = false;
    std::size_t random_trials = 10;
    std::string mode = "implet";
    std::string target = "ground_truth";
    std::string match_class = "predicted";
    std::string csv;
    std::string dataset_name;
    std::string explainer = "implet";
    double timeout = 30.0;

    void add(CLI::App& app) {
        auto* c = app.add_subcommand("eval", "Faithfulness: identified vs. length-matched random removal");
        common.add_to(c);
        c->add_option("--data", data)->required();
        c->add_option("--model", model)->capture_default_str();
        c->add_option("--implets", implets, "Implet JSON (implet mode; CILS baseline)");
        c->add_option("--cohort", cohort, "Cohort JSON (cils-1d / cils-2d modes)");
        c->add_option("--attr", attr, "Attribution JSON of --data (needed by cils-2d)");
        c->add_option("--removal", removal, "smooth | mean | none")->capture_default_str();
        c->add_flag("--multi", multi, "Remove all segments of a sample at once");
        c->add_option("--random-trials", random_trials)->capture_default_str();
        c->add_option("--mode", mode, "implet | cils-1d | cils-2d")->capture_default_str();
        c->add_option("--target", target, "ground_truth | prediction")->capture_default_str();
        c->add_option("--class", match_class, "Cohort class per sample in CILS modes: predicted | true")->capture_default_str();
        c->add_option("--explainer", explainer, "Explainer name recorded in reports")->capture_default_str();
        c->add_option("--dataset-name", dataset_name, "Dataset column of the CSV (default: data file stem)");
        c->add_option("--csv", csv, "Plot-data CSV path (default: <out>.csv)");
        c->add_option("--timeout", timeout)->capture_default_str();
        c->callback([this] { run(); });
    }

    void run() {
        if (mode != "implet" && mode != "cils-1d" && mode != "cils-2d") throw ConfigError("--mode must be implet, cils-1d or cils-2d");
        if (target != "ground_truth" && target != "prediction") throw ConfigError("--target must be ground_truth or prediction");
        if (match_class != "predicted" && match_class != "true") throw ConfigError("--class must be predicted or true");
        if (implets.empty()) throw ConfigError("--implets is required");
        if (mode != "implet" && cohort.empty()) throw ConfigError("--cohort is required in CILS modes");
        if (mode == "cils-2d" && attr.empty()) throw ConfigError("--attr is required in cils-2d mode");

        const std::uint64_t seed = resolve_seed(common.seed);
        const auto ds = load_ucr_tsv(data);
        const auto m = resolve_model(model, ds, seed, timeout);

        FaithfulnessOptions opt;
        opt.explainer_name = explainer;
        opt.removal = {parse_removal_kind(removal), multi, seed};
        opt.random_trials = random_trials;
        opt.target = target == "ground_truth" ? EvalTarget::ground_truth : EvalTarget::prediction;

        const auto implet_lists = group_by_sample(ds, read_implets(implets));
        std::vector<FaithfulnessReport> reports;
        if (mode == "implet") {
            reports.push_back(faithfulness_eval(m, ds, implet_lists, opt));
        } else {
            std::vector<CohortResult> cohorts;
            const json cj = read_json(cohort);
            try {
                for (const auto& c : cj.at("cohorts")) cohorts.push_back(cohort_from_json(c));
            } catch (const json::exception& e) {
                throw FormatError("malformed cohort file " + cohort + ": " + e.what());
            }
            const auto pred = m.predict(ds.samples);
            const std::vector<int>& cls = match_class == "predicted" ? pred : ds.labels;
            const CilsMode cm = mode == "cils-1d" ? CilsMode::values_only : CilsMode::values_and_attr;
            std::vector<AttributionSeries> attrs;
            std::vector<const AttributionSeries*> ptrs(ds.size(), nullptr);
            if (!attr.empty()) {
                attrs = load_attributions(attr, ds);
                for (std::size_t i = 0; i < ds.size(); ++i)
                    for (const auto& a : attrs)
                        if (a.sample_id == ds.samples[i].id) ptrs[i] = &a;
            }
            const auto segs = match_cils(cohorts, ds, cls, cm, ptrs);
            FaithfulnessOptions cils_opt = opt;
            cils_opt.explainer_name = explainer + "/" + mode;
            reports.push_back(faithfulness_eval_segments(m, ds, segs, cils_opt));
            FaithfulnessOptions base_opt = opt;
            base_opt.explainer_name = explainer + "/implet";
            reports.push_back(faithfulness_eval(m, ds, implet_lists, base_opt));
        }

        ResolvedConfig cfg;
        cfg.set("data", data);
        cfg.set("model", model);
        cfg.set("implets", implets);
        if (!cohort.empty()) cfg.set("cohort", cohort);
        if (!attr.empty()) cfg.set("attr", attr);
        cfg.set("removal", removal);
        cfg.set_flag("multi", multi);
        cfg.set("random-trials", random_trials);
        cfg.set("mode", mode);
        cfg.set("target", target);
        cfg.set("class", match_class);
        cfg.set("explainer", explainer);
        const std::string name = dataset_name.empty() ? std::filesystem::path(data).stem().string() : dataset_name;
        cfg.set("dataset-name", name);
        cfg.set("timeout", timeout);
        cfg.set("seed", seed);
        json j = header("eval", seed, cfg);
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(report_to_json(r));
        j["reports"] = std::move(arr);
        write_json(common.out, j);

        const std::string csv_path = csv.empty() ? common.out + ".csv" : csv;
        std::ofstream os(csv_path);
        if (!os) throw ConfigError("cannot write " + csv_path);
        write_plot_csv(os, name, reports);
        for (const auto& r : reports)
            std::cout << r.explainer_name << ": drop_identified=" << r.drop_identified << " drop_random=" << r.drop_random
                      << " delta=" << r.delta << '\n';
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"implet: subsequence explanations for time-series classifiers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(implet::version));

    SynthCmd synth;
    TrainCmd train;
    AttributeCmd attribute;
    ExtractCmd extract;
    ClusterCmd cluster;
    EvalCmd eval;
    synth.add(app);
    train.add(app);
    attribute.add(app);
    extract.add(app);
    cluster.add(app);
    eval.add(app);

    // Thread caps apply before any subcommand callback runs.
    app.parse_complete_callback([&] {
        for (unsigned t : {synth.common.threads, train.common.threads, attribute.common.threads, extract.common.threads,
                           cluster.common.threads, eval.common.threads})
            if (t) implet::set_max_threads(t);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    } catch (const implet::ProtocolError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_protocol;
    } catch (const implet::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return exit_internal;
    }
    return 0;
}
