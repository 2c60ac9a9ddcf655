#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

using namespace implet;
using namespace testing_support;
using nlohmann::json;

namespace {

const std::string cli = quote(IMPLET_CLI_PATH);

CommandResult run(const std::string& args) { return run_command(cli + " " + args); }

json load(const std::string& path) { return json::parse(read_file(path)); }

void save(const std::string& path, const json& j) {
    std::ofstream out(path);
    out << j.dump();
}

/// Replays a command from the argv embedded in its output and compares bytes.
void expect_replay(const std::string& out_path, const std::string& extra_out_flag = "--out") {
    const json j = load(out_path);
    std::string args = j.at("command").get<std::string>();
    for (const auto& a : j.at("argv")) args += " " + quote(a.get<std::string>());
    const std::string replay = out_path + ".replay";
    const auto r = run(args + " " + extra_out_flag + " " + quote(replay));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(read_file(replay), read_file(out_path)) << "replay of " << out_path << " differs";
}

class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir = new TempDir();
        auto r = run("synth --n-per-class 30 --length 60 --center 30 --width 3 --seed 4 --out " + quote(f("d.tsv")));
        ASSERT_EQ(r.exit_code, 0) << r.output;
        r = run("train --data " + quote(f("d.tsv")) + " --seed 1 --out " + quote(f("m.json")));
        ASSERT_EQ(r.exit_code, 0) << r.output;
        r = run("attribute --data " + quote(f("d.tsv")) + " --model file:" + quote(f("m.json")) + " --out " + quote(f("a.json")));
        ASSERT_EQ(r.exit_code, 0) << r.output;
        r = run("extract --data " + quote(f("d.tsv")) + " --attr " + quote(f("a.json")) + " --len-max 12 --out " + quote(f("i.json")));
        ASSERT_EQ(r.exit_code, 0) << r.output;
        r = run("cluster --implets " + quote(f("i.json")) + " --k-max 3 --repeats 2 --seed 2 --out " + quote(f("c.json")));
        ASSERT_EQ(r.exit_code, 0) << r.output;
    }
    static void TearDownTestSuite() {
        delete dir;
        dir = nullptr;
    }
    static std::string f(const std::string& name) { return dir->file(name); }
    static TempDir* dir;
};

TempDir* CliPipeline::dir = nullptr;

}  // namespace

TEST_F(CliPipeline, OutputsEmbedConfigAndSeed) {
    for (const char* name : {"m.json", "a.json", "i.json", "c.json"}) {
        const auto j = load(f(name));
        EXPECT_EQ(j.at("tool"), "implet");
        EXPECT_EQ(j.at("version"), implet::version);
        EXPECT_TRUE(j.contains("seed"));
        EXPECT_TRUE(j.at("config").is_object());
    }
    const auto meta = load(f("d.tsv.meta.json"));
    EXPECT_EQ(meta.at("metadata").at("n_bump"), 30);
}

TEST_F(CliPipeline, DefaultsAreRecorded) {
    const auto cfg = load(f("i.json")).at("config");
    EXPECT_EQ(cfg.at("lambda"), 0.1);
    EXPECT_EQ(cfg.at("phi"), 1.0);
    EXPECT_EQ(cfg.at("len-min"), 3);
    EXPECT_EQ(cfg.at("scoring"), "sum");
    const auto acfg = load(f("a.json")).at("config");
    EXPECT_EQ(acfg.at("window"), 3);
    EXPECT_EQ(acfg.at("method"), "occlusion");
}

TEST_F(CliPipeline, EveryCommandReplaysByteForByte) {
    auto r = run("eval --data " + quote(f("d.tsv")) + " --model file:" + quote(f("m.json")) + " --implets " +
                 quote(f("i.json")) + " --random-trials 3 --out " + quote(f("e.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    for (const char* name : {"m.json", "a.json", "i.json", "c.json", "e.json"}) expect_replay(f(name));
    expect_replay(f("d.tsv.meta.json"), "--out " + quote(f("d2.tsv")) + " --meta");
    EXPECT_EQ(read_file(f("d2.tsv")), read_file(f("d.tsv")));
}

TEST_F(CliPipeline, EvalMatchesLibrary) {
    auto r = run("eval --data " + quote(f("d.tsv")) + " --model file:" + quote(f("m.json")) + " --implets " +
                 quote(f("i.json")) + " --seed 6 --out " + quote(f("e6.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto ds = load_ucr_tsv(f("d.tsv"));
    const auto model = model_from_json(load(f("m.json")));
    std::vector<Implet> implets;
    const json implet_file = load(f("i.json"));
    for (const auto& e : implet_file.at("implets")) implets.push_back(implet_from_json(e));
    FaithfulnessOptions opt;
    opt.removal.seed = 6;
    const auto rep = faithfulness_eval(model, ds, group_by_sample(ds, implets), opt);
    const auto cli_rep = load(f("e6.json")).at("reports").at(0);
    EXPECT_NEAR(cli_rep.at("delta").get<double>(), rep.delta, 1e-12);
    EXPECT_NEAR(cli_rep.at("drop_identified").get<double>(), rep.drop_identified, 1e-12);
    const std::string csv = read_file(f("e6.json.csv"));
    EXPECT_EQ(csv.rfind("dataset,explainer,removal,drop_random,drop_identified,delta\nd,implet,smooth,", 0), 0u) << csv;
}

TEST_F(CliPipeline, RemovalNoneGivesZeroDelta) {
    for (const char* mode : {"implet", "cils-1d"}) {
        auto r = run("eval --data " + quote(f("d.tsv")) + " --model file:" + quote(f("m.json")) + " --implets " +
                     quote(f("i.json")) + " --cohort " + quote(f("c.json")) + " --removal none --mode " + mode +
                     " --out " + quote(f("none.json")));
        ASSERT_EQ(r.exit_code, 0) << r.output;
        const json out = load(f("none.json"));
        for (const auto& rep : out.at("reports")) EXPECT_EQ(rep.at("delta").get<double>(), 0.0);
    }
}

TEST_F(CliPipeline, CilsModesProducePairedReports) {
    for (const char* mode : {"cils-1d", "cils-2d"}) {
        auto r = run("eval --data " + quote(f("d.tsv")) + " --model file:" + quote(f("m.json")) + " --implets " +
                     quote(f("i.json")) + " --cohort " + quote(f("c.json")) + " --attr " + quote(f("a.json")) +
                     " --random-trials 2 --mode " + mode + " --out " + quote(f("cils.json")));
        ASSERT_EQ(r.exit_code, 0) << r.output;
        const auto reports = load(f("cils.json")).at("reports");
        ASSERT_EQ(reports.size(), 2u);
        EXPECT_EQ(reports[0].at("explainer_name"), std::string("implet/") + mode);
        EXPECT_EQ(reports[1].at("explainer_name"), "implet/implet");
        EXPECT_GT(reports[0].at("n_segments_removed").get<int>(), 0);
    }
    auto r = run("eval --data " + quote(f("d.tsv")) + " --implets " + quote(f("i.json")) + " --cohort " + quote(f("c.json")) +
                 " --mode cils-2d --out " + quote(f("x.json")));
    EXPECT_EQ(r.exit_code, 2);
}

TEST_F(CliPipeline, SaliencyAttributionFeedsExtract) {
    auto r = run("attribute --data " + quote(f("d.tsv")) + " --model file:" + quote(f("m.json")) +
                 " --method saliency_linear --out " + quote(f("s.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    r = run("extract --data " + quote(f("d.tsv")) + " --attr " + quote(f("s.json")) + " --out " + quote(f("si.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("implets:"), std::string::npos);
}

TEST_F(CliPipeline, ExternalModelMatchesBuiltin) {
    const std::string exec = "exec:" + std::string(FAKE_ADAPTER_PATH) + " linear " + f("m.json");
    auto r = run("attribute --data " + quote(f("d.tsv")) + " --model " + quote(exec) + " --out " + quote(f("ax.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto a = load(f("a.json")).at("entries");
    const auto b = load(f("ax.json")).at("entries");
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].at("class"), b[i].at("class"));
        const auto va = a[i].at("attributions").get<std::vector<double>>();
        const auto vb = b[i].at("attributions").get<std::vector<double>>();
        for (std::size_t t = 0; t < va.size(); ++t) EXPECT_NEAR(va[t], vb[t], 1e-6);
    }
}

TEST(Cli, ExitCodes) {
    TempDir dir;
    auto r = run("synth --n-per-class 5 --length 40 --center 20 --width 3 --out " + quote(dir.file("d.tsv")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    r = run("attribute --data " + quote(dir.file("d.tsv")) + " --method bogus --out " + quote(dir.file("a.json")));
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find("bogus"), std::string::npos);
    r = run("attribute --data " + quote(dir.file("d.tsv")) + " --model " +
            quote("exec:" + std::string(FAKE_ADAPTER_PATH) + " malformed") + " --out " + quote(dir.file("a.json")));
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.output.find("'this is not json'"), std::string::npos) << r.output;
    r = run("attribute --data " + quote(dir.file("missing.tsv")) + " --out " + quote(dir.file("a.json")));
    EXPECT_EQ(r.exit_code, 2);
    r = run("extract --data " + quote(dir.file("d.tsv")));
    EXPECT_EQ(r.exit_code, 2);
    r = run("frobnicate");
    EXPECT_EQ(r.exit_code, 2);
    r = run("train --data " + quote(dir.file("d.tsv")) + " --kind forest --out " + quote(dir.file("m.json")));
    EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, SeedFromEnvironment) {
    TempDir dir;
    auto r = run_command("IMPLET_SEED=42 " + cli + " synth --n-per-class 2 --length 30 --center 15 --width 3 --out " +
                         quote(dir.file("d.tsv")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(load(dir.file("d.tsv.meta.json")).at("seed"), 42);
}

TEST(Cli, ExtractFixtures) {
    TempDir dir;
    LabeledDataset ds;
    ds.n_classes = 2;
    ds.class_values = {0, 1};
    ds.samples = {series(std::vector<double>(20, 1.0), 0), series(std::vector<double>(20, 2.0), 1)};
    ds.labels = {0, 1};
    write_ucr_tsv(ds, dir.file("d.tsv"));

    save(dir.file("zero.json"), attributions_to_json("file", {{0, 0, std::vector<double>(20, 0.0)}}));
    auto r = run("extract --data " + quote(dir.file("d.tsv")) + " --attr " + quote(dir.file("zero.json")) + " --out " +
                 quote(dir.file("z.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_TRUE(load(dir.file("z.json")).at("implets").empty());

    // Raw scores whose z-normalization has its maximum at step 5.
    std::vector<double> spike(20, 0.0);
    spike[4] = 1.0;
    save(dir.file("spike.json"), attributions_to_json("file", {{1, 1, spike}}));
    r = run("extract --data " + quote(dir.file("d.tsv")) + " --attr " + quote(dir.file("spike.json")) +
            " --len-max 10 --out " + quote(dir.file("s.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto implets = load(dir.file("s.json")).at("implets");
    ASSERT_EQ(implets.size(), 1u);
    EXPECT_EQ(implets[0].at("l"), 5);
    EXPECT_EQ(implets[0].at("r"), 14);
    EXPECT_EQ(implets[0].at("sample_id"), 1);
}

TEST(Cli, ClusterFixtures) {
    TempDir dir;
    json two = json::array();
    for (const auto& im : two_motif_implets(10, 5)) two.push_back(implet_to_json(im));
    save(dir.file("two.json"), json{{"implets", two}});
    auto r = run("cluster --implets " + quote(dir.file("two.json")) + " --out " + quote(dir.file("c2.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(load(dir.file("c2.json")).at("cohorts").at(0).at("k_star"), 2);
    expect_replay(dir.file("c2.json"));

    save(dir.file("one.json"), json{{"implets", json::array({two[0]})}});
    r = run("cluster --implets " + quote(dir.file("one.json")) + " --out " + quote(dir.file("c1.json")));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(load(dir.file("c1.json")).at("cohorts").at(0).at("k_star"), 1);

    save(dir.file("none.json"), json{{"implets", json::array()}});
    r = run("cluster --implets " + quote(dir.file("none.json")) + " --out " + quote(dir.file("c0.json")));
    EXPECT_EQ(r.exit_code, 2);
}
