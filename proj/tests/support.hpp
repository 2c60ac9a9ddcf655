#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "implet/implet.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("implet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

inline implet::TimeSeries series(std::vector<double> v, std::size_t id = 0) { return {std::move(v), id}; }

inline implet::MultiSeq random_multiseq(std::mt19937_64& rng, std::size_t channels, std::size_t len) {
    return implet::MultiSeq(channels, random_vector(rng, channels * len, -2.0, 2.0));
}

/// Top-down memoized DTW recursion with weighted squared per-point cost.
inline double dtw_oracle(const implet::MultiSeq& a, const implet::MultiSeq& b, std::vector<double> w = {}) {
    const std::size_t n = a.length(), m = b.length(), c = a.channels();
    if (w.empty()) w.assign(c, 1.0);
    std::vector<double> memo(n * m, -1.0);
    std::function<double(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) -> double {
        double& slot = memo[i * m + j];
        if (slot >= 0.0) return slot;
        double cost = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double d = a.at(i, ch) - b.at(j, ch);
            cost += w[ch] * d * d;
        }
        double best;
        if (i == 0 && j == 0) best = 0.0;
        else if (i == 0) best = rec(0, j - 1);
        else if (j == 0) best = rec(i - 1, 0);
        else best = std::min({rec(i - 1, j - 1), rec(i - 1, j), rec(i, j - 1)});
        return slot = cost + best;
    };
    return rec(n - 1, m - 1);
}

/// Linear dataset: class 0 constant -1, class 1 constant +1.
inline implet::LabeledDataset constant_two_class(std::size_t per_class, std::size_t T) {
    implet::LabeledDataset ds;
    ds.n_classes = 2;
    ds.class_values = {0.0, 1.0};
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const int label = static_cast<int>(i % 2);
        ds.samples.push_back({std::vector<double>(T, label ? 1.0 : -1.0), i});
        ds.labels.push_back(label);
    }
    return ds;
}

/// Two-motif implet set: `per_motif` near-copies of a rising ramp and of a
/// high plateau, inter/intra DTW ratio far above 100.
inline std::vector<implet::Implet> two_motif_implets(std::size_t per_motif, std::uint64_t seed, std::vector<int>* truth = nullptr) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 0.01);
    std::vector<implet::Implet> out;
    const std::size_t len = 10;
    for (std::size_t k = 0; k < 2 * per_motif; ++k) {
        const int motif = static_cast<int>(k % 2);
        implet::Implet im;
        im.sample_id = k;
        im.class_id = 1;
        im.l = 3;
        im.r = 3 + len - 1;
        for (std::size_t t = 0; t < len; ++t) {
            const double v = motif == 0 ? static_cast<double>(t) * 0.2 : 10.0;
            im.values.push_back(v + jitter(rng));
            im.attributions.push_back((motif == 0 ? 1.0 : 3.0) + jitter(rng));
        }
        im.score = 1.0;
        out.push_back(std::move(im));
        if (truth) truth->push_back(motif);
    }
    return out;
}

inline double purity(const std::vector<int>& assignment, const std::vector<int>& truth) {
    std::map<std::pair<int, int>, std::size_t> counts;
    std::map<int, std::size_t> cluster_sizes;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        ++counts[{assignment[i], truth[i]}];
        ++cluster_sizes[assignment[i]];
    }
    std::size_t hit = 0;
    for (const auto& [c, size] : cluster_sizes) {
        std::size_t best = 0;
        for (const auto& [key, n] : counts)
            if (key.first == c) best = std::max(best, n);
        hit += best;
    }
    return assignment.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(assignment.size());
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

/// Runs a shell command, capturing stdout and stderr.
inline CommandResult run_command(const std::string& cmd) {
    CommandResult res;
    FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return res;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) res.output += buf.data();
    const int status = ::pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

}  // namespace testing_support
