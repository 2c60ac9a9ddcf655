#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "implet/core.hpp"
#include "implet/error.hpp"
#include "implet/rng.hpp"

namespace implet {

/// Closed 1-based interval [l, r].
struct Interval {
    std::size_t l = 0;
    std::size_t r = 0;

    std::size_t length() const noexcept { return r - l + 1; }
    bool overlaps(const Interval& o) const noexcept { return l <= o.r && o.l <= r; }
    bool operator==(const Interval&) const = default;
};

namespace detail {
inline void check_interval(std::size_t T, Interval iv) {
    if (iv.l < 1 || iv.l > iv.r || iv.r > T)
        throw IndexError("interval [" + std::to_string(iv.l) + ", " + std::to_string(iv.r) + "] outside [1, " +
                         std::to_string(T) + "]");
}
}  // namespace detail

/// Number of random interior control points for a removed stretch of length L.
constexpr std::size_t control_point_count(std::size_t L) noexcept {
    const std::size_t tenth = (L + 9) / 10;
    return tenth > 2 ? tenth : 2;
}

/// Replacement curve through the removed stretch: passes through the two
/// endpoint values and every control point, with prescribed endpoint slopes.
/// With at most 12 constraints it is the single Hermite interpolating
/// polynomial; otherwise a C1 piecewise cubic Hermite whose interior slopes
/// are centered differences of the knot values.
class ReplacementCurve {
public:
    static constexpr std::size_t max_global_constraints = 12;

    ReplacementCurve(std::vector<double> knots, std::vector<double> values, double slope_left, double slope_right)
        : t_(std::move(knots)), y_(std::move(values)), d0_(slope_left), d1_(slope_right) {
        const std::size_t n = t_.size();
        if (n < 2 || y_.size() != n) throw ShapeError("replacement curve needs matching knots and values");
        global_ = n + 2 <= max_global_constraints;
        if (global_) build_global();
        else build_piecewise();
    }

    bool is_global_polynomial() const noexcept { return global_; }
    const std::vector<double>& knots() const noexcept { return t_; }
    const std::vector<double>& knot_values() const noexcept { return y_; }

    double value(double t) const { return global_ ? eval_global(t).first : eval_piecewise(t).first; }
    double derivative(double t) const { return global_ ? eval_global(t).second : eval_piecewise(t).second; }

private:
    // Confluent divided differences on s = (t - t0) / span; endpoints are doubled nodes.
    void build_global() {
        const double span = t_.back() - t_.front();
        const std::size_t n = t_.size();
        z_.clear();
        std::vector<double> f;
        for (std::size_t k = 0; k < n; ++k) {
            const double s = (t_[k] - t_.front()) / span;
            const int reps = (k == 0 || k + 1 == n) ? 2 : 1;
            for (int r = 0; r < reps; ++r) {
                z_.push_back(s);
                f.push_back(y_[k]);
            }
        }
        const std::size_t m = z_.size();
        // Scaled first derivatives dy/ds at the doubled endpoints.
        const double ds0 = d0_ * span;
        const double ds1 = d1_ * span;
        coef_.assign(m, 0.0);
        coef_[0] = f[0];
        std::vector<double> col = f;
        for (std::size_t order = 1; order < m; ++order) {
            std::vector<double> next(m - order);
            for (std::size_t i = 0; i + order < m; ++i) {
                const double dz = z_[i + order] - z_[i];
                if (dz == 0.0) next[i] = (i == 0) ? ds0 : ds1;
                else next[i] = (col[i + 1] - col[i]) / dz;
            }
            col = std::move(next);
            coef_[order] = col[0];
        }
        span_ = span;
    }

    std::pair<double, double> eval_global(double t) const {
        const double s = (t - t_.front()) / span_;
        double p = coef_.back();
        double dp = 0.0;
        for (std::size_t k = coef_.size() - 1; k-- > 0;) {
            dp = dp * (s - z_[k]) + p;
            p = p * (s - z_[k]) + coef_[k];
        }
        return {p, dp / span_};
    }

    void build_piecewise() {
        const std::size_t n = t_.size();
        m_.assign(n, 0.0);
        m_.front() = d0_;
        m_.back() = d1_;
        for (std::size_t k = 1; k + 1 < n; ++k) m_[k] = (y_[k + 1] - y_[k - 1]) / (t_[k + 1] - t_[k - 1]);
    }

    std::pair<double, double> eval_piecewise(double t) const {
        std::size_t k = 0;
        while (k + 2 < t_.size() && t > t_[k + 1]) ++k;
        const double h = t_[k + 1] - t_[k];
        const double u = (t - t_[k]) / h;
        const double u2 = u * u;
        const double u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u, h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
        const double v = h00 * y_[k] + h10 * h * m_[k] + h01 * y_[k + 1] + h11 * h * m_[k + 1];
        const double dh00 = 6 * u2 - 6 * u, dh10 = 3 * u2 - 4 * u + 1, dh01 = -6 * u2 + 6 * u, dh11 = 3 * u2 - 2 * u;
        const double dv = (dh00 * y_[k] + dh01 * y_[k + 1]) / h + dh10 * m_[k] + dh11 * m_[k + 1];
        return {v, dv};
    }

    std::vector<double> t_, y_;
    double d0_, d1_;
    bool global_ = false;
    std::vector<double> z_, coef_;
    double span_ = 1.0;
    std::vector<double> m_;
};

struct SmoothRemoval {
    TimeSeries series;
    ReplacementCurve curve;
    std::vector<double> control_positions;  // 1-based, strictly inside (l, r)
    std::vector<double> control_values;
    double slope_left = 0.0;
    double slope_right = 0.0;
};

/// Smooth removal of [l, r] with full detail. Control values are drawn i.i.d.
/// normal with the mean and population std of `reference` (the original sample).
inline SmoothRemoval smooth_removal_detailed(const TimeSeries& x, Interval iv, std::uint64_t seed,
                                             const TimeSeries& reference) {
    const std::size_t T = x.size();
    detail::check_interval(T, iv);
    const std::size_t L = iv.length();
    if (L < 2) throw DegenerateError("smooth removal needs at least 2 points, got L=" + std::to_string(L));

    const auto& v = x.values;
    auto at = [&](std::size_t i) { return v[i - 1]; };
    const double slope_left = iv.l > 1 ? at(iv.l) - at(iv.l - 1) : at(iv.l + 1) - at(iv.l);
    const double slope_right = iv.r < T ? at(iv.r + 1) - at(iv.r) : at(iv.r) - at(iv.r - 1);

    const std::size_t nc = control_point_count(L);
    const double mu = mean_of(reference.values);
    const double sd = stddev_of(reference.values, mu);
    Rng rng(seed);
    std::normal_distribution<double> draw(0.0, 1.0);

    std::vector<double> knots{static_cast<double>(iv.l)};
    std::vector<double> values{at(iv.l)};
    std::vector<double> cpos, cval;
    const double span = static_cast<double>(iv.r - iv.l);
    for (std::size_t k = 1; k <= nc; ++k) {
        const double pos = static_cast<double>(iv.l) + span * static_cast<double>(k) / static_cast<double>(nc + 1);
        const double val = mu + sd * draw(rng);
        cpos.push_back(pos);
        cval.push_back(val);
        knots.push_back(pos);
        values.push_back(val);
    }
    knots.push_back(static_cast<double>(iv.r));
    values.push_back(at(iv.r));

    ReplacementCurve curve(std::move(knots), std::move(values), slope_left, slope_right);
    TimeSeries out = x;
    for (std::size_t t = iv.l + 1; t < iv.r; ++t) out.values[t - 1] = curve.value(static_cast<double>(t));
    return {std::move(out), std::move(curve), std::move(cpos), std::move(cval), slope_left, slope_right};
}

/// Replaces [l, r] (1-based) by a random smooth curve matching the endpoint
/// values and slopes; everything outside the interval is left untouched.
inline TimeSeries smooth_removal(const TimeSeries& x, std::size_t l, std::size_t r, std::uint64_t seed) {
    return smooth_removal_detailed(x, {l, r}, seed, x).series;
}

/// Fills [l, r] with `fill`.
inline TimeSeries fill_interval(const TimeSeries& x, Interval iv, double fill) {
    detail::check_interval(x.size(), iv);
    TimeSeries out = x;
    for (std::size_t t = iv.l; t <= iv.r; ++t) out.values[t - 1] = fill;
    return out;
}

/// Fills [l, r] with the mean of the whole sample.
inline TimeSeries mean_fill_removal(const TimeSeries& x, std::size_t l, std::size_t r) {
    return fill_interval(x, {l, r}, mean_of(x.values));
}

/// Uniformly random interval of length L within [1, T].
inline Interval random_interval(std::size_t T, std::size_t L, std::uint64_t seed) {
    if (L < 1 || L > T) throw IndexError("interval length " + std::to_string(L) + " invalid for T=" + std::to_string(T));
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> start(1, T - L + 1);
    const std::size_t l = start(rng);
    return {l, l + L - 1};
}

enum class RemovalKind { smooth_poly, mean_fill, none };

inline std::string to_string(RemovalKind k) {
    switch (k) {
        case RemovalKind::smooth_poly: return "smooth";
        case RemovalKind::mean_fill: return "mean";
        case RemovalKind::none: return "none";
    }
    return "none";
}

inline RemovalKind parse_removal_kind(const std::string& s) {
    if (s == "smooth" || s == "smooth_poly") return RemovalKind::smooth_poly;
    if (s == "mean" || s == "mean_fill") return RemovalKind::mean_fill;
    if (s == "none") return RemovalKind::none;
    throw ConfigError("unknown removal '" + s + "'");
}

struct RemovalSpec {
    RemovalKind kind = RemovalKind::smooth_poly;
    bool multi = false;
    std::uint64_t seed = 0;
};

/// Applies one removal to `x`. Statistics (fill mean, control-point
/// distribution) come from `reference`, the unperturbed sample. Length-1
/// intervals fall back to mean fill under smooth removal.
inline TimeSeries apply_removal(const TimeSeries& x, Interval iv, RemovalKind kind, std::uint64_t seed,
                                const TimeSeries& reference) {
    detail::check_interval(x.size(), iv);
    switch (kind) {
        case RemovalKind::none: return x;
        case RemovalKind::mean_fill: return fill_interval(x, iv, mean_of(reference.values));
        case RemovalKind::smooth_poly:
            if (iv.length() < 2) return fill_interval(x, iv, mean_of(reference.values));
            return smooth_removal_detailed(x, iv, seed, reference).series;
    }
    return x;
}

}  // namespace implet
