#include "epg/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "epg/error.hpp"

namespace epg::preprocess {

namespace {

// Median of a sorted, non-empty range (mean of the middle pair when even).
double sorted_median(const std::vector<double>& v)
{
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// k-th smallest (0-based) of |v - m| for sorted v, by merging the two
// monotone sequences on either side of m.
double kth_abs_deviation(const std::vector<double>& v, double m, std::size_t k)
{
    const auto split = std::lower_bound(v.begin(), v.end(), m) - v.begin();
    std::ptrdiff_t left = split - 1;
    std::ptrdiff_t right = split;
    const auto n = static_cast<std::ptrdiff_t>(v.size());
    double cur = 0.0;
    for (std::size_t taken = 0; taken <= k; ++taken) {
        const double dl = left >= 0 ? m - v[static_cast<std::size_t>(left)] : INFINITY;
        const double dr = right < n ? v[static_cast<std::size_t>(right)] - m : INFINITY;
        if (dl <= dr) {
            cur = dl;
            --left;
        } else {
            cur = dr;
            ++right;
        }
    }
    return cur;
}

double sorted_mad(const std::vector<double>& v, double m)
{
    const std::size_t n = v.size();
    if (n % 2) return kth_abs_deviation(v, m, n / 2);
    return 0.5 * (kth_abs_deviation(v, m, n / 2 - 1) + kth_abs_deviation(v, m, n / 2));
}

int sign(double v) { return (v > 0) - (v < 0); }

double edge_slope(double h0, double h1, double d0, double d1)
{
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (sign(d) != sign(d0))
        d = 0.0;
    else if (sign(d0) != sign(d1) && std::abs(d) > 3.0 * std::abs(d0))
        d = 3.0 * d0;
    return d;
}

}  // namespace

void OutlierConfig::validate() const
{
    if (window < 3) throw ConfigError("outlier window must be >= 3");
    if (!(mad_scale > 0.0)) throw ConfigError("outlier mad_scale must be > 0");
}

int DiscardPolicy::max_missing(int window_length) const
{
    return static_cast<int>(std::floor(max_missing_fraction * window_length + 1e-9));
}

void DiscardPolicy::validate() const
{
    if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0))
        throw ConfigError("max_missing_fraction must be in [0, 1]");
}

std::vector<bool> detect_outliers(std::span<const float> signal, const OutlierConfig& cfg)
{
    cfg.validate();
    const auto n = static_cast<std::ptrdiff_t>(signal.size());
    if (n < cfg.window)
        throw ValidationError("signal length " + std::to_string(n) + " is shorter than the outlier window");
    const std::ptrdiff_t before = cfg.window / 2;
    const std::ptrdiff_t after = (cfg.window - 1) / 2;
    const double threshold_scale = cfg.mad_scale * kMadToSigma;

    std::vector<bool> mask(signal.size(), false);
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(cfg.window));
    auto insert = [&](std::ptrdiff_t j) {
        const float v = signal[static_cast<std::size_t>(j)];
        if (std::isnan(v)) return;
        window.insert(std::upper_bound(window.begin(), window.end(), double(v)), double(v));
    };
    auto erase = [&](std::ptrdiff_t j) {
        const float v = signal[static_cast<std::size_t>(j)];
        if (std::isnan(v)) return;
        window.erase(std::lower_bound(window.begin(), window.end(), double(v)));
    };

    for (std::ptrdiff_t j = 0; j <= std::min(after, n - 1); ++j) insert(j);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (i > 0) {
            if (i - 1 - before >= 0) erase(i - 1 - before);
            if (i + after < n) insert(i + after);
        }
        const float x = signal[static_cast<std::size_t>(i)];
        if (std::isnan(x) || window.empty()) continue;
        const double med = sorted_median(window);
        const double mad = sorted_mad(window, med);
        mask[static_cast<std::size_t>(i)] = std::abs(double(x) - med) > threshold_scale * mad;
    }
    return mask;
}

std::vector<float> pchip_fill(std::span<const float> signal, const std::vector<bool>& replace_mask)
{
    const std::size_t n = signal.size();
    if (!replace_mask.empty() && replace_mask.size() != n)
        throw DimensionError("pchip_fill: mask length differs from signal length");
    std::vector<std::size_t> anchors;
    anchors.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isnan(signal[i]) && (replace_mask.empty() || !replace_mask[i])) anchors.push_back(i);

    std::vector<float> out(signal.begin(), signal.end());
    if (anchors.size() == n) return out;
    if (anchors.size() < 2) throw ValidationError("pchip_fill: insufficient anchors");

    const std::size_t m = anchors.size();
    std::vector<double> h(m - 1), delta(m - 1), slope(m);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        h[k] = static_cast<double>(anchors[k + 1] - anchors[k]);
        delta[k] = (double(signal[anchors[k + 1]]) - double(signal[anchors[k]])) / h[k];
    }
    if (m == 2) {
        slope[0] = slope[1] = delta[0];
    } else {
        for (std::size_t k = 1; k + 1 < m; ++k) {
            if (sign(delta[k - 1]) * sign(delta[k]) <= 0) {
                slope[k] = 0.0;
            } else {
                const double w1 = 2.0 * h[k] + h[k - 1];
                const double w2 = h[k] + 2.0 * h[k - 1];
                slope[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        slope[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
        slope[m - 1] = edge_slope(h[m - 2], h[m - 3], delta[m - 2], delta[m - 3]);
    }

    for (std::size_t i = 0; i < anchors.front(); ++i) out[i] = signal[anchors.front()];
    for (std::size_t i = anchors.back() + 1; i < n; ++i) out[i] = signal[anchors.back()];
    for (std::size_t k = 0; k + 1 < m; ++k) {
        const std::size_t a = anchors[k], b = anchors[k + 1];
        if (b - a < 2) continue;
        const double y0 = signal[a], y1 = signal[b], hk = h[k];
        for (std::size_t i = a + 1; i < b; ++i) {
            const double s = static_cast<double>(i - a) / hk;
            const double s2 = s * s, s3 = s2 * s;
            const double v = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * hk * slope[k] +
                             (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * hk * slope[k + 1];
            out[i] = static_cast<float>(v);
        }
    }
    return out;
}

SegmentationResult segment(const Recording& recording, const DiscardPolicy& policy,
                           const std::vector<bool>& outlier_mask)
{
    policy.validate();
    if (recording.sample_rate_hz != kSampleRateHz)
        throw ValidationError("recording '" + recording.subject_id + "': sample rate " +
                              std::to_string(recording.sample_rate_hz) + " Hz, expected " +
                              std::to_string(kSampleRateHz));
    if (!outlier_mask.empty() && outlier_mask.size() != recording.samples.size())
        throw DimensionError("outlier mask length differs from recording length");

    SegmentationResult res;
    const std::size_t windows = recording.samples.size() / kSegmentLength;
    const int max_missing = policy.max_missing();
    std::vector<bool> mask(kSegmentLength);
    for (std::size_t w = 0; w < windows; ++w) {
        const std::size_t off = w * kSegmentLength;
        const std::span<const float> values(recording.samples.data() + off, kSegmentLength);
        const auto missing = std::count_if(values.begin(), values.end(), [](float v) { return std::isnan(v); });
        if (missing > max_missing) {
            ++res.discarded;
            continue;
        }
        const double start = static_cast<double>(off) / kSampleRateHz;
        const Phase phase = recording.phase_at(start);
        if (!is_class(phase)) {
            ++res.unlabeled;
            continue;
        }
        bool any_outlier = false;
        for (int i = 0; i < kSegmentLength; ++i) {
            mask[static_cast<std::size_t>(i)] = !outlier_mask.empty() && outlier_mask[off + static_cast<std::size_t>(i)];
            any_outlier = any_outlier || mask[static_cast<std::size_t>(i)];
            res.outliers_replaced += mask[static_cast<std::size_t>(i)];
        }
        Segment s;
        s.values = (missing > 0 || any_outlier) ? pchip_fill(values, mask)
                                                : std::vector<float>(values.begin(), values.end());
        s.label = phase;
        s.subject_id = recording.subject_id;
        s.start_time_s = start;
        res.kept.push_back(std::move(s));
    }
    return res;
}

SegmentationResult preprocess_recording(const Recording& recording, const OutlierConfig& outliers,
                                        const DiscardPolicy& policy)
{
    const auto mask = detect_outliers(recording.samples, outliers);
    return segment(recording, policy, mask);
}

}  // namespace epg::preprocess
