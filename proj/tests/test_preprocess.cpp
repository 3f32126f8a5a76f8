#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "epg/error.hpp"
#include "epg/preprocess.hpp"
#include "epg/rng.hpp"

using namespace epg;
using namespace epg::preprocess;

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

// Direct per-position recomputation of the moving median / MAD rule.
std::vector<bool> outlier_oracle(const std::vector<float>& x, int w, double scale)
{
    const int n = static_cast<int>(x.size());
    std::vector<bool> out(x.size());
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const auto m = v.size();
        return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    };
    for (int i = 0; i < n; ++i) {
        if (std::isnan(x[i])) continue;
        std::vector<double> win;
        for (int j = std::max(0, i - w / 2); j <= std::min(n - 1, i + (w - 1) / 2); ++j)
            if (!std::isnan(x[j])) win.push_back(x[j]);
        const double med = median(win);
        std::vector<double> dev;
        for (double v : win) dev.push_back(std::abs(v - med));
        out[i] = std::abs(x[i] - med) > scale * 1.4826 * median(dev);
    }
    return out;
}

Recording make_recording(std::size_t n)
{
    Recording r;
    r.subject_id = "S";
    r.samples.resize(n);
    Rng rng(4);
    for (auto& v : r.samples) v = static_cast<float>(rng.normal(0, 10));
    r.phase_marks = {{0.0, Phase::Baseline}};
    return r;
}

std::vector<float> sinusoid(std::size_t n, double amp)
{
    std::vector<float> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * 2.0 * i / 512.0));
    return x;
}

}  // namespace

TEST_CASE("constant signal has no outliers; a single extreme point is the only flag")
{
    std::vector<float> x(100, 5.f);
    auto m = detect_outliers(x, {});
    CHECK(std::none_of(m.begin(), m.end(), [](bool b) { return b; }));
    x[40] = 1e6f;
    m = detect_outliers(x, {});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(m[i] == (i == 40));
}

TEST_CASE("injected spikes on a sinusoid are flagged exactly")
{
    auto x = sinusoid(4000, 50.0);
    Rng rng(11);
    std::set<std::size_t> injected;
    while (injected.size() < 10) injected.insert(100 + rng.below(3800));
    for (auto i : injected) x[i] = 1000.f;
    const auto m = detect_outliers(x, {});
    std::set<std::size_t> flagged;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i]) flagged.insert(i);
    CHECK(flagged.size() == injected.size());
    CHECK(flagged == injected);
}

TEST_CASE("sliding-window detector equals the direct oracle, with NaNs and odd windows")
{
    Rng rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        std::vector<float> x(700);
        for (auto& v : x) v = static_cast<float>(rng.normal(0, 1) + (rng.uniform() < 0.02 ? 8 : 0));
        for (int k = 0; k < 30; ++k) x[rng.below(700)] = kNaN;
        const int w = trial % 2 ? 7 : 50;
        const double scale = trial < 3 ? 3.0 : 2.0;
        CHECK(detect_outliers(x, {w, scale}) == outlier_oracle(x, w, scale));
    }
}

TEST_CASE("outlier flags are invariant to offset and positive scaling")
{
    Rng rng(6);
    std::vector<float> x(1000);
    // Values on a coarse grid keep offsets and scalings exact in float.
    for (auto& v : x) v = static_cast<float>(std::round(rng.normal(0, 8)) + (rng.uniform() < 0.01 ? 100 : 0));
    const auto base = detect_outliers(x, {});
    auto shifted = x, scaled = x;
    for (auto& v : shifted) v += 256.f;
    for (auto& v : scaled) v *= 4.f;
    CHECK(detect_outliers(shifted, {}) == base);
    CHECK(detect_outliers(scaled, {}) == base);
}

TEST_CASE("NaNs are never flagged and all-NaN windows stay unflagged")
{
    std::vector<float> x(120, kNaN);
    for (int i = 100; i < 120; ++i) x[i] = static_cast<float>(i % 3);
    const auto m = detect_outliers(x, {});
    for (int i = 0; i < 100; ++i) CHECK_FALSE(m[i]);
    CHECK_THROWS_AS(detect_outliers(std::vector<float>(10, 1.f), {}), ValidationError);
    CHECK_THROWS_AS(detect_outliers(x, {2, 3.0}), ConfigError);
}

TEST_CASE("pchip trivial cases")
{
    CHECK(pchip_fill(std::vector<float>{0.f, kNaN, 2.f}, {}) == std::vector<float>{0.f, 1.f, 2.f});
    CHECK(pchip_fill(std::vector<float>{1, 1, 1, 1}, {false, true, true, false}) == std::vector<float>{1, 1, 1, 1});
    CHECK(pchip_fill(std::vector<float>{kNaN, 3.f, kNaN, 5.f, kNaN}, {}) == std::vector<float>{3, 3, 4, 5, 5});
    try {
        pchip_fill(std::vector<float>{kNaN, 1.f, kNaN}, {});
        FAIL("expected error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("insufficient anchors") != std::string::npos);
    }
}

TEST_CASE("pchip matches frozen reference interpolant values")
{
    // Reference: scipy.interpolate.PchipInterpolator through the anchors,
    // evaluated at the gaps, rounded to float.
    const std::vector<float> x{0.0f, 1.5f, 2.0f, kNaN, kNaN, -1.0f, -0.5f, kNaN, 3.0f, 3.2f, kNaN, kNaN, kNaN, 0.5f, 0.7f};
    std::vector<bool> mask(x.size());
    mask[9] = true;
    const std::vector<float> expected{0.0f, 1.5f, 2.0f, 1.2222222089767456f, -0.2222222238779068f, -1.0f, -0.5f,
                                      1.4331395626068115f, 3.0f, 2.740000009536743f, 2.119999885559082f,
                                      1.3799999952316284f, 0.7599999904632568f, 0.5f, 0.699999988079071f};
    const auto y = pchip_fill(x, mask);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-6));
}

TEST_CASE("pchip keeps anchors and never overshoots between monotone anchors")
{
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> x(60);
        float level = 0;
        for (auto& v : x) v = level += static_cast<float>(rng.uniform(0, 3));
        const auto orig = x;
        std::vector<bool> mask(x.size());
        for (std::size_t i = 1; i + 1 < x.size(); ++i) mask[i] = rng.uniform() < 0.4;
        for (int k = 0; k < 5; ++k) x[1 + rng.below(58)] = kNaN;
        const auto y = pchip_fill(x, mask);
        std::size_t prev = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool anchor = !mask[i] && !std::isnan(x[i]);
            if (!anchor) continue;
            CHECK(y[i] == orig[i]);
            for (std::size_t j = prev + 1; j < i; ++j) {
                CHECK(y[j] >= y[prev]);
                CHECK(y[j] <= y[i]);
            }
            prev = i;
        }
    }
}

TEST_CASE("segmentation counts and remainder drop")
{
    const DiscardPolicy p;
    CHECK(p.max_missing() == 512);
    auto r = make_recording(7680);
    auto res = segment(r, p);
    CHECK(res.kept.size() == 3);
    CHECK(res.discarded == 0);
    r = make_recording(7700);
    res = segment(r, p);
    CHECK(res.kept.size() == 3);
    CHECK(res.kept[2].start_time_s == 10.0);
}

TEST_CASE("the 20 percent loss rule is strict")
{
    auto r = make_recording(2 * kSegmentLength);
    for (int i = 0; i < 512; ++i) r.samples[100 + i] = kNaN;
    for (int i = 0; i < 513; ++i) r.samples[kSegmentLength + 1000 + i] = kNaN;
    const auto res = segment(r, {});
    REQUIRE(res.kept.size() == 1);
    CHECK(res.discarded == 1);
    CHECK(res.kept[0].start_time_s == 0.0);
    for (float v : res.kept[0].values) CHECK_FALSE(std::isnan(v));
}

TEST_CASE("labels come from the phase at the window start; unlabeled windows are counted")
{
    auto r = make_recording(6 * kSegmentLength + 77);
    r.phase_marks = {{5.0, Phase::Baseline}, {12.0, Phase::EarlyEPG}, {20.0, Phase::Unlabeled}, {25.0, Phase::LateEPG}};
    for (int i = 0; i < 600; ++i) r.samples[static_cast<std::size_t>(5 * kSegmentLength + i)] = kNaN;
    const auto res = segment(r, {});
    // windows start at 0 (unlabeled), 5 BL, 10 BL, 15 early, 20 unlabeled, 25 discarded
    CHECK(res.unlabeled == 2);
    CHECK(res.discarded == 1);
    REQUIRE(res.kept.size() == 3);
    CHECK(res.kept.size() == 6u - res.discarded - res.unlabeled);
    CHECK(res.kept[0].label == Phase::Baseline);
    CHECK(res.kept[2].label == Phase::EarlyEPG);
}

TEST_CASE("segments are NaN-free and outliers are repaired")
{
    auto r = make_recording(4 * kSegmentLength);
    Rng rng(8);
    for (int k = 0; k < 40; ++k) r.samples[rng.below(r.samples.size())] = kNaN;
    r.samples[3000] = 1e5f;
    const auto res = preprocess_recording(r, {}, {});
    CHECK(res.kept.size() == 4);
    CHECK(res.outliers_replaced >= 1);
    for (const auto& s : res.kept)
        for (float v : s.values) CHECK(std::isfinite(v));
    CHECK(std::abs(res.kept[1].values[3000 - kSegmentLength]) < 100.f);

    Recording bad = r;
    bad.sample_rate_hz = 256;
    CHECK_THROWS_AS(segment(bad, {}), ValidationError);
}
