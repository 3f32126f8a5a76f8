#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "epg/error.hpp"
#include "epg/metrics.hpp"
#include "epg/rng.hpp"

using namespace epg;
using namespace epg::metrics;

namespace {

// Builds a one-subject trace from class-c scores; the other two classes
// share the remainder evenly.
PredictionTrace scored_trace(const std::vector<double>& scores, const std::vector<int>& labels, int c = 0)
{
    PredictionTrace tr;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::array<double, 3> p{};
        p.fill((1.0 - scores[i]) / 2.0);
        p[static_cast<std::size_t>(c)] = scores[i];
        tr.push_back("S", 5.0 * static_cast<double>(i), kClasses[static_cast<std::size_t>(labels[i])], p);
    }
    return tr;
}

double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& pos)
{
    long long greater = 0, ties = 0, P = 0, N = 0;
    for (std::size_t i = 0; i < s.size(); ++i) (pos[i] ? P : N)++;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (pos[i] && !pos[j]) {
                greater += s[i] > s[j];
                ties += s[i] == s[j];
            }
    return static_cast<double>(2 * greater + ties) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
}

std::array<double, 3> random_simplex(Rng& rng)
{
    std::array<double, 3> p{};
    double s = 0;
    for (auto& v : p) s += v = rng.uniform() + 1e-3;
    for (auto& v : p) v /= s;
    return p;
}

}  // namespace

TEST_CASE("precision, recall and F1 on the worked example")
{
    ConfusionCounts cc;
    cc.tp = {1, 0, 0};
    cc.fp = {1, 0, 0};
    cc.fn = {0, 1, 0};
    cc.tn = {0, 1, 2};
    const auto r = prf1_accuracy(cc);
    CHECK(r.per_class[0].precision == 0.5);
    CHECK(r.per_class[0].recall == 1.0);
    CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.per_class[0].accuracy == 0.5);
}

TEST_CASE("perfect predictions give unit metrics")
{
    std::vector<int> y{0, 1, 2, 2, 1, 0, 0};
    const auto r = prf1_accuracy(confusion_counts(y, y));
    for (const auto& s : r.per_class) {
        CHECK(s.precision == 1.0);
        CHECK(s.recall == 1.0);
        CHECK(s.f1 == 1.0);
        CHECK(s.accuracy == 1.0);
    }
    CHECK(r.macro.f1 == 1.0);
    CHECK_FALSE(r.macro.precision_undefined);
}

TEST_CASE("confusion counts agree with a recount from scratch")
{
    Rng rng(11);
    std::vector<int> y(300), p(300);
    for (int i = 0; i < 300; ++i) {
        y[i] = static_cast<int>(rng.below(3));
        p[i] = static_cast<int>(rng.below(3));
    }
    const auto cc = confusion_counts(y, p);
    cc.validate();
    const auto r = prf1_accuracy(cc);
    for (int c = 0; c < 3; ++c) {
        long tp = 0, fp = 0, fn = 0, tn = 0;
        for (int i = 0; i < 300; ++i) {
            if (y[i] == c && p[i] == c) ++tp;
            else if (y[i] != c && p[i] == c) ++fp;
            else if (y[i] == c) ++fn;
            else ++tn;
        }
        CHECK(cc.tp[c] == tp);
        CHECK(cc.fp[c] == fp);
        CHECK(cc.fn[c] == fn);
        CHECK(cc.tn[c] == tn);
        CHECK(cc.total() == 300);
        const double prec = double(tp) / double(tp + fp), rec = double(tp) / double(tp + fn);
        CHECK(r.per_class[c].precision == prec);
        CHECK(r.per_class[c].recall == rec);
        CHECK(r.per_class[c].f1 == 2.0 * (prec * rec) / (prec + rec));
        CHECK(r.per_class[c].accuracy == double(tp + tn) / double(tp + tn + fp + fn));
    }
}

TEST_CASE("zero denominators report zero and raise a flag")
{
    std::vector<int> y{0, 0, 1, 1}, p{0, 0, 0, 1};
    const auto r = prf1_accuracy(confusion_counts(y, p));
    const auto& s = r.per_class[2];
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
    CHECK(s.precision_undefined);
    CHECK(s.recall_undefined);
    CHECK(s.f1_undefined);
    CHECK(r.macro.precision_undefined);
    CHECK(s.accuracy == 1.0);
}

TEST_CASE("macro metrics are invariant under class relabelling")
{
    Rng rng(5);
    std::vector<int> y(120), p(120);
    for (int i = 0; i < 120; ++i) {
        y[i] = static_cast<int>(rng.below(3));
        p[i] = rng.uniform() < 0.6 ? y[i] : static_cast<int>(rng.below(3));
    }
    const auto base = prf1_accuracy(confusion_counts(y, p));
    const int perm[] = {2, 0, 1};
    std::vector<int> yp, pp;
    for (int i = 0; i < 120; ++i) {
        yp.push_back(perm[y[i]]);
        pp.push_back(perm[p[i]]);
    }
    const auto permuted = prf1_accuracy(confusion_counts(yp, pp));
    CHECK(permuted.macro.precision == doctest::Approx(base.macro.precision).epsilon(1e-14));
    CHECK(permuted.macro.recall == doctest::Approx(base.macro.recall).epsilon(1e-14));
    CHECK(permuted.macro.f1 == doctest::Approx(base.macro.f1).epsilon(1e-14));
    CHECK(permuted.macro.accuracy == doctest::Approx(base.macro.accuracy).epsilon(1e-14));
    for (int c = 0; c < 3; ++c) CHECK(permuted.per_class[perm[c]].f1 == base.per_class[c].f1);
}

TEST_CASE("confusion counts reject malformed input")
{
    std::vector<int> a{0, 1}, b{0};
    CHECK_THROWS_AS(confusion_counts(a, b), DimensionError);
    std::vector<int> bad{0, 3};
    CHECK_THROWS_AS(confusion_counts(a, bad), ValidationError);
    ConfusionCounts cc;
    cc.tp = {1, 0, 0};
    CHECK_THROWS_AS(cc.validate(), ValidationError);
}

TEST_CASE("AUC of perfectly separated scores is one")
{
    const auto r = roc_auc_ova(scored_trace({0.9, 0.8, 0.7, 0.2, 0.1}, {0, 0, 0, 1, 2}), 0);
    CHECK(r.auc == 1.0);
    CHECK(r.positives == 3);
    CHECK(r.negatives == 2);
    CHECK(r.points.front().fpr == 0.0);
    CHECK(r.points.back().tpr == 1.0);
    CHECK(r.points.back().fpr == 1.0);
}

TEST_CASE("AUC near one half when labels ignore scores")
{
    Rng rng(3);
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 20000; ++i) {
        s.push_back(rng.uniform());
        y.push_back(static_cast<int>(rng.below(3)));
    }
    CHECK(std::abs(roc_auc_ova(scored_trace(s, y), 0).auc - 0.5) < 0.05);
}

TEST_CASE("AUC equals the pairwise count with ties worth one half")
{
    Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(199));
        std::vector<double> s;
        std::vector<int> y;
        std::vector<bool> pos;
        for (int i = 0; i < n; ++i) {
            // Coarse grid so ties are common.
            s.push_back(static_cast<double>(rng.below(trial % 2 ? 7 : 1000)) / 1000.0);
            y.push_back(i < 2 ? i : static_cast<int>(rng.below(3)));
            pos.push_back(y.back() == 0);
        }
        const auto r = roc_auc_ova(scored_trace(s, y), 0);
        CHECK(std::abs(r.auc - pairwise_auc(s, pos)) <= 1e-12);
    }
}

TEST_CASE("AUC is invariant under strictly increasing score transforms")
{
    Rng rng(8);
    std::vector<double> s, t;
    std::vector<int> y;
    for (int i = 0; i < 150; ++i) {
        s.push_back(static_cast<double>(rng.below(40)) / 40.0);
        t.push_back(std::exp(3.0 * s.back()) / 30.0);
        y.push_back(static_cast<int>(rng.below(3)));
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(roc_auc_ova(scored_trace(s, y), 0).auc == roc_auc_ova(scored_trace(t, y), 0).auc);
}

TEST_CASE("AUC with a single class present is an error")
{
    CHECK_THROWS_AS(roc_auc_ova(scored_trace({0.2, 0.4}, {1, 1}), 0), ValidationError);
    CHECK_THROWS_AS(roc_auc_ova(scored_trace({0.2, 0.4}, {0, 0}), 0), ValidationError);
}

TEST_CASE("aggregation with a 5 s pool is the identity")
{
    Rng rng(1);
    PredictionTrace tr;
    for (int i = 0; i < 30; ++i) tr.push_back("S", 5.0 * i, kClasses[i / 10], random_simplex(rng));
    const auto a = aggregate(tr, {5});
    CHECK(a.probs == tr.probs);
    CHECK(a.times == tr.times);
}

TEST_CASE("aggregation averages a pair of rows")
{
    PredictionTrace tr;
    tr.push_back("S", 0, Phase::Baseline, {1, 0, 0});
    tr.push_back("S", 5, Phase::Baseline, {0, 1, 0});
    const auto a = aggregate(tr, {10});
    REQUIRE(a.size() == 1);
    CHECK(a.probs[0] == std::array<double, 3>{0.5, 0.5, 0.0});
    CHECK(a.times[0] == 0.0);
}

TEST_CASE("aggregation splits at label changes and keeps a trailing partial block")
{
    PredictionTrace tr;
    for (int i = 0; i < 8; ++i) tr.push_back("S", 5.0 * i, i < 5 ? Phase::Baseline : Phase::EarlyEPG, {1, 0, 0});
    const auto a = aggregate(tr, {30});
    REQUIRE(a.size() == 2);
    CHECK(a.times == std::vector<double>{0.0, 25.0});
    CHECK(a.labels[1] == Phase::EarlyEPG);

    PredictionTrace t2;
    for (int i = 0; i < 8; ++i) t2.push_back("S", 5.0 * i, Phase::Baseline, {i < 6 ? 1.0 : 0.0, i < 6 ? 0.0 : 1.0, 0});
    const auto b = aggregate(t2, {30});
    REQUIRE(b.size() == 2);
    CHECK(b.probs[1] == std::array<double, 3>{0.0, 1.0, 0.0});
}

TEST_CASE("aggregation never spans a gap longer than the pool or a subject change")
{
    PredictionTrace tr;
    tr.push_back("A", 0, Phase::Baseline, {1, 0, 0});
    tr.push_back("A", 40, Phase::Baseline, {0, 1, 0});
    tr.push_back("B", 45, Phase::Baseline, {0, 0, 1});
    const auto a = aggregate(tr, {30});
    CHECK(a.size() == 3);
}

TEST_CASE("aggregated rows stay on the simplex and aggregation is idempotent")
{
    Rng rng(9);
    PredictionTrace tr;
    double t = 0;
    for (int i = 0; i < 2000; ++i) {
        t += rng.uniform() < 0.05 ? 5.0 * static_cast<double>(1 + rng.below(20)) : 5.0;
        tr.push_back(i < 1000 ? "A" : "B", t, kClasses[(i / 300) % 3], random_simplex(rng));
    }
    for (int pool : kPoolLengths) {
        const auto once = aggregate(tr, {pool});
        once.validate(1e-6);
        const auto twice = aggregate(once, {pool});
        CHECK(twice.times == once.times);
        CHECK(twice.probs == once.probs);
    }
}

TEST_CASE("sliding aggregation averages the trailing window")
{
    PredictionTrace tr;
    for (int i = 0; i < 4; ++i) tr.push_back("S", 5.0 * i, Phase::Baseline, {i % 2 ? 1.0 : 0.0, i % 2 ? 0.0 : 1.0, 0});
    const auto a = aggregate(tr, {10, true});
    REQUIRE(a.size() == 4);
    CHECK(a.probs[0] == std::array<double, 3>{0, 1, 0});
    for (int i = 1; i < 4; ++i) CHECK(a.probs[i] == std::array<double, 3>{0.5, 0.5, 0});
}

TEST_CASE("pool lengths outside the evaluated set are rejected by the config")
{
    CHECK_THROWS_AS(AggregationConfig{45}.validate(), ConfigError);
    CHECK_NOTHROW(AggregationConfig{300}.validate());
    CHECK_THROWS_AS(aggregate(PredictionTrace{}, {7}), ConfigError);
    CHECK(aggregate(PredictionTrace{}, {30}).empty());
}

TEST_CASE("a constant softmax gives a flat AUC-versus-pool curve")
{
    PredictionTrace tr;
    for (int i = 0; i < 3 * 1440; ++i) tr.push_back("S", 5.0 * i, kClasses[i / 1440], {0.2, 0.3, 0.5});
    const auto curve = auc_vs_pool_curve(tr);
    for (const auto& e : curve) {
        REQUIRE(e.macro);
        CHECK(*e.macro == 0.5);
    }
}

TEST_CASE("averaging noisy class-distinct scores raises AUC monotonically")
{
    Rng rng(31);
    PredictionTrace tr;
    for (int s = 0; s < 2; ++s)
        for (int i = 0; i < 3 * 1440; ++i) {
            const int c = i / 1440;
            std::array<double, 3> logit{};
            for (int k = 0; k < 3; ++k) logit[k] = (k == c ? 0.35 : 0.0) + rng.normal();
            std::array<double, 3> p{};
            double z = 0;
            for (int k = 0; k < 3; ++k) z += p[k] = std::exp(logit[k]);
            for (auto& v : p) v /= z;
            tr.push_back(s ? "B" : "A", 5.0 * i, kClasses[c], p);
        }
    const int pools[] = {5, 30, 60, 120, 300, 600};
    const auto curve = auc_vs_pool_curve(tr, pools);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        REQUIRE(curve[i].macro);
        CHECK(*curve[i].macro >= *curve[i - 1].macro);
    }
    CHECK(*curve.back().macro > *curve.front().macro + 0.1);
}

TEST_CASE("pool lengths longer than a subject's trace are absent")
{
    PredictionTrace tr;
    for (int i = 0; i < 3 * 100; ++i) tr.push_back("S", 5.0 * i, kClasses[i / 100], {0.2, 0.3, 0.5});
    const auto curve = auc_vs_pool_curve(tr);
    for (const auto& e : curve) CHECK(e.macro.has_value() == (e.pool_length_s <= 1200));
    CHECK_FALSE(curve.back().per_class[0].has_value());
}

TEST_CASE("class-score timeline")
{
    PredictionTrace tr;
    for (int i = 0; i < 100; ++i) tr.push_back("S", 5.0 * i, Phase::Baseline, {1, 0, 0});
    auto tl = class_score_timeline(tr, 300);
    for (const auto& s : tl.scores) CHECK(s[0] == 1.0);
    CHECK(tl.phase_mean(Phase::Baseline, 0) == 1.0);
    CHECK(std::isnan(tl.phase_mean(Phase::LateEPG, 2)));

    Rng rng(2);
    PredictionTrace noisy;
    for (int i = 0; i < 50; ++i) noisy.push_back("S", 5.0 * i, Phase::EarlyEPG, random_simplex(rng));
    CHECK(class_score_timeline(noisy, 0).scores == noisy.probs);

    const auto sm = class_score_timeline(noisy, 20);
    double manual = 0;
    for (int j = 8; j <= 12; ++j) manual += noisy.probs[j][1];
    CHECK(sm.scores[10][1] == doctest::Approx(manual / 5).epsilon(1e-12));
    double edge = 0;
    for (int j = 0; j <= 2; ++j) edge += noisy.probs[j][2];
    CHECK(sm.scores[0][2] == doctest::Approx(edge / 3).epsilon(1e-12));

    noisy.push_back("T", 0, Phase::EarlyEPG, {1, 0, 0});
    CHECK_THROWS_AS(class_score_timeline(noisy, 10), ValidationError);
}

TEST_CASE("summaries use the sample standard deviation")
{
    const double v[] = {1.0, 2.0, 3.0, 4.0};
    const auto s = summarize(v);
    CHECK(s.mean == 2.5);
    CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
    const double one[] = {0.7};
    CHECK(summarize(one).std == 0.0);
}

TEST_CASE("trace CSV round trip is exact")
{
    Rng rng(4);
    PredictionTrace tr;
    for (int i = 0; i < 20; ++i) tr.push_back(i < 10 ? "PPS01" : "CTR01", 5.0 * i + 0.1, kClasses[i % 3], random_simplex(rng));
    const auto back = parse_trace_csv(trace_csv(tr));
    CHECK(back.probs == tr.probs);
    CHECK(back.times == tr.times);
    CHECK(back.subject_ids == tr.subject_ids);
    CHECK(back.labels == tr.labels);
    CHECK_THROWS_AS(parse_trace_csv("nope\n"), FormatError);
    CHECK_THROWS_AS(parse_trace_csv("subject_id,time_s,label,a,b,c\nS,1,Baseline,0.5,x,0.5\n"), FormatError);
}

TEST_CASE("metrics table has one row per class plus the average")
{
    std::vector<int> y{0, 1, 2, 0, 1, 2}, p{0, 1, 1, 0, 2, 2};
    const std::vector<MetricsReport> folds{prf1_accuracy(confusion_counts(y, p)), prf1_accuracy(confusion_counts(y, y))};
    const auto csv = metrics_table_csv("Proposed4", folds);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("Proposed4,average,") != std::string::npos);
    CHECK(csv.find("Proposed4,0,1.000000,0.000000,1.000000,0.000000") != std::string::npos);
}

TEST_CASE("ROC and pool curves serialize")
{
    const auto tr = scored_trace({0.9, 0.1, 0.5, 0.4}, {0, 1, 2, 0});
    const auto roc = roc_auc_ova(tr, 0);
    const auto csv = roc_csv(std::span(&roc, 1));
    CHECK(csv.rfind("class,threshold,fpr,tpr\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(roc.points.size()) + 1);
    std::vector<PoolAuc> curve(2);
    curve[0].pool_length_s = 5;
    curve[0].macro = 0.75;
    curve[1].pool_length_s = 3600;
    CHECK(pool_curve_csv(curve).find("\n3600,0,,,,\n") != std::string::npos);
}
