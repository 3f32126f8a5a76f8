// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. The end-to-end criteria share one synthetic cohort and one set of
// leave-one-out folds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <map>
#include <sstream>

#include "epg/explain.hpp"
#include "epg/pipeline.hpp"
#include "epg/preprocess.hpp"
#include "epg/rng.hpp"
#include "epg/runtime.hpp"
#include "gradcheck.hpp"

using namespace epg;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void progress(const std::string& s) { std::cerr << "[acceptance] " << s << std::endl; }

Verdict gradient_correctness()
{
    const auto t0 = Clock::now();
    const auto suite = testing::gradcheck_suite(7);
    double worst = 0;
    std::string where;
    for (const auto& c : suite) {
        const auto r = testing::gradcheck(c, 13);
        if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            where = r.worst;
        }
    }
    const double t = seconds_since(t0);
    return {suite.size() >= 100 && worst < 1e-4 && t < 300,
            fmt("%zu configurations, max relative error %.2e (%s), %.1f s", suite.size(), worst, where.c_str(), t)};
}

Verdict parameter_counts()
{
    using zoo::ModelName;
    auto report = [](ModelName m, std::optional<int> k = {}) {
        zoo::BuildOptions o;
        o.kernel_width = k;
        return zoo::count_trainables(zoo::make_spec(m, o));
    };
    const auto fnn = report(ModelName::FNN);
    const auto dcnn = report(ModelName::DCNN);
    const auto p16 = report(ModelName::Proposed16, zoo::kProposed16CountKernel);
    const auto eeg = report(ModelName::EEGNet2);
    bool breakdown = true;
    for (const auto* r : {&fnn, &dcnn, &p16, &eeg}) {
        long sum = 0;
        for (const auto& row : r->rows) sum += row.trainables;
        breakdown = breakdown && sum == r->total && !r->rows.empty();
    }
    const double e_dcnn = *dcnn.relative_error(), e_p16 = *p16.relative_error(), e_eeg = *eeg.relative_error();
    return {fnn.total == 2920963 && std::abs(e_dcnn) < 0.005 && std::abs(e_p16) < 0.02 && std::abs(e_eeg) < 0.02 &&
                breakdown && !p16.assumptions.empty(),
            fmt("FNN %ld, DCNN %+.3f%%, Proposed16 (k=%d) %+.3f%%, EEGNet2 %+.3f%%, per-layer sums %s", fnn.total,
                100 * e_dcnn, zoo::kProposed16CountKernel, 100 * e_p16, 100 * e_eeg, breakdown ? "consistent" : "broken")};
}

Verdict cam_identity(zoo::Model<double>& model, const std::vector<Segment>& pool)
{
    Rng rng(2024);
    double worst_mean = 0, worst_prob = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto& seg = pool[rng.below(pool.size())];
        const int c = static_cast<int>(rng.below(kNumClasses));
        const auto sweep = explain::cam_sweep(model, seg);
        worst_mean = std::max(worst_mean, std::abs(sweep[c].mean() - sweep[c].logit));

        ad::Tape<double> tape;
        const Segment* one = &seg;
        auto fr = zoo::forward(tape, model, tape.constant(train::make_batch<double>(std::span(&one, 1))), {});
        const auto probs = ad::softmax(tape.value(fr.logits));
        double z = 0;
        for (const auto& m : sweep) z += std::exp(m.mean());
        for (int k = 0; k < kNumClasses; ++k)
            worst_prob = std::max(worst_prob, std::abs(std::exp(sweep[k].mean()) / z - probs(0, k)));
    }
    return {worst_mean < 1e-5 && worst_prob < 1e-5,
            fmt("100 pairs on a trained model, max |mean CAM - logit| %.2e, max softmax gap %.2e", worst_mean, worst_prob)};
}

double pairwise_auc(const PredictionTrace& t, int c)
{
    double wins = 0;
    long pos = 0, neg = 0;
    for (std::size_t i = 0; i < t.size(); ++i) (class_index(t.labels[i]) == c ? pos : neg)++;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (class_index(t.labels[i]) != c) continue;
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (class_index(t.labels[j]) == c) continue;
            const double a = t.probs[i][c], b = t.probs[j][c];
            wins += a > b ? 1.0 : a == b ? 0.5 : 0.0;
        }
    }
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

Verdict auc_oracle()
{
    Rng rng(99);
    double worst = 0;
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 6 + rng.below(195);
        PredictionTrace t;
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, 3> raw{};
            // A coarse grid makes ties common.
            for (auto& v : raw) v = 1.0 + static_cast<double>(rng.below(trial % 2 ? 5 : 40));
            const double s = raw[0] + raw[1] + raw[2];
            t.push_back("S", static_cast<double>(i) * kSegmentSeconds, kClasses[i < 3 ? i : rng.below(3)],
                        {raw[0] / s, raw[1] / s, raw[2] / s});
        }
        for (int c = 0; c < kNumClasses; ++c) {
            worst = std::max(worst, std::abs(metrics::roc_auc_ova(t, c).auc - pairwise_auc(t, c)));
            ++checked;
        }
    }
    return {worst <= 1e-12, fmt("50 traces, %d class curves, max |AUC - pairwise| %.2e", checked, worst)};
}

// Truth rows, predicted columns; expected per class (precision, recall,
// accuracy) as numerator/denominator pairs worked out by hand.
struct HandTable {
    long m[3][3];
    long expect[3][6];
};

constexpr HandTable kHandTables[] = {
    {{{5, 0, 0}, {0, 5, 0}, {0, 0, 5}}, {{5, 5, 5, 5, 15, 15}, {5, 5, 5, 5, 15, 15}, {5, 5, 5, 5, 15, 15}}},
    {{{3, 1, 0}, {2, 4, 1}, {0, 2, 6}}, {{3, 5, 3, 4, 16, 19}, {4, 7, 4, 7, 13, 19}, {6, 7, 6, 8, 16, 19}}},
    {{{10, 0, 0}, {10, 0, 0}, {10, 0, 0}}, {{10, 30, 10, 10, 10, 30}, {0, 0, 0, 10, 20, 30}, {0, 0, 0, 10, 20, 30}}},
    {{{0, 4, 1}, {3, 0, 2}, {1, 1, 0}}, {{0, 4, 0, 5, 3, 12}, {0, 5, 0, 5, 2, 12}, {0, 3, 0, 2, 7, 12}}},
    {{{7, 2, 1}, {0, 0, 0}, {1, 3, 9}}, {{7, 8, 7, 10, 19, 23}, {0, 5, 0, 0, 18, 23}, {9, 10, 9, 13, 18, 23}}},
    {{{14, 17, 14}, {14, 16, 18}, {6, 5, 16}}, {{14, 34, 14, 45, 69, 120}, {16, 38, 16, 48, 66, 120}, {16, 48, 16, 27, 77, 120}}},
    {{{15, 20, 19}, {5, 3, 14}, {9, 4, 2}}, {{15, 29, 15, 54, 38, 91}, {3, 27, 3, 22, 48, 91}, {2, 35, 2, 15, 45, 91}}},
    {{{17, 20, 1}, {19, 12, 14}, {20, 19, 20}}, {{17, 56, 17, 38, 82, 142}, {12, 51, 12, 45, 70, 142}, {20, 35, 20, 59, 88, 142}}},
    {{{5, 19, 0}, {16, 2, 1}, {1, 6, 7}}, {{5, 22, 5, 24, 21, 57}, {2, 27, 2, 19, 15, 57}, {7, 8, 7, 14, 49, 57}}},
    {{{19, 0, 14}, {10, 14, 18}, {6, 16, 7}}, {{19, 35, 19, 33, 74, 104}, {14, 30, 14, 42, 60, 104}, {7, 39, 7, 29, 50, 104}}},
};

Verdict metrics_formulas()
{
    int mismatches = 0, values = 0;
    for (const auto& h : kHandTables) {
        std::vector<int> truth, pred;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                for (long k = 0; k < h.m[r][c]; ++k) {
                    truth.push_back(r);
                    pred.push_back(c);
                }
        const auto rep = metrics::prf1_accuracy(metrics::confusion_counts(truth, pred));
        auto frac = [](long a, long b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
        std::array<double, 3> mp{}, mr{}, mf{}, ma{};
        for (int c = 0; c < 3; ++c) {
            const auto* e = h.expect[c];
            const double p = frac(e[0], e[1]), r = frac(e[2], e[3]), a = frac(e[4], e[5]);
            const double f = p + r == 0 ? 0.0 : 2.0 * (p * r) / (p + r);
            const auto& s = rep.per_class[c];
            mismatches += (s.precision != p) + (s.recall != r) + (s.accuracy != a) + (s.f1 != f);
            mismatches += s.precision_undefined != (e[1] == 0);
            mismatches += s.recall_undefined != (e[3] == 0);
            values += 6;
            mp[c] = p, mr[c] = r, mf[c] = f, ma[c] = a;
        }
        auto mean = [](const std::array<double, 3>& v) { return v[0] / 3 + v[1] / 3 + v[2] / 3; };
        mismatches += (rep.macro.precision != mean(mp)) + (rep.macro.recall != mean(mr)) + (rep.macro.f1 != mean(mf)) +
                      (rep.macro.accuracy != mean(ma));
        values += 4;
    }
    return {mismatches == 0, fmt("10 tables, %d values compared exactly, %d mismatches", values, mismatches)};
}

Recording noise_recording(std::size_t n)
{
    Recording r;
    r.subject_id = "S";
    r.samples.resize(n);
    Rng rng(4);
    for (auto& v : r.samples) v = static_cast<float>(rng.normal(0, 10));
    r.phase_marks = {{0.0, Phase::Baseline}};
    return r;
}

Verdict preprocessing_boundary()
{
    constexpr float nan = std::numeric_limits<float>::quiet_NaN();
    std::vector<std::string> failures;
    auto r = noise_recording(2 * kSegmentLength);
    for (int i = 0; i < 512; ++i) r.samples[100 + i] = nan;
    for (int i = 0; i < 513; ++i) r.samples[kSegmentLength + 1000 + i] = nan;
    auto res = preprocess::segment(r, {});
    if (res.kept.size() != 1 || res.discarded != 1 || res.kept[0].start_time_s != 0.0)
        failures.push_back("512/513 rule");

    for (auto [n, want] : {std::pair{7680, 3}, {7700, 3}, {2559, 0}, {2560, 1}, {12799, 4}}) {
        res = preprocess::segment(noise_recording(static_cast<std::size_t>(n)), {});
        if (static_cast<int>(res.kept.size()) != want || (want > 0 && res.kept.back().start_time_s != 5.0 * (want - 1)))
            failures.push_back(fmt("%d samples", n));
    }

    Rng rng(7);
    long anchors = 0, interior = 0, bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> x(60);
        float level = 0;
        const bool down = trial % 2;
        for (auto& v : x) v = level += static_cast<float>((down ? -1 : 1) * rng.uniform(0, 3));
        const auto orig = x;
        std::vector<bool> mask(x.size());
        for (std::size_t i = 1; i + 1 < x.size(); ++i) mask[i] = rng.uniform() < 0.4;
        for (int k = 0; k < 5; ++k) x[1 + rng.below(58)] = nan;
        const auto y = preprocess::pchip_fill(x, mask);
        std::size_t prev = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (mask[i] || std::isnan(x[i])) continue;
            ++anchors;
            bad += y[i] != orig[i];
            const float lo = std::min(y[prev], y[i]), hi = std::max(y[prev], y[i]);
            for (std::size_t j = prev + 1; j < i; ++j, ++interior) bad += y[j] < lo || y[j] > hi;
            prev = i;
        }
    }
    if (bad) failures.push_back(fmt("pchip: %ld violations", bad));
    std::string detail = fmt("512 NaN kept, 513 discarded; 5 length cases; pchip %ld anchors exact, %ld interior points "
                             "bounded",
                             anchors, interior);
    for (const auto& f : failures) detail += "; failed " + f;
    return {failures.empty(), detail};
}

// Everything the end-to-end criteria read.
struct Experiment {
    pipeline::PipelineConfig cfg;
    std::vector<synth::GeneratedRecording> generated;
    pipeline::PreparedData data;
    std::vector<pipeline::FoldOutcome> folds;
    std::vector<pipeline::FoldEvaluation> evals;
    double seconds = 0;
};

Experiment run_experiment()
{
    Experiment ex;
    auto& cfg = ex.cfg;
    cfg.seed = 7;
    cfg.generator.seed = 7;
    cfg.n_pps = 5;
    cfg.n_control = 2;
    cfg.budget_s_per_phase = 7200;
    cfg.pool_lengths = {5, 30, 60, 300};
    cfg.validate();
    const int threads = thread_count();

    const auto t0 = Clock::now();
    ex.generated = synth::make_cohort(cfg.generator, cfg.n_pps, cfg.n_control);
    std::vector<Recording> recs;
    for (const auto& g : ex.generated) recs.push_back(g.recording);
    ex.data = pipeline::prepare(recs, cfg, threads);
    progress(fmt("cohort prepared in %.0f s", seconds_since(t0)));

    ex.folds = pipeline::run_folds(ex.data, cfg, threads, [](const std::string& id, const train::EpochRecord& r) {
        progress(fmt("%s epoch %d val_loss %.3f val_accuracy %.3f", id.c_str(), r.epoch, r.val_loss, r.val_accuracy));
    });
    ex.evals.resize(ex.folds.size());
    pipeline::parallel_for(ex.folds.size(), threads, [&](std::size_t i) {
        ex.evals[i] = pipeline::evaluate_fold(ex.folds[i].result.model, ex.folds[i].plan.held_out_subject, ex.data, cfg);
    });
    ex.seconds = seconds_since(t0);
    for (const auto& ev : ex.evals)
        progress(fmt("%s AUC %.3f %.3f %.3f", ev.held_out.c_str(), ev.roc[0].auc, ev.roc[1].auc, ev.roc[2].auc));
    return ex;
}

Verdict end_to_end(const Experiment& ex)
{
    std::array<double, 3> mean{};
    for (const auto& ev : ex.evals)
        for (int c = 0; c < 3; ++c) mean[c] += ev.roc[c].auc / static_cast<double>(ex.evals.size());
    const double macro = (mean[0] + mean[1] + mean[2]) / 3.0;
    return {ex.evals.size() == 5 && macro >= 0.85 && mean[0] >= mean[1] && mean[0] >= mean[2] && ex.seconds < 1800,
            fmt("%zu folds, mean AUC BL %.3f early %.3f late %.3f, macro %.3f, %.0f s", ex.evals.size(), mean[0], mean[1],
                mean[2], macro, ex.seconds)};
}

Verdict aggregation_benefit(const Experiment& ex)
{
    const auto& pools = ex.cfg.pool_lengths;
    std::vector<double> macro(pools.size(), 0.0);
    bool complete = true;
    for (const auto& ev : ex.evals)
        for (std::size_t p = 0; p < pools.size(); ++p) {
            complete = complete && ev.pool_curve[p].macro.has_value();
            macro[p] += ev.pool_curve[p].macro.value_or(0.0) / static_cast<double>(ex.evals.size());
        }
    bool monotone = true;
    for (std::size_t p = 1; p < macro.size(); ++p) monotone = monotone && macro[p] >= macro[p - 1];
    const bool needs_gain = macro.front() < 0.95;
    const bool gain = macro.back() - macro.front() >= 0.02;
    std::string curve;
    for (std::size_t p = 0; p < pools.size(); ++p) curve += fmt("%s%ds %.3f", p ? ", " : "", pools[p], macro[p]);
    return {complete && monotone && (!needs_gain || gain),
            fmt("fold-mean macro AUC %s; 300 s gain %+.3f%s", curve.c_str(), macro.back() - macro.front(),
                needs_gain ? "" : " (gain not required: unaggregated >= 0.95)")};
}

Verdict control_chance(const Experiment& ex)
{
    double lo = 1, hi = 0;
    bool present = true;
    for (const auto& ev : ex.evals) {
        present = present && ev.control_auc.has_value();
        if (!ev.control_auc) continue;
        for (double a : *ev.control_auc) lo = std::min(lo, a), hi = std::max(hi, a);
    }
    return {present && lo >= 0.40 && hi <= 0.60,
            fmt("%zu checkpoints on both controls, per-class AUC range [%.3f, %.3f]", ex.evals.size(), lo, hi)};
}

Verdict class_score_timeline(const Experiment& ex)
{
    const auto& ev = ex.evals.front();
    const double w = ex.cfg.timeline_smoothing_s;
    const auto tl = metrics::class_score_timeline(ev.trace, w);
    const double bl = tl.phase_mean(Phase::Baseline, 0);
    const double late_late = tl.phase_mean(Phase::LateEPG, 2);
    const double late_bl = tl.phase_mean(Phase::Baseline, 2);

    std::map<std::string, PredictionTrace> per_control;
    const auto& ct = ev.control_trace;
    for (std::size_t i = 0; i < ct.size(); ++i) per_control[ct.subject_ids[i]].push_back(ct.subject_ids[i], ct.times[i], ct.labels[i], ct.probs[i]);
    double control_max = 0;
    for (const auto& [id, t] : per_control)
        for (const auto& s : metrics::class_score_timeline(t, w).scores) control_max = std::max(control_max, s[2]);
    return {bl > 0.6 && late_late > 0.5 && late_bl < 0.3 && !per_control.empty() && control_max < 0.4,
            fmt("%s, %.0f s smoothing: BL score in BL %.3f, late score in late %.3f and in BL %.3f; control late score "
                "max %.3f over %zu recordings",
                ev.held_out.c_str(), w, bl, late_late, late_bl, control_max, per_control.size())};
}

double overlap_fraction(zoo::Model<double>& model, const std::vector<Segment>& segs,
                        const std::vector<synth::MotifEvent>& events, int cap, int& counted)
{
    std::vector<synth::MotifEvent> waves;
    for (const auto& e : events)
        if (e.motif == synth::Motif::sharp_wave) waves.push_back(e);
    int hits = 0;
    counted = 0;
    auto it = waves.begin();
    for (const auto& seg : segs) {
        if (seg.label != Phase::LateEPG || counted >= cap) continue;
        const double t0 = seg.start_time_s, t1 = t0 + kSegmentSeconds;
        std::vector<const synth::MotifEvent*> inside;
        while (it != waves.end() && it->time_s < t0 - 1.0) ++it;
        for (auto j = it; j != waves.end() && j->time_s < t1 + 1.0; ++j) {
            const auto x = explain::event_extent(*j);
            if (x.begin >= t0 && x.end <= t1) inside.push_back(&*j);
        }
        if (inside.empty()) continue;
        const auto m = explain::cam(model, seg, class_index(Phase::LateEPG));
        double best = 0;
        for (const auto* e : inside) best = std::max(best, explain::event_iou(m, t0, *e));
        ++counted;
        hits += best > 0.3;
    }
    return counted ? static_cast<double>(hits) / counted : 0.0;
}

Verdict explainability(const Experiment& ex, zoo::Model<double>& model)
{
    const auto& held = ex.folds.front().plan.held_out_subject;
    const auto& segs = ex.data.subject(held).segments;
    std::vector<Segment> sample;
    for (Phase p : kClasses) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < segs.size(); ++i)
            if (segs[i].label == p) idx.push_back(i);
        const std::size_t stride = std::max<std::size_t>(1, idx.size() / 300);
        for (std::size_t j = 0; j < idx.size(); j += stride) sample.push_back(segs[idx[j]]);
    }
    const auto selective = explain::selective_channels(explain::channel_profile(model, sample), 2.0);

    const synth::GeneratedRecording* gen = nullptr;
    for (const auto& g : ex.generated)
        if (g.recording.subject_id == held) gen = &g;
    int n = 0, n_random = 0;
    const double frac = overlap_fraction(model, segs, gen->events, 300, n);
    // The same measurement on an untrained network, for scale.
    auto untrained = zoo::build<double>(model.spec, 12345);
    const double frac_random = overlap_fraction(untrained, segs, gen->events, 300, n_random);
    return {!selective.empty() && n > 0 && frac >= 0.5,
            fmt("%zu selective channels (best margin %.2f); CAM/sharp-wave IoU > 0.3 on %.1f%% of %d late-EPG segments "
                "(untrained network: %.1f%%)",
                selective.size(), selective.empty() ? 0.0 : selective.front().margin, 100 * frac, n, 100 * frac_random)};
}

Verdict determinism(const Experiment& ex)
{
    auto cfg = ex.cfg.train;
    cfg.max_epochs = 2;
    cfg.steps_per_epoch = 12;
    const auto& plan = ex.folds.front().plan;
    const auto spec = ex.cfg.model_spec();
    const auto a = train::train_fold(plan, ex.data.cohort, cfg, spec);
    const auto b = train::train_fold(plan, ex.data.cohort, cfg, spec);
    bool same = a.curve.size() == b.curve.size() && !a.curve.empty();
    for (std::size_t i = 0; same && i < a.curve.size(); ++i)
        same = std::memcmp(&a.curve[i], &b.curve[i], sizeof(train::EpochRecord)) == 0;
    bool weights = a.model.params.size() == b.model.params.size();
    for (std::size_t i = 0; weights && i < a.model.params.size(); ++i) {
        const auto& x = a.model.params[i].value;
        const auto& y = b.model.params[i].value;
        weights = x.size() == y.size() && std::memcmp(x.data().data(), y.data().data(), sizeof(float) * x.size()) == 0;
    }
    return {same && weights,
            fmt("fold %s repeated single-threaded: %zu curve records %s, weights %s", plan.held_out_subject.c_str(),
                a.curve.size(), same ? "bitwise equal" : "DIFFER", weights ? "bitwise equal" : "DIFFER")};
}

}  // namespace

int main()
{
    tune_allocator();
    const char* names[12] = {"gradient correctness", "parameter-count oracle", "CAM identity", "AUC oracle equivalence",
                             "metrics formulas", "preprocessing boundary", "end-to-end staging", "aggregation benefit",
                             "control chance level", "class-score timeline", "explainability enrichment", "determinism"};
    std::array<Verdict, 12> v;
    auto timed = [](const char* what, auto&& fn) {
        const auto t0 = Clock::now();
        auto r = fn();
        progress(fmt("%s: %s (%.1f s)", what, r.pass ? "pass" : "FAIL", seconds_since(t0)));
        return r;
    };
    v[0] = timed(names[0], gradient_correctness);
    v[1] = timed(names[1], parameter_counts);
    v[3] = timed(names[3], auc_oracle);
    v[4] = timed(names[4], metrics_formulas);
    v[5] = timed(names[5], preprocessing_boundary);

    const auto ex = run_experiment();
    auto model = ex.folds.front().result.model.cast<double>();
    v[2] = timed(names[2], [&] { return cam_identity(model, ex.data.subject(ex.folds.front().plan.held_out_subject).segments); });
    v[6] = end_to_end(ex);
    v[7] = aggregation_benefit(ex);
    v[8] = control_chance(ex);
    v[9] = class_score_timeline(ex);
    v[10] = timed(names[10], [&] { return explainability(ex, model); });
    v[11] = timed(names[11], [&] { return determinism(ex); });

    int failed = 0;
    for (int i = 0; i < 12; ++i) {
        std::printf("%s  %2d %-26s %s\n", v[i].pass ? "PASS" : "FAIL", i + 1, names[i], v[i].detail.c_str());
        failed += !v[i].pass;
    }
    std::printf("%d of 12 criteria passed\n", 12 - failed);
    return failed ? 1 : 0;
}
