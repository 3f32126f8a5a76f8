#include "epg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "epg/error.hpp"
#include "epg/svg.hpp"

namespace epg {

void PredictionTrace::validate(double tol) const
{
    const auto n = probs.size();
    if (subject_ids.size() != n || times.size() != n || labels.size() != n)
        throw ValidationError("prediction trace columns differ in length");
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (double p : probs[i]) {
            if (!(p >= -tol && p <= 1.0 + tol))
                throw ValidationError("prediction trace row " + std::to_string(i) + " has a probability outside [0, 1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
            throw ValidationError("prediction trace row " + std::to_string(i) + " sums to " + std::to_string(sum));
        if (i > 0 && subject_ids[i] == subject_ids[i - 1] && times[i] < times[i - 1])
            throw ValidationError("prediction trace is not time-sorted at row " + std::to_string(i));
    }
}

namespace metrics {

namespace {

int argmax(const std::array<double, kNumClasses>& p)
{
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double ratio(long num, long den, bool& undefined)
{
    undefined = den == 0;
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string class_name(int c) { return std::string(to_string(kClasses[static_cast<std::size_t>(c)])); }

}  // namespace

void ConfusionCounts::validate() const
{
    for (int c = 0; c < kNumClasses; ++c) {
        if (tp[c] < 0 || tn[c] < 0 || fp[c] < 0 || fn[c] < 0)
            throw ValidationError("confusion counts must be non-negative");
        if (tp[c] + tn[c] + fp[c] + fn[c] != total())
            throw ValidationError("confusion counts of class " + std::to_string(c) + " do not sum to the total");
    }
}

ConfusionCounts confusion_counts(std::span<const int> truth, std::span<const int> predicted)
{
    if (truth.size() != predicted.size()) throw DimensionError("truth and prediction lengths differ");
    ConfusionCounts cc;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses)
            throw ValidationError("class index out of range at sample " + std::to_string(i));
        for (int c = 0; c < kNumClasses; ++c) {
            const bool is_t = t == c, is_p = p == c;
            cc.tp[c] += is_t && is_p;
            cc.fn[c] += is_t && !is_p;
            cc.fp[c] += !is_t && is_p;
            cc.tn[c] += !is_t && !is_p;
        }
    }
    return cc;
}

ConfusionCounts confusion_counts(const PredictionTrace& trace)
{
    std::vector<int> truth, pred;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (!is_class(trace.labels[i])) continue;
        truth.push_back(class_index(trace.labels[i]));
        pred.push_back(argmax(trace.probs[i]));
    }
    return confusion_counts(truth, pred);
}

MetricsReport prf1_accuracy(const ConfusionCounts& counts)
{
    counts.validate();
    MetricsReport r;
    for (int c = 0; c < kNumClasses; ++c) {
        auto& s = r.per_class[static_cast<std::size_t>(c)];
        s.precision = ratio(counts.tp[c], counts.tp[c] + counts.fp[c], s.precision_undefined);
        s.recall = ratio(counts.tp[c], counts.tp[c] + counts.fn[c], s.recall_undefined);
        s.f1_undefined = s.precision + s.recall == 0.0;
        s.f1 = s.f1_undefined ? 0.0 : 2.0 * (s.precision * s.recall) / (s.precision + s.recall);
        bool empty = false;
        s.accuracy = ratio(counts.tp[c] + counts.tn[c], counts.total(), empty);
    }
    for (const auto& s : r.per_class) {
        r.macro.precision += s.precision / kNumClasses;
        r.macro.recall += s.recall / kNumClasses;
        r.macro.f1 += s.f1 / kNumClasses;
        r.macro.accuracy += s.accuracy / kNumClasses;
        r.macro.precision_undefined |= s.precision_undefined;
        r.macro.recall_undefined |= s.recall_undefined;
        r.macro.f1_undefined |= s.f1_undefined;
    }
    return r;
}

RocCurve roc_auc_ova(const PredictionTrace& trace, int c)
{
    if (c < 0 || c >= kNumClasses) throw ValidationError("class index " + std::to_string(c) + " out of range");
    std::vector<std::pair<double, bool>> rows;
    rows.reserve(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i)
        if (is_class(trace.labels[i]))
            rows.emplace_back(trace.probs[i][static_cast<std::size_t>(c)], class_index(trace.labels[i]) == c);
    RocCurve roc;
    roc.class_index = c;
    for (const auto& [s, pos] : rows) (pos ? roc.positives : roc.negatives)++;
    if (roc.positives == 0 || roc.negatives == 0)
        throw ValidationError("AUC undefined for class " + class_name(c) + ": trace holds only " +
                              (roc.positives == 0 ? "negatives" : "positives"));
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    // Twice the area in units of one positive-negative pair, kept integral so
    // the result is exactly (2 * #ordered pairs + #ties) / (2 P N).
    long long twice_area = 0;
    long tp = 0, fp = 0;
    const double P = static_cast<double>(roc.positives), N = static_cast<double>(roc.negatives);
    roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    for (std::size_t i = 0; i < rows.size();) {
        long dtp = 0, dfp = 0;
        const double s = rows[i].first;
        for (; i < rows.size() && rows[i].first == s; ++i) (rows[i].second ? dtp : dfp)++;
        twice_area += static_cast<long long>(dfp) * (2LL * tp + dtp);
        tp += dtp;
        fp += dfp;
        roc.points.push_back({s, static_cast<double>(fp) / N, static_cast<double>(tp) / P});
    }
    roc.auc = static_cast<double>(twice_area) / (2.0 * P * N);
    return roc;
}

std::array<RocCurve, kNumClasses> roc_all(const PredictionTrace& trace)
{
    std::array<RocCurve, kNumClasses> out;
    for (int c = 0; c < kNumClasses; ++c) out[static_cast<std::size_t>(c)] = roc_auc_ova(trace, c);
    return out;
}

double macro_auc(const PredictionTrace& trace)
{
    double sum = 0.0;
    for (const auto& r : roc_all(trace)) sum += r.auc;
    return sum / kNumClasses;
}

void AggregationConfig::validate() const
{
    if (std::find(kPoolLengths.begin(), kPoolLengths.end(), pool_length_s) == kPoolLengths.end())
        throw ConfigError("pool length " + std::to_string(pool_length_s) +
                          " s is not one of 5, 30, 60, 120, 300, 600, 1200, 1800, 3600");
}

PredictionTrace aggregate(const PredictionTrace& trace, const AggregationConfig& cfg)
{
    if (cfg.pool_length_s < kSegmentSeconds || cfg.pool_length_s % kSegmentSeconds != 0)
        throw ConfigError("pool length must be a positive multiple of 5 s, got " + std::to_string(cfg.pool_length_s));
    const auto max_rows = static_cast<std::size_t>(cfg.pool_length_s / kSegmentSeconds);
    const double pool = cfg.pool_length_s;
    PredictionTrace out;
    const auto n = trace.size();
    auto same_run = [&](std::size_t a, std::size_t b) {
        return trace.subject_ids[a] == trace.subject_ids[b] && trace.labels[a] == trace.labels[b];
    };
    auto mean_of = [&](std::size_t lo, std::size_t hi) {
        std::array<double, kNumClasses> m{};
        for (std::size_t j = lo; j < hi; ++j)
            for (int c = 0; c < kNumClasses; ++c) m[c] += trace.probs[j][c];
        for (auto& v : m) v /= static_cast<double>(hi - lo);
        return m;
    };

    if (!cfg.sliding) {
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i + 1;
            while (j < n && j - i < max_rows && same_run(i, j) && trace.times[j] - trace.times[i] < pool) ++j;
            out.push_back(trace.subject_ids[i], trace.times[i], trace.labels[i], mean_of(i, j));
            i = j;
        }
        return out;
    }
    std::size_t lo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && !same_run(i - 1, i)) lo = i;
        while (i - lo + 1 > max_rows || trace.times[i] - trace.times[lo] >= pool) ++lo;
        out.push_back(trace.subject_ids[i], trace.times[i], trace.labels[i], mean_of(lo, i + 1));
    }
    return out;
}

std::vector<PoolAuc> auc_vs_pool_curve(const PredictionTrace& trace, std::span<const int> pool_lengths)
{
    // Shortest per-subject coverage decides which pool lengths fit.
    double shortest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < trace.size();) {
        std::size_t j = i;
        while (j + 1 < trace.size() && trace.subject_ids[j + 1] == trace.subject_ids[i]) ++j;
        shortest = std::min(shortest, trace.times[j] - trace.times[i] + kSegmentSeconds);
        i = j + 1;
    }
    std::vector<PoolAuc> out;
    for (int pool : pool_lengths) {
        PoolAuc entry;
        entry.pool_length_s = pool;
        if (trace.empty() || pool > shortest) {
            out.push_back(entry);
            continue;
        }
        const auto agg = aggregate(trace, {pool, false});
        entry.rows = agg.size();
        double sum = 0.0;
        bool complete = true;
        for (int c = 0; c < kNumClasses; ++c) {
            try {
                entry.per_class[static_cast<std::size_t>(c)] = roc_auc_ova(agg, c).auc;
                sum += *entry.per_class[static_cast<std::size_t>(c)];
            } catch (const ValidationError&) {
                complete = false;
            }
        }
        if (complete) entry.macro = sum / kNumClasses;
        out.push_back(entry);
    }
    return out;
}

double Timeline::phase_mean(Phase phase, int c) const
{
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i] == phase) {
            sum += scores[i][static_cast<std::size_t>(c)];
            ++n;
        }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

Timeline class_score_timeline(const PredictionTrace& trace, double smoothing_window_s)
{
    if (smoothing_window_s < 0) throw ConfigError("smoothing window must be non-negative");
    Timeline tl;
    if (trace.empty()) return tl;
    tl.subject_id = trace.subject_ids.front();
    for (const auto& s : trace.subject_ids)
        if (s != tl.subject_id) throw ValidationError("class-score timeline needs a single-subject trace");
    tl.times = trace.times;
    tl.labels = trace.labels;
    if (smoothing_window_s == 0) {
        tl.scores = trace.probs;
        return tl;
    }
    const double half = smoothing_window_s / 2.0;
    const auto n = trace.size();
    std::vector<std::array<double, kNumClasses>> prefix(n + 1, std::array<double, kNumClasses>{});
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < kNumClasses; ++c) prefix[i + 1][c] = prefix[i][c] + trace.probs[i][c];
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (trace.times[lo] < trace.times[i] - half) ++lo;
        while (hi < n && trace.times[hi] <= trace.times[i] + half) ++hi;
        std::array<double, kNumClasses> m{};
        for (int c = 0; c < kNumClasses; ++c) m[c] = (prefix[hi][c] - prefix[lo][c]) / static_cast<double>(hi - lo);
        tl.scores.push_back(m);
    }
    return tl;
}

Summary summarize(std::span<const double> values)
{
    Summary s;
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

std::string trace_csv(const PredictionTrace& trace)
{
    std::ostringstream os;
    os << std::setprecision(17) << "subject_id,time_s,label,p_baseline,p_early,p_late\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        os << trace.subject_ids[i] << ',' << trace.times[i] << ',' << to_string(trace.labels[i]);
        for (double p : trace.probs[i]) os << ',' << p;
        os << '\n';
    }
    return os.str();
}

PredictionTrace parse_trace_csv(const std::string& text)
{
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("subject_id,time_s,label", 0) != 0)
        throw FormatError("prediction CSV lacks the expected header");
    PredictionTrace tr;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f.size() != 3 + kNumClasses) throw FormatError("prediction CSV line " + std::to_string(lineno) + ": expected 6 fields");
        const auto label = parse_phase(f[2]);
        if (!label) throw FormatError("prediction CSV line " + std::to_string(lineno) + ": unknown label '" + f[2] + "'");
        std::array<double, kNumClasses> p{};
        try {
            for (int c = 0; c < kNumClasses; ++c) p[c] = std::stod(f[3 + c]);
            tr.push_back(f[0], std::stod(f[1]), *label, p);
        } catch (const std::logic_error&) {
            throw FormatError("prediction CSV line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return tr;
}

std::string roc_csv(std::span<const RocCurve> curves)
{
    std::ostringstream os;
    os << std::setprecision(17) << "class,threshold,fpr,tpr\n";
    for (const auto& r : curves)
        for (const auto& p : r.points) os << class_name(r.class_index) << ',' << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
    return os.str();
}

std::string pool_curve_csv(std::span<const PoolAuc> curve)
{
    std::ostringstream os;
    os << std::setprecision(17) << "pool_length_s,rows,macro_auc,auc_baseline,auc_early,auc_late\n";
    auto cell = [&](const std::optional<double>& v) {
        if (v) os << *v;
    };
    for (const auto& e : curve) {
        os << e.pool_length_s << ',' << e.rows << ',';
        cell(e.macro);
        for (const auto& v : e.per_class) {
            os << ',';
            cell(v);
        }
        os << '\n';
    }
    return os.str();
}

std::string timeline_csv(const Timeline& tl)
{
    std::ostringstream os;
    os << std::setprecision(17) << "time_s,label,score_baseline,score_early,score_late\n";
    for (std::size_t i = 0; i < tl.times.size(); ++i) {
        os << tl.times[i] << ',' << to_string(tl.labels[i]);
        for (double s : tl.scores[i]) os << ',' << s;
        os << '\n';
    }
    return os.str();
}

std::string metrics_table_csv(const std::string& model, std::span<const MetricsReport> folds)
{
    std::ostringstream os;
    os << std::setprecision(6) << std::fixed;
    os << "model,class,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,accuracy_mean,"
          "accuracy_std,folds,undefined_folds\n";
    auto row = [&](const std::string& cls, auto&& pick) {
        std::vector<double> p, r, f, a;
        int undefined = 0;
        for (const auto& fold : folds) {
            const Scores& s = pick(fold);
            p.push_back(s.precision);
            r.push_back(s.recall);
            f.push_back(s.f1);
            a.push_back(s.accuracy);
            undefined += s.precision_undefined || s.recall_undefined || s.f1_undefined;
        }
        os << model << ',' << cls;
        for (const auto& v : {p, r, f, a}) {
            const auto s = summarize(v);
            os << ',' << s.mean << ',' << s.std;
        }
        os << ',' << folds.size() << ',' << undefined << '\n';
    };
    for (int c = 0; c < kNumClasses; ++c)
        row(std::to_string(c), [c](const MetricsReport& m) -> const Scores& { return m.per_class[static_cast<std::size_t>(c)]; });
    row("average", [](const MetricsReport& m) -> const Scores& { return m.macro; });
    return os.str();
}

void write_roc_svg(std::span<const RocCurve> curves, const std::string& title, const std::string& path)
{
    svg::LinePlot plot;
    plot.title = title;
    plot.x_label = "false positive rate";
    plot.y_label = "true positive rate";
    plot.y_range = {0.0, 1.0};
    for (const auto& r : curves) {
        svg::Series s;
        std::ostringstream name;
        name << std::setprecision(3) << class_name(r.class_index) << " AUC " << r.auc;
        s.name = name.str();
        for (const auto& p : r.points) {
            s.x.push_back(p.fpr);
            s.y.push_back(p.tpr);
        }
        plot.series.push_back(std::move(s));
    }
    plot.series.push_back({"chance", {0.0, 1.0}, {0.0, 1.0}, "#999999", true});
    svg::write(plot, path);
}

void write_pool_curve_svg(std::span<const PoolAuc> curve, const std::string& title, const std::string& path)
{
    svg::LinePlot plot;
    plot.title = title;
    plot.x_label = "aggregation length (s)";
    plot.y_label = "AUC";
    plot.log_x = true;
    svg::Series macro{"macro", {}, {}, "#000000", false};
    std::array<svg::Series, kNumClasses> cls;
    for (int c = 0; c < kNumClasses; ++c) cls[c].name = class_name(c);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& e : curve) {
        macro.x.push_back(e.pool_length_s);
        macro.y.push_back(e.macro.value_or(nan));
        for (int c = 0; c < kNumClasses; ++c) {
            cls[c].x.push_back(e.pool_length_s);
            cls[c].y.push_back(e.per_class[static_cast<std::size_t>(c)].value_or(nan));
        }
    }
    plot.series.push_back(std::move(macro));
    for (auto& s : cls) plot.series.push_back(std::move(s));
    svg::write(plot, path);
}

void write_timeline_svg(const Timeline& tl, const std::string& path)
{
    svg::LinePlot plot;
    plot.title = "class score, " + tl.subject_id;
    plot.x_label = "time (h)";
    plot.y_label = "class score";
    plot.y_range = {0.0, 1.0};
    for (int c = 0; c < kNumClasses; ++c) {
        svg::Series s;
        s.name = class_name(c);
        for (std::size_t i = 0; i < tl.times.size(); ++i) {
            s.x.push_back(tl.times[i] / 3600.0);
            s.y.push_back(tl.scores[i][static_cast<std::size_t>(c)]);
        }
        plot.series.push_back(std::move(s));
    }
    // Shade the late phase so the progression is visible against the labels.
    for (std::size_t i = 0; i < tl.times.size();) {
        std::size_t j = i;
        while (j + 1 < tl.times.size() && tl.labels[j + 1] == tl.labels[i]) ++j;
        if (tl.labels[i] == Phase::LateEPG) plot.spans.emplace_back(tl.times[i] / 3600.0, tl.times[j] / 3600.0);
        i = j + 1;
    }
    svg::write(plot, path);
}

}  // namespace metrics
}  // namespace epg
