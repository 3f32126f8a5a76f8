#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epg/trace.hpp"
#include "epg/types.hpp"

namespace epg::metrics {

// One-vs-all tallies per class.
struct ConfusionCounts {
    std::array<long, kNumClasses> tp{}, tn{}, fp{}, fn{};

    long total() const { return tp[0] + tn[0] + fp[0] + fn[0]; }
    // Throws ValidationError unless every class sums to the same total.
    void validate() const;
};

ConfusionCounts confusion_counts(std::span<const int> truth, std::span<const int> predicted);
// Predictions are the arg-max class of each row; the lowest index wins ties.
ConfusionCounts confusion_counts(const PredictionTrace& trace);

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    // Set when the corresponding denominator was zero and the value forced to 0.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

struct MetricsReport {
    std::array<Scores, kNumClasses> per_class;
    Scores macro;  // unweighted mean over classes; flags are OR-ed
};

MetricsReport prf1_accuracy(const ConfusionCounts& counts);

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocCurve {
    int class_index = 0;
    std::vector<RocPoint> points;  // from (0,0) to (1,1)
    double auc = 0.0;
    long positives = 0;
    long negatives = 0;
};

// One-vs-all ROC for class `c`. Tied scores move along a diagonal segment, so
// the trapezoid area equals P(score_pos > score_neg) + P(tie) / 2.
RocCurve roc_auc_ova(const PredictionTrace& trace, int c);
std::array<RocCurve, kNumClasses> roc_all(const PredictionTrace& trace);
double macro_auc(const PredictionTrace& trace);

inline constexpr std::array<int, 9> kPoolLengths{5, 30, 60, 120, 300, 600, 1200, 1800, 3600};

struct AggregationConfig {
    int pool_length_s = 5;
    // Disjoint blocks by default; sliding replaces every row with the mean of
    // the trailing window ending at it.
    bool sliding = false;

    // Requires a length from kPoolLengths; aggregate() itself accepts any
    // positive multiple of 5 s.
    void validate() const;
};

// Averages consecutive softmax rows. A block opens at a row and takes
// following rows while they start less than pool_length_s later, hold at most
// pool_length_s / 5 rows, and share the subject and label. Because output rows
// of a full block are one pool length apart, aggregating twice equals once.
PredictionTrace aggregate(const PredictionTrace& trace, const AggregationConfig& cfg);

struct PoolAuc {
    int pool_length_s = 0;
    std::optional<double> macro;
    std::array<std::optional<double>, kNumClasses> per_class;
    std::size_t rows = 0;
};

// Entries are absent when some subject's trace is shorter than the pool or
// when a class AUC is undefined after aggregation.
std::vector<PoolAuc> auc_vs_pool_curve(const PredictionTrace& trace,
                                       std::span<const int> pool_lengths = kPoolLengths);

struct Timeline {
    std::string subject_id;
    std::vector<double> times;
    std::vector<Label> labels;
    std::vector<std::array<double, kNumClasses>> scores;

    // Mean score of class `c` over rows labelled `phase`; NaN when there are none.
    double phase_mean(Phase phase, int c) const;
};

// Centred moving average over rows whose start lies within window/2 of each
// row. A zero window passes the trace through. The trace must hold one subject.
Timeline class_score_timeline(const PredictionTrace& trace, double smoothing_window_s);

// Mean and sample standard deviation across folds, for the Table-2 layout.
struct Summary {
    double mean = 0.0;
    double std = 0.0;
};
Summary summarize(std::span<const double> values);

std::string trace_csv(const PredictionTrace& trace);
PredictionTrace parse_trace_csv(const std::string& text);
std::string roc_csv(std::span<const RocCurve> curves);
std::string pool_curve_csv(std::span<const PoolAuc> curve);
std::string timeline_csv(const Timeline& timeline);
// Rows: one per class plus "average", columns mean and std per metric.
std::string metrics_table_csv(const std::string& model, std::span<const MetricsReport> folds);

void write_roc_svg(std::span<const RocCurve> curves, const std::string& title, const std::string& path);
void write_pool_curve_svg(std::span<const PoolAuc> curve, const std::string& title, const std::string& path);
void write_timeline_svg(const Timeline& timeline, const std::string& path);

}  // namespace epg::metrics
