#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epg/metrics.hpp"
#include "epg/preprocess.hpp"
#include "epg/synthgen.hpp"
#include "epg/trainer.hpp"
#include "epg/zoo.hpp"

namespace epg::pipeline {

// Runs fn(i) for i in [0, n) on up to `threads` workers and rethrows the
// first failure after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Every tunable of a run. The JSON form has one key per field; absent keys
// keep their defaults and unknown keys are rejected.
struct PipelineConfig {
    std::uint64_t seed = 1;

    synth::GeneratorConfig generator;
    int n_pps = 5;
    int n_control = 2;

    preprocess::OutlierConfig outliers;
    preprocess::DiscardPolicy discard;

    zoo::ModelName model = zoo::ModelName::Proposed4;
    int kernel_width = 16;
    double dropout_rate = 0.2;

    double budget_s_per_phase = 7200.0;
    train::TrainConfig train = desk_training();

    std::vector<int> pool_lengths{metrics::kPoolLengths.begin(), metrics::kPoolLengths.end()};
    int report_pool_length_s = 3600;  // aggregation used for the metrics table
    bool sliding_aggregation = false;
    double timeline_smoothing_s = 600.0;
    int control_stride = 1;  // every n-th control segment is scored

    double cam_percentile = 80.0;
    int cam_segments_per_class = 3;
    int profile_segments_per_class = 300;
    double selectivity_margin = 2.0;
    int top_segments = 10;

    void validate() const;
    zoo::ModelSpec model_spec() const;
    static train::TrainConfig desk_training();
};

// Throws ConfigError naming the line (syntax) or the field (content).
PipelineConfig parse_config(std::string_view json_text);
// Canonical JSON with every field spelled out; stable across runs.
std::string config_json(const PipelineConfig& cfg);

struct SubjectInfo {
    std::string subject_id;
    Group group = Group::PPS;
    int kept = 0;
    int discarded = 0;
    int unlabeled = 0;
    long outliers_replaced = 0;
};

struct PreparedData {
    train::Cohort cohort;
    std::vector<SubjectInfo> subjects;

    std::vector<std::string> ids(Group g) const;
    const train::SubjectSegments& subject(const std::string& id) const;
};

PreparedData prepare(std::span<const Recording> recordings, const PipelineConfig& cfg, int threads = 1);
// Attaches group membership from the subject table to a decoded store.
PreparedData assemble(std::vector<Segment> segments, std::vector<SubjectInfo> subjects);

std::string subjects_json(std::span<const SubjectInfo> subjects);
std::vector<SubjectInfo> parse_subjects_json(std::string_view text);

struct FoldOutcome {
    train::FoldPlan plan;
    train::FoldResult result;
};

using FoldProgress = std::function<void(const std::string& held_out, const train::EpochRecord&)>;

// Leave-one-out over the PPS subjects. Folds run on up to `threads` workers;
// each fold's numerics are independent of the worker count.
std::vector<FoldOutcome> run_folds(const PreparedData& data, const PipelineConfig& cfg, int threads = 1,
                                   const FoldProgress& progress = {},
                                   std::span<const std::string> only = {});

struct FoldEvaluation {
    std::string held_out;
    PredictionTrace trace;          // held-out subject, every kept segment
    PredictionTrace control_trace;  // control subjects, strided
    std::array<metrics::RocCurve, kNumClasses> roc;
    std::array<metrics::RocCurve, kNumClasses> roc_aggregated;
    std::vector<metrics::PoolAuc> pool_curve;
    metrics::MetricsReport scores;             // unaggregated
    metrics::MetricsReport scores_aggregated;  // at report_pool_length_s
    std::optional<std::array<double, kNumClasses>> control_auc;
};

FoldEvaluation evaluate_fold(zoo::Model<float>& model, const std::string& held_out, const PreparedData& data,
                             const PipelineConfig& cfg);

}  // namespace epg::pipeline
