#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "epg/autodiff/optim.hpp"
#include "epg/model.hpp"
#include "epg/signal_io.hpp"
#include "epg/trace.hpp"

namespace epg::train {

// Kept segments of one subject in chronological order.
struct SubjectSegments {
    std::string subject_id;
    Group group = Group::PPS;
    std::vector<Segment> segments;
};
using Cohort = std::vector<SubjectSegments>;

// Groups a flat segment list by subject, preserving first-seen order and
// sorting each subject's segments by start time.
Cohort group_by_subject(std::vector<Segment> segments);

struct FoldPlan {
    std::string held_out_subject;
    std::vector<std::string> train_subjects;
    double segments_per_phase_budget_s = 7200.0;
    std::uint64_t seed = 0;
};

struct TrainConfig {
    int batch_size = 64;
    int max_epochs = 30;
    int early_stop_patience = 10;
    double lr = 1e-3;
    // Cosine decay from lr to zero over max_epochs * steps; off keeps lr fixed.
    bool cosine_decay = false;
    double val_fraction = 0.2;
    // Optimiser steps per epoch; 0 means one pass over the training split.
    int steps_per_epoch = 0;
    // Cap on validation segments (evenly strided subsample); 0 keeps all.
    int max_val_segments = 0;
    // Length of each phase's sampling window from the phase start; 0 uses
    // the whole phase.
    double phase_window_s = 0.0;
    std::uint64_t dropout_seed = 0;

    void validate() const;
};

// One fold per subject in the given order.
std::vector<FoldPlan> make_folds(const std::vector<std::string>& subjects, double budget_s, std::uint64_t seed);

struct Selection {
    std::vector<std::size_t> indices;  // into the subject's segment list, ascending
    std::vector<int> blocks;           // hour-block id of each selected segment
    bool saturated = false;            // phase shorter than the budget: everything taken
    std::string warning;
};

// Draws whole one-hour blocks of `phase` in random order until the budget is
// reached; the last block is truncated so exactly budget_s / 5 segments are
// taken whenever the phase holds that many.
Selection sample_training_window(const std::vector<Segment>& segments, Phase phase, double budget_s,
                                 double window_s, std::uint64_t seed);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct FoldResult {
    zoo::Model<float> model;  // best-validation checkpoint
    std::vector<EpochRecord> curve;
    int best_epoch = -1;  // -1: the initial model
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::vector<std::string> warnings;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

FoldResult train_fold(const FoldPlan& fold, const Cohort& cohort, const TrainConfig& cfg, const zoo::ModelSpec& spec,
                      const ProgressFn& progress = {});

void write_curve_csv(const std::vector<EpochRecord>& curve, std::ostream& os);

PredictionTrace predict(zoo::Model<float>& model, std::span<const Segment> segments, int batch_size = 64);

// Copies segment values into a [b, 1, L] batch tensor.
template <class Scalar>
ad::Tensor<Scalar> make_batch(std::span<const Segment* const> segments);

}  // namespace epg::train
