#include "epg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

#include "epg/error.hpp"
#include "epg/rng.hpp"

namespace epg::train {

namespace {

constexpr double kBlockSeconds = 3600.0;

const SubjectSegments& find_subject(const Cohort& cohort, const std::string& id)
{
    for (const auto& s : cohort)
        if (s.subject_id == id) return s;
    throw ValidationError("subject '" + id + "' not found in the data set");
}

struct Block {
    const SubjectSegments* subject;
    int cls;
    std::vector<std::size_t> indices;
};

std::vector<int> labels_of(std::span<const Segment* const> segs)
{
    std::vector<int> out;
    out.reserve(segs.size());
    for (const auto* s : segs) out.push_back(class_index(s->label));
    return out;
}

struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalStats evaluate(zoo::Model<float>& model, const std::vector<const Segment*>& segs, int batch_size)
{
    EvalStats st;
    if (segs.empty()) return st;
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t at = 0; at < segs.size(); at += static_cast<std::size_t>(batch_size)) {
        const auto n = std::min(segs.size() - at, static_cast<std::size_t>(batch_size));
        const std::span<const Segment* const> chunk(segs.data() + at, n);
        ad::Tape<float> tape;
        const auto fr = zoo::forward(tape, model, tape.constant(make_batch<float>(chunk)), {ad::Mode::eval});
        const auto labels = labels_of(chunk);
        const auto xr = ad::softmax_xent<float>(tape, fr.logits, labels);
        loss += static_cast<double>(tape.value(xr.loss)[0]) * static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Index arg = 0;
            xr.probs.matrix(static_cast<ad::Index>(n), kNumClasses).row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
            correct += arg == labels[i];
        }
    }
    st.loss = loss / static_cast<double>(segs.size());
    st.accuracy = static_cast<double>(correct) / static_cast<double>(segs.size());
    return st;
}

}  // namespace

template <class Scalar>
ad::Tensor<Scalar> make_batch(std::span<const Segment* const> segments)
{
    if (segments.empty()) throw ValidationError("empty batch");
    const auto len = static_cast<ad::Index>(segments.front()->values.size());
    ad::Tensor<Scalar> x({static_cast<ad::Index>(segments.size()), 1, len});
    for (std::size_t b = 0; b < segments.size(); ++b) {
        if (static_cast<ad::Index>(segments[b]->values.size()) != len)
            throw DimensionError("segments in one batch differ in length");
        for (ad::Index i = 0; i < len; ++i)
            x(static_cast<ad::Index>(b), 0, i) = static_cast<Scalar>(segments[b]->values[static_cast<std::size_t>(i)]);
    }
    return x;
}

template ad::Tensor<float> make_batch<float>(std::span<const Segment* const>);
template ad::Tensor<double> make_batch<double>(std::span<const Segment* const>);

Cohort group_by_subject(std::vector<Segment> segments)
{
    Cohort out;
    std::map<std::string, std::size_t> index;
    for (auto& s : segments) {
        auto [it, fresh] = index.try_emplace(s.subject_id, out.size());
        if (fresh) out.push_back({s.subject_id, Group::PPS, {}});
        out[it->second].segments.push_back(std::move(s));
    }
    for (auto& subj : out)
        std::stable_sort(subj.segments.begin(), subj.segments.end(),
                         [](const Segment& a, const Segment& b) { return a.start_time_s < b.start_time_s; });
    return out;
}

void TrainConfig::validate() const
{
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must be in (0, 1)");
    if (steps_per_epoch < 0 || max_val_segments < 0 || phase_window_s < 0)
        throw ConfigError("steps_per_epoch, max_val_segments and phase_window_s must be non-negative");
}

std::vector<FoldPlan> make_folds(const std::vector<std::string>& subjects, double budget_s, std::uint64_t seed)
{
    if (subjects.size() < 2)
        throw ConfigError("leave-one-out needs at least 2 subjects, got " + std::to_string(subjects.size()));
    if (std::set<std::string>(subjects.begin(), subjects.end()).size() != subjects.size())
        throw ConfigError("subject ids must be distinct");
    std::vector<FoldPlan> folds;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        FoldPlan f;
        f.held_out_subject = subjects[i];
        for (std::size_t j = 0; j < subjects.size(); ++j)
            if (j != i) f.train_subjects.push_back(subjects[j]);
        f.segments_per_phase_budget_s = budget_s;
        f.seed = hash_combine(seed, i);
        folds.push_back(std::move(f));
    }
    return folds;
}

Selection sample_training_window(const std::vector<Segment>& segments, Phase phase, double budget_s, double window_s,
                                 std::uint64_t seed)
{
    if (!(budget_s > 0)) throw ConfigError("training budget must be positive");
    std::vector<std::size_t> in_phase;
    for (std::size_t i = 0; i < segments.size(); ++i)
        if (segments[i].label == phase) in_phase.push_back(i);
    if (in_phase.empty()) throw ValidationError("phase " + std::string(to_string(phase)) + " not present in recording");

    const double start = segments[in_phase.front()].start_time_s;
    std::map<int, std::vector<std::size_t>> blocks;
    for (auto i : in_phase) {
        const double t = segments[i].start_time_s - start;
        if (window_s > 0 && t >= window_s) continue;
        blocks[static_cast<int>(std::floor(t / kBlockSeconds))].push_back(i);
    }
    std::size_t available = 0;
    for (const auto& [id, v] : blocks) available += v.size();
    const auto target = static_cast<std::size_t>(std::floor(budget_s / kSegmentSeconds + 1e-9));

    Selection sel;
    std::vector<int> order;
    for (const auto& [id, v] : blocks) order.push_back(id);
    if (available <= target) {
        sel.saturated = true;
        sel.warning = "phase " + std::string(to_string(phase)) + " of '" + segments[in_phase.front()].subject_id + "' holds " +
                      std::to_string(available * kSegmentSeconds) + " s, less than the " +
                      std::to_string(static_cast<long>(budget_s)) + " s budget; taking all of it";
    } else {
        Rng rng(seed);
        rng.shuffle(order.begin(), order.end());
    }
    std::vector<std::pair<std::size_t, int>> picked;
    for (int id : order) {
        for (auto i : blocks[id]) {
            if (picked.size() == target) break;
            picked.emplace_back(i, id);
        }
        if (picked.size() == target) break;
    }
    std::sort(picked.begin(), picked.end());
    for (const auto& [i, id] : picked) {
        sel.indices.push_back(i);
        sel.blocks.push_back(id);
    }
    return sel;
}

FoldResult train_fold(const FoldPlan& fold, const Cohort& cohort, const TrainConfig& cfg, const zoo::ModelSpec& spec,
                      const ProgressFn& progress)
{
    cfg.validate();
    if (std::find(fold.train_subjects.begin(), fold.train_subjects.end(), fold.held_out_subject) != fold.train_subjects.end())
        throw ContractError("held-out subject '" + fold.held_out_subject + "' is among the training subjects");
    if (fold.train_subjects.empty()) throw ConfigError("fold has no training subjects");

    FoldResult res;
    std::vector<std::vector<Block>> per_class(kNumClasses);
    for (const auto& id : fold.train_subjects) {
        const auto& subj = find_subject(cohort, id);
        for (Phase phase : kClasses) {
            const bool present = std::any_of(subj.segments.begin(), subj.segments.end(),
                                             [&](const Segment& s) { return s.label == phase; });
            if (!present) continue;
            const auto sel = sample_training_window(subj.segments, phase, fold.segments_per_phase_budget_s, cfg.phase_window_s,
                                                    hash_combine(fold.seed, hash_combine(hash_string(id), class_index(phase))));
            if (!sel.warning.empty()) res.warnings.push_back(sel.warning);
            std::map<int, Block> blocks;
            for (std::size_t k = 0; k < sel.indices.size(); ++k) {
                auto& b = blocks[sel.blocks[k]];
                b.subject = &subj;
                b.cls = class_index(phase);
                b.indices.push_back(sel.indices[k]);
            }
            for (auto& [bid, b] : blocks) per_class[static_cast<std::size_t>(class_index(phase))].push_back(std::move(b));
        }
    }

    std::vector<const Segment*> train_set, val_set;
    for (int c = 0; c < kNumClasses; ++c) {
        auto& blocks = per_class[static_cast<std::size_t>(c)];
        if (blocks.empty())
            throw ValidationError("no training data for class " + std::string(to_string(kClasses[static_cast<std::size_t>(c)])));
        Rng rng(hash_combine(fold.seed, 0x5917ull + static_cast<std::uint64_t>(c)));
        rng.shuffle(blocks.begin(), blocks.end());
        std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(blocks.size())));
        if (blocks.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, blocks.size() - 1);
        else n_val = 0;
        for (std::size_t k = 0; k < blocks.size(); ++k)
            for (auto i : blocks[k].indices) (k < n_val ? val_set : train_set).push_back(&blocks[k].subject->segments[i]);
    }
    if (cfg.max_val_segments > 0 && val_set.size() > static_cast<std::size_t>(cfg.max_val_segments)) {
        std::vector<const Segment*> sub;
        const double stride = static_cast<double>(val_set.size()) / cfg.max_val_segments;
        for (int k = 0; k < cfg.max_val_segments; ++k) sub.push_back(val_set[static_cast<std::size_t>(k * stride)]);
        val_set = std::move(sub);
    }
    for (const auto* s : train_set)
        if (s->subject_id == fold.held_out_subject) throw ContractError("held-out segment leaked into the training split");
    for (const auto* s : val_set)
        if (s->subject_id == fold.held_out_subject) throw ContractError("held-out segment leaked into the validation split");
    res.n_train = train_set.size();
    res.n_val = val_set.size();

    auto model = zoo::build<float>(spec, hash_combine(fold.seed, 0xb1d5ull));
    res.model = model;
    if (cfg.max_epochs == 0) return res;
    if (train_set.empty()) throw ValidationError("training split is empty");

    const std::uint64_t dropout_seed = cfg.dropout_seed ? cfg.dropout_seed : hash_combine(fold.seed, 0xd0ull);
    ad::AdamConfig adam;
    adam.lr = cfg.lr;
    ad::AdamState<float> adam_state;
    const auto batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), train_set.size());
    const int steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch
                                              : static_cast<int>((train_set.size() + batch - 1) / batch);

    const double total_steps = static_cast<double>(steps) * cfg.max_epochs;

    Rng order_rng(hash_combine(fold.seed, 0x0fdeull));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order.begin(), order.end());
    std::size_t cursor = 0;
    std::uint64_t global_step = 0;
    int since_best = 0;
    std::vector<const Segment*> chunk(batch);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        for (int s = 0; s < steps; ++s) {
            for (auto& p : chunk) {
                if (cursor == order.size()) {
                    order_rng.shuffle(order.begin(), order.end());
                    cursor = 0;
                }
                p = train_set[order[cursor++]];
            }
            ad::Tape<float> tape;
            model.zero_grad();
            const auto fr = zoo::forward(tape, model, tape.constant(make_batch<float>(chunk)),
                                         {ad::Mode::train, dropout_seed, global_step++});
            const auto labels = labels_of(chunk);
            const auto xr = ad::softmax_xent<float>(tape, fr.logits, labels);
            const double data_loss = tape.value(xr.loss)[0];
            if (!std::isfinite(data_loss))
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(s + 1) + " (lr " + std::to_string(cfg.lr) + ")");
            const ad::Var objective = fr.l2.valid() ? ad::add(tape, xr.loss, fr.l2) : xr.loss;
            tape.backward(objective);
            if (cfg.cosine_decay)
                adam.lr = 0.5 * cfg.lr *
                          (1.0 + std::cos(std::numbers::pi * static_cast<double>(global_step - 1) / total_steps));
            ad::adam_step<float>(model.params, adam_state, adam);
            loss_sum += data_loss;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / steps;
        const auto ev = evaluate(model, val_set.empty() ? train_set : val_set, std::max(cfg.batch_size, 64));
        rec.val_loss = ev.loss;
        rec.val_accuracy = ev.accuracy;
        if (!std::isfinite(rec.val_loss))
            throw NumericError("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
        res.curve.push_back(rec);
        if (progress) progress(rec);
        if (rec.val_loss < res.best_val_loss) {
            res.best_val_loss = rec.val_loss;
            res.best_epoch = epoch;
            res.model = model;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    return res;
}

void write_curve_csv(const std::vector<EpochRecord>& curve, std::ostream& os)
{
    os << "epoch,train_loss,val_loss,val_accuracy\n";
    os.precision(17);
    for (const auto& r : curve) os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_accuracy << '\n';
}

PredictionTrace predict(zoo::Model<float>& model, std::span<const Segment> segments, int batch_size)
{
    PredictionTrace tr;
    if (segments.empty()) return tr;
    std::map<std::string, std::size_t> first_seen;
    for (const auto& s : segments) first_seen.try_emplace(s.subject_id, first_seen.size());
    std::vector<const Segment*> order;
    for (const auto& s : segments) order.push_back(&s);
    std::stable_sort(order.begin(), order.end(), [&](const Segment* a, const Segment* b) {
        const auto sa = first_seen[a->subject_id], sb = first_seen[b->subject_id];
        return sa != sb ? sa < sb : a->start_time_s < b->start_time_s;
    });
    for (const auto* s : order)
        if (static_cast<int>(s->values.size()) != model.spec.input_length)
            throw FormatError("segment length " + std::to_string(s->values.size()) + " does not match the model input " +
                              std::to_string(model.spec.input_length));
    const auto bs = static_cast<std::size_t>(std::max(batch_size, 1));
    for (std::size_t at = 0; at < order.size(); at += bs) {
        const auto n = std::min(order.size() - at, bs);
        const std::span<const Segment* const> chunk(order.data() + at, n);
        ad::Tape<float> tape;
        const auto fr = zoo::forward(tape, model, tape.constant(make_batch<float>(chunk)), {ad::Mode::eval});
        const auto logits = tape.value(fr.logits).cast<double>();
        const auto p = ad::softmax(logits);
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, kNumClasses> row{};
            for (int c = 0; c < kNumClasses; ++c) row[static_cast<std::size_t>(c)] = p(static_cast<ad::Index>(i), c);
            tr.push_back(chunk[i]->subject_id, chunk[i]->start_time_s, chunk[i]->label, row);
        }
    }
    return tr;
}

}  // namespace epg::train
