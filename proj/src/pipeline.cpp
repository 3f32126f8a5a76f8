#include "epg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "epg/error.hpp"

namespace epg::pipeline {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object into typed fields, remembering which
// were consumed so leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <class T>
    ObjectReader& get(const char* key, T& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return *this;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError("field '" + field(key) + "' has the wrong type (" + std::string(it->type_name()) + ")");
        }
        return *this;
    }

    template <class Fn>
    ObjectReader& object(const char* key, Fn&& fn)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it != j_.end()) {
            ObjectReader sub(*it, field(key));
            fn(sub);
            sub.finish();
        }
        return *this;
    }

    const json* raw(const char* key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown field '" + field(k) + "'");
    }

private:
    std::string where() const { return path_.empty() ? "configuration" : "field '" + path_ + "'"; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class Fn>
void rethrow_as_field(const std::string& field, Fn&& fn)
{
    try {
        fn();
    } catch (const ConfigError& e) {
        throw ConfigError("field '" + field + "': " + e.what());
    }
}

void read_profile(ObjectReader& r, synth::MotifProfile& p)
{
    r.get("theta_power_scale", p.theta_power_scale)
        .get("spike_rate_hz", p.spike_rate_hz)
        .get("spike_width_ms", p.spike_width_ms)
        .get("sharp_wave_rate_hz", p.sharp_wave_rate_hz)
        .get("sharp_wave_width_ms", p.sharp_wave_width_ms)
        .get("spindle_rate_per_min", p.spindle_rate_per_min)
        .get("hfo_rate_per_min", p.hfo_rate_per_min);
}

json profile_json(const synth::MotifProfile& p)
{
    return {{"theta_power_scale", p.theta_power_scale},     {"spike_rate_hz", p.spike_rate_hz},
            {"spike_width_ms", p.spike_width_ms},           {"sharp_wave_rate_hz", p.sharp_wave_rate_hz},
            {"sharp_wave_width_ms", p.sharp_wave_width_ms}, {"spindle_rate_per_min", p.spindle_rate_per_min},
            {"hfo_rate_per_min", p.hfo_rate_per_min}};
}

std::size_t line_of(std::string_view text, std::size_t byte)
{
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn)
{
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

train::TrainConfig PipelineConfig::desk_training()
{
    train::TrainConfig t;
    t.batch_size = 32;
    t.max_epochs = 10;
    t.early_stop_patience = 4;
    t.lr = 2e-3;
    t.cosine_decay = true;
    t.steps_per_epoch = 60;
    t.max_val_segments = 600;
    return t;
}

void PipelineConfig::validate() const
{
    rethrow_as_field("generator", [&] { generator.validate(); });
    if (n_pps < 2) throw ConfigError("field 'cohort.n_pps': leave-one-out needs at least 2 PPS subjects");
    if (n_control < 0) throw ConfigError("field 'cohort.n_control' must be non-negative");
    rethrow_as_field("preprocess", [&] {
        outliers.validate();
        discard.validate();
    });
    if (kernel_width < 1) throw ConfigError("field 'model.kernel_width' must be positive");
    if (!(dropout_rate >= 0 && dropout_rate < 1)) throw ConfigError("field 'model.dropout_rate' must be in [0, 1)");
    if (!(budget_s_per_phase >= kSegmentSeconds))
        throw ConfigError("field 'training.budget_s_per_phase' must be at least one segment");
    rethrow_as_field("training", [&] { train.validate(); });
    if (pool_lengths.empty()) throw ConfigError("field 'evaluation.pool_lengths' must not be empty");
    for (int p : pool_lengths)
        rethrow_as_field("evaluation.pool_lengths", [&] { metrics::AggregationConfig{p}.validate(); });
    rethrow_as_field("evaluation.report_pool_length_s",
                     [&] { metrics::AggregationConfig{report_pool_length_s}.validate(); });
    if (timeline_smoothing_s < 0) throw ConfigError("field 'evaluation.timeline_smoothing_s' must be non-negative");
    if (control_stride < 1) throw ConfigError("field 'evaluation.control_stride' must be >= 1");
    if (!(cam_percentile > 0 && cam_percentile < 100)) throw ConfigError("field 'explain.percentile' must be in (0, 100)");
    if (cam_segments_per_class < 1 || profile_segments_per_class < 1 || top_segments < 1)
        throw ConfigError("explain segment counts must be >= 1");
    if (!(selectivity_margin > 1)) throw ConfigError("field 'explain.selectivity_margin' must exceed 1");
}

zoo::ModelSpec PipelineConfig::model_spec() const
{
    zoo::BuildOptions o;
    o.kernel_width = kernel_width;
    o.dropout_rate = dropout_rate;
    return zoo::make_spec(model, o);
}

PipelineConfig parse_config(std::string_view text)
{
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError("configuration is not valid JSON (line " + std::to_string(line_of(text, e.byte)) +
                          "): " + e.what());
    }
    PipelineConfig c;
    ObjectReader root(j, "");
    root.get("seed", c.seed);
    root.object("signal", [&](ObjectReader& r) {
        int rate = kSampleRateHz, len = kSegmentLength;
        r.get("sample_rate_hz", rate).get("segment_length", len);
        if (rate != kSampleRateHz || len != kSegmentLength)
            throw ConfigError("fields 'signal.sample_rate_hz' and 'signal.segment_length' are fixed at 512 and 2560");
    });
    root.object("cohort", [&](ObjectReader& r) {
        auto& g = c.generator;
        r.get("n_pps", c.n_pps)
            .get("n_control", c.n_control)
            .get("baseline_s", g.baseline_s)
            .get("early_s", g.early_s)
            .get("late_s", g.late_s)
            .get("intermediate_s", g.intermediate_s);
    });
    root.object("generator", [&](ObjectReader& r) {
        auto& g = c.generator;
        std::string psd = g.background_psd == synth::BackgroundPsd::pink ? "pink" : "white";
        r.get("background_psd", psd)
            .get("background_uv", g.background_uv)
            .get("theta_uv", g.theta_uv)
            .get("spike_amplitude_uv", g.spike_amplitude_uv)
            .get("sharp_wave_amplitude_uv", g.sharp_wave_amplitude_uv)
            .get("spindle_amplitude_uv", g.spindle_amplitude_uv)
            .get("hfo_amplitude_uv", g.hfo_amplitude_uv)
            .get("artifact_rate_per_min", g.artifact_rate_per_min)
            .get("artifact_amplitude_uv", g.artifact_amplitude_uv)
            .get("loss_burst_rate_per_min", g.loss_burst_rate_per_min)
            .get("loss_burst_min_s", g.loss_burst_min_s)
            .get("loss_burst_max_s", g.loss_burst_max_s)
            .get("subject_jitter", g.subject_jitter)
            .get("circadian_depth", g.circadian_depth)
            .get("circadian_period_s", g.circadian_period_s);
        if (psd != "pink" && psd != "white")
            throw ConfigError("field 'generator.background_psd' must be \"pink\" or \"white\"");
        g.background_psd = psd == "pink" ? synth::BackgroundPsd::pink : synth::BackgroundPsd::white;
        r.object("profiles", [&](ObjectReader& pr) {
            for (Phase p : kClasses)
                pr.object(std::string(to_string(p)).c_str(), [&](ObjectReader& one) { read_profile(one, g.class_profiles[p]); });
        });
    });
    root.object("preprocess", [&](ObjectReader& r) {
        r.get("outlier_window", c.outliers.window)
            .get("mad_scale", c.outliers.mad_scale)
            .get("max_missing_fraction", c.discard.max_missing_fraction);
    });
    root.object("model", [&](ObjectReader& r) {
        std::string name(zoo::to_string(c.model));
        r.get("name", name).get("kernel_width", c.kernel_width).get("dropout_rate", c.dropout_rate);
        const auto m = zoo::parse_model_name(name);
        if (!m) throw ConfigError("field 'model.name': unknown model '" + name + "'");
        c.model = *m;
    });
    root.object("training", [&](ObjectReader& r) {
        auto& t = c.train;
        r.get("budget_s_per_phase", c.budget_s_per_phase)
            .get("batch_size", t.batch_size)
            .get("max_epochs", t.max_epochs)
            .get("early_stop_patience", t.early_stop_patience)
            .get("lr", t.lr)
            .get("cosine_decay", t.cosine_decay)
            .get("val_fraction", t.val_fraction)
            .get("steps_per_epoch", t.steps_per_epoch)
            .get("max_val_segments", t.max_val_segments)
            .get("phase_window_s", t.phase_window_s)
            .get("dropout_seed", t.dropout_seed);
    });
    root.object("evaluation", [&](ObjectReader& r) {
        r.get("pool_lengths", c.pool_lengths)
            .get("report_pool_length_s", c.report_pool_length_s)
            .get("sliding_aggregation", c.sliding_aggregation)
            .get("timeline_smoothing_s", c.timeline_smoothing_s)
            .get("control_stride", c.control_stride);
    });
    root.object("explain", [&](ObjectReader& r) {
        r.get("percentile", c.cam_percentile)
            .get("segments_per_class", c.cam_segments_per_class)
            .get("profile_segments_per_class", c.profile_segments_per_class)
            .get("selectivity_margin", c.selectivity_margin)
            .get("top_segments", c.top_segments);
    });
    root.finish();
    c.generator.seed = c.seed;
    c.validate();
    return c;
}

std::string config_json(const PipelineConfig& c)
{
    const auto& g = c.generator;
    const auto& t = c.train;
    json profiles = json::object();
    for (Phase p : kClasses) profiles[std::string(to_string(p))] = profile_json(synth::profile_for(g, p));
    json j = {
        {"seed", c.seed},
        {"signal", {{"sample_rate_hz", kSampleRateHz}, {"segment_length", kSegmentLength}}},
        {"cohort",
         {{"n_pps", c.n_pps},
          {"n_control", c.n_control},
          {"baseline_s", g.baseline_s},
          {"early_s", g.early_s},
          {"late_s", g.late_s},
          {"intermediate_s", g.intermediate_s}}},
        {"generator",
         {{"background_psd", g.background_psd == synth::BackgroundPsd::pink ? "pink" : "white"},
          {"background_uv", g.background_uv},
          {"theta_uv", g.theta_uv},
          {"spike_amplitude_uv", g.spike_amplitude_uv},
          {"sharp_wave_amplitude_uv", g.sharp_wave_amplitude_uv},
          {"spindle_amplitude_uv", g.spindle_amplitude_uv},
          {"hfo_amplitude_uv", g.hfo_amplitude_uv},
          {"artifact_rate_per_min", g.artifact_rate_per_min},
          {"artifact_amplitude_uv", g.artifact_amplitude_uv},
          {"loss_burst_rate_per_min", g.loss_burst_rate_per_min},
          {"loss_burst_min_s", g.loss_burst_min_s},
          {"loss_burst_max_s", g.loss_burst_max_s},
          {"subject_jitter", g.subject_jitter},
          {"circadian_depth", g.circadian_depth},
          {"circadian_period_s", g.circadian_period_s},
          {"profiles", profiles}}},
        {"preprocess",
         {{"outlier_window", c.outliers.window},
          {"mad_scale", c.outliers.mad_scale},
          {"max_missing_fraction", c.discard.max_missing_fraction}}},
        {"model",
         {{"name", std::string(zoo::to_string(c.model))}, {"kernel_width", c.kernel_width}, {"dropout_rate", c.dropout_rate}}},
        {"training",
         {{"budget_s_per_phase", c.budget_s_per_phase},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"early_stop_patience", t.early_stop_patience},
          {"lr", t.lr},
          {"cosine_decay", t.cosine_decay},
          {"val_fraction", t.val_fraction},
          {"steps_per_epoch", t.steps_per_epoch},
          {"max_val_segments", t.max_val_segments},
          {"phase_window_s", t.phase_window_s},
          {"dropout_seed", t.dropout_seed}}},
        {"evaluation",
         {{"pool_lengths", c.pool_lengths},
          {"report_pool_length_s", c.report_pool_length_s},
          {"sliding_aggregation", c.sliding_aggregation},
          {"timeline_smoothing_s", c.timeline_smoothing_s},
          {"control_stride", c.control_stride}}},
        {"explain",
         {{"percentile", c.cam_percentile},
          {"segments_per_class", c.cam_segments_per_class},
          {"profile_segments_per_class", c.profile_segments_per_class},
          {"selectivity_margin", c.selectivity_margin},
          {"top_segments", c.top_segments}}},
    };
    return j.dump(2) + "\n";
}

std::vector<std::string> PreparedData::ids(Group g) const
{
    std::vector<std::string> out;
    for (const auto& s : subjects)
        if (s.group == g) out.push_back(s.subject_id);
    return out;
}

const train::SubjectSegments& PreparedData::subject(const std::string& id) const
{
    for (const auto& s : cohort)
        if (s.subject_id == id) return s;
    throw ValidationError("subject '" + id + "' not present in the segment store");
}

PreparedData prepare(std::span<const Recording> recordings, const PipelineConfig& cfg, int threads)
{
    std::vector<preprocess::SegmentationResult> results(recordings.size());
    parallel_for(recordings.size(), threads, [&](std::size_t i) {
        results[i] = preprocess::preprocess_recording(recordings[i], cfg.outliers, cfg.discard);
    });
    PreparedData out;
    for (std::size_t i = 0; i < recordings.size(); ++i) {
        const auto& r = results[i];
        out.subjects.push_back({recordings[i].subject_id, recordings[i].group, static_cast<int>(r.kept.size()),
                                r.discarded, r.unlabeled, r.outliers_replaced});
        out.cohort.push_back({recordings[i].subject_id, recordings[i].group, std::move(results[i].kept)});
    }
    return out;
}

PreparedData assemble(std::vector<Segment> segments, std::vector<SubjectInfo> subjects)
{
    PreparedData out;
    out.cohort = train::group_by_subject(std::move(segments));
    for (auto& s : out.cohort) {
        const auto it = std::find_if(subjects.begin(), subjects.end(),
                                     [&](const SubjectInfo& i) { return i.subject_id == s.subject_id; });
        if (it == subjects.end())
            throw FormatError("subject '" + s.subject_id + "' in the store is missing from the subject table");
        s.group = it->group;
    }
    out.subjects = std::move(subjects);
    return out;
}

std::string subjects_json(std::span<const SubjectInfo> subjects)
{
    json arr = json::array();
    for (const auto& s : subjects)
        arr.push_back({{"subject_id", s.subject_id},
                       {"group", std::string(to_string(s.group))},
                       {"kept", s.kept},
                       {"discarded", s.discarded},
                       {"unlabeled", s.unlabeled},
                       {"outliers_replaced", s.outliers_replaced}});
    return json{{"subjects", arr}}.dump(2) + "\n";
}

std::vector<SubjectInfo> parse_subjects_json(std::string_view text)
{
    std::vector<SubjectInfo> out;
    try {
        const auto j = json::parse(text.begin(), text.end());
        for (const auto& s : j.at("subjects")) {
            SubjectInfo i;
            i.subject_id = s.at("subject_id").get<std::string>();
            const auto g = parse_group(s.at("group").get<std::string>());
            if (!g) throw FormatError("unknown group for subject '" + i.subject_id + "'");
            i.group = *g;
            i.kept = s.value("kept", 0);
            i.discarded = s.value("discarded", 0);
            i.unlabeled = s.value("unlabeled", 0);
            i.outliers_replaced = s.value("outliers_replaced", 0L);
            out.push_back(std::move(i));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("subject table: ") + e.what());
    }
    return out;
}

std::vector<FoldOutcome> run_folds(const PreparedData& data, const PipelineConfig& cfg, int threads,
                                   const FoldProgress& progress, std::span<const std::string> only)
{
    const auto pps = data.ids(Group::PPS);
    auto plans = train::make_folds(pps, cfg.budget_s_per_phase, cfg.seed);
    if (!only.empty()) {
        for (const auto& id : only)
            if (std::find(pps.begin(), pps.end(), id) == pps.end())
                throw ConfigError("fold '" + id + "' is not a PPS subject of this store");
        std::erase_if(plans, [&](const train::FoldPlan& p) {
            return std::find(only.begin(), only.end(), p.held_out_subject) == only.end();
        });
    }
    const auto spec = cfg.model_spec();
    std::vector<FoldOutcome> out(plans.size());
    std::mutex progress_mu;
    parallel_for(plans.size(), threads, [&](std::size_t i) {
        train::ProgressFn fn;
        if (progress)
            fn = [&, id = plans[i].held_out_subject](const train::EpochRecord& r) {
                std::lock_guard lock(progress_mu);
                progress(id, r);
            };
        out[i] = {plans[i], train::train_fold(plans[i], data.cohort, cfg.train, spec, fn)};
    });
    return out;
}

FoldEvaluation evaluate_fold(zoo::Model<float>& model, const std::string& held_out, const PreparedData& data,
                             const PipelineConfig& cfg)
{
    FoldEvaluation ev;
    ev.held_out = held_out;
    const auto& subject = data.subject(held_out);
    ev.trace = train::predict(model, subject.segments);
    ev.roc = metrics::roc_all(ev.trace);
    ev.scores = metrics::prf1_accuracy(metrics::confusion_counts(ev.trace));
    const metrics::AggregationConfig agg{cfg.report_pool_length_s, cfg.sliding_aggregation};
    const auto aggregated = metrics::aggregate(ev.trace, agg);
    ev.scores_aggregated = metrics::prf1_accuracy(metrics::confusion_counts(aggregated));
    try {
        ev.roc_aggregated = metrics::roc_all(aggregated);
    } catch (const ValidationError&) {
        // Too few aggregated rows for some class; the aggregated ROC stays empty.
    }
    ev.pool_curve = metrics::auc_vs_pool_curve(ev.trace, cfg.pool_lengths);

    std::vector<Segment> controls;
    for (const auto& id : data.ids(Group::Control)) {
        const auto& segs = data.subject(id).segments;
        for (std::size_t i = 0; i < segs.size(); i += static_cast<std::size_t>(cfg.control_stride)) controls.push_back(segs[i]);
    }
    if (!controls.empty()) {
        ev.control_trace = train::predict(model, controls);
        try {
            std::array<double, kNumClasses> auc{};
            const auto rocs = metrics::roc_all(ev.control_trace);
            for (int c = 0; c < kNumClasses; ++c) auc[static_cast<std::size_t>(c)] = rocs[static_cast<std::size_t>(c)].auc;
            ev.control_auc = auc;
        } catch (const ValidationError&) {
        }
    }
    return ev;
}

}  // namespace epg::pipeline
