#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "epg/bytes.hpp"
#include "epg/checkpoint.hpp"
#include "epg/explain.hpp"
#include "epg/pipeline.hpp"
#include "epg/runtime.hpp"
#include "manifest.hpp"

namespace epg::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using pipeline::PipelineConfig;

namespace {

std::string read_text(const std::string& path)
{
    const auto b = read_file(path);
    return {b.begin(), b.end()};
}

struct LoadedConfig {
    PipelineConfig cfg;
    std::string text;  // canonical form
};

// Explicit --config wins, then `fallback` when it exists, then defaults. The
// seed comes from --seed, then EPG_SEED, then the file.
LoadedConfig load_config(const Common& c, const std::string& fallback = {})
{
    PipelineConfig cfg;
    if (!c.config_path.empty()) {
        if (!fs::is_regular_file(c.config_path))
            throw ConfigError("config file '" + c.config_path + "' not found");
        cfg = pipeline::parse_config(read_text(c.config_path));
    } else if (!fallback.empty() && fs::is_regular_file(fallback)) {
        cfg = pipeline::parse_config(read_text(fallback));
    }
    if (const auto s = c.seed ? c.seed : seed_override()) {
        cfg.seed = *s;
        cfg.generator.seed = *s;
    }
    return {cfg, pipeline::config_json(cfg)};
}

// Collects every file a command writes so the manifest can list it.
class Writer {
public:
    Writer(const std::string& root, std::string command, const LoadedConfig& config)
        : root_(fs::absolute(root).lexically_normal().string())
    {
        fs::create_directories(root_);
        m_.command = std::move(command);
        m_.config_digest = blob_digest(config.text);
        m_.seeds.push_back(config.cfg.seed);
    }

    std::string path(const std::string& rel) const { return (fs::path(root_) / rel).string(); }

    void text(const std::string& rel, std::string_view content)
    {
        const auto p = fs::path(root_) / rel;
        fs::create_directories(p.parent_path());
        write_text(p.string(), content);
        m_.add_output(root_, p.string());
    }
    // Registers a file written by a library routine.
    void written(const std::string& rel) { m_.add_output(root_, path(rel)); }
    void dir(const std::string& rel) const { fs::create_directories(fs::path(root_) / rel); }

    void input(const std::string& file) { m_.input_digests.push_back(file_digest(file)); }
    void seed(std::uint64_t s) { m_.seeds.push_back(s); }

    void finish(const std::string& manifest_name)
    {
        std::sort(m_.outputs.begin(), m_.outputs.end(), [](const Output& a, const Output& b) { return a.path < b.path; });
        m_.write(path(manifest_name));
    }

private:
    std::string root_;
    RunManifest m_;
};

std::vector<std::string> files_with_extension(const std::string& dir, const std::string& ext)
{
    if (!fs::is_directory(dir)) throw IoError("input directory '" + dir + "' not found");
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

pipeline::PreparedData load_store(const std::string& store)
{
    if (!fs::is_regular_file(store)) throw IoError("segment store '" + store + "' not found");
    const auto table = store + ".json";
    if (!fs::is_regular_file(table)) throw IoError("subject table '" + table + "' not found next to the store");
    return pipeline::assemble(read_store(store), pipeline::parse_subjects_json(read_text(table)));
}

std::string fixed(double v, int digits = 6)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

json scores_json(const metrics::MetricsReport& r)
{
    auto one = [](const metrics::Scores& s) {
        return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"accuracy", s.accuracy},
                    {"undefined", s.precision_undefined || s.recall_undefined || s.f1_undefined}};
    };
    json j = json::object();
    for (int c = 0; c < kNumClasses; ++c) j[std::string(to_string(kClasses[c]))] = one(r.per_class[c]);
    j["macro"] = one(r.macro);
    return j;
}

std::string held_out_of(const fs::path& checkpoint)
{
    const auto fold_json = checkpoint.parent_path() / "fold.json";
    if (fs::is_regular_file(fold_json)) {
        const auto j = json::parse(read_text(fold_json.string()));
        return j.at("held_out").get<std::string>();
    }
    return checkpoint.parent_path().filename().string();
}

void log(const Common& c, const std::string& line)
{
    if (!c.quiet) std::cerr << line << '\n';
}

}  // namespace

int cmd_generate(const Common& c, const GenerateArgs& a)
{
    if (c.config_path.empty()) throw ConfigError("generate needs --config");
    const auto config = load_config(c);
    const auto& cfg = config.cfg;
    auto cohort = synth::make_cohort(cfg.generator, cfg.n_pps, cfg.n_control);
    Writer w(a.out_dir, "generate", config);
    for (const auto& g : cohort) {
        const auto& id = g.recording.subject_id;
        write_recording(g.recording, w.path(id + ".epgr"));
        w.written(id + ".epgr");
        synth::write_event_log(g.events, w.path(id + ".events.csv"));
        w.written(id + ".events.csv");
        log(c, "generated " + id + " (" + fixed(g.recording.duration_s(), 0) + " s, " +
                   std::to_string(g.events.size()) + " events)");
    }
    w.text("config.json", config.text);
    w.finish("manifest.json");
    return 0;
}

int cmd_preprocess(const Common& c, const PreprocessArgs& a)
{
    const auto config = load_config(c, (fs::path(a.in_dir) / "config.json").string());
    const auto files = files_with_extension(a.in_dir, ".epgr");
    if (files.empty()) throw IoError("no recordings (*.epgr) in '" + a.in_dir + "'");
    std::vector<Recording> recordings;
    for (const auto& f : files) recordings.push_back(read_recording(f));
    const auto data = pipeline::prepare(recordings, config.cfg, thread_count());

    std::vector<Segment> flat;
    for (const auto& s : data.cohort) flat.insert(flat.end(), s.segments.begin(), s.segments.end());
    const fs::path store(a.out_store);
    const auto root = store.has_parent_path() ? store.parent_path().string() : std::string(".");
    Writer w(root, "preprocess", config);
    for (const auto& f : files) w.input(f);
    write_store(flat, store.string());
    w.written(store.filename().string());
    w.text(store.filename().string() + ".json", pipeline::subjects_json(data.subjects));
    for (const auto& s : data.subjects)
        log(c, s.subject_id + ": kept " + std::to_string(s.kept) + ", discarded " + std::to_string(s.discarded) +
                   ", unlabeled " + std::to_string(s.unlabeled));
    w.finish(store.filename().string() + ".manifest.json");
    return 0;
}

int cmd_train(const Common& c, const TrainArgs& a)
{
    auto config = load_config(c, (fs::path(a.run_dir) / "config.json").string());
    if (!a.model.empty()) {
        const auto m = zoo::parse_model_name(a.model);
        if (!m) throw ConfigError("unknown model '" + a.model + "'");
        config.cfg.model = *m;
        config.text = pipeline::config_json(config.cfg);
    }
    const auto data = load_store(a.store);
    const auto& cfg = config.cfg;
    const auto folds = pipeline::run_folds(
        data, cfg, thread_count(),
        [&](const std::string& id, const train::EpochRecord& r) {
            log(c, id + " epoch " + std::to_string(r.epoch) + " train_loss " + fixed(r.train_loss, 4) + " val_loss " +
                       fixed(r.val_loss, 4) + " val_accuracy " + fixed(r.val_accuracy, 4));
        },
        a.folds);

    Writer w(a.run_dir, "train", config);
    w.input(a.store);
    w.text("config.json", config.text);
    for (const auto& f : folds) {
        const auto dir = "folds/" + f.plan.held_out_subject + "/";
        w.dir(dir);
        w.seed(f.plan.seed);
        save_checkpoint(f.result.model, w.path(dir + "checkpoint.epgw"));
        w.written(dir + "checkpoint.epgw");
        std::ostringstream curve;
        train::write_curve_csv(f.result.curve, curve);
        w.text(dir + "curve.csv", curve.str());
        const json fj = {{"held_out", f.plan.held_out_subject},
                         {"train_subjects", f.plan.train_subjects},
                         {"seed", f.plan.seed},
                         {"model", std::string(zoo::to_string(cfg.model))},
                         {"best_epoch", f.result.best_epoch},
                         {"best_val_loss", f.result.curve.empty() ? json(nullptr) : json(f.result.best_val_loss)},
                         {"n_train", f.result.n_train},
                         {"n_val", f.result.n_val},
                         {"warnings", f.result.warnings}};
        w.text(dir + "fold.json", fj.dump(2) + "\n");
        for (const auto& warn : f.result.warnings) log(c, "warning: " + warn);
    }
    w.finish("train.manifest.json");
    return 0;
}

int cmd_evaluate(const Common& c, const EvaluateArgs& a)
{
    std::vector<fs::path> checkpoints(a.checkpoints.begin(), a.checkpoints.end());
    if (checkpoints.empty() && fs::is_directory(fs::path(a.run_dir) / "folds"))
        for (const auto& e : fs::directory_iterator(fs::path(a.run_dir) / "folds"))
            if (fs::is_regular_file(e.path() / "checkpoint.epgw")) checkpoints.push_back(e.path() / "checkpoint.epgw");
    if (checkpoints.empty()) throw ConfigError("no checkpoints to evaluate");
    std::sort(checkpoints.begin(), checkpoints.end());
    for (const auto& p : checkpoints)
        if (!fs::is_regular_file(p)) throw IoError("checkpoint '" + p.string() + "' not found");

    const auto config = load_config(c, (fs::path(a.run_dir) / "config.json").string());
    const auto data = load_store(a.store);
    std::vector<pipeline::FoldEvaluation> evals(checkpoints.size());
    pipeline::parallel_for(checkpoints.size(), thread_count(), [&](std::size_t i) {
        auto model = load_checkpoint(checkpoints[i].string());
        evals[i] = pipeline::evaluate_fold(model, held_out_of(checkpoints[i]), data, config.cfg);
    });

    Writer w(a.run_dir, "evaluate", config);
    w.input(a.store);
    for (const auto& p : checkpoints) w.input(p.string());
    for (const auto& ev : evals) {
        const auto dir = "folds/" + ev.held_out + "/";
        w.text(dir + "trace.csv", metrics::trace_csv(ev.trace));
        if (!ev.control_trace.empty()) w.text(dir + "control_trace.csv", metrics::trace_csv(ev.control_trace));
        w.text(dir + "roc.csv", metrics::roc_csv(ev.roc));
        if (!ev.roc_aggregated[0].points.empty()) w.text(dir + "roc_aggregated.csv", metrics::roc_csv(ev.roc_aggregated));
        w.text(dir + "pool_curve.csv", metrics::pool_curve_csv(ev.pool_curve));
        metrics::write_roc_svg(ev.roc, ev.held_out + " one-vs-all ROC", w.path(dir + "roc.svg"));
        w.written(dir + "roc.svg");

        json auc = json::object();
        for (int k = 0; k < kNumClasses; ++k) auc[std::string(to_string(kClasses[k]))] = ev.roc[k].auc;
        json j = {{"held_out", ev.held_out}, {"segments", ev.trace.size()}, {"auc", auc},
                  {"scores", scores_json(ev.scores)}, {"scores_aggregated", scores_json(ev.scores_aggregated)},
                  {"report_pool_length_s", config.cfg.report_pool_length_s}};
        if (ev.control_auc) {
            json cj = json::object();
            for (int k = 0; k < kNumClasses; ++k) cj[std::string(to_string(kClasses[k]))] = (*ev.control_auc)[k];
            j["control_auc"] = cj;
        }
        w.text(dir + "evaluation.json", j.dump(2) + "\n");
        log(c, ev.held_out + ": AUC " + fixed(ev.roc[0].auc, 3) + " " + fixed(ev.roc[1].auc, 3) + " " +
                   fixed(ev.roc[2].auc, 3));
    }
    w.finish("evaluate.manifest.json");
    return 0;
}

int cmd_cam(const Common& c, const CamArgs& a)
{
    if (!fs::is_regular_file(a.checkpoint)) throw IoError("checkpoint '" + a.checkpoint + "' not found");
    const fs::path ckpt(a.checkpoint);
    const auto run_dir = ckpt.parent_path().parent_path().parent_path();
    const auto config = load_config(c, (run_dir / "config.json").string());
    const auto& cfg = config.cfg;
    auto fmodel = load_checkpoint(a.checkpoint);
    auto model = fmodel.cast<double>();
    const auto data = load_store(a.store);

    std::string subject = a.subject;
    if (subject.empty()) subject = fs::is_regular_file(ckpt.parent_path() / "fold.json") ? held_out_of(ckpt) : "";
    if (subject.empty()) {
        const auto pps = data.ids(Group::PPS);
        if (pps.empty()) throw ValidationError("the store holds no PPS subject");
        subject = pps.front();
    }
    const auto& segs = data.subject(subject).segments;

    Writer w(a.out_dir, "cam", config);
    w.input(a.checkpoint);
    w.input(a.store);

    // Most confident segments of each class, each explained under all three labels.
    const auto trace = train::predict(fmodel, segs);
    std::map<double, std::size_t> by_time;
    for (std::size_t i = 0; i < segs.size(); ++i) by_time[segs[i].start_time_s] = i;
    for (int k = 0; k < kNumClasses; ++k) {
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t i = 0; i < trace.size(); ++i)
            if (trace.labels[i] == kClasses[k]) ranked.emplace_back(-trace.probs[i][k], by_time.at(trace.times[i]));
        std::sort(ranked.begin(), ranked.end());
        const auto n = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(cfg.cam_segments_per_class));
        for (std::size_t r = 0; r < n; ++r) {
            const auto& seg = segs[ranked[r].second];
            const auto sweep = explain::cam_sweep(model, seg, cfg.cam_percentile);
            for (int as = 0; as < kNumClasses; ++as) {
                const auto stem = "cam/" + std::string(to_string(kClasses[k])) + "_" + std::to_string(r + 1) + "_as_" +
                                  std::string(to_string(kClasses[as]));
                w.text(stem + ".csv", explain::cam_csv(sweep[as]));
                w.dir("cam");
                explain::write_cam_svg(seg, sweep[as], w.path(stem + ".svg"));
                w.written(stem + ".svg");
            }
        }
    }

    // Channel profile on an evenly strided sample of each class.
    std::vector<Segment> sample;
    for (Phase p : kClasses) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < segs.size(); ++i)
            if (segs[i].label == p) idx.push_back(i);
        const auto cap = static_cast<std::size_t>(cfg.profile_segments_per_class);
        const std::size_t stride = std::max<std::size_t>(1, (idx.size() + cap - 1) / cap);
        for (std::size_t j = 0; j < idx.size(); j += stride) sample.push_back(segs[idx[j]]);
    }
    const auto profile = explain::channel_profile(model, sample);
    w.text("profile.csv", explain::profile_csv(profile));
    const auto selective = explain::selective_channels(profile, cfg.selectivity_margin);
    json sel = json::array();
    for (const auto& s : selective)
        sel.push_back({{"channel", s.channel}, {"class", std::string(to_string(kClasses[s.class_id]))}, {"margin", s.margin}});
    w.text("selective_channels.json", sel.dump(2) + "\n");

    std::ostringstream top;
    top << "channel,class,rank,subject_id,start_time_s,label,score\n";
    for (std::size_t s = 0; s < std::min<std::size_t>(selective.size(), 3); ++s) {
        const auto ranked = explain::max_activating_segments(model, selective[s].channel, std::span<const Segment>(sample),
                                                             static_cast<std::size_t>(cfg.top_segments));
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            const auto& seg = sample[ranked[r].index];
            top << selective[s].channel << ',' << to_string(kClasses[selective[s].class_id]) << ',' << r + 1 << ','
                << seg.subject_id << ',' << fixed(seg.start_time_s, 3) << ',' << to_string(seg.label) << ','
                << fixed(ranked[r].score) << '\n';
        }
    }
    w.text("top_segments.csv", top.str());

    if (!a.events.empty()) {
        const auto events = synth::read_event_log(a.events);
        w.input(a.events);
        std::vector<synth::MotifEvent> waves;
        for (const auto& e : events)
            if (e.motif == synth::Motif::sharp_wave) waves.push_back(e);
        int n = 0, hits = 0;
        const int late = class_index(Phase::LateEPG);
        for (const auto& seg : segs) {
            if (seg.label != Phase::LateEPG || n >= cfg.profile_segments_per_class) continue;
            const double t0 = seg.start_time_s, t1 = t0 + kSegmentSeconds;
            std::vector<const synth::MotifEvent*> inside;
            for (const auto& e : waves) {
                const auto x = explain::event_extent(e);
                if (x.begin >= t0 && x.end <= t1) inside.push_back(&e);
            }
            if (inside.empty()) continue;
            const auto m = explain::cam(model, seg, late, cfg.cam_percentile);
            double best = 0;
            for (const auto* e : inside) best = std::max(best, explain::event_iou(m, t0, *e));
            ++n;
            hits += best > 0.3;
        }
        const json j = {{"subject_id", subject}, {"segments", n}, {"iou_above_0.3", hits},
                        {"fraction", n ? static_cast<double>(hits) / n : 0.0}};
        w.text("event_overlap.json", j.dump(2) + "\n");
        log(c, "CAM/event IoU > 0.3 on " + std::to_string(hits) + " of " + std::to_string(n) + " late-EPG segments");
    }
    log(c, std::to_string(selective.size()) + " class-selective channels");
    w.finish("manifest.json");
    return 0;
}

int cmd_report(const Common& c, const ReportArgs& a)
{
    const fs::path run(a.run_dir);
    std::vector<std::string> missing;
    if (!fs::is_regular_file(run / "config.json")) missing.push_back("config.json");
    std::vector<std::string> folds;
    if (fs::is_directory(run / "folds"))
        for (const auto& e : fs::directory_iterator(run / "folds"))
            if (e.is_directory()) folds.push_back(e.path().filename().string());
    std::sort(folds.begin(), folds.end());
    if (folds.empty()) missing.push_back("folds/<subject>/trace.csv");
    for (const auto& f : folds)
        if (!fs::is_regular_file(run / "folds" / f / "trace.csv")) missing.push_back("folds/" + f + "/trace.csv");
    if (!missing.empty()) throw MissingArtifacts(missing);

    const auto config = load_config(c, (run / "config.json").string());
    const auto& cfg = config.cfg;
    const metrics::AggregationConfig agg{cfg.report_pool_length_s, cfg.sliding_aggregation};

    std::vector<PredictionTrace> traces, controls;
    for (const auto& f : folds) {
        traces.push_back(metrics::parse_trace_csv(read_text((run / "folds" / f / "trace.csv").string())));
        const auto ct = run / "folds" / f / "control_trace.csv";
        controls.push_back(fs::is_regular_file(ct) ? metrics::parse_trace_csv(read_text(ct.string())) : PredictionTrace{});
    }

    const auto out_dir = a.out_dir.empty() ? (run / "report").string() : a.out_dir;
    Writer w(out_dir, "report", config);
    for (const auto& f : folds) w.input((run / "folds" / f / "trace.csv").string());

    std::vector<metrics::MetricsReport> plain, pooled;
    PredictionTrace all, all_aggregated;
    std::vector<std::array<double, kNumClasses>> aucs;
    std::vector<std::vector<metrics::PoolAuc>> curves;
    for (const auto& t : traces) {
        const auto ta = metrics::aggregate(t, agg);
        plain.push_back(metrics::prf1_accuracy(metrics::confusion_counts(t)));
        pooled.push_back(metrics::prf1_accuracy(metrics::confusion_counts(ta)));
        const auto roc = metrics::roc_all(t);
        aucs.push_back({roc[0].auc, roc[1].auc, roc[2].auc});
        curves.push_back(metrics::auc_vs_pool_curve(t, cfg.pool_lengths));
        for (std::size_t i = 0; i < t.size(); ++i) all.push_back(t.subject_ids[i], t.times[i], t.labels[i], t.probs[i]);
        for (std::size_t i = 0; i < ta.size(); ++i)
            all_aggregated.push_back(ta.subject_ids[i], ta.times[i], ta.labels[i], ta.probs[i]);
    }
    const std::string model(zoo::to_string(cfg.model));
    w.text("metrics_table.csv", metrics::metrics_table_csv(model, plain));
    w.text("metrics_table_aggregated.csv", metrics::metrics_table_csv(model, pooled));

    const auto roc = metrics::roc_all(all);
    w.text("roc.csv", metrics::roc_csv(roc));
    metrics::write_roc_svg(roc, "One-vs-all ROC, held-out subjects", w.path("roc.svg"));
    w.written("roc.svg");
    try {
        const auto roc_agg = metrics::roc_all(all_aggregated);
        w.text("roc_aggregated.csv", metrics::roc_csv(roc_agg));
        metrics::write_roc_svg(roc_agg, "One-vs-all ROC, " + std::to_string(cfg.report_pool_length_s) + " s aggregation",
                               w.path("roc_aggregated.svg"));
        w.written("roc_aggregated.svg");
    } catch (const ValidationError& e) {
        log(c, std::string("aggregated ROC skipped: ") + e.what());
    }

    // Fold-mean AUC per pool length; a length missing from any fold is absent.
    std::vector<metrics::PoolAuc> mean_curve;
    for (std::size_t p = 0; p < cfg.pool_lengths.size(); ++p) {
        metrics::PoolAuc m;
        m.pool_length_s = cfg.pool_lengths[p];
        double macro = 0;
        std::array<double, kNumClasses> per{};
        bool complete = true;
        for (const auto& cv : curves) {
            complete = complete && cv[p].macro.has_value();
            if (!complete) break;
            macro += *cv[p].macro;
            for (int k = 0; k < kNumClasses; ++k) per[k] += cv[p].per_class[k].value_or(0.0);
            m.rows += cv[p].rows;
        }
        if (complete) {
            const double n = static_cast<double>(curves.size());
            m.macro = macro / n;
            for (int k = 0; k < kNumClasses; ++k) m.per_class[k] = per[k] / n;
        }
        mean_curve.push_back(m);
    }
    w.text("pool_curve.csv", metrics::pool_curve_csv(mean_curve));
    metrics::write_pool_curve_svg(mean_curve, "Macro AUC against pooling length", w.path("pool_curve.svg"));
    w.written("pool_curve.svg");

    const auto timeline = metrics::class_score_timeline(traces.front(), cfg.timeline_smoothing_s);
    w.text("timeline.csv", metrics::timeline_csv(timeline));
    metrics::write_timeline_svg(timeline, w.path("timeline.svg"));
    w.written("timeline.svg");

    json control = nullptr;
    if (!controls.front().empty()) {
        const auto& ct = controls.front();
        PredictionTrace one;
        for (std::size_t i = 0; i < ct.size(); ++i)
            if (ct.subject_ids[i] == ct.subject_ids.front()) one.push_back(ct.subject_ids[i], ct.times[i], ct.labels[i], ct.probs[i]);
        const auto ctl = metrics::class_score_timeline(one, cfg.timeline_smoothing_s);
        w.text("control_timeline.csv", metrics::timeline_csv(ctl));
        metrics::write_timeline_svg(ctl, w.path("control_timeline.svg"));
        w.written("control_timeline.svg");
        control = json::object();
        for (int k = 0; k < kNumClasses; ++k) {
            std::vector<double> v;
            for (const auto& t : controls)
                if (!t.empty()) v.push_back(metrics::roc_auc_ova(t, k).auc);
            const auto s = metrics::summarize(v);
            control[std::string(to_string(kClasses[k]))] = {{"mean", s.mean}, {"std", s.std}};
        }
    }

    json per_fold = json::array();
    json auc_summary = json::object();
    std::vector<double> macro;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        macro.push_back((aucs[i][0] + aucs[i][1] + aucs[i][2]) / 3.0);
        per_fold.push_back({{"held_out", folds[i]}, {"auc", aucs[i]}, {"macro_auc", macro.back()}});
    }
    for (int k = 0; k < kNumClasses; ++k) {
        std::vector<double> v;
        for (const auto& x : aucs) v.push_back(x[k]);
        const auto s = metrics::summarize(v);
        auc_summary[std::string(to_string(kClasses[k]))] = {{"mean", s.mean}, {"std", s.std}};
    }
    const auto ms = metrics::summarize(macro);
    auc_summary["macro"] = {{"mean", ms.mean}, {"std", ms.std}};
    const json summary = {{"model", model},
                          {"folds", per_fold},
                          {"auc", auc_summary},
                          {"control_auc", control},
                          {"report_pool_length_s", cfg.report_pool_length_s},
                          {"timeline_smoothing_s", cfg.timeline_smoothing_s}};
    w.text("summary.json", summary.dump(2) + "\n");

    std::ostringstream md;
    md << "# " << model << " run summary\n\n"
       << "| held-out | AUC " << to_string(kClasses[0]) << " | AUC " << to_string(kClasses[1]) << " | AUC "
       << to_string(kClasses[2]) << " | macro |\n|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < folds.size(); ++i)
        md << "| " << folds[i] << " | " << fixed(aucs[i][0], 3) << " | " << fixed(aucs[i][1], 3) << " | "
           << fixed(aucs[i][2], 3) << " | " << fixed(macro[i], 3) << " |\n";
    md << "\nMean macro AUC " << fixed(ms.mean, 3) << " (sd " << fixed(ms.std, 3) << ").\n\n"
       << "Figures: roc.svg, roc_aggregated.svg, pool_curve.svg, timeline.svg"
       << (control.is_null() ? "" : ", control_timeline.svg") << ".\n"
       << "Tables: metrics_table.csv (per segment), metrics_table_aggregated.csv (" << cfg.report_pool_length_s
       << " s pooling).\n";
    w.text("summary.md", md.str());
    w.finish("manifest.json");
    log(c, "report written to " + out_dir);
    return 0;
}

int cmd_count(const Common& c, const CountArgs& a)
{
    const auto m = zoo::parse_model_name(a.model);
    if (!m) throw ConfigError("unknown model '" + a.model + "'");
    zoo::BuildOptions o;
    o.kernel_width = a.kernel_width;
    const auto report = zoo::count_trainables(zoo::make_spec(*m, o));
    std::ostringstream csv, notes;
    zoo::write_count_csv(report, csv);
    zoo::write_count_notes(report, notes);
    if (a.out_dir.empty()) {
        std::cout << csv.str() << '\n' << notes.str();
        return 0;
    }
    Writer w(a.out_dir, "count", load_config(c));
    w.text("count_" + a.model + ".csv", csv.str());
    w.text("count_" + a.model + ".txt", notes.str());
    w.finish("count_" + a.model + ".manifest.json");
    return 0;
}

}  // namespace epg::cli
