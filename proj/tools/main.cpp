#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "manifest.hpp"
#include "epg/runtime.hpp"

using namespace epg;
using namespace epg::cli;

namespace {

int report_error(const std::string& kind, const std::string& message, int code,
                 const std::vector<std::string>& missing = {})
{
    nlohmann::json j = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    if (!missing.empty()) j["error"]["missing"] = missing;
    std::cerr << j.dump() << std::endl;
    return code;
}

int exit_code_for(const Error& e)
{
    if (e.kind() == "io") return 3;
    if (e.kind() == "numeric") return 4;
    return 2;
}

}  // namespace

int main(int argc, char** argv)
{
    tune_allocator();

    CLI::App app{"Epileptogenesis staging from single-channel recordings: synthetic cohorts, training, evaluation and "
                 "class activation maps."};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON configuration; absent keys keep their defaults");
        sub->add_option("--seed", common.seed, "Override the configuration seed (EPG_SEED does the same)");
        sub->add_flag("-q,--quiet", common.quiet, "No progress output on stderr");
    };

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic cohort: recordings, event logs, manifest");
    add_common(g);
    g->add_option("--out", gen.out_dir, "Output directory")->required();

    PreprocessArgs pre;
    auto* p = app.add_subcommand("preprocess", "Repair outliers, segment and label recordings into a segment store");
    add_common(p);
    p->add_option("--in", pre.in_dir, "Directory of *.epgr recordings")->required();
    p->add_option("--out", pre.out_store, "Segment store to write; the subject table goes to <store>.json")->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Leave-one-subject-out training over the PPS subjects of a store");
    add_common(t);
    t->add_option("--store", tr.store, "Segment store")->required();
    t->add_option("--run", tr.run_dir, "Run directory receiving folds/<subject>/")->required();
    t->add_option("--model", tr.model, "Model name, overriding the configuration (Proposed4, Proposed16, EEGNet2, FNN, DCNN)");
    t->add_option("--fold", tr.folds, "Train only these held-out subjects (repeatable)");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Score held-out and control subjects with trained checkpoints");
    add_common(e);
    e->add_option("--run", ev.run_dir, "Run directory")->required();
    e->add_option("--store", ev.store, "Segment store")->required();
    e->add_option("--checkpoint", ev.checkpoints,
                  "Checkpoint to evaluate (repeatable); default: every folds/*/checkpoint.epgw of the run");

    CamArgs cm;
    auto* c = app.add_subcommand("cam", "Class activation maps, channel profiles and max-activating segments");
    add_common(c);
    c->add_option("--checkpoint", cm.checkpoint, "Trained checkpoint")->required();
    c->add_option("--store", cm.store, "Segment store")->required();
    c->add_option("--out", cm.out_dir, "Output directory")->required();
    c->add_option("--subject", cm.subject, "Subject to explain; default: the checkpoint's held-out subject");
    c->add_option("--events", cm.events, "Generator event log of that subject, for CAM/event overlap");

    ReportArgs rp;
    auto* r = app.add_subcommand("report", "Assemble tables and figures of an evaluated run");
    add_common(r);
    r->add_option("--run", rp.run_dir, "Run directory")->required();
    r->add_option("--out", rp.out_dir, "Report directory; default <run>/report");

    CountArgs ct;
    auto* n = app.add_subcommand("count", "Trainable-parameter count with a per-layer breakdown");
    add_common(n);
    n->add_option("--model", ct.model, "Model name")->required();
    n->add_option("--kernel-width", ct.kernel_width, "Convolution width of the proposed models");
    n->add_option("--out", ct.out_dir, "Write count_<model>.csv/.txt here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& s) {
        return app.exit(s);
    } catch (const CLI::ParseError& pe) {
        return report_error("usage", pe.what(), 2);
    }

    try {
        if (g->parsed()) return cmd_generate(common, gen);
        if (p->parsed()) return cmd_preprocess(common, pre);
        if (t->parsed()) return cmd_train(common, tr);
        if (e->parsed()) return cmd_evaluate(common, ev);
        if (c->parsed()) return cmd_cam(common, cm);
        if (r->parsed()) return cmd_report(common, rp);
        if (n->parsed()) return cmd_count(common, ct);
    } catch (const MissingArtifacts& m) {
        return report_error(m.kind(), m.what(), 3, m.missing);
    } catch (const Error& err) {
        return report_error(err.kind(), err.what(), exit_code_for(err));
    } catch (const std::filesystem::filesystem_error& fe) {
        return report_error("io", fe.what(), 3);
    } catch (const std::exception& ex) {
        return report_error("internal", ex.what(), 2);
    }
    return 2;
}
