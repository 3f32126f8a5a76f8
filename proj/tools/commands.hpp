#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epg/error.hpp"

namespace epg::cli {

// A run directory lacks artifacts another command should have produced.
struct MissingArtifacts : Error {
    explicit MissingArtifacts(std::vector<std::string> list)
        : Error("missing_artifact", "missing artifacts: " + join(list)), missing(std::move(list)) {}
    std::vector<std::string> missing;

    static std::string join(const std::vector<std::string>& v)
    {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
        return s;
    }
};

struct Common {
    std::string config_path;            // empty: defaults (or the run's saved config)
    std::optional<std::uint64_t> seed;  // --seed; EPG_SEED applies when unset
    bool quiet = false;
};

struct GenerateArgs {
    std::string out_dir;
};
struct PreprocessArgs {
    std::string in_dir;
    std::string out_store;
};
struct TrainArgs {
    std::string store;
    std::string run_dir;
    std::string model;
    std::vector<std::string> folds;
};
struct EvaluateArgs {
    std::string run_dir;
    std::string store;
    std::vector<std::string> checkpoints;
};
struct CamArgs {
    std::string checkpoint;
    std::string store;
    std::string out_dir;
    std::string subject;
    std::string events;
};
struct ReportArgs {
    std::string run_dir;
    std::string out_dir;
};
struct CountArgs {
    std::string model;
    std::optional<int> kernel_width;
    std::string out_dir;
};

int cmd_generate(const Common& c, const GenerateArgs& a);
int cmd_preprocess(const Common& c, const PreprocessArgs& a);
int cmd_train(const Common& c, const TrainArgs& a);
int cmd_evaluate(const Common& c, const EvaluateArgs& a);
int cmd_cam(const Common& c, const CamArgs& a);
int cmd_report(const Common& c, const ReportArgs& a);
int cmd_count(const Common& c, const CountArgs& a);

}  // namespace epg::cli
