#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "epg/signal_io.hpp"

namespace epg::synth {

struct MotifProfile {
    double theta_power_scale = 1.0;
    double spike_rate_hz = 0.0;
    double spike_width_ms = 30.0;
    double sharp_wave_rate_hz = 0.0;
    double sharp_wave_width_ms = 120.0;
    double spindle_rate_per_min = 0.0;
    double hfo_rate_per_min = 0.0;

    void validate() const;
};

enum class BackgroundPsd { pink, white };

enum class Motif : std::uint8_t { spike, sharp_wave, spindle, hfo, artifact, loss_burst };
std::string_view to_string(Motif m);

// One generated event. For spikes and sharp waves `time_s` is the peak and
// `width_ms` the main-lobe width (zero crossing to zero crossing); for bursts
// `time_s` is the centre and `width_ms` the duration; for loss bursts
// `time_s` is the onset.
struct MotifEvent {
    double time_s = 0.0;
    Motif motif = Motif::spike;
    double width_ms = 0.0;
    double amplitude = 0.0;
};

struct GeneratorConfig {
    std::uint64_t seed = 1;
    std::map<Phase, MotifProfile> class_profiles = default_profiles();

    BackgroundPsd background_psd = BackgroundPsd::pink;
    double background_uv = 30.0;  // background standard deviation
    double theta_uv = 25.0;       // theta standard deviation at power scale 1

    double spike_amplitude_uv = 110.0;
    double sharp_wave_amplitude_uv = 110.0;
    double spindle_amplitude_uv = 45.0;
    double hfo_amplitude_uv = 30.0;

    double artifact_rate_per_min = 0.5;
    double artifact_amplitude_uv = 2500.0;
    double loss_burst_rate_per_min = 0.35;
    double loss_burst_min_s = 1.0;
    double loss_burst_max_s = 10.0;

    // Log-normal per-subject parameter jitter (standard deviation of the log).
    double subject_jitter = 0.15;

    // Optional slow sinusoidal modulation of all motif rates.
    double circadian_depth = 0.0;
    double circadian_period_s = 3600.0;

    // Phase lengths used by make_cohort.
    double baseline_s = 7200.0;
    double early_s = 7200.0;
    double late_s = 7200.0;
    // Optional unlabeled stretch between the early and late phases.
    double intermediate_s = 0.0;

    void validate() const;
    static std::map<Phase, MotifProfile> default_profiles();
};

struct GeneratedRecording {
    Recording recording;
    std::vector<MotifEvent> events;  // sorted by time
};

using PhasePlan = std::vector<std::pair<Phase, double>>;

// Motif profile used for `phase`. Unlabeled stretches blend the early and
// late profiles.
MotifProfile profile_for(const GeneratorConfig& cfg, Phase phase);

GeneratedRecording generate_recording(const GeneratorConfig& cfg, const std::string& subject_id,
                                      const PhasePlan& plan, Group group = Group::PPS);

// PPS subjects follow Baseline -> EarlyEPG -> LateEPG; controls get the same
// phase marks but Baseline-profile signal throughout.
std::vector<GeneratedRecording> make_cohort(const GeneratorConfig& cfg, int n_pps, int n_control);

std::string pps_subject_id(int i);
std::string control_subject_id(int i);

void write_event_log(const std::vector<MotifEvent>& events, const std::string& path);
std::vector<MotifEvent> read_event_log(const std::string& path);

}  // namespace epg::synth
