#include "epg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "epg/error.hpp"
#include "epg/rng.hpp"

namespace epg::synth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFs = kSampleRateHz;

// RBJ audio-EQ-cookbook biquad, direct form I, double precision.
class Biquad {
public:
    static Biquad lowpass(double f0, double q) { return make(f0, q, Kind::low); }
    static Biquad highpass(double f0, double q) { return make(f0, q, Kind::high); }
    static Biquad bandpass(double f0, double q) { return make(f0, q, Kind::band); }
    static Biquad notch(double f0, double q) { return make(f0, q, Kind::notch); }

    double operator()(double x)
    {
        const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
        x2_ = x1_;
        x1_ = x;
        y2_ = y1_;
        y1_ = y;
        return y;
    }

private:
    enum class Kind { low, high, band, notch };

    static Biquad make(double f0, double q, Kind kind)
    {
        const double w0 = 2.0 * kPi * f0 / kFs;
        const double c = std::cos(w0);
        const double alpha = std::sin(w0) / (2.0 * q);
        double b0 = 0, b1 = 0, b2 = 0;
        switch (kind) {
        case Kind::low: b0 = b2 = (1 - c) / 2; b1 = 1 - c; break;
        case Kind::high: b0 = b2 = (1 + c) / 2; b1 = -(1 + c); break;
        case Kind::band: b0 = alpha; b1 = 0; b2 = -alpha; break;
        case Kind::notch: b0 = b2 = 1; b1 = -2 * c; break;
        }
        const double a0 = 1 + alpha;
        Biquad f;
        f.b0_ = b0 / a0;
        f.b1_ = b1 / a0;
        f.b2_ = b2 / a0;
        f.a1_ = -2 * c / a0;
        f.a2_ = (1 - alpha) / a0;
        return f;
    }

    double b0_ = 1, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
    double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

// Paul Kellet's refined pink-noise filter.
class PinkFilter {
public:
    double operator()(double w)
    {
        b_[0] = 0.99886 * b_[0] + w * 0.0555179;
        b_[1] = 0.99332 * b_[1] + w * 0.0750759;
        b_[2] = 0.96900 * b_[2] + w * 0.1538520;
        b_[3] = 0.86650 * b_[3] + w * 0.3104856;
        b_[4] = 0.55000 * b_[4] + w * 0.5329522;
        b_[5] = -0.7616 * b_[5] - w * 0.0168980;
        const double out = b_[0] + b_[1] + b_[2] + b_[3] + b_[4] + b_[5] + b_[6] + w * 0.5362;
        b_[6] = w * 0.115926;
        return out;
    }

private:
    double b_[7] = {};
};

enum Stream : std::uint64_t { kJitter = 1, kBackground, kTheta, kMotifs, kArtifacts, kLoss };

Rng stream(const GeneratorConfig& cfg, const std::string& subject, Stream s)
{
    return Rng(hash_combine(hash_combine(cfg.seed, hash_string(subject)), s));
}

void normalise(std::vector<double>& x, double target_sd)
{
    if (x.empty()) return;
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(x.size()));
    const double g = sd > 0 ? target_sd / sd : 0.0;
    for (double& v : x) v = (v - mean) * g;
}

struct SubjectParams {
    double background_uv, theta_uv, spike_amp, sharp_amp, spindle_amp, hfo_amp;
    std::map<Phase, MotifProfile> profiles;
};

SubjectParams jitter(const GeneratorConfig& cfg, const std::string& subject)
{
    Rng rng = stream(cfg, subject, kJitter);
    const double j = cfg.subject_jitter;
    auto f = [&](double sd) { return std::exp(sd * rng.normal()); };
    SubjectParams p;
    p.background_uv = cfg.background_uv * f(j);
    p.theta_uv = cfg.theta_uv * f(j);
    p.spike_amp = cfg.spike_amplitude_uv * f(j);
    p.sharp_amp = cfg.sharp_wave_amplitude_uv * f(j);
    p.spindle_amp = cfg.spindle_amplitude_uv * f(j);
    p.hfo_amp = cfg.hfo_amplitude_uv * f(j);
    for (auto [phase, prof] : cfg.class_profiles) {
        prof.theta_power_scale *= f(j);
        prof.spike_rate_hz *= f(j);
        prof.spike_width_ms *= f(j / 2);
        prof.sharp_wave_rate_hz *= f(j);
        prof.sharp_wave_width_ms *= f(j / 2);
        prof.spindle_rate_per_min *= f(j);
        prof.hfo_rate_per_min *= f(j);
        p.profiles[phase] = prof;
    }
    return p;
}

MotifProfile blend(const MotifProfile& a, const MotifProfile& b)
{
    MotifProfile m;
    m.theta_power_scale = 0.5 * (a.theta_power_scale + b.theta_power_scale);
    m.spike_rate_hz = 0.5 * (a.spike_rate_hz + b.spike_rate_hz);
    m.spike_width_ms = 0.5 * (a.spike_width_ms + b.spike_width_ms);
    m.sharp_wave_rate_hz = 0.5 * (a.sharp_wave_rate_hz + b.sharp_wave_rate_hz);
    m.sharp_wave_width_ms = 0.5 * (a.sharp_wave_width_ms + b.sharp_wave_width_ms);
    m.spindle_rate_per_min = 0.5 * (a.spindle_rate_per_min + b.spindle_rate_per_min);
    m.hfo_rate_per_min = 0.5 * (a.hfo_rate_per_min + b.hfo_rate_per_min);
    return m;
}

MotifProfile lookup(const std::map<Phase, MotifProfile>& profiles, Phase phase)
{
    auto get = [&](Phase p) {
        const auto it = profiles.find(p);
        if (it == profiles.end()) throw ConfigError("no motif profile for phase " + std::string(to_string(p)));
        return it->second;
    };
    if (phase == Phase::Unlabeled) {
        const auto it = profiles.find(Phase::Unlabeled);
        return it != profiles.end() ? it->second : blend(get(Phase::EarlyEPG), get(Phase::LateEPG));
    }
    return get(phase);
}

// Homogeneous-rate Poisson events on [t0, t1) thinned by the circadian factor.
std::vector<double> poisson_times(Rng& rng, double rate_hz, double t0, double t1, const GeneratorConfig& cfg)
{
    std::vector<double> out;
    if (rate_hz <= 0) return out;
    const double depth = cfg.circadian_depth;
    const double peak = rate_hz * (1.0 + depth);
    for (double t = t0 + rng.exponential(peak); t < t1; t += rng.exponential(peak)) {
        const double accept = (1.0 + depth * std::sin(2.0 * kPi * t / cfg.circadian_period_s)) / (1.0 + depth);
        if (depth == 0.0 || rng.uniform() < accept) out.push_back(t);
    }
    return out;
}

void add_mexican_hat(std::vector<double>& x, double centre_s, double width_ms, double amp)
{
    const double sigma = width_ms / 2000.0 * kFs;  // samples
    const double c = centre_s * kFs;
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(c - 5 * sigma)));
    const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil(c + 5 * sigma)));
    for (auto i = lo; i <= hi; ++i) {
        const double u = (static_cast<double>(i) - c) / sigma;
        x[static_cast<std::size_t>(i)] += amp * (1.0 - u * u) * std::exp(-0.5 * u * u);
    }
}

void add_burst(std::vector<double>& x, double centre_s, double duration_s, double freq_hz, double amp, double phase0)
{
    const double c = centre_s * kFs;
    const double sigma = duration_s * kFs / 6.0;
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(c - 3 * sigma)));
    const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil(c + 3 * sigma)));
    for (auto i = lo; i <= hi; ++i) {
        const double u = (static_cast<double>(i) - c) / sigma;
        const double t = (static_cast<double>(i) - c) / kFs;
        x[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * u * u) * std::sin(2.0 * kPi * freq_hz * t + phase0);
    }
}

void add_gaussian_pulse(std::vector<double>& x, double centre_s, double width_ms, double amp)
{
    const double sigma = width_ms / 4000.0 * kFs;
    const double c = centre_s * kFs;
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(c - 4 * sigma)));
    const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil(c + 4 * sigma)));
    for (auto i = lo; i <= hi; ++i) {
        const double u = (static_cast<double>(i) - c) / sigma;
        x[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * u * u);
    }
}

}  // namespace

std::string_view to_string(Motif m)
{
    switch (m) {
    case Motif::spike: return "spike";
    case Motif::sharp_wave: return "sharp_wave";
    case Motif::spindle: return "spindle";
    case Motif::hfo: return "hfo";
    case Motif::artifact: return "artifact";
    case Motif::loss_burst: return "loss_burst";
    }
    return "?";
}

void MotifProfile::validate() const
{
    if (!(theta_power_scale > 0)) throw ConfigError("theta_power_scale must be > 0");
    if (!(spike_width_ms > 0) || !(sharp_wave_width_ms > 0)) throw ConfigError("motif widths must be > 0");
    if (spike_rate_hz < 0 || sharp_wave_rate_hz < 0 || spindle_rate_per_min < 0 || hfo_rate_per_min < 0)
        throw ConfigError("motif rates must be non-negative");
}

std::map<Phase, MotifProfile> GeneratorConfig::default_profiles()
{
    std::map<Phase, MotifProfile> m;
    MotifProfile bl;
    bl.theta_power_scale = 2.0;
    bl.spike_rate_hz = 0.02;
    bl.spindle_rate_per_min = 4.0;
    bl.hfo_rate_per_min = 0.5;
    m[Phase::Baseline] = bl;

    MotifProfile early;
    early.spike_rate_hz = 0.5;
    early.sharp_wave_rate_hz = 0.03;
    early.spindle_rate_per_min = 1.0;
    early.hfo_rate_per_min = 3.0;
    m[Phase::EarlyEPG] = early;

    MotifProfile late;
    late.spike_rate_hz = 0.06;
    late.sharp_wave_rate_hz = 0.5;
    late.spindle_rate_per_min = 1.0;
    late.hfo_rate_per_min = 6.0;
    m[Phase::LateEPG] = late;
    return m;
}

void GeneratorConfig::validate() const
{
    for (const auto& [phase, prof] : class_profiles) prof.validate();
    for (Phase p : kClasses)
        if (!class_profiles.contains(p)) throw ConfigError("missing motif profile for " + std::string(to_string(p)));
    if (!(background_uv >= 0) || !(theta_uv >= 0)) throw ConfigError("amplitudes must be non-negative");
    if (artifact_rate_per_min < 0 || loss_burst_rate_per_min < 0) throw ConfigError("artifact rates must be non-negative");
    if (!(loss_burst_min_s > 0) || loss_burst_max_s < loss_burst_min_s) throw ConfigError("invalid loss burst durations");
    if (subject_jitter < 0) throw ConfigError("subject_jitter must be non-negative");
    if (circadian_depth < 0 || circadian_depth > 1) throw ConfigError("circadian_depth must be in [0, 1]");
    if (!(circadian_period_s > 0)) throw ConfigError("circadian_period_s must be > 0");
    if (baseline_s < 0 || early_s < 0 || late_s < 0 || intermediate_s < 0) throw ConfigError("phase durations must be non-negative");
}

MotifProfile profile_for(const GeneratorConfig& cfg, Phase phase) { return lookup(cfg.class_profiles, phase); }

GeneratedRecording generate_recording(const GeneratorConfig& cfg, const std::string& subject_id,
                                      const PhasePlan& plan, Group group)
{
    cfg.validate();
    if (plan.empty()) throw ConfigError("generate_recording: empty phase plan");
    for (const auto& [phase, dur] : plan)
        if (!(dur > 0)) throw ConfigError("generate_recording: phase durations must be positive");

    const SubjectParams sp = jitter(cfg, subject_id);
    GeneratedRecording out;
    Recording& rec = out.recording;
    rec.subject_id = subject_id;
    rec.group = group;
    rec.sample_rate_hz = kSampleRateHz;

    double total_s = 0;
    std::vector<std::pair<double, double>> spans;  // [start, end) per plan entry
    for (const auto& [phase, dur] : plan) {
        rec.phase_marks.push_back({total_s, phase});
        spans.emplace_back(total_s, total_s + dur);
        total_s += dur;
    }
    const auto n = static_cast<std::size_t>(std::llround(total_s * kFs));
    auto profile = [&](std::size_t entry) {
        return lookup(sp.profiles, group == Group::Control ? Phase::Baseline : plan[entry].first);
    };

    std::vector<double> x(n);
    {
        Rng rng = stream(cfg, subject_id, kBackground);
        PinkFilter pink;
        Biquad hp = Biquad::highpass(0.5, std::numbers::sqrt2 / 2), lp = Biquad::lowpass(160.0, std::numbers::sqrt2 / 2),
               notch = Biquad::notch(50.0, 30.0);
        const bool is_pink = cfg.background_psd == BackgroundPsd::pink;
        for (auto& v : x) {
            const double w = rng.normal();
            v = notch(lp(hp(is_pink ? pink(w) : w)));
        }
        normalise(x, sp.background_uv);
    }
    {
        Rng rng = stream(cfg, subject_id, kTheta);
        Biquad bp1 = Biquad::bandpass(6.0, 1.5), bp2 = Biquad::bandpass(6.0, 1.5);
        std::vector<double> theta(n);
        for (auto& v : theta) v = bp2(bp1(rng.normal()));
        normalise(theta, sp.theta_uv);
        std::size_t entry = 0;
        double gain = std::sqrt(profile(0).theta_power_scale);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / kFs;
            while (entry + 1 < plan.size() && t >= spans[entry + 1].first) gain = std::sqrt(profile(++entry).theta_power_scale);
            x[i] += gain * theta[i];
        }
    }

    auto& events = out.events;
    {
        Rng rng = stream(cfg, subject_id, kMotifs);
        for (std::size_t e = 0; e < plan.size(); ++e) {
            const MotifProfile prof = profile(e);
            const auto [t0, t1] = spans[e];
            for (double t : poisson_times(rng, prof.spike_rate_hz, t0, t1, cfg)) {
                const double a = sp.spike_amp * rng.uniform(0.8, 1.2);
                add_mexican_hat(x, t, prof.spike_width_ms, a);
                events.push_back({t, Motif::spike, prof.spike_width_ms, a});
            }
            for (double t : poisson_times(rng, prof.sharp_wave_rate_hz, t0, t1, cfg)) {
                const double a = sp.sharp_amp * rng.uniform(0.8, 1.2);
                add_mexican_hat(x, t, prof.sharp_wave_width_ms, a);
                events.push_back({t, Motif::sharp_wave, prof.sharp_wave_width_ms, a});
            }
            for (double t : poisson_times(rng, prof.spindle_rate_per_min / 60.0, t0, t1, cfg)) {
                const double dur = rng.uniform(0.5, 1.0), f = rng.uniform(12.0, 14.0), ph = rng.uniform(0, 2 * kPi);
                const double a = sp.spindle_amp * rng.uniform(0.8, 1.2);
                add_burst(x, t, dur, f, a, ph);
                events.push_back({t, Motif::spindle, dur * 1000.0, a});
            }
            for (double t : poisson_times(rng, prof.hfo_rate_per_min / 60.0, t0, t1, cfg)) {
                const double dur = rng.uniform(0.03, 0.06), f = rng.uniform(120.0, 150.0), ph = rng.uniform(0, 2 * kPi);
                const double a = sp.hfo_amp * rng.uniform(0.8, 1.2);
                add_burst(x, t, dur, f, a, ph);
                events.push_back({t, Motif::hfo, dur * 1000.0, a});
            }
        }
    }
    {
        Rng rng = stream(cfg, subject_id, kArtifacts);
        const double rate = cfg.artifact_rate_per_min / 60.0;
        for (double t = rate > 0 ? rng.exponential(rate) : total_s; t < total_s; t += rng.exponential(rate)) {
            const double w = rng.uniform(10.0, 40.0);
            const double a = cfg.artifact_amplitude_uv * rng.uniform(0.6, 1.4) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            add_gaussian_pulse(x, t, w, a);
            events.push_back({t, Motif::artifact, w, a});
        }
    }

    rec.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) rec.samples[i] = static_cast<float>(x[i]);
    {
        Rng rng = stream(cfg, subject_id, kLoss);
        const double rate = cfg.loss_burst_rate_per_min / 60.0;
        for (double t = rate > 0 ? rng.exponential(rate) : total_s; t < total_s; t += rng.exponential(rate)) {
            const double dur = rng.uniform(cfg.loss_burst_min_s, cfg.loss_burst_max_s);
            const auto lo = static_cast<std::size_t>(t * kFs);
            const auto hi = std::min(n, static_cast<std::size_t>((t + dur) * kFs));
            std::fill(rec.samples.begin() + static_cast<std::ptrdiff_t>(lo), rec.samples.begin() + static_cast<std::ptrdiff_t>(hi),
                      std::numeric_limits<float>::quiet_NaN());
            events.push_back({t, Motif::loss_burst, dur * 1000.0, 0.0});
        }
    }
    std::stable_sort(events.begin(), events.end(), [](const MotifEvent& a, const MotifEvent& b) { return a.time_s < b.time_s; });
    return out;
}

std::string pps_subject_id(int i)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "PPS%02d", i + 1);
    return buf;
}

std::string control_subject_id(int i)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "CTR%02d", i + 1);
    return buf;
}

std::vector<GeneratedRecording> make_cohort(const GeneratorConfig& cfg, int n_pps, int n_control)
{
    if (n_pps < 2) throw ConfigError("make_cohort: n_pps must be >= 2 for leave-one-out, got " + std::to_string(n_pps));
    if (n_control < 0) throw ConfigError("make_cohort: n_control must be non-negative");
    PhasePlan plan;
    if (cfg.baseline_s > 0) plan.emplace_back(Phase::Baseline, cfg.baseline_s);
    if (cfg.early_s > 0) plan.emplace_back(Phase::EarlyEPG, cfg.early_s);
    if (cfg.intermediate_s > 0) plan.emplace_back(Phase::Unlabeled, cfg.intermediate_s);
    if (cfg.late_s > 0) plan.emplace_back(Phase::LateEPG, cfg.late_s);
    std::vector<GeneratedRecording> out;
    out.reserve(static_cast<std::size_t>(n_pps + n_control));
    for (int i = 0; i < n_pps; ++i) out.push_back(generate_recording(cfg, pps_subject_id(i), plan, Group::PPS));
    for (int i = 0; i < n_control; ++i) out.push_back(generate_recording(cfg, control_subject_id(i), plan, Group::Control));
    return out;
}

void write_event_log(const std::vector<MotifEvent>& events, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "time_s,motif,width_ms,amplitude\n";
    char buf[128];
    for (const auto& e : events) {
        std::snprintf(buf, sizeof buf, "%.6f,%s,%.4f,%.4f\n", e.time_s, std::string(to_string(e.motif)).c_str(),
                      e.width_ms, e.amplitude);
        out << buf;
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<MotifEvent> read_event_log(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line) || line != "time_s,motif,width_ms,amplitude")
        throw FormatError("event log '" + path + "': unexpected header");
    std::vector<MotifEvent> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string t, m, w, a;
        if (!std::getline(ss, t, ',') || !std::getline(ss, m, ',') || !std::getline(ss, w, ',') || !std::getline(ss, a))
            throw FormatError("event log '" + path + "': malformed line " + std::to_string(lineno));
        MotifEvent e;
        bool found = false;
        for (auto k : {Motif::spike, Motif::sharp_wave, Motif::spindle, Motif::hfo, Motif::artifact, Motif::loss_burst})
            if (to_string(k) == m) {
                e.motif = k;
                found = true;
            }
        if (!found) throw FormatError("event log '" + path + "': unknown motif '" + m + "' on line " + std::to_string(lineno));
        try {
            e.time_s = std::stod(t);
            e.width_ms = std::stod(w);
            e.amplitude = std::stod(a);
        } catch (const std::exception&) {
            throw FormatError("event log '" + path + "': bad number on line " + std::to_string(lineno));
        }
        out.push_back(e);
    }
    return out;
}

}  // namespace epg::synth
