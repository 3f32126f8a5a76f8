#include "epg/explain.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "epg/error.hpp"
#include "epg/svg.hpp"
#include "epg/trainer.hpp"

namespace epg::explain {

template <class Scalar>
std::vector<FeatureMap> feature_maps(zoo::Model<Scalar>& model, std::span<const Segment* const> segments,
                                     int batch_size)
{
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    std::vector<FeatureMap> out;
    out.reserve(segments.size());
    for (std::size_t at = 0; at < segments.size(); at += static_cast<std::size_t>(batch_size)) {
        const auto n = std::min(segments.size() - at, static_cast<std::size_t>(batch_size));
        ad::Tape<Scalar> tape;
        const auto fr = zoo::forward(tape, model, tape.constant(train::make_batch<Scalar>(segments.subspan(at, n))),
                                     {ad::Mode::eval});
        if (!fr.features.valid()) throw ArchitectureError("model has no convolutional feature maps");
        const auto& f = tape.value(fr.features);
        const auto& logits = tape.value(fr.logits);
        for (std::size_t b = 0; b < n; ++b) {
            FeatureMap fm;
            fm.maps = f.item(static_cast<ad::Index>(b)).template cast<double>();
            for (int c = 0; c < kNumClasses; ++c)
                fm.logits[static_cast<std::size_t>(c)] = static_cast<double>(logits(static_cast<ad::Index>(b), c));
            out.push_back(std::move(fm));
        }
    }
    return out;
}

double CamMap::mean() const
{
    double s = 0.0;
    for (double v : values) s += v;
    return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

double nearest_rank_percentile(std::span<const double> values, double percent)
{
    if (values.empty()) throw ValidationError("percentile of an empty sequence");
    if (!(percent > 0 && percent <= 100)) throw ConfigError("percentile must be in (0, 100]");
    std::vector<double> v(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(percent / 100.0 * static_cast<double>(v.size()) - 1e-9));
    const auto k = std::max<std::size_t>(rank, 1) - 1;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

std::vector<double> upsample_linear(std::span<const double> values, std::size_t length)
{
    if (values.empty()) throw ValidationError("cannot upsample an empty map");
    std::vector<double> out(length);
    const double scale = static_cast<double>(values.size()) / static_cast<double>(length);
    const double last = static_cast<double>(values.size() - 1);
    for (std::size_t i = 0; i < length; ++i) {
        const double x = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, last);
        const auto j = static_cast<std::size_t>(x);
        const double frac = x - static_cast<double>(j);
        out[i] = j + 1 < values.size() ? values[j] + frac * (values[j + 1] - values[j]) : values[j];
    }
    return out;
}

CamMap cam_from_features(const FeatureMap& features, const Matrix& head, int class_c, std::size_t input_length,
                         double percent)
{
    if (class_c < 0 || class_c >= head.rows())
        throw ValidationError("class " + std::to_string(class_c) + " out of range");
    if (head.cols() != features.maps.rows())
        throw DimensionError("head weights expect " + std::to_string(head.cols()) + " channels, features have " +
                             std::to_string(features.maps.rows()));
    CamMap m;
    m.class_id = class_c;
    m.logit = features.logits[static_cast<std::size_t>(class_c)];
    const Eigen::RowVectorXd v = head.row(class_c) * features.maps;
    m.values.assign(v.data(), v.data() + v.size());
    m.upsampled = upsample_linear(m.values, input_length);
    m.threshold = nearest_rank_percentile(m.upsampled, percent);
    m.highlight.resize(input_length);
    for (std::size_t i = 0; i < input_length; ++i) m.highlight[i] = m.upsampled[i] > m.threshold;
    return m;
}

template <class Scalar>
Matrix head_weights(const zoo::Model<Scalar>& model)
{
    if (!model.spec.has_gap_head())
        throw ArchitectureError(std::string(zoo::to_string(model.spec.name)) +
                                " has no global-average-pooling head with a bias-free dense layer; CAM is undefined");
    const auto& w = model.params.back().value;
    return w.matrix(w.dim(0), w.dim(1)).template cast<double>();
}

template <class Scalar>
CamMap cam(zoo::Model<Scalar>& model, const Segment& segment, int class_c, double percent)
{
    const Matrix head = head_weights(model);
    const Segment* one = &segment;
    const auto fm = feature_maps(model, std::span<const Segment* const>(&one, 1));
    return cam_from_features(fm.front(), head, class_c, segment.values.size(), percent);
}

template <class Scalar>
CamMap cam_under_assigned_label(zoo::Model<Scalar>& model, const Segment& segment, Label assigned, double percent)
{
    if (!is_class(assigned)) throw ValidationError("assigned label must be one of the three classes");
    return cam(model, segment, class_index(assigned), percent);
}

template <class Scalar>
std::array<CamMap, kNumClasses> cam_sweep(zoo::Model<Scalar>& model, const Segment& segment, double percent)
{
    const Matrix head = head_weights(model);
    const Segment* one = &segment;
    const auto fm = feature_maps(model, std::span<const Segment* const>(&one, 1));
    std::array<CamMap, kNumClasses> out;
    for (int c = 0; c < kNumClasses; ++c)
        out[static_cast<std::size_t>(c)] = cam_from_features(fm.front(), head, c, segment.values.size(), percent);
    return out;
}

template <class Scalar>
ChannelActivationProfile channel_profile(zoo::Model<Scalar>& model, std::span<const Segment> segments)
{
    std::array<std::vector<const Segment*>, kNumClasses> by_class;
    for (const auto& s : segments)
        if (is_class(s.label)) by_class[static_cast<std::size_t>(class_index(s.label))].push_back(&s);
    ChannelActivationProfile p;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& group = by_class[static_cast<std::size_t>(c)];
        if (group.empty())
            throw ValidationError("channel profile needs at least one " + std::string(to_string(kClasses[c])) +
                                  " segment");
        const auto fms = feature_maps(model, std::span<const Segment* const>(group));
        if (c == 0) p.mean = Matrix::Zero(kNumClasses, fms.front().maps.rows());
        for (const auto& fm : fms) p.mean.row(c) += fm.maps.rowwise().mean().transpose();
        p.mean.row(c) /= static_cast<double>(fms.size());
        p.counts[static_cast<std::size_t>(c)] = fms.size();
    }
    p.normalized = p.mean;
    for (Eigen::Index k = 0; k < p.mean.cols(); ++k) {
        const double scale = p.mean.col(k).cwiseAbs().maxCoeff();
        if (scale > 0) p.normalized.col(k) /= scale;
    }
    return p;
}

std::vector<SelectiveChannel> selective_channels(const ChannelActivationProfile& profile, double min_margin)
{
    std::vector<SelectiveChannel> out;
    for (Eigen::Index k = 0; k < profile.mean.cols(); ++k) {
        Eigen::Index best = 0;
        profile.mean.col(k).maxCoeff(&best);
        double other = 0.0;
        for (Eigen::Index c = 0; c < profile.mean.rows(); ++c)
            if (c != best) other = std::max(other, profile.mean(c, k));
        const double top = profile.mean(best, k);
        if (top <= 0) continue;
        const double margin = other > 0 ? top / other : std::numeric_limits<double>::infinity();
        if (margin >= min_margin) out.push_back({static_cast<int>(k), static_cast<int>(best), margin});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.margin > b.margin; });
    return out;
}

template <class Scalar>
std::vector<RankedSegment> max_activating_segments(zoo::Model<Scalar>& model, int channel,
                                                   std::span<const Segment> corpus, std::size_t top_n)
{
    if (corpus.empty()) throw ValidationError("max-activating search needs a non-empty corpus");
    const auto& fshape = zoo::blueprint(model.spec).feature_shape;
    if (fshape.empty()) throw ArchitectureError("model has no convolutional feature maps");
    if (channel < 0 || channel >= fshape[0])
        throw ValidationError("channel " + std::to_string(channel) + " out of range [0, " + std::to_string(fshape[0]) + ")");
    std::vector<RankedSegment> ranked;
    std::vector<const Segment*> ptrs;
    for (const auto& s : corpus) ptrs.push_back(&s);
    // Chunked so the whole corpus never sits in memory as feature maps.
    constexpr std::size_t kChunk = 256;
    for (std::size_t at = 0; at < ptrs.size(); at += kChunk) {
        const auto n = std::min(kChunk, ptrs.size() - at);
        const auto fms = feature_maps(model, std::span<const Segment* const>(ptrs.data() + at, n));
        for (std::size_t i = 0; i < n; ++i) ranked.push_back({at + i, fms[i].maps.row(channel).mean()});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    if (ranked.size() > top_n) ranked.resize(top_n);
    return ranked;
}

double iou(const Interval& a, const Interval& b)
{
    const double inter = Interval{std::max(a.begin, b.begin), std::min(a.end, b.end)}.length();
    const double uni = a.length() + b.length() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

std::vector<Interval> highlight_spans(const CamMap& cam, double segment_start_s)
{
    std::vector<Interval> out;
    const double dt = 1.0 / kSampleRateHz;
    for (std::size_t i = 0; i < cam.highlight.size();) {
        if (!cam.highlight[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < cam.highlight.size() && cam.highlight[j]) ++j;
        out.push_back({segment_start_s + static_cast<double>(i) * dt, segment_start_s + static_cast<double>(j) * dt});
        i = j;
    }
    return out;
}

Interval event_extent(const synth::MotifEvent& e, double half_widths)
{
    const double w = e.width_ms / 1000.0 * half_widths;
    return {e.time_s - w, e.time_s + w};
}

double event_iou(const CamMap& cam, double segment_start_s, const synth::MotifEvent& event, double half_widths)
{
    Interval ev = event_extent(event, half_widths);
    const double seg_end = segment_start_s + static_cast<double>(cam.highlight.size()) / kSampleRateHz;
    ev.begin = std::max(ev.begin, segment_start_s);
    ev.end = std::min(ev.end, seg_end);
    double best = 0.0;
    for (const auto& s : highlight_spans(cam, segment_start_s)) best = std::max(best, iou(s, ev));
    return best;
}

std::string cam_csv(const CamMap& cam)
{
    std::ostringstream os;
    os << std::setprecision(10) << "position,value,highlighted\n";
    for (std::size_t i = 0; i < cam.upsampled.size(); ++i)
        os << i << ',' << cam.upsampled[i] << ',' << (cam.highlight[i] ? 1 : 0) << '\n';
    return os.str();
}

void write_cam_svg(const Segment& segment, const CamMap& cam, const std::string& path)
{
    svg::LinePlot plot;
    plot.title = segment.subject_id + " t=" + std::to_string(static_cast<long>(segment.start_time_s)) +
                 " s, CAM for " + std::string(to_string(kClasses[static_cast<std::size_t>(cam.class_id)]));
    plot.x_label = "time in segment (s)";
    plot.y_label = "amplitude (uV)";
    plot.highlight = true;
    svg::Series trace;
    trace.name = "signal";
    trace.color = "#455a64";
    for (std::size_t i = 0; i < segment.values.size(); ++i) {
        trace.x.push_back(static_cast<double>(i) / kSampleRateHz);
        trace.y.push_back(segment.values[i]);
    }
    plot.series.push_back(std::move(trace));
    for (const auto& s : highlight_spans(cam, 0.0)) plot.spans.emplace_back(s.begin, s.end);
    svg::write(plot, path);
}

std::string profile_csv(const ChannelActivationProfile& profile)
{
    std::ostringstream os;
    os << std::setprecision(10) << "class,channel,mean_activation,normalized\n";
    for (Eigen::Index c = 0; c < profile.mean.rows(); ++c)
        for (Eigen::Index k = 0; k < profile.mean.cols(); ++k)
            os << to_string(kClasses[static_cast<std::size_t>(c)]) << ',' << k << ',' << profile.mean(c, k) << ','
               << profile.normalized(c, k) << '\n';
    return os.str();
}

#define EPG_EXPLAIN_INSTANTIATE(S)                                                                                  \
    template std::vector<FeatureMap> feature_maps<S>(zoo::Model<S>&, std::span<const Segment* const>, int);         \
    template Matrix head_weights<S>(const zoo::Model<S>&);                                                         \
    template CamMap cam<S>(zoo::Model<S>&, const Segment&, int, double);                                           \
    template CamMap cam_under_assigned_label<S>(zoo::Model<S>&, const Segment&, Label, double);                    \
    template std::array<CamMap, kNumClasses> cam_sweep<S>(zoo::Model<S>&, const Segment&, double);                 \
    template ChannelActivationProfile channel_profile<S>(zoo::Model<S>&, std::span<const Segment>);                \
    template std::vector<RankedSegment> max_activating_segments<S>(zoo::Model<S>&, int, std::span<const Segment>, \
                                                                   std::size_t);

EPG_EXPLAIN_INSTANTIATE(float)
EPG_EXPLAIN_INSTANTIATE(double)

}  // namespace epg::explain
