#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epg/model.hpp"
#include "epg/signal_io.hpp"
#include "epg/synthgen.hpp"

namespace epg::explain {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Last conv-layer activations [channels, positions] and the logits of one segment.
struct FeatureMap {
    Matrix maps;
    std::array<double, kNumClasses> logits{};
};

template <class Scalar>
std::vector<FeatureMap> feature_maps(zoo::Model<Scalar>& model, std::span<const Segment* const> segments,
                                     int batch_size = 64);

struct CamMap {
    int class_id = 0;
    std::vector<double> values;     // one per last conv-layer position
    std::vector<double> upsampled;  // one per input sample
    std::vector<bool> highlight;    // upsampled > threshold
    double threshold = 0.0;
    double logit = 0.0;  // the model's logit for class_id

    double mean() const;
};

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
double nearest_rank_percentile(std::span<const double> values, double percent);

// Linear interpolation from `values` to `length` samples, each value sitting
// at the centre of the input stretch it covers.
std::vector<double> upsample_linear(std::span<const double> values, std::size_t length);

// CAM from precomputed features and the [classes, channels] head weights.
CamMap cam_from_features(const FeatureMap& features, const Matrix& head, int class_c, std::size_t input_length,
                         double percent = 80.0);

// Dense weights of a GAP + bias-free head, as double. Throws
// ArchitectureError for any other head.
template <class Scalar>
Matrix head_weights(const zoo::Model<Scalar>& model);

template <class Scalar>
CamMap cam(zoo::Model<Scalar>& model, const Segment& segment, int class_c, double percent = 80.0);

// The same map with the class chosen by an externally assigned label; used
// for the three-label sweep.
template <class Scalar>
CamMap cam_under_assigned_label(zoo::Model<Scalar>& model, const Segment& segment, Label assigned,
                                double percent = 80.0);

template <class Scalar>
std::array<CamMap, kNumClasses> cam_sweep(zoo::Model<Scalar>& model, const Segment& segment, double percent = 80.0);

struct ChannelActivationProfile {
    Matrix mean;        // [classes, channels], mean over segments and positions
    Matrix normalized;  // each column divided by its largest magnitude
    std::array<std::size_t, kNumClasses> counts{};
};

template <class Scalar>
ChannelActivationProfile channel_profile(zoo::Model<Scalar>& model, std::span<const Segment> segments);

struct SelectiveChannel {
    int channel;
    int class_id;
    double margin;  // class mean over the larger of the other two
};

// Channels whose mean activation for one class is at least `min_margin`
// times that of every other class, strongest first.
std::vector<SelectiveChannel> selective_channels(const ChannelActivationProfile& profile, double min_margin = 2.0);

struct RankedSegment {
    std::size_t index;
    double score;
};

// Segments ranked by the mean activation of `channel` at the last conv layer,
// highest first; ties keep corpus order.
template <class Scalar>
std::vector<RankedSegment> max_activating_segments(zoo::Model<Scalar>& model, int channel,
                                                   std::span<const Segment> corpus, std::size_t top_n);

struct Interval {
    double begin = 0.0;
    double end = 0.0;
    double length() const { return end > begin ? end - begin : 0.0; }
};

double iou(const Interval& a, const Interval& b);

// Connected highlighted stretches in seconds relative to `segment_start_s`.
std::vector<Interval> highlight_spans(const CamMap& cam, double segment_start_s);

// Extent of a logged spike or sharp wave: +-`half_widths` main-lobe widths
// around the peak (one width equals two Gaussian sigmas of the wavelet).
Interval event_extent(const synth::MotifEvent& e, double half_widths = 1.0);

// Best IoU between any highlight span and the event extent clipped to the segment.
double event_iou(const CamMap& cam, double segment_start_s, const synth::MotifEvent& event, double half_widths = 1.0);

// CSV with columns position,value,highlighted for the upsampled map.
std::string cam_csv(const CamMap& cam);
// Raw trace with highlighted spans drawn in a second stroke.
void write_cam_svg(const Segment& segment, const CamMap& cam, const std::string& path);
std::string profile_csv(const ChannelActivationProfile& profile);

}  // namespace epg::explain
