#pragma once

#include <span>
#include <vector>

#include "epg/signal_io.hpp"

namespace epg::preprocess {

struct OutlierConfig {
    int window = 50;
    double mad_scale = 3.0;

    void validate() const;
};

// Scale making the MAD a consistent estimator of a normal standard deviation.
inline constexpr double kMadToSigma = 1.4826;

struct DiscardPolicy {
    double max_missing_fraction = 0.20;

    // A window is discarded iff its missing count exceeds this.
    int max_missing(int window_length = kSegmentLength) const;
    void validate() const;
};

// Flags samples deviating from the centred moving median by more than
// mad_scale scaled MADs. Even windows cover [i - w/2, i + w/2 - 1]; the
// window shrinks at the edges. NaNs are excluded from the statistics and
// never flagged.
std::vector<bool> detect_outliers(std::span<const float> signal, const OutlierConfig& cfg);

// Replaces masked and NaN positions by the shape-preserving piecewise cubic
// Hermite interpolant through the remaining samples (x = sample index).
// Leading and trailing gaps take the nearest anchor value.
std::vector<float> pchip_fill(std::span<const float> signal, const std::vector<bool>& replace_mask);

struct SegmentationResult {
    std::vector<Segment> kept;
    int discarded = 0;   // too much signal loss
    int unlabeled = 0;   // no class phase covers the window start
    long outliers_replaced = 0;
};

// Cuts the recording into consecutive non-overlapping 5 s windows, drops the
// remainder, discards windows with too many missing samples, labels windows
// by the phase at their start and fills gaps with pchip_fill.
// `outlier_mask`, if non-empty, marks extra samples to repair.
SegmentationResult segment(const Recording& recording, const DiscardPolicy& policy,
                           const std::vector<bool>& outlier_mask = {});

// Outlier detection over the whole recording followed by segment().
SegmentationResult preprocess_recording(const Recording& recording, const OutlierConfig& outliers,
                                        const DiscardPolicy& policy);

}  // namespace epg::preprocess
