#pragma once

#include <array>
#include <string>
#include <vector>

#include "epg/types.hpp"

namespace epg {

// Per-segment softmax outputs in chronological order (grouped by subject
// when several subjects are present).
struct PredictionTrace {
    std::vector<std::string> subject_ids;
    std::vector<double> times;
    std::vector<Label> labels;
    std::vector<std::array<double, kNumClasses>> probs;

    std::size_t size() const { return probs.size(); }
    bool empty() const { return probs.empty(); }
    void push_back(const std::string& subject, double t, Label l, const std::array<double, kNumClasses>& p)
    {
        subject_ids.push_back(subject);
        times.push_back(t);
        labels.push_back(l);
        probs.push_back(p);
    }
    // Throws ValidationError unless rows lie on the simplex and are time-sorted per subject.
    void validate(double tol = 1e-6) const;
};

}  // namespace epg
