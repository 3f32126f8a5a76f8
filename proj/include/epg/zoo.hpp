#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "epg/autodiff/ops.hpp"
#include "epg/types.hpp"

namespace epg::zoo {

enum class ModelName { Proposed16, Proposed4, FNN, DCNN, EEGNet1, EEGNet2 };

std::string_view to_string(ModelName m);
std::optional<ModelName> parse_model_name(std::string_view s);

// Declarative layer descriptions.
namespace layer {
struct Conv {
    int channels;
    int kernel;
    int stride = 1;
    ad::Padding padding = ad::Padding::same;
    bool bias = true;
};
struct BatchNorm {};
struct Relu {};
struct Elu {
    double alpha = 1.0;
};
struct MaxPool {
    int size;
    int stride;
};
struct AvgPool {
    int size;
    int stride;
};
struct Dropout {
    double rate;
};
struct Dense {
    int units;
    bool bias = true;
    double l2 = 0.0;
};
struct Flatten {};
struct Gap {};
// conv -> BN -> ReLU -> dropout -> conv(stride) on the main branch, max-pool
// (zero channel padding when widening) on the skip branch, then
// add -> BN -> ReLU -> dropout.
struct ResBlock {
    int channels;
    int kernel;
    int stride;
    double dropout;
};
}  // namespace layer

using LayerSpec = std::variant<layer::Conv, layer::BatchNorm, layer::Relu, layer::Elu, layer::MaxPool,
                               layer::AvgPool, layer::Dropout, layer::Dense, layer::Flatten, layer::Gap,
                               layer::ResBlock>;

struct ModelSpec {
    ModelName name = ModelName::Proposed4;
    std::vector<LayerSpec> layers;
    double dropout_rate = 0.2;
    int input_length = kSegmentLength;
    int n_classes = kNumClasses;
    int kernel_width = 16;
    // Reconstruction choices not fixed by the architecture description.
    std::vector<std::string> assumptions;

    bool has_gap_head() const;
};

struct BuildOptions {
    // Proposed models only; the baselines use their published widths.
    std::optional<int> kernel_width;
    std::optional<double> dropout_rate;
    std::optional<int> input_length;
    std::optional<int> n_classes;
};

ModelSpec make_spec(ModelName name, const BuildOptions& options = {});

// Published trainable-parameter counts, where one exists.
std::optional<long> published_trainables(ModelName name);

// Kernel width at which the Proposed16 reconstruction comes closest to its
// published trainable count.
inline constexpr int kProposed16CountKernel = 26;

enum class Init { he_uniform, zeros, ones };

struct ParamDecl {
    std::string name;
    ad::Shape shape;
    Init init;
    long fan_in = 0;
    double l2 = 0.0;
};

struct BatchNormDecl {
    std::string name;
    long channels;
};

struct LayerReport {
    std::string layer;
    std::string type;
    ad::Shape out_shape;  // without the batch axis
    long trainables = 0;
};

// Everything needed to instantiate a model: parameter declarations in
// forward order, batch-norm running-stat slots, and the per-layer report.
struct Blueprint {
    std::vector<ParamDecl> params;
    std::vector<BatchNormDecl> batchnorms;
    std::vector<LayerReport> rows;
    ad::Shape output_shape;
    ad::Shape feature_shape;  // input of the GAP/flatten head; empty if none
};

// Walks the layer list with shape inference. Throws ArchitectureError naming
// the offending layer when a length becomes non-positive or a residual add
// would combine mismatched shapes.
Blueprint blueprint(const ModelSpec& spec);

struct CountReport {
    ModelName model;
    long total = 0;
    std::vector<LayerReport> rows;
    std::optional<long> published;
    int kernel_width = 0;
    std::vector<std::string> assumptions;

    std::optional<double> relative_error() const;
};

CountReport count_trainables(const ModelSpec& spec);
void write_count_csv(const CountReport& report, std::ostream& os);
// Free-text summary: achieved vs published count and every assumption.
void write_count_notes(const CountReport& report, std::ostream& os);

}  // namespace epg::zoo
