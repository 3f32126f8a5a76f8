#include "epg/zoo.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace epg::zoo {

namespace {

constexpr std::string_view kNames[] = {"Proposed16", "Proposed4", "FNN", "DCNN", "EEGNet1", "EEGNet2"};

ModelSpec proposed(ModelName name, int blocks, const BuildOptions& o)
{
    ModelSpec s;
    s.name = name;
    s.kernel_width = o.kernel_width.value_or(16);
    s.dropout_rate = o.dropout_rate.value_or(0.2);
    const int k = s.kernel_width;
    s.layers.push_back(layer::Conv{16, k, 1});
    s.layers.push_back(layer::BatchNorm{});
    s.layers.push_back(layer::Relu{});
    for (int i = 0; i < blocks; ++i) {
        const int channels = 16 << (i / 4);
        const int stride = (i % 2 == 1) ? 2 : 1;
        s.layers.push_back(layer::ResBlock{channels, k, stride, s.dropout_rate});
    }
    s.layers.push_back(layer::Gap{});
    s.layers.push_back(layer::Dense{s.n_classes, false});
    s.assumptions = {
        "convolution kernel width " + std::to_string(k) + " (not stated for the residual design)",
        "one initial conv (16 channels) + BN + ReLU ahead of the residual blocks",
        "block main branch: conv -> BN -> ReLU -> dropout -> conv(stride); skip: max-pool(stride) with zero channel padding",
        "after the residual add: BN -> ReLU -> dropout",
        "'same' padding, conv layers carry biases",
        "bias-free dense head after GAP",
    };
    return s;
}

ModelSpec fnn(const BuildOptions&)
{
    ModelSpec s;
    s.name = ModelName::FNN;
    s.dropout_rate = 0.5;
    s.kernel_width = 0;
    s.layers.push_back(layer::Flatten{});
    for (int units : {1024, 256, 128}) {
        s.layers.push_back(layer::Dense{units, true, 0.01});
        s.layers.push_back(layer::BatchNorm{});
        s.layers.push_back(layer::Relu{});
        s.layers.push_back(layer::Dropout{0.5});
    }
    s.layers.push_back(layer::Dense{s.n_classes, true});
    s.assumptions = {"dense -> BN -> ReLU -> dropout(0.5) ordering; L2 0.01 on hidden dense kernels"};
    return s;
}

ModelSpec dcnn(const BuildOptions& o)
{
    ModelSpec s;
    s.name = ModelName::DCNN;
    s.dropout_rate = o.dropout_rate.value_or(0.5);
    s.kernel_width = 0;
    auto block = [&](int ch, int k) {
        s.layers.push_back(layer::Conv{ch, k, 2});
        s.layers.push_back(layer::BatchNorm{});
        s.layers.push_back(layer::Relu{});
    };
    for (int i = 0; i < 5; ++i) block(128, 7);
    for (int i = 0; i < 3; ++i) block(256, 5);
    block(256, 3);
    s.layers.push_back(layer::Flatten{});
    s.layers.push_back(layer::Dense{100, true});
    s.layers.push_back(layer::Relu{});
    s.layers.push_back(layer::Dropout{s.dropout_rate});
    s.layers.push_back(layer::Dense{s.n_classes, true});
    s.assumptions = {
        "'same' padding so 2560 halves nine times to 5 positions; flatten width 256*5 = 1280",
        "BN (gamma and beta) after every conv, followed by ReLU",
        "dropout before the output layer carries no parameters",
    };
    return s;
}

ModelSpec eegnet(ModelName name, const BuildOptions& o)
{
    ModelSpec s;
    s.name = name;
    s.dropout_rate = o.dropout_rate.value_or(0.25);
    s.kernel_width = 256;
    auto stage = [&](int ch, int pool) {
        s.layers.push_back(layer::Conv{ch, 256, 1});
        s.layers.push_back(layer::BatchNorm{});
        s.layers.push_back(layer::Elu{});
        s.layers.push_back(layer::AvgPool{pool, pool});
        s.layers.push_back(layer::Dropout{s.dropout_rate});
    };
    s.layers.push_back(layer::Conv{16, 256, 1});
    s.layers.push_back(layer::BatchNorm{});
    if (name == ModelName::EEGNet1) {
        stage(16, 4);
        stage(32, 8);
        s.assumptions = {"three 256-wide convs (16, 16, 32 channels), average pools of 4 and 8"};
    } else {
        stage(16, 2);
        for (int ch : {32, 32, 64, 64}) stage(ch, 2);
        s.layers.push_back(layer::Conv{128, 256, 1});
        s.layers.push_back(layer::Elu{});
        s.assumptions = {
            "seventh conv (256 wide, 128 channels, no BN) closes the listed six-conv stack",
            "average pools of 2, flatten width 128*80 = 10240",
        };
    }
    s.layers.push_back(layer::Flatten{});
    s.layers.push_back(layer::Dense{s.n_classes, true});
    s.assumptions.push_back("'same' padding, conv layers carry biases");
    return s;
}

// Shape-inference walk shared by build() and count_trainables().
class Walker {
public:
    explicit Walker(const ModelSpec& spec) : spec_(spec), shape_{1, spec.input_length} {}

    Blueprint run()
    {
        for (const auto& l : spec_.layers) {
            const bool head = std::holds_alternative<layer::Gap>(l) || std::holds_alternative<layer::Flatten>(l);
            if (head && seen_conv_ && bp_.feature_shape.empty()) bp_.feature_shape = shape_;
            if (std::holds_alternative<layer::Conv>(l) || std::holds_alternative<layer::ResBlock>(l)) seen_conv_ = true;
            std::visit([&](const auto& x) { visit(x); }, l);
        }
        bp_.output_shape = shape_;
        return std::move(bp_);
    }

private:
    std::string next_name(const char* kind) { return std::string(kind) + std::to_string(counters_[kind]++); }

    [[noreturn]] void fail(const std::string& name, const std::string& why) const
    {
        throw ArchitectureError("layer '" + name + "': " + why);
    }

    void check_length(const std::string& name, ad::Index len) const
    {
        if (len <= 0) fail(name, "feature length becomes " + std::to_string(len));
    }

    void require_signal(const std::string& name) const
    {
        if (shape_.size() != 2) fail(name, "expects a [channels, length] input, got " + ad::shape_str(shape_));
    }

    long conv(const std::string& name, const layer::Conv& c)
    {
        require_signal(name);
        const ad::Index c_in = shape_[0], len = shape_[1];
        if (c.padding == ad::Padding::valid && c.kernel > len)
            fail(name, "kernel " + std::to_string(c.kernel) + " exceeds length " + std::to_string(len));
        const ad::Index out = c.padding == ad::Padding::same ? (len + c.stride - 1) / c.stride
                                                             : (len - c.kernel) / c.stride + 1;
        check_length(name, out);
        bp_.params.push_back({name + ".weight", {c.channels, c_in, c.kernel}, Init::he_uniform, static_cast<long>(c_in * c.kernel)});
        long n = c.channels * c_in * c.kernel;
        if (c.bias) {
            bp_.params.push_back({name + ".bias", {c.channels}, Init::zeros});
            n += c.channels;
        }
        shape_ = {c.channels, out};
        return n;
    }

    long batchnorm(const std::string& name)
    {
        const ad::Index c = shape_[0];
        bp_.params.push_back({name + ".gamma", {c}, Init::ones});
        bp_.params.push_back({name + ".beta", {c}, Init::zeros});
        bp_.batchnorms.push_back({name, static_cast<long>(c)});
        return 2 * c;
    }

    void row(const std::string& name, const char* type, long n) { bp_.rows.push_back({name, type, shape_, n}); }

    void visit(const layer::Conv& c)
    {
        const auto name = next_name("conv");
        row(name, "conv1d", conv(name, c));
    }
    void visit(const layer::BatchNorm&)
    {
        const auto name = next_name("bn");
        row(name, "batchnorm", batchnorm(name));
    }
    void visit(const layer::Relu&) { row(next_name("relu"), "relu", 0); }
    void visit(const layer::Elu&) { row(next_name("elu"), "elu", 0); }
    void visit(const layer::Dropout&) { row(next_name("dropout"), "dropout", 0); }
    void visit(const layer::MaxPool& p) { pool(next_name("maxpool"), "maxpool1d", p.size, p.stride); }
    void visit(const layer::AvgPool& p) { pool(next_name("avgpool"), "avgpool1d", p.size, p.stride); }
    void pool(const std::string& name, const char* type, int size, int stride)
    {
        require_signal(name);
        if (size > shape_[1]) fail(name, "pool window " + std::to_string(size) + " exceeds length " + std::to_string(shape_[1]));
        shape_[1] = (shape_[1] - size) / stride + 1;
        check_length(name, shape_[1]);
        row(name, type, 0);
    }
    void visit(const layer::Flatten&)
    {
        const auto name = next_name("flatten");
        shape_ = {ad::numel(shape_)};
        row(name, "flatten", 0);
    }
    void visit(const layer::Gap&)
    {
        const auto name = next_name("gap");
        require_signal(name);
        shape_ = {shape_[0]};
        row(name, "gap", 0);
    }
    void visit(const layer::Dense& d)
    {
        const auto name = next_name("dense");
        if (shape_.size() != 1) shape_ = {ad::numel(shape_)};
        const ad::Index in = shape_[0];
        bp_.params.push_back({name + ".weight", {d.units, in}, Init::he_uniform, static_cast<long>(in), d.l2});
        long n = d.units * in;
        if (d.bias) {
            bp_.params.push_back({name + ".bias", {d.units}, Init::zeros});
            n += d.units;
        }
        shape_ = {d.units};
        row(name, "dense", n);
    }
    void visit(const layer::ResBlock& r)
    {
        const auto block = next_name("block");
        require_signal(block);
        const ad::Shape in = shape_;
        if (r.channels < in[0]) fail(block, "cannot narrow channels on the skip path");
        row(block + ".conv1", "conv1d", conv(block + ".conv1", layer::Conv{r.channels, r.kernel, 1}));
        row(block + ".bn1", "batchnorm", batchnorm(block + ".bn1"));
        row(block + ".relu1", "relu", 0);
        row(block + ".dropout1", "dropout", 0);
        row(block + ".conv2", "conv1d", conv(block + ".conv2", layer::Conv{r.channels, r.kernel, r.stride}));
        const ad::Shape main = shape_;
        ad::Shape skip = in;
        if (r.stride > 1) {
            if (r.stride > skip[1]) fail(block, "skip pool exceeds length");
            skip[1] = (skip[1] - r.stride) / r.stride + 1;
        }
        skip[0] = r.channels;
        if (skip != main)
            fail(block, "residual branches disagree: main " + ad::shape_str(main) + " vs skip " + ad::shape_str(skip));
        row(block + ".skip", r.stride > 1 ? "maxpool1d" : "identity", 0);
        row(block + ".add", "add", 0);
        row(block + ".bn2", "batchnorm", batchnorm(block + ".bn2"));
        row(block + ".relu2", "relu", 0);
        row(block + ".dropout2", "dropout", 0);
    }

    const ModelSpec& spec_;
    ad::Shape shape_;
    Blueprint bp_;
    std::map<std::string, int> counters_;
    bool seen_conv_ = false;
};

}  // namespace

std::string_view to_string(ModelName m) { return kNames[static_cast<int>(m)]; }

std::optional<ModelName> parse_model_name(std::string_view s)
{
    for (int i = 0; i < 6; ++i)
        if (kNames[i] == s) return static_cast<ModelName>(i);
    return std::nullopt;
}

bool ModelSpec::has_gap_head() const
{
    if (layers.size() < 2) return false;
    const auto* d = std::get_if<layer::Dense>(&layers.back());
    return d && !d->bias && std::holds_alternative<layer::Gap>(layers[layers.size() - 2]);
}

ModelSpec make_spec(ModelName name, const BuildOptions& o)
{
    if (o.kernel_width && *o.kernel_width < 1) throw ArchitectureError("kernel width must be positive");
    if (o.dropout_rate && (*o.dropout_rate < 0.0 || *o.dropout_rate >= 1.0))
        throw ArchitectureError("dropout rate must be in [0, 1)");
    ModelSpec s;
    switch (name) {
    case ModelName::Proposed16: s = proposed(name, 16, o); break;
    case ModelName::Proposed4: s = proposed(name, 4, o); break;
    case ModelName::FNN: s = fnn(o); break;
    case ModelName::DCNN: s = dcnn(o); break;
    case ModelName::EEGNet1:
    case ModelName::EEGNet2: s = eegnet(name, o); break;
    }
    if (o.input_length) s.input_length = *o.input_length;
    if (o.n_classes) {
        s.n_classes = *o.n_classes;
        if (auto* d = std::get_if<layer::Dense>(&s.layers.back())) d->units = s.n_classes;
    }
    if (s.input_length < 1) throw ArchitectureError("input length must be positive");
    return s;
}

std::optional<long> published_trainables(ModelName name)
{
    switch (name) {
    case ModelName::Proposed16: return 4200048;
    case ModelName::Proposed4: return 82912;
    case ModelName::FNN: return 2920963;
    case ModelName::DCNN: return 1607187;
    case ModelName::EEGNet1: return 223323;
    case ModelName::EEGNet2: return 4195107;
    }
    return std::nullopt;
}

Blueprint blueprint(const ModelSpec& spec) { return Walker(spec).run(); }

std::optional<double> CountReport::relative_error() const
{
    if (!published) return std::nullopt;
    return (static_cast<double>(total) - static_cast<double>(*published)) / static_cast<double>(*published);
}

CountReport count_trainables(const ModelSpec& spec)
{
    const Blueprint bp = blueprint(spec);
    CountReport r;
    r.model = spec.name;
    r.rows = bp.rows;
    for (const auto& p : bp.params) r.total += static_cast<long>(ad::numel(p.shape));
    r.published = published_trainables(spec.name);
    r.kernel_width = spec.kernel_width;
    r.assumptions = spec.assumptions;
    return r;
}

void write_count_csv(const CountReport& report, std::ostream& os)
{
    os << "layer,type,out_shape,trainables\n";
    for (const auto& row : report.rows) {
        os << row.layer << ',' << row.type << ',';
        for (std::size_t i = 0; i < row.out_shape.size(); ++i) os << (i ? "x" : "") << row.out_shape[i];
        os << ',' << row.trainables << '\n';
    }
    os << "total,," << "," << report.total << '\n';
}

void write_count_notes(const CountReport& report, std::ostream& os)
{
    os << "model: " << to_string(report.model) << '\n';
    if (report.kernel_width > 0) os << "kernel_width: " << report.kernel_width << '\n';
    os << "trainables: " << report.total << '\n';
    if (report.published) {
        os << "published: " << *report.published << '\n';
        os << "relative_difference: " << *report.relative_error() << '\n';
    }
    for (const auto& a : report.assumptions) os << "assumption: " << a << '\n';
}

}  // namespace epg::zoo
