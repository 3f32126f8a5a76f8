#include "epg/autodiff/ops.hpp"
#include "epg/autodiff/optim.hpp"
#include "epg/autodiff/tape.hpp"

namespace epg::ad {

std::string_view to_string(OpKind k)
{
    switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::conv1d: return "conv1d";
    case OpKind::dense: return "dense";
    case OpKind::batchnorm: return "batchnorm";
    case OpKind::relu: return "relu";
    case OpKind::elu: return "elu";
    case OpKind::maxpool1d: return "maxpool1d";
    case OpKind::avgpool1d: return "avgpool1d";
    case OpKind::gap: return "gap";
    case OpKind::dropout: return "dropout";
    case OpKind::add: return "add";
    case OpKind::softmax_xent: return "softmax_xent";
    case OpKind::l2_penalty: return "l2_penalty";
    case OpKind::reshape: return "reshape";
    case OpKind::pad_channels: return "pad_channels";
    case OpKind::sum: return "sum";
    case OpKind::weighted_sum: return "weighted_sum";
    }
    return "?";
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace epg::ad
