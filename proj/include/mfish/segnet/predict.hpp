#pragma once

#include <vector>

#include "mfish/data/sample.hpp"
#include "mfish/nn/tensor.hpp"
#include "mfish/segnet/network.hpp"

namespace mfish::segnet {

/// Packs one sample's channels into a 1 x 6 x H x W tensor.
template <class T>
nn::Tensor4<T> sample_tensor(const data::MfishSample& s)
{
    nn::Tensor4<T> t(1, data::kNumChannels, s.height(), s.width());
    for (int c = 0; c < data::kNumChannels; ++c) {
        T* dst = t.plane(0, c);
        for (std::size_t i = 0; i < s.channels[c].size(); ++i)
            dst[i] = static_cast<T>(s.channels[c].pixels[i]);
    }
    return t;
}

/// Per-pixel argmax over the class channels of image `n`, mapped to label
/// codes. Ties go to the lowest class index. Softmax is monotone, so logits
/// and probabilities give the same map.
template <class T>
data::LabelMap argmax_labels(const nn::Tensor4<T>& scores, int n, const data::LabelCoding& coding)
{
    if (scores.c() != coding.num_classes())
        throw ValidationError("argmax_labels: score channels do not match the label coding");
    data::LabelMap out(scores.h(), scores.w());
    const std::size_t plane = scores.shape().plane();
    for (std::size_t i = 0; i < plane; ++i) {
        int best = 0;
        T best_v = scores.plane(n, 0)[i];
        for (int k = 1; k < scores.c(); ++k) {
            const T v = scores.plane(n, k)[i];
            if (v > best_v) {
                best_v = v;
                best = k;
            }
        }
        out.pixels[i] = coding.code_of(best);
    }
    return out;
}

/// Inference-mode label map for one sample.
template <class T>
data::LabelMap predict_labels(Network<T>& net, const data::MfishSample& sample, const data::LabelCoding& coding)
{
    const auto logits = net.forward(sample_tensor<T>(sample), nn::Mode::infer);
    return argmax_labels(logits, 0, coding);
}

} // namespace mfish::segnet
