#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfish/core/random.hpp"
#include "mfish/data/sample.hpp"
#include "mfish/nn/activation.hpp"
#include "mfish/nn/batch_norm.hpp"
#include "mfish/nn/concat.hpp"
#include "mfish/nn/conv.hpp"
#include "mfish/nn/pool.hpp"
#include "mfish/nn/upsample.hpp"
#include "mfish/segnet/config.hpp"

namespace mfish::segnet {

template <class T>
struct NamedTensor {
    std::string name;
    nn::Tensor4<T>* tensor;
};

template <class T>
struct NamedBuffer {
    std::string name;
    std::vector<T>* values;
};

namespace detail {

// conv -> optional ReLU -> optional batch norm, with the forward values the
// backward pass needs.
template <class T>
struct ConvUnit {
    nn::ConvParams<T> conv;
    std::optional<nn::BatchNormState<T>> bn;
    bool relu = true;

    nn::Tensor4<T> input;
    nn::Tensor4<T> activated;
    nn::BatchNormCache<T> bn_cache;

    nn::Tensor4<T> forward(const nn::Tensor4<T>& x, nn::Mode mode)
    {
        const bool keep = mode == nn::Mode::train;
        nn::Tensor4<T> y = nn::conv2d(x, conv);
        if (relu)
            y = nn::relu(y);
        if (keep) {
            input = x;
            activated = relu ? y : nn::Tensor4<T>{};
        }
        if (bn)
            y = nn::batch_norm(y, *bn, mode, keep ? &bn_cache : nullptr);
        return y;
    }

    nn::Tensor4<T> backward(const nn::Tensor4<T>& grad, bool need_input_grad)
    {
        if (input.empty())
            throw ValidationError("Network::backward called without a train-mode forward pass");
        nn::Tensor4<T> g = bn ? nn::batch_norm_backward(grad, *bn, bn_cache) : grad;
        if (relu)
            g = nn::relu_backward(activated, g);
        return nn::conv2d_backward(input, conv, g, need_input_grad);
    }

    void release()
    {
        input = {};
        activated = {};
        bn_cache = {};
    }
};

template <class T>
struct PoolUnit {
    int size = 2;
    int stride = 2;
    nn::Shape4 input_shape{};
    std::vector<std::uint32_t> argmax;
};

template <class T>
struct FrontLayer {
    std::optional<ConvUnit<T>> conv;
    std::optional<PoolUnit<T>> pool;
};

template <class T>
struct Branch {
    ConvUnit<T> unit;
    bool global_pool = false;
    nn::Shape4 input_shape{};
};

} // namespace detail

/// The dilated-convolution / ASPP segmentation network.
///
/// `forward` returns per-pixel logits of the input's size; softmax is applied
/// by the loss or by prediction. Inputs whose sides are not multiples of the
/// output stride are zero-padded at the bottom/right and the logits cropped.
template <class T>
class Network {
public:
    Network(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)), dropout_rng_(mix_seed({seed, 1}))
    {
        config_.validate();
        Rng init(mix_seed({seed, 0}));
        int channels = config_.in_channels;
        for (const auto& b : config_.front_stages) {
            if (b.kind == BlockKind::maxpool) {
                detail::FrontLayer<T> layer;
                layer.pool = detail::PoolUnit<T>{b.kernel, b.stride, {}, {}};
                front_.push_back(std::move(layer));
                continue;
            }
            for (int r = 0; r < b.repeat; ++r) {
                detail::FrontLayer<T> layer;
                layer.conv = make_unit(channels, b.filters, b.kernel, b.dilation, true, true, init);
                front_.push_back(std::move(layer));
                channels = b.filters;
            }
        }
        int concat_channels = 0;
        for (const auto& b : config_.aspp_branches) {
            detail::Branch<T> br;
            br.global_pool = b.global_pool;
            br.unit = make_unit(channels, b.filters, b.kernel, b.dilation, true, !b.global_pool, init);
            branches_.push_back(std::move(br));
            concat_channels += b.filters;
        }
        int head_in = concat_channels;
        if (config_.fuse_filters > 0) {
            fuse_ = make_unit(head_in, config_.fuse_filters, 1, 1, true, true, init);
            head_in = config_.fuse_filters;
        }
        classifier_ = make_unit(head_in, config_.num_classes, 1, 1, false, false, init);
    }

    const NetworkConfig& config() const { return config_; }
    Rng& dropout_rng() { return dropout_rng_; }

    /// Spatial shape of the deepest feature map seen by the last forward pass.
    const nn::Shape4& feature_shape() const { return feature_shape_; }

    nn::Tensor4<T> forward(const nn::Tensor4<T>& input, nn::Mode mode)
    {
        if (input.c() != config_.in_channels)
            throw ValidationError("Network: expected " + std::to_string(config_.in_channels) + " input channels, got " +
                                  std::to_string(input.c()));
        const bool keep = mode == nn::Mode::train;
        const int s = config_.output_stride;
        in_h_ = input.h();
        in_w_ = input.w();
        padded_h_ = (in_h_ + s - 1) / s * s;
        padded_w_ = (in_w_ + s - 1) / s * s;

        nn::Tensor4<T> x = nn::pad_bottom_right(input, padded_h_, padded_w_);
        for (auto& layer : front_) {
            if (layer.conv) {
                x = layer.conv->forward(x, mode);
            } else {
                auto& p = *layer.pool;
                p.input_shape = x.shape();
                auto r = nn::max_pool(x, p.size, p.stride);
                x = std::move(r.output);
                if (keep)
                    p.argmax = std::move(r.argmax);
            }
        }
        feature_shape_ = x.shape();

        std::vector<nn::Tensor4<T>> outs;
        outs.reserve(branches_.size());
        for (auto& br : branches_) {
            br.input_shape = x.shape();
            if (br.global_pool) {
                auto pooled = nn::global_avg_pool(x);
                outs.push_back(nn::broadcast_spatial(br.unit.forward(pooled, mode), x.h(), x.w()));
            } else {
                outs.push_back(br.unit.forward(x, mode));
            }
        }
        std::vector<const nn::Tensor4<T>*> parts;
        for (const auto& o : outs)
            parts.push_back(&o);
        auto cat = nn::concat_channels(parts);
        outs.clear();

        auto dropped = nn::dropout(cat, config_.dropout_rate, mode, dropout_rng_);
        dropout_scale_ = keep ? std::move(dropped.scale) : std::vector<T>{};
        nn::Tensor4<T> h = std::move(dropped.output);
        if (fuse_)
            h = fuse_->forward(h, mode);
        auto logits = classifier_.forward(h, mode);
        head_shape_ = logits.shape();
        logits = nn::bilinear_upsample(logits, padded_h_, padded_w_);
        trained_forward_ = keep;
        return nn::crop_top_left(logits, in_h_, in_w_);
    }

    /// Back-propagates d(loss)/d(logits) from the last train-mode forward,
    /// accumulating parameter gradients.
    void backward(const nn::Tensor4<T>& grad_logits)
    {
        if (!trained_forward_)
            throw ValidationError("Network::backward requires a preceding train-mode forward pass");
        if (grad_logits.shape() != nn::Shape4{head_shape_.n, config_.num_classes, in_h_, in_w_})
            throw ValidationError("Network::backward: gradient shape " + nn::to_string(grad_logits.shape()) +
                                  " does not match the logits");
        auto g = nn::pad_bottom_right(grad_logits, padded_h_, padded_w_);
        g = nn::bilinear_upsample_backward(g, head_shape_.h, head_shape_.w);
        g = classifier_.backward(g, true);
        if (fuse_)
            g = fuse_->backward(g, true);
        g = nn::dropout_backward(g, dropout_scale_);

        std::vector<int> widths;
        for (const auto& br : branches_)
            widths.push_back(br.unit.conv.out_channels());
        auto parts = nn::split_channels(g, widths);
        nn::Tensor4<T> feature_grad(feature_shape_);
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            auto& br = branches_[b];
            nn::Tensor4<T> gb;
            if (br.global_pool) {
                gb = br.unit.backward(nn::broadcast_spatial_backward(parts[b]), true);
                gb = nn::global_avg_pool_backward(gb, br.input_shape);
            } else {
                gb = br.unit.backward(parts[b], true);
            }
            for (std::size_t i = 0; i < gb.size(); ++i)
                feature_grad[i] += gb[i];
        }

        g = std::move(feature_grad);
        for (std::size_t i = front_.size(); i-- > 0;) {
            auto& layer = front_[i];
            if (layer.conv) {
                g = layer.conv->backward(g, i > 0);
            } else {
                auto& p = *layer.pool;
                g = nn::max_pool_backward(g, p.argmax, p.input_shape);
            }
        }
    }

    /// Drops cached activations (they are rebuilt by the next train-mode forward).
    void release_cache()
    {
        for (auto& layer : front_) {
            if (layer.conv)
                layer.conv->release();
            else
                layer.pool->argmax.clear();
        }
        for (auto& br : branches_)
            br.unit.release();
        if (fuse_)
            fuse_->release();
        classifier_.release();
        dropout_scale_.clear();
        trained_forward_ = false;
    }

    void zero_grad()
    {
        for (auto& p : named_parameters())
            p.tensor->zero_grad();
    }

    /// Trainable tensors in a fixed order with stable names.
    std::vector<NamedTensor<T>> named_parameters()
    {
        std::vector<NamedTensor<T>> out;
        auto add_unit = [&](const std::string& prefix, detail::ConvUnit<T>& u) {
            out.push_back({prefix + ".weight", &u.conv.weight});
            out.push_back({prefix + ".bias", &u.conv.bias});
            if (u.bn) {
                out.push_back({prefix + ".bn.gamma", &u.bn->gamma});
                out.push_back({prefix + ".bn.beta", &u.bn->beta});
            }
        };
        for (std::size_t i = 0; i < front_.size(); ++i)
            if (front_[i].conv)
                add_unit("front." + std::to_string(i), *front_[i].conv);
        for (std::size_t b = 0; b < branches_.size(); ++b)
            add_unit("aspp." + std::to_string(b), branches_[b].unit);
        if (fuse_)
            add_unit("fuse", *fuse_);
        add_unit("classifier", classifier_);
        return out;
    }

    /// Batch-norm running statistics.
    std::vector<NamedBuffer<T>> named_buffers()
    {
        std::vector<NamedBuffer<T>> out;
        auto add_unit = [&](const std::string& prefix, detail::ConvUnit<T>& u) {
            if (!u.bn)
                return;
            out.push_back({prefix + ".bn.running_mean", &u.bn->running_mean});
            out.push_back({prefix + ".bn.running_var", &u.bn->running_var});
        };
        for (std::size_t i = 0; i < front_.size(); ++i)
            if (front_[i].conv)
                add_unit("front." + std::to_string(i), *front_[i].conv);
        for (std::size_t b = 0; b < branches_.size(); ++b)
            add_unit("aspp." + std::to_string(b), branches_[b].unit);
        if (fuse_)
            add_unit("fuse", *fuse_);
        return out;
    }

    std::vector<nn::Tensor4<T>*> parameters()
    {
        std::vector<nn::Tensor4<T>*> out;
        for (auto& p : named_parameters())
            out.push_back(p.tensor);
        return out;
    }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (auto& p : const_cast<Network*>(this)->named_parameters())
            n += p.tensor->size();
        return n;
    }

private:
    detail::ConvUnit<T> make_unit(int cin, int cout, int kernel, int dilation, bool relu, bool bn, Rng& init) const
    {
        detail::ConvUnit<T> u;
        u.conv = nn::make_conv_params<T>(cin, cout, kernel, dilation);
        const double sd = std::sqrt(2.0 / (static_cast<double>(cin) * kernel * kernel));
        for (std::size_t i = 0; i < u.conv.weight.size(); ++i)
            u.conv.weight[i] = static_cast<T>(init.normal(0.0, sd));
        u.relu = relu;
        if (bn)
            u.bn = nn::make_batch_norm<T>(cout, config_.bn_momentum, config_.bn_epsilon);
        return u;
    }

    NetworkConfig config_;
    Rng dropout_rng_;
    std::vector<detail::FrontLayer<T>> front_;
    std::vector<detail::Branch<T>> branches_;
    std::optional<detail::ConvUnit<T>> fuse_;
    detail::ConvUnit<T> classifier_;

    std::vector<T> dropout_scale_;
    nn::Shape4 feature_shape_{};
    nn::Shape4 head_shape_{};
    int in_h_ = 0, in_w_ = 0, padded_h_ = 0, padded_w_ = 0;
    bool trained_forward_ = false;
};

} // namespace mfish::segnet
