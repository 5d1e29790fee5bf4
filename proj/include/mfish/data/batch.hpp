#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mfish/core/parallel.hpp"
#include "mfish/core/random.hpp"
#include "mfish/data/sample.hpp"
#include "mfish/nn/tensor.hpp"

namespace mfish::data {

template <class T>
struct Batch {
    nn::Tensor4<T> inputs;  ///< N x 6 x H x W
    nn::Tensor4<T> targets; ///< N x 24 x H x W, one-hot in chromosome_codes order
    nn::Tensor4<T> mask;    ///< N x 1 x H x W, 1 on chromosome pixels
    std::vector<std::string> ids;

    int size() const { return inputs.n(); }
};

/// Stacks samples of identical size into network tensors.
template <class T>
Batch<T> make_batch(std::span<const MfishSample> samples, const LabelCoding& coding)
{
    if (samples.empty())
        throw ValidationError("make_batch: no samples");
    const int N = static_cast<int>(samples.size());
    const int H = samples[0].height(), W = samples[0].width();
    const int K = coding.num_classes();
    Batch<T> b{nn::Tensor4<T>(N, kNumChannels, H, W), nn::Tensor4<T>(N, K, H, W), nn::Tensor4<T>(N, 1, H, W), {}};
    for (int n = 0; n < N; ++n) {
        const auto& s = samples[n];
        if (s.height() != H || s.width() != W)
            throw ValidationError("make_batch: sample " + s.id + " is " + std::to_string(s.width()) + "x" +
                                  std::to_string(s.height()) + ", expected " + std::to_string(W) + "x" +
                                  std::to_string(H));
        b.ids.push_back(s.id);
        for (int c = 0; c < kNumChannels; ++c) {
            T* dst = b.inputs.plane(n, c);
            for (std::size_t i = 0; i < s.channels[c].size(); ++i)
                dst[i] = static_cast<T>(s.channels[c].pixels[i]);
        }
        T* m = b.mask.plane(n, 0);
        for (std::size_t i = 0; i < s.labels.size(); ++i) {
            const int k = coding.class_index(s.labels.pixels[i]);
            if (k < 0)
                continue;
            m[i] = T(1);
            b.targets.plane(n, k)[i] = T(1);
        }
    }
    return b;
}

/// Serves an epoch as a seeded permutation of the samples split into
/// consecutive batches; the last batch may be short. An optional per-sample
/// transform (e.g. augmentation) runs on `workers` threads and receives the
/// epoch number so results do not depend on the worker count.
template <class T>
class BatchStream {
public:
    using Transform = std::function<MfishSample(const MfishSample&, std::uint64_t epoch)>;

    BatchStream(std::span<const MfishSample> samples, const LabelCoding& coding, int batch_size, std::uint64_t seed,
                Transform transform = {}, int workers = 1)
        : samples_(samples), coding_(coding), batch_size_(batch_size), seed_(seed), transform_(std::move(transform)),
          workers_(workers)
    {
        if (batch_size <= 0)
            throw ValidationError("BatchStream: batch size must be positive");
        if (samples.empty())
            throw ValidationError("BatchStream: no samples");
        for (const auto& s : samples)
            if (s.height() != samples[0].height() || s.width() != samples[0].width())
                throw ValidationError("BatchStream: heterogeneous sample sizes (" + s.id + " vs " + samples[0].id +
                                      ")");
    }

    int num_batches() const { return static_cast<int>((samples_.size() + batch_size_ - 1) / batch_size_); }

    /// Sample order for `epoch`.
    std::vector<std::size_t> order(std::uint64_t epoch) const
    {
        std::vector<std::size_t> idx(samples_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng(mix_seed({seed_, 0x6261746368ULL, epoch}));
        rng.shuffle(idx.begin(), idx.end());
        return idx;
    }

    std::vector<int> batch_sizes() const
    {
        std::vector<int> sizes;
        for (std::size_t start = 0; start < samples_.size(); start += batch_size_)
            sizes.push_back(static_cast<int>(std::min<std::size_t>(batch_size_, samples_.size() - start)));
        return sizes;
    }

    /// Invokes fn(batch) for each batch of `epoch` in order.
    template <class Fn>
    void for_each_batch(std::uint64_t epoch, Fn&& fn) const
    {
        const auto idx = order(epoch);
        for (std::size_t start = 0; start < idx.size(); start += batch_size_) {
            const std::size_t count = std::min<std::size_t>(batch_size_, idx.size() - start);
            std::vector<MfishSample> chunk(count);
            parallel_for(count, workers_, [&](std::size_t i) {
                const auto& s = samples_[idx[start + i]];
                chunk[i] = transform_ ? transform_(s, epoch) : s;
            });
            fn(make_batch<T>(chunk, coding_));
        }
    }

private:
    std::span<const MfishSample> samples_;
    const LabelCoding& coding_;
    int batch_size_;
    std::uint64_t seed_;
    Transform transform_;
    int workers_;
};

} // namespace mfish::data
