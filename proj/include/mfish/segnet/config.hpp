#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfish/core/error.hpp"
#include "mfish/data/label_coding.hpp"
#include "mfish/data/sample.hpp"

namespace mfish::segnet {

enum class BlockKind { conv, maxpool, aspp_branch, concat, dropout, conv1x1, upsample };

inline std::string_view to_string(BlockKind k)
{
    switch (k) {
    case BlockKind::conv:
        return "conv";
    case BlockKind::maxpool:
        return "maxpool";
    case BlockKind::aspp_branch:
        return "aspp_branch";
    case BlockKind::concat:
        return "concat";
    case BlockKind::dropout:
        return "dropout";
    case BlockKind::conv1x1:
        return "conv1x1";
    case BlockKind::upsample:
        return "upsample";
    }
    return "conv";
}

inline BlockKind block_kind_from_string(std::string_view s)
{
    for (auto k : {BlockKind::conv, BlockKind::maxpool, BlockKind::aspp_branch, BlockKind::concat, BlockKind::dropout,
                   BlockKind::conv1x1, BlockKind::upsample})
        if (to_string(k) == s)
            return k;
    throw ValidationError("unknown block kind '" + std::string(s) + "'");
}

/// One entry of the declarative architecture.
///
/// conv / aspp_branch: `kernel`, `dilation`, `filters`, repeated `repeat`
/// times. maxpool: `kernel` is the pool size and `stride` the step. An
/// aspp_branch with `global_pool` set averages the feature map to 1x1 first
/// and broadcasts its 1x1-conv output back.
struct BlockSpec {
    BlockKind kind = BlockKind::conv;
    int kernel = 3;
    int dilation = 1;
    int filters = 0;
    int repeat = 1;
    int stride = 1;
    bool global_pool = false;

    static BlockSpec conv(int kernel, int dilation, int filters, int repeat = 1)
    {
        return {BlockKind::conv, kernel, dilation, filters, repeat, 1, false};
    }
    static BlockSpec pool(int size = 2, int stride = 2) { return {BlockKind::maxpool, size, 1, 0, 1, stride, false}; }
    static BlockSpec branch(int kernel, int dilation, int filters)
    {
        return {BlockKind::aspp_branch, kernel, dilation, filters, 1, 1, false};
    }
    static BlockSpec image_pool(int filters) { return {BlockKind::aspp_branch, 1, 1, filters, 1, 1, true}; }

    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

inline void to_json(nlohmann::json& j, const BlockSpec& b)
{
    j = {{"kind", std::string(to_string(b.kind))},
         {"kernel", b.kernel},
         {"dilation", b.dilation},
         {"filters", b.filters},
         {"repeat", b.repeat},
         {"stride", b.stride},
         {"global_pool", b.global_pool}};
}

inline void from_json(const nlohmann::json& j, BlockSpec& b)
{
    b = BlockSpec{};
    b.kind = block_kind_from_string(j.at("kind").get<std::string>());
    b.kernel = j.value("kernel", b.kernel);
    b.dilation = j.value("dilation", b.dilation);
    b.filters = j.value("filters", b.filters);
    b.repeat = j.value("repeat", b.repeat);
    b.stride = j.value("stride", b.kind == BlockKind::maxpool ? 2 : 1);
    b.global_pool = j.value("global_pool", false);
}

/// Front stages, ASPP branches and head of the segmentation network.
///
/// The head is fixed: concat -> dropout -> 1x1 conv (`fuse_filters`, ReLU,
/// batch norm; skipped when 0) -> 1x1 conv to `num_classes` logits ->
/// bilinear upsampling by `output_stride`.
struct NetworkConfig {
    int in_channels = data::kNumChannels;
    std::vector<BlockSpec> front_stages;
    std::vector<BlockSpec> aspp_branches;
    int fuse_filters = 256;
    double dropout_rate = 0.5;
    int num_classes = data::kNumChromosomeClasses;
    int output_stride = 4;
    double bn_momentum = 0.9;
    double bn_epsilon = 1e-5;

    /// 2x(3x3@64), pool, 2x(3x3@128), pool, ASPP{1x1, d6, d12, d18, image pool}@256.
    static NetworkConfig standard() { return scaled(64, 128, 256); }

    /// Same topology with other widths.
    static NetworkConfig scaled(int stage1, int stage2, int aspp)
    {
        NetworkConfig c;
        c.front_stages = {BlockSpec::conv(3, 1, stage1, 2), BlockSpec::pool(), BlockSpec::conv(3, 1, stage2, 2),
                          BlockSpec::pool()};
        c.aspp_branches = {BlockSpec::branch(1, 1, aspp), BlockSpec::branch(3, 6, aspp),
                           BlockSpec::branch(3, 12, aspp), BlockSpec::branch(3, 18, aspp),
                           BlockSpec::image_pool(aspp)};
        c.fuse_filters = aspp;
        return c;
    }

    void validate() const
    {
        auto fail = [](const std::string& msg) { throw ValidationError("NetworkConfig: " + msg); };
        if (in_channels <= 0 || num_classes <= 0)
            fail("channel and class counts must be positive");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            fail("dropout rate must lie in [0, 1)");
        if (fuse_filters < 0)
            fail("fuse_filters must be non-negative");
        if (!(bn_epsilon > 0.0))
            fail("batch-norm epsilon must be positive");
        int pools = 0, stride = 1;
        for (const auto& b : front_stages) {
            if (b.kind == BlockKind::maxpool) {
                if (b.kernel <= 0 || b.stride <= 0)
                    fail("pool size and stride must be positive");
                ++pools;
                stride *= b.stride;
            } else if (b.kind == BlockKind::conv) {
                if (b.kernel <= 0 || b.kernel % 2 == 0 || b.dilation <= 0 || b.filters <= 0 || b.repeat <= 0)
                    fail("conv blocks need an odd kernel and positive dilation, filters and repeat");
            } else {
                fail("front stages may only hold conv and maxpool blocks, found " + std::string(to_string(b.kind)));
            }
        }
        if (pools != 2)
            fail("exactly two pooling operations must precede the ASPP module, found " + std::to_string(pools));
        if (stride != output_stride)
            fail("pool strides multiply to " + std::to_string(stride) + ", output stride is " +
                 std::to_string(output_stride));
        if (front_stages.empty() || front_stages.front().kind != BlockKind::conv)
            fail("the network must start with a conv block");
        if (aspp_branches.empty())
            fail("at least one ASPP branch is required");
        for (const auto& b : aspp_branches) {
            if (b.kind != BlockKind::aspp_branch)
                fail("ASPP entries must be aspp_branch blocks");
            if (b.kernel <= 0 || b.kernel % 2 == 0 || b.dilation <= 0 || b.filters <= 0)
                fail("ASPP branches need an odd kernel and positive dilation and filters");
            if (b.global_pool && b.kernel != 1)
                fail("the image-pooling branch uses a 1x1 convolution");
        }
    }

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

inline void to_json(nlohmann::json& j, const NetworkConfig& c)
{
    j = {{"in_channels", c.in_channels},   {"front_stages", c.front_stages}, {"aspp_branches", c.aspp_branches},
         {"fuse_filters", c.fuse_filters}, {"dropout_rate", c.dropout_rate}, {"num_classes", c.num_classes},
         {"output_stride", c.output_stride}, {"bn_momentum", c.bn_momentum}, {"bn_epsilon", c.bn_epsilon}};
}

/// Missing keys fall back to the standard configuration.
inline void from_json(const nlohmann::json& j, NetworkConfig& c)
{
    c = NetworkConfig::standard();
    c.in_channels = j.value("in_channels", c.in_channels);
    if (j.contains("front_stages"))
        c.front_stages = j.at("front_stages").get<std::vector<BlockSpec>>();
    if (j.contains("aspp_branches"))
        c.aspp_branches = j.at("aspp_branches").get<std::vector<BlockSpec>>();
    c.fuse_filters = j.value("fuse_filters", c.fuse_filters);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.output_stride = j.value("output_stride", c.output_stride);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.bn_epsilon = j.value("bn_epsilon", c.bn_epsilon);
}

} // namespace mfish::segnet
