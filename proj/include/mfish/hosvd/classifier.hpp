#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "mfish/core/parallel.hpp"
#include "mfish/core/random.hpp"
#include "mfish/data/sample.hpp"
#include "mfish/hosvd/decompose.hpp"
#include "mfish/metrics/ccr.hpp"
#include "mfish/metrics/error_matrix.hpp"

namespace mfish::hosvd {

/// Patches of one class; each patch is patch_size x patch_size x 6, stored
/// with the channel index fastest.
struct PatchSet {
    int class_code = 0;
    int patch_size = 0;
    std::vector<std::vector<double>> patches;
    std::vector<std::pair<int, int>> centers; ///< (y, x)
};

/// Default ranks for (patch index, row, column, channel).
inline std::array<int, 4> default_ranks() { return {30, 5, 5, 4}; }

struct HosvdParams {
    int n_patches = 30;
    int patch_size = 11;
    std::array<int, 4> ranks = default_ranks();
    double basis_tolerance = 1e-10; ///< relative eigenvalue cut when orthonormalising class bases
};

struct ClassModel {
    int class_code = 0;
    Decomposition decomposition;
    Matrix basis; ///< D x r orthonormal columns spanning the class subspace (D = p*p*6)
};

struct HosvdModel {
    int patch_size = 0;
    std::array<int, 4> ranks{};
    std::vector<ClassModel> classes; ///< ascending class index order
};

/// Zero-padded patch centred on (y, x).
inline std::vector<double> extract_patch(const data::MfishSample& s, int y, int x, int patch_size)
{
    const int r = patch_size / 2;
    std::vector<double> p(static_cast<std::size_t>(patch_size) * patch_size * data::kNumChannels, 0.0);
    for (int dy = 0; dy < patch_size; ++dy) {
        const int yy = y - r + dy;
        if (yy < 0 || yy >= s.height())
            continue;
        for (int dx = 0; dx < patch_size; ++dx) {
            const int xx = x - r + dx;
            if (xx < 0 || xx >= s.width())
                continue;
            double* dst = p.data() + (static_cast<std::size_t>(dy) * patch_size + dx) * data::kNumChannels;
            for (int c = 0; c < data::kNumChannels; ++c)
                dst[c] = s.channels[c].at(yy, xx);
        }
    }
    return p;
}

/// Draws up to `n_patches` distinct centres per chromosome class present in
/// the sample (uniformly, without replacement). Classes with fewer pixels use
/// every pixel.
inline std::vector<PatchSet> sample_patches(const data::MfishSample& s, const data::LabelCoding& coding, int n_patches,
                                            int patch_size, Rng& rng)
{
    if (n_patches <= 0 || patch_size <= 0 || patch_size % 2 == 0)
        throw ValidationError("sample_patches: need a positive patch count and an odd patch size");
    std::vector<std::vector<int>> pixels(coding.num_classes());
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
        const int k = coding.class_index(s.labels.pixels[i]);
        if (k >= 0)
            pixels[k].push_back(static_cast<int>(i));
    }
    std::vector<PatchSet> out;
    for (int k = 0; k < coding.num_classes(); ++k) {
        auto& idx = pixels[k];
        if (idx.empty())
            continue;
        const int take = std::min<int>(n_patches, static_cast<int>(idx.size()));
        if (take < n_patches)
            spdlog::warn("{}: class {} has only {} pixels, using all of them", s.id, coding.name(coding.code_of(k)),
                         idx.size());
        for (int i = 0; i < take; ++i) // partial Fisher-Yates
            std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
        PatchSet set{coding.code_of(k), patch_size, {}, {}};
        for (int i = 0; i < take; ++i) {
            const int y = idx[i] / s.width(), x = idx[i] % s.width();
            set.centers.emplace_back(y, x);
            set.patches.push_back(extract_patch(s, y, x, patch_size));
        }
        out.push_back(std::move(set));
    }
    if (out.empty())
        throw ValidationError("sample_patches: " + s.id + " has no chromosome pixels");
    return out;
}

namespace detail {

// Orthonormal basis of span(B) via the eigendecomposition of B^T B.
inline Matrix orthonormal_span(const Matrix& b, double tolerance)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b.transpose() * b);
    const auto& vals = eig.eigenvalues();
    const double top = vals.size() ? vals(vals.size() - 1) : 0.0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = vals.size(); i-- > 0;)
        if (vals(i) > tolerance * top && vals(i) > 0)
            keep.push_back(i);
    Matrix q(b.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
        q.col(static_cast<Eigen::Index>(j)) = b * eig.eigenvectors().col(keep[j]) / std::sqrt(vals(keep[j]));
    return q;
}

} // namespace detail

/// Decomposes each class's (patch x row x column x channel) tensor. The class
/// subspace is spanned by the core's patch-mode slices mapped back through the
/// spatial and channel factors.
inline HosvdModel fit_class_models(const std::vector<PatchSet>& sets, const std::array<int, 4>& ranks,
                                   double basis_tolerance = 1e-10)
{
    if (sets.empty())
        throw ValidationError("fit_class_models: no classes");
    HosvdModel model;
    model.patch_size = sets.front().patch_size;
    model.ranks = ranks;
    const int p = model.patch_size;
    const std::size_t D = static_cast<std::size_t>(p) * p * data::kNumChannels;
    for (const auto& set : sets) {
        if (set.patches.empty())
            throw ValidationError("fit_class_models: class " + std::to_string(set.class_code) + " has no patches");
        if (set.patch_size != p)
            throw ValidationError("fit_class_models: mixed patch sizes");
        const int n = static_cast<int>(set.patches.size());
        DenseTensor x({n, p, p, data::kNumChannels});
        for (int i = 0; i < n; ++i)
            std::copy(set.patches[i].begin(), set.patches[i].end(), x.data() + i * D);
        const std::vector<int> r{std::min(ranks[0], n), std::min(ranks[1], p), std::min(ranks[2], p),
                                 std::min(ranks[3], data::kNumChannels)};
        ClassModel cm;
        cm.class_code = set.class_code;
        cm.decomposition = hosvd_decompose(x, r);
        // Slices S[v, :, :, :] x_1 U1 x_2 U2 x_3 U3, as columns of a D x r0 matrix.
        DenseTensor slices = cm.decomposition.core;
        for (int m = 1; m < 4; ++m)
            slices = slices.mode_product(cm.decomposition.factors[m], m);
        Eigen::Map<const RowMatrix> rows(slices.data(), r[0], static_cast<Eigen::Index>(D));
        cm.basis = detail::orthonormal_span(rows.transpose(), basis_tolerance);
        model.classes.push_back(std::move(cm));
    }
    std::stable_sort(model.classes.begin(), model.classes.end(),
                     [](const ClassModel& a, const ClassModel& b) { return a.class_code < b.class_code; });
    return model;
}

/// Assigns every ground-truth chromosome pixel the class whose subspace leaves
/// the smallest residual ||p||^2 - ||Q^T p||^2 (ties to the lowest code).
/// Other pixels keep the background code. Class models are ordered by
/// ascending chromosome index of `coding`.
inline data::LabelMap classify_pixels(const HosvdModel& model, const data::MfishSample& s,
                                      const data::LabelCoding& coding)
{
    data::LabelMap out(s.height(), s.width(), coding.background_code());
    std::vector<int> where;
    for (std::size_t i = 0; i < s.labels.size(); ++i)
        if (coding.is_chromosome(s.labels.pixels[i]))
            where.push_back(static_cast<int>(i));
    if (where.empty() || model.classes.empty())
        return out;
    const int p = model.patch_size;
    const Eigen::Index D = static_cast<Eigen::Index>(p) * p * data::kNumChannels;
    Matrix patches(D, static_cast<Eigen::Index>(where.size()));
    for (std::size_t j = 0; j < where.size(); ++j) {
        const auto v = extract_patch(s, where[j] / s.width(), where[j] % s.width(), p);
        patches.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(v.data(), D);
    }
    const Eigen::RowVectorXd norms = patches.colwise().squaredNorm();

    // Order candidate classes by chromosome index so ties resolve to the lowest code.
    std::vector<const ClassModel*> order;
    for (const auto& cm : model.classes)
        order.push_back(&cm);
    std::stable_sort(order.begin(), order.end(), [&](const ClassModel* a, const ClassModel* b) {
        return coding.class_index(a->class_code) < coding.class_index(b->class_code);
    });

    std::vector<double> best(where.size(), std::numeric_limits<double>::infinity());
    std::vector<int> label(where.size(), order.front()->class_code);
    for (const ClassModel* cm : order) {
        const Eigen::RowVectorXd proj = (cm->basis.transpose() * patches).colwise().squaredNorm();
        for (std::size_t j = 0; j < where.size(); ++j) {
            const double residual = norms(static_cast<Eigen::Index>(j)) - proj(static_cast<Eigen::Index>(j));
            if (residual < best[j]) {
                best[j] = residual;
                label[j] = cm->class_code;
            }
        }
    }
    for (std::size_t j = 0; j < where.size(); ++j)
        out.pixels[where[j]] = label[j];
    return out;
}

/// Fits a model on every sample (seeded per sample id) and evaluates it on
/// every sample: entry (i, j) is the CCR on sample j of the model from sample i.
inline metrics::ErrorMatrix cross_image_matrix(std::span<const data::MfishSample> samples,
                                               const data::LabelCoding& coding, const HosvdParams& params,
                                               std::uint64_t seed, int workers = 1)
{
    if (samples.size() < 2)
        throw ValidationError("cross_image_matrix: need at least two samples");
    std::vector<std::string> ids;
    for (const auto& s : samples)
        ids.push_back(s.id);
    metrics::ErrorMatrix m(ids);
    std::vector<HosvdModel> models(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        try {
            Rng rng(mix_seed({seed, hash_string(samples[i].id)}));
            models[i] = fit_class_models(sample_patches(samples[i], coding, params.n_patches, params.patch_size, rng),
                                         params.ranks, params.basis_tolerance);
        } catch (const std::exception& e) {
            throw Error("HOSVD model for " + samples[i].id + ": " + e.what());
        }
    });
    const std::size_t n = samples.size();
    parallel_for(n * n, workers, [&](std::size_t k) {
        const std::size_t i = k / n, j = k % n;
        try {
            m.at(i, j) = metrics::compute_ccr(classify_pixels(models[i], samples[j], coding), samples[j].labels, coding)
                             .ccr;
        } catch (const std::exception& e) {
            throw Error("HOSVD pair (" + samples[i].id + ", " + samples[j].id + "): " + e.what());
        }
    });
    return m;
}

} // namespace mfish::hosvd
