#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfish/data/image.hpp"
#include "mfish/data/label_coding.hpp"

namespace mfish::metrics {

struct ClassCount {
    std::uint64_t correct = 0;
    std::uint64_t total = 0;

    friend bool operator==(const ClassCount&, const ClassCount&) = default;
};

/// Correct classification ratio over ground-truth chromosome pixels.
struct CcrReport {
    std::uint64_t correct = 0;
    std::uint64_t total = 0;
    double ccr = 0.0;
    std::vector<ClassCount> per_class; ///< indexed like LabelCoding::chromosome_codes

    nlohmann::json to_json(const data::LabelCoding& coding) const
    {
        nlohmann::json classes = nlohmann::json::object();
        for (std::size_t k = 0; k < per_class.size(); ++k)
            classes[coding.name(coding.code_of(static_cast<int>(k)))] = {{"correct", per_class[k].correct},
                                                                          {"total", per_class[k].total}};
        return {{"correct", correct}, {"total", total}, {"ccr", ccr}, {"per_class", classes}};
    }
};

/// Rows are ground-truth classes, columns predicted classes, plus a final
/// column for predictions that are not a chromosome code. Only pixels whose
/// truth is a chromosome are counted.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes = data::kNumChromosomeClasses)
        : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * (num_classes + 1), 0)
    {
    }

    int num_classes() const { return k_; }

    /// Column index `num_classes()` is the "not a chromosome" column.
    std::uint64_t at(int truth, int pred) const { return counts_[static_cast<std::size_t>(truth) * (k_ + 1) + pred]; }

    void add(const data::LabelMap& pred, const data::LabelMap& truth, const data::LabelCoding& coding)
    {
        if (!pred.same_size(truth))
            throw ValidationError("confusion: prediction is " + std::to_string(pred.width) + "x" +
                                  std::to_string(pred.height) + ", truth is " + std::to_string(truth.width) + "x" +
                                  std::to_string(truth.height));
        if (coding.num_classes() != k_)
            throw ValidationError("confusion: label coding has a different class count");
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const int t = coding.class_index(truth.pixels[i]);
            if (t < 0)
                continue;
            const int p = coding.class_index(pred.pixels[i]);
            ++counts_[static_cast<std::size_t>(t) * (k_ + 1) + (p < 0 ? k_ : p)];
        }
    }

    void merge(const ConfusionMatrix& other)
    {
        if (other.k_ != k_)
            throw ValidationError("confusion: cannot merge matrices of different size");
        for (std::size_t i = 0; i < counts_.size(); ++i)
            counts_[i] += other.counts_[i];
    }

    std::uint64_t trace() const
    {
        std::uint64_t s = 0;
        for (int k = 0; k < k_; ++k)
            s += at(k, k);
        return s;
    }

    std::uint64_t sum() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

    std::uint64_t row_sum(int truth) const
    {
        std::uint64_t s = 0;
        for (int p = 0; p <= k_; ++p)
            s += at(truth, p);
        return s;
    }

    /// Throws when no chromosome pixel has been counted.
    CcrReport report() const
    {
        CcrReport r;
        r.correct = trace();
        r.total = sum();
        if (r.total == 0)
            throw ValidationError("CCR undefined: no chromosome pixels in the ground truth");
        r.ccr = static_cast<double>(r.correct) / static_cast<double>(r.total);
        for (int k = 0; k < k_; ++k)
            r.per_class.push_back({at(k, k), row_sum(k)});
        return r;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json rows = nlohmann::json::array();
        for (int t = 0; t < k_; ++t) {
            std::vector<std::uint64_t> row(k_ + 1);
            for (int p = 0; p <= k_; ++p)
                row[p] = at(t, p);
            rows.push_back(row);
        }
        return rows;
    }

private:
    int k_;
    std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(const data::LabelMap& pred, const data::LabelMap& truth,
                                 const data::LabelCoding& coding)
{
    ConfusionMatrix m(coding.num_classes());
    m.add(pred, truth, coding);
    return m;
}

/// CCR of one prediction: correct chromosome pixels / chromosome pixels.
inline CcrReport compute_ccr(const data::LabelMap& pred, const data::LabelMap& truth,
                             const data::LabelCoding& coding)
{
    return confusion(pred, truth, coding).report();
}

/// Mean of the final k entries.
inline double average_last_k(std::span<const double> values, std::size_t k)
{
    if (k == 0)
        throw ValidationError("average_last_k: k must be positive");
    if (values.size() < k)
        throw ValidationError("average_last_k: " + std::to_string(values.size()) + " values, need " +
                              std::to_string(k));
    double s = 0.0;
    for (std::size_t i = values.size() - k; i < values.size(); ++i)
        s += values[i];
    return s / static_cast<double>(k);
}

} // namespace mfish::metrics
