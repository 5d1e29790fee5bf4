#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfish/core/error.hpp"
#include "mfish/data/image.hpp"

namespace mfish::data {

inline constexpr int kNumChromosomeClasses = 24;

/// Mapping between integer label codes on disk and the 24 chromosome classes.
class LabelCoding {
public:
    /// background 0, autosomes 1-22, X = 23, Y = 24, overlap 255.
    LabelCoding() : LabelCoding(0, 255, default_codes()) {}

    LabelCoding(int background_code, int overlap_code, std::vector<int> chromosome_codes,
                std::map<int, std::string> names = {})
        : background_(background_code), overlap_(overlap_code), codes_(std::move(chromosome_codes)),
          names_(std::move(names))
    {
        validate();
        for (std::size_t i = 0; i < codes_.size(); ++i)
            index_.emplace(codes_[i], static_cast<int>(i));
        if (names_.empty())
            names_ = default_names();
    }

    int background_code() const { return background_; }
    int overlap_code() const { return overlap_; }
    const std::vector<int>& chromosome_codes() const { return codes_; }
    int num_classes() const { return static_cast<int>(codes_.size()); }

    /// Position of `code` in chromosome_codes, or -1 for background/overlap/unknown.
    int class_index(int code) const
    {
        auto it = index_.find(code);
        return it == index_.end() ? -1 : it->second;
    }
    int code_of(int class_index) const { return codes_.at(class_index); }
    bool is_chromosome(int code) const { return index_.count(code) != 0; }
    bool is_declared(int code) const { return code == background_ || code == overlap_ || is_chromosome(code); }

    std::string name(int code) const
    {
        auto it = names_.find(code);
        return it == names_.end() ? std::to_string(code) : it->second;
    }

    /// Throws ValidationError on the first undeclared code in `labels`.
    void check_labels(const LabelMap& labels, const std::string& context) const
    {
        for (auto v : labels.pixels)
            if (!is_declared(v))
                throw ValidationError(context + ": label code " + std::to_string(v) + " is not declared");
    }

    nlohmann::json to_json() const
    {
        nlohmann::json names = nlohmann::json::object();
        for (const auto& [k, v] : names_)
            names[std::to_string(k)] = v;
        return {{"background_code", background_},
                {"overlap_code", overlap_},
                {"chromosome_codes", codes_},
                {"code_names", names}};
    }

    static LabelCoding from_json(const nlohmann::json& j)
    {
        LabelCoding d;
        std::map<int, std::string> names;
        if (j.contains("code_names"))
            for (const auto& [k, v] : j.at("code_names").items())
                names[std::stoi(k)] = v.get<std::string>();
        return LabelCoding(j.value("background_code", d.background_), j.value("overlap_code", d.overlap_),
                           j.value("chromosome_codes", d.codes_), names);
    }

private:
    static std::vector<int> default_codes()
    {
        std::vector<int> c(kNumChromosomeClasses);
        for (int i = 0; i < kNumChromosomeClasses; ++i)
            c[i] = i + 1;
        return c;
    }

    std::map<int, std::string> default_names() const
    {
        std::map<int, std::string> n{{background_, "background"}, {overlap_, "overlap"}};
        for (std::size_t i = 0; i < codes_.size(); ++i)
            n[codes_[i]] = i < 22 ? std::to_string(i + 1) : (i == 22 ? "X" : "Y");
        return n;
    }

    void validate() const
    {
        if (static_cast<int>(codes_.size()) != kNumChromosomeClasses)
            throw ValidationError("LabelCoding: expected 24 chromosome codes, got " + std::to_string(codes_.size()));
        std::set<int> distinct(codes_.begin(), codes_.end());
        if (distinct.size() != codes_.size())
            throw ValidationError("LabelCoding: chromosome codes must be distinct");
        if (distinct.count(background_) || distinct.count(overlap_))
            throw ValidationError("LabelCoding: background/overlap codes collide with a chromosome code");
        if (background_ == overlap_)
            throw ValidationError("LabelCoding: background and overlap codes must differ");
    }

    int background_;
    int overlap_;
    std::vector<int> codes_;
    std::map<int, std::string> names_;
    std::unordered_map<int, int> index_;
};

} // namespace mfish::data
