#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfish/core/error.hpp"

namespace mfish::metrics {

/// Train-image x test-image CCR table: entry (i, j) is the CCR on sample j of
/// a classifier built from sample i.
struct ErrorMatrix {
    std::vector<std::string> ids;
    std::vector<double> values; ///< row-major |ids| x |ids|

    ErrorMatrix() = default;
    explicit ErrorMatrix(std::vector<std::string> sample_ids)
        : ids(std::move(sample_ids)), values(ids.size() * ids.size(), 0.0)
    {
    }

    std::size_t size() const { return ids.size(); }
    double& at(std::size_t train, std::size_t test) { return values[train * ids.size() + test]; }
    double at(std::size_t train, std::size_t test) const { return values[train * ids.size() + test]; }

    double diagonal_mean() const
    {
        require_square(1);
        double s = 0;
        for (std::size_t i = 0; i < size(); ++i)
            s += at(i, i);
        return s / static_cast<double>(size());
    }

    double off_diagonal_mean() const
    {
        require_square(2);
        double s = 0;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = 0; j < size(); ++j)
                if (i != j)
                    s += at(i, j);
        return s / static_cast<double>(size() * (size() - 1));
    }

    /// For each tested sample, the best CCR reached by a model trained on a
    /// different sample; averaged over tested samples.
    double best_cross_mean() const
    {
        require_square(2);
        double s = 0;
        for (std::size_t j = 0; j < size(); ++j)
            s += best_cross(j);
        return s / static_cast<double>(size());
    }

    /// Fraction of tested samples (columns) whose best CCR comes from the
    /// self-trained model; ties count for the diagonal.
    double diagonal_max_rate_by_test() const
    {
        require_square(2);
        std::size_t hits = 0;
        for (std::size_t j = 0; j < size(); ++j)
            hits += at(j, j) >= best_cross(j);
        return static_cast<double>(hits) / static_cast<double>(size());
    }

    /// Fraction of training samples (rows) that score best on themselves.
    double diagonal_max_rate_by_train() const
    {
        require_square(2);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            double best = -1.0;
            for (std::size_t j = 0; j < size(); ++j)
                if (j != i)
                    best = std::max(best, at(i, j));
            hits += at(i, i) >= best;
        }
        return static_cast<double>(hits) / static_cast<double>(size());
    }

    nlohmann::json summary() const
    {
        nlohmann::json j{{"samples", size()}, {"diagonal_mean", diagonal_mean()}};
        if (size() >= 2) {
            j["off_diagonal_mean"] = off_diagonal_mean();
            j["best_cross_mean"] = best_cross_mean();
            j["diagonal_max_rate_by_test"] = diagonal_max_rate_by_test();
            j["diagonal_max_rate_by_train"] = diagonal_max_rate_by_train();
        }
        return j;
    }

    /// Header row "train\test,id1,...", then one row per training id. Values
    /// are printed with 17 significant digits so they re-parse exactly.
    std::string to_csv() const
    {
        std::ostringstream out;
        out << "train\\test";
        for (const auto& id : ids)
            out << ',' << id;
        out << '\n';
        char buf[40];
        for (std::size_t i = 0; i < size(); ++i) {
            out << ids[i];
            for (std::size_t j = 0; j < size(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", at(i, j));
                out << ',' << buf;
            }
            out << '\n';
        }
        return out.str();
    }

    static ErrorMatrix from_csv(const std::string& text)
    {
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line))
            throw IoError("error matrix CSV is empty");
        auto split = [](const std::string& l) {
            std::vector<std::string> cells;
            std::stringstream ss(l);
            std::string cell;
            while (std::getline(ss, cell, ','))
                cells.push_back(cell);
            return cells;
        };
        auto header = split(line);
        if (header.empty())
            throw IoError("error matrix CSV has no header");
        ErrorMatrix m(std::vector<std::string>(header.begin() + 1, header.end()));
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (!std::getline(in, line))
                throw IoError("error matrix CSV has too few rows");
            auto cells = split(line);
            if (cells.size() != m.size() + 1 || cells[0] != m.ids[i])
                throw IoError("error matrix CSV row " + std::to_string(i + 1) + " is malformed");
            for (std::size_t j = 0; j < m.size(); ++j)
                m.at(i, j) = std::stod(cells[j + 1]);
        }
        return m;
    }

    void save_csv(const std::filesystem::path& path) const
    {
        std::ofstream out(path);
        if (!out)
            throw IoError("cannot write " + path.string());
        out << to_csv();
    }

    static ErrorMatrix load_csv(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw IoError("missing file: " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        return from_csv(ss.str());
    }

private:
    double best_cross(std::size_t j) const
    {
        double best = -1.0;
        for (std::size_t i = 0; i < size(); ++i)
            if (i != j)
                best = std::max(best, at(i, j));
        return best;
    }

    void require_square(std::size_t min_size) const
    {
        if (values.size() != ids.size() * ids.size())
            throw ValidationError("ErrorMatrix: values do not form a square matrix");
        if (ids.size() < min_size)
            throw ValidationError("ErrorMatrix: needs at least " + std::to_string(min_size) + " samples");
    }
};

} // namespace mfish::metrics
