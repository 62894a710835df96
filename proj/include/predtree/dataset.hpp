#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace predtree {

enum class ColumnKind { Numeric, Categorical };

inline std::string to_string(ColumnKind kind) {
    return kind == ColumnKind::Numeric ? "numeric" : "categorical";
}

/// One predictor column. Numeric columns hold finite doubles; categorical
/// columns hold codes into a sorted table of category names.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<double> numeric;
    std::vector<std::int32_t> codes;
    std::vector<std::string> categories;

    std::size_t rows() const noexcept {
        return kind == ColumnKind::Numeric ? numeric.size() : codes.size();
    }

    const std::string& category_of_row(std::size_t row) const {
        return categories[static_cast<std::size_t>(codes[row])];
    }
};

inline Column numeric_column(std::string name, std::vector<double> values) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::Numeric;
    c.numeric = std::move(values);
    return c;
}

inline Column categorical_column(std::string name, const std::vector<std::string>& values) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::Categorical;
    c.categories = values;
    std::sort(c.categories.begin(), c.categories.end());
    c.categories.erase(std::unique(c.categories.begin(), c.categories.end()),
                       c.categories.end());
    c.codes.reserve(values.size());
    for (const auto& v : values) {
        auto it = std::lower_bound(c.categories.begin(), c.categories.end(), v);
        c.codes.push_back(static_cast<std::int32_t>(it - c.categories.begin()));
    }
    return c;
}

/// Columnar table of predictors plus at most one real-valued response.
/// Immutable after construction and shareable across threads.
class Dataset {
public:
    Dataset(std::vector<Column> predictors, std::vector<double> response,
            std::string response_name)
        : predictors_(std::move(predictors)),
          response_(std::move(response)),
          response_name_(std::move(response_name)) {
        n_ = response_.size();
        validate(true);
    }

    /// Predictor-only table (prediction inputs without a response).
    explicit Dataset(std::vector<Column> predictors) : predictors_(std::move(predictors)) {
        if (predictors_.empty()) throw std::invalid_argument("dataset has no columns");
        n_ = predictors_.front().rows();
        validate(false);
    }

    std::size_t n_rows() const noexcept { return n_; }
    std::size_t n_predictors() const noexcept { return predictors_.size(); }
    const std::vector<Column>& predictors() const noexcept { return predictors_; }
    const Column& predictor(std::size_t k) const { return predictors_.at(k); }

    bool has_response() const noexcept { return !response_.empty(); }
    const std::vector<double>& response() const {
        if (!has_response()) throw std::logic_error("dataset has no response column");
        return response_;
    }
    const std::string& response_name() const noexcept { return response_name_; }

    /// Index of the predictor named `name`, or npos.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t predictor_index(const std::string& name) const {
        for (std::size_t k = 0; k < predictors_.size(); ++k) {
            if (predictors_[k].name == name) return k;
        }
        return npos;
    }

    /// Copy of the given rows (with repetition allowed, e.g. bootstrap).
    Dataset select_rows(std::span<const std::size_t> rows) const {
        std::vector<Column> cols;
        cols.reserve(predictors_.size());
        for (const auto& c : predictors_) {
            Column out;
            out.name = c.name;
            out.kind = c.kind;
            out.categories = c.categories;
            if (c.kind == ColumnKind::Numeric) {
                out.numeric.reserve(rows.size());
                for (auto r : rows) out.numeric.push_back(c.numeric.at(r));
            } else {
                out.codes.reserve(rows.size());
                for (auto r : rows) out.codes.push_back(c.codes.at(r));
            }
            cols.push_back(std::move(out));
        }
        if (!has_response()) return Dataset(std::move(cols));
        std::vector<double> y;
        y.reserve(rows.size());
        for (auto r : rows) y.push_back(response_.at(r));
        return Dataset(std::move(cols), std::move(y), response_name_);
    }

private:
    void validate(bool with_response) const {
        if (n_ == 0) throw std::invalid_argument("dataset must have at least one row");
        for (const auto& c : predictors_) {
            if (c.rows() != n_) {
                throw std::invalid_argument("column '" + c.name + "' row count mismatch");
            }
            if (c.kind == ColumnKind::Numeric) {
                for (double v : c.numeric) {
                    if (!std::isfinite(v)) {
                        throw std::invalid_argument("non-finite value in numeric column '" +
                                                    c.name + "'");
                    }
                }
            } else {
                for (auto code : c.codes) {
                    if (code < 0 || static_cast<std::size_t>(code) >= c.categories.size()) {
                        throw std::invalid_argument("categorical code out of range in column '" +
                                                    c.name + "'");
                    }
                }
            }
        }
        if (with_response) {
            for (double v : response_) {
                if (!std::isfinite(v)) throw std::invalid_argument("non-finite response value");
            }
        }
    }

    std::vector<Column> predictors_;
    std::vector<double> response_;
    std::string response_name_;
    std::size_t n_ = 0;
};

}  // namespace predtree
