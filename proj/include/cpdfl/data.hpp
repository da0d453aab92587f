#pragma once

// Dataset ingestion, unit-hypercube scaling, target standardization,
// train/test and k-fold splits, and the MSE metric.
//
// Scaling statistics always come from the training split; test inputs outside
// the training range are clipped to [0, 1].

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpdfl/tncore.hpp"

namespace cpdfl {

struct RawTable {
    rmat X;
    rvec y;
    std::vector<std::string> feature_names;
    std::string target_name;
};

struct CsvOptions {
    char delimiter = ',';
    bool whitespace = false;  // split on runs of blanks/tabs instead of `delimiter`
    bool header = false;
    std::string target = "-1";  // column name (needs header) or index; negative counts from the end
    std::vector<std::string> drop;  // extra columns to ignore, same addressing as target
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_line(const std::string& line, const CsvOptions& opt) {
    std::vector<std::string> cells;
    if (opt.whitespace) {
        std::istringstream in(line);
        std::string cell;
        while (in >> cell) {
            cells.push_back(cell);
        }
        return cells;
    }
    std::size_t begin = 0;
    while (true) {
        const auto end = line.find(opt.delimiter, begin);
        cells.emplace_back(trim(std::string_view(line).substr(begin, end - begin)));
        if (end == std::string::npos) {
            break;
        }
        begin = end + 1;
    }
    return cells;
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

inline Index resolve_column(const std::string& key, const std::vector<std::string>& names, Index width) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == key) {
            return static_cast<Index>(i);
        }
    }
    long long idx = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
    if (ec != std::errc() || ptr != key.data() + key.size()) {
        throw std::invalid_argument("unknown column '" + key + "'");
    }
    const Index resolved = idx < 0 ? width + static_cast<Index>(idx) : static_cast<Index>(idx);
    if (resolved < 0 || resolved >= width) {
        throw std::invalid_argument("column index " + key + " out of range for " + std::to_string(width) +
                                    " columns");
    }
    return resolved;
}

}  // namespace detail

/// Parses a numeric table from a stream; `source` names it in diagnostics.
inline RawTable parse_csv(std::istream& in, const CsvOptions& opt, const std::string& source = "<input>") {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool header_pending = opt.header;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        auto cells = detail::split_line(line, opt);
        if (header_pending) {
            names = std::move(cells);
            width = names.size();
            header_pending = false;
            continue;
        }
        if (width == 0) {
            width = cells.size();
        }
        if (cells.size() != width) {
            throw std::runtime_error(source + ": line " + std::to_string(line_no) + " has " +
                                     std::to_string(cells.size()) + " columns, expected " + std::to_string(width));
        }
        std::vector<double> values(width);
        for (std::size_t c = 0; c < width; ++c) {
            const auto v = detail::parse_number(cells[c]);
            if (!v) {
                const std::string what = cells[c].empty() ? "missing value" : "non-numeric value '" + cells[c] + "'";
                throw std::runtime_error(source + ": " + what + " at row " + std::to_string(rows.size() + 1) +
                                         " (line " + std::to_string(line_no) + "), column " + std::to_string(c + 1) +
                                         (c < names.size() ? " (" + names[c] + ")" : std::string{}));
            }
            values[c] = *v;
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) {
        throw std::runtime_error(source + ": no data rows");
    }
    if (width < 2) {
        throw std::runtime_error(source + ": need at least one feature column and a target column");
    }
    const Index W = static_cast<Index>(width);
    const Index target = detail::resolve_column(opt.target, names, W);
    std::vector<bool> skip(width, false);
    skip[static_cast<std::size_t>(target)] = true;
    for (const auto& d : opt.drop) {
        skip[static_cast<std::size_t>(detail::resolve_column(d, names, W))] = true;
    }
    std::vector<Index> keep;
    for (Index c = 0; c < W; ++c) {
        if (!skip[static_cast<std::size_t>(c)]) {
            keep.push_back(c);
        }
    }
    if (keep.empty()) {
        throw std::runtime_error(source + ": no feature columns left after dropping");
    }
    RawTable table;
    table.X.resize(static_cast<Index>(rows.size()), static_cast<Index>(keep.size()));
    table.y.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < keep.size(); ++j) {
            table.X(static_cast<Index>(r), static_cast<Index>(j)) = rows[r][static_cast<std::size_t>(keep[j])];
        }
        table.y(static_cast<Index>(r)) = rows[r][static_cast<std::size_t>(target)];
    }
    for (Index c : keep) {
        table.feature_names.push_back(static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)]
                                                                                 : "x" + std::to_string(c));
    }
    table.target_name = static_cast<std::size_t>(target) < names.size() ? names[static_cast<std::size_t>(target)]
                                                                         : "y";
    return table;
}

inline RawTable load_csv(const std::string& path, const CsvOptions& opt) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return parse_csv(in, opt, path);
}

/// Per-column min/max and target mean/std, all from the training split.
struct Scaling {
    rvec x_min;
    rvec x_max;
    double y_mean = 0.0;
    double y_std = 1.0;
    std::vector<Index> constant_columns;

    static Scaling fit(const rmat& X, const rvec& y) {
        Scaling s;
        s.x_min = X.colwise().minCoeff().transpose();
        s.x_max = X.colwise().maxCoeff().transpose();
        for (Index c = 0; c < X.cols(); ++c) {
            if (s.x_max(c) == s.x_min(c)) {
                s.constant_columns.push_back(c);
            }
        }
        s.y_mean = y.mean();
        const double var = (y.array() - s.y_mean).square().mean();
        s.y_std = var > 0.0 ? std::sqrt(var) : 1.0;
        return s;
    }

    /// Maps into [0, 1]; constant training columns map to 0.5.
    rmat scale(const rmat& X) const {
        rmat out(X.rows(), X.cols());
        for (Index c = 0; c < X.cols(); ++c) {
            const double span = x_max(c) - x_min(c);
            if (span == 0.0) {
                out.col(c).setConstant(0.5);
            } else {
                out.col(c) = ((X.col(c).array() - x_min(c)) / span).cwiseMax(0.0).cwiseMin(1.0).matrix();
            }
        }
        return out;
    }

    rvec standardize(const rvec& y) const { return (y.array() - y_mean) / y_std; }
    rvec unstandardize(const rvec& z) const { return z.array() * y_std + y_mean; }
};

struct Dataset {
    rmat X;  // in [0, 1]
    rvec y;  // standardized
    Scaling scaling;
    std::vector<Index> rows;  // positions in the raw table

    Index size() const noexcept { return X.rows(); }
    Index dims() const noexcept { return X.cols(); }
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    int folds = 6;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
            throw std::invalid_argument("SplitSpec: train_fraction must lie in (0, 1)");
        }
    }
};

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<std::string> warnings;
};

inline std::vector<Index> shuffled_indices(Index n, std::uint64_t seed) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

inline rmat take_rows(const rmat& X, const std::vector<Index>& rows) {
    rmat out(static_cast<Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Index>(i)) = X.row(rows[i]);
    }
    return out;
}

inline rvec take_rows(const rvec& y, const std::vector<Index>& rows) {
    rvec out(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out(static_cast<Index>(i)) = y(rows[i]);
    }
    return out;
}

/// Random train/test split, then scaling fitted on the training part only.
inline SplitResult preprocess(const RawTable& raw, const SplitSpec& split) {
    split.validate();
    const Index n = raw.X.rows();
    if (n < 2) {
        throw std::invalid_argument("preprocess: need at least two rows to split");
    }
    const auto order = shuffled_indices(n, split.seed);
    Index n_train = static_cast<Index>(std::llround(split.train_fraction * static_cast<double>(n)));
    n_train = std::clamp<Index>(n_train, 1, n - 1);
    std::vector<Index> train_rows(order.begin(), order.begin() + n_train);
    std::vector<Index> test_rows(order.begin() + n_train, order.end());

    SplitResult out;
    const rmat Xtr = take_rows(raw.X, train_rows);
    const rvec ytr = take_rows(raw.y, train_rows);
    const Scaling s = Scaling::fit(Xtr, ytr);
    for (Index c : s.constant_columns) {
        const std::string name = static_cast<std::size_t>(c) < raw.feature_names.size()
                                     ? raw.feature_names[static_cast<std::size_t>(c)]
                                     : std::to_string(c);
        out.warnings.push_back("column " + name + " is constant on the training split; mapped to 0.5");
    }
    if ((ytr.array() == ytr(0)).all()) {
        out.warnings.push_back("target is constant on the training split; not rescaled");
    }
    out.train = Dataset{s.scale(Xtr), s.standardize(ytr), s, std::move(train_rows)};
    out.test = Dataset{s.scale(take_rows(raw.X, test_rows)), s.standardize(take_rows(raw.y, test_rows)), s,
                       std::move(test_rows)};
    return out;
}

/// Rows `idx` of a dataset, keeping its scaling.
inline Dataset subset(const Dataset& data, const std::vector<Index>& idx) {
    std::vector<Index> rows;
    rows.reserve(idx.size());
    for (Index i : idx) {
        rows.push_back(data.rows.empty() ? i : data.rows[static_cast<std::size_t>(i)]);
    }
    return Dataset{take_rows(data.X, idx), take_rows(data.y, idx), data.scaling, std::move(rows)};
}

struct Fold {
    std::vector<Index> train;
    std::vector<Index> validation;
};

/// Shuffled k-fold partition of 0..n-1; fold sizes differ by at most one.
inline std::vector<Fold> kfold(Index n, int k, std::uint64_t seed) {
    if (k < 2) {
        throw std::invalid_argument("kfold: need at least 2 folds");
    }
    if (n < k) {
        throw std::invalid_argument("kfold: " + std::to_string(n) + " samples cannot fill " + std::to_string(k) +
                                    " folds");
    }
    const auto order = shuffled_indices(n, seed);
    std::vector<Fold> folds(static_cast<std::size_t>(k));
    const Index base = n / k;
    const Index extra = n % k;
    Index pos = 0;
    for (Index f = 0; f < k; ++f) {
        const Index len = base + (f < extra ? 1 : 0);
        auto& fold = folds[static_cast<std::size_t>(f)];
        fold.validation.assign(order.begin() + pos, order.begin() + pos + len);
        fold.train.reserve(static_cast<std::size_t>(n - len));
        fold.train.insert(fold.train.end(), order.begin(), order.begin() + pos);
        fold.train.insert(fold.train.end(), order.begin() + pos + len, order.end());
        std::sort(fold.validation.begin(), fold.validation.end());
        std::sort(fold.train.begin(), fold.train.end());
        pos += len;
    }
    return folds;
}

inline double mse(const rvec& pred, const rvec& truth) {
    if (pred.size() != truth.size()) {
        throw std::invalid_argument("mse: length mismatch (" + std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()) + ")");
    }
    if (pred.size() == 0) {
        throw std::invalid_argument("mse: empty input");
    }
    return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

/// Expected shape of a benchmark dataset plus how to read its file.
struct ManifestEntry {
    std::string name;
    std::string file;
    Index rows = 0;
    Index rows_slack = 0;  // tolerated |row count - rows|, for files that differ by a stray record
    Index features = 0;
    CsvOptions csv;
};

inline std::vector<ManifestEntry> parse_manifest(const nlohmann::json& j) {
    std::vector<ManifestEntry> out;
    for (const auto& e : j.at("datasets")) {
        ManifestEntry m;
        m.name = e.at("name").get<std::string>();
        m.file = e.at("file").get<std::string>();
        m.rows = e.at("rows").get<Index>();
        m.rows_slack = e.value("rows_slack", Index{0});
        m.features = e.at("features").get<Index>();
        const std::string delim = e.value("delimiter", std::string(","));
        if (delim == "whitespace") {
            m.csv.whitespace = true;
        } else if (delim.size() == 1) {
            m.csv.delimiter = delim[0];
        } else {
            throw std::invalid_argument("manifest: bad delimiter for " + m.name);
        }
        m.csv.header = e.value("header", false);
        m.csv.target = e.value("target", std::string("-1"));
        m.csv.drop = e.value("drop", std::vector<std::string>{});
        out.push_back(std::move(m));
    }
    return out;
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open manifest " + path);
    }
    return parse_manifest(nlohmann::json::parse(in));
}

/// Throws when a loaded table does not have the row/feature counts the manifest records.
inline void check_against_manifest(const RawTable& table, const ManifestEntry& entry) {
    if (std::abs(table.X.rows() - entry.rows) > entry.rows_slack || table.X.cols() != entry.features) {
        throw std::runtime_error(entry.name + ": expected " + std::to_string(entry.rows) + " rows x " +
                                 std::to_string(entry.features) + " features, file has " +
                                 std::to_string(table.X.rows()) + " x " + std::to_string(table.X.cols()));
    }
}

}  // namespace cpdfl
