#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "realpipe/errors.hpp"
#include "realpipe/tabular.hpp"

namespace realpipe {

// Regression emits raw scores; BinaryProbability emits values in [0, 1]
// interpreted as P(positive class).
enum class Task { Regression, BinaryProbability };

inline const char* task_name(Task t) {
    return t == Task::Regression ? "regression" : "binary";
}

struct LinearModel {
    std::map<std::string, double> weights;
    double intercept = 0.0;
};

// One node of a binary decision tree stored in a flat vector. Internal nodes
// route on feature <= threshold (ties go left); leaves carry the value.
struct TreeNode {
    bool leaf = false;
    double value = 0.0;     // leaves only
    std::string feature;    // internal only
    double threshold = 0.0; // internal only
    std::size_t left = 0;   // internal only
    std::size_t right = 0;  // internal only
};

struct TreeModel {
    std::vector<TreeNode> nodes;
    std::size_t root = 0;
};

struct Model {
    std::variant<LinearModel, TreeModel> impl;
    Task task = Task::Regression;

    bool is_linear() const { return std::holds_alternative<LinearModel>(impl); }
    const LinearModel& linear() const { return std::get<LinearModel>(impl); }
    const TreeModel& tree() const { return std::get<TreeModel>(impl); }
};

// Feature names the model actually reads, sorted and de-duplicated.
inline std::vector<std::string> consumed_features(const Model& m) {
    std::set<std::string> names;
    if (m.is_linear()) {
        for (const auto& [name, w] : m.linear().weights) names.insert(name);
    } else {
        for (const auto& node : m.tree().nodes) {
            if (!node.leaf) names.insert(node.feature);
        }
    }
    return std::vector<std::string>(names.begin(), names.end());
}

// Checks that every node is reachable from the root exactly once (a proper
// tree: no cycles, no sharing, no orphans) and that child indices are in
// range. Throws ConfigError on violation.
inline void validate_tree(const TreeModel& t) {
    if (t.nodes.empty()) throw ConfigError("tree model has no nodes");
    if (t.root >= t.nodes.size())
        throw ConfigError("tree root index " + std::to_string(t.root) +
                          " out of range");
    std::vector<int> visits(t.nodes.size(), 0);
    std::vector<std::size_t> stack{t.root};
    while (!stack.empty()) {
        std::size_t i = stack.back();
        stack.pop_back();
        if (++visits[i] > 1)
            throw ConfigError("tree node " + std::to_string(i) +
                              " is reachable more than once");
        const TreeNode& n = t.nodes[i];
        if (n.leaf) continue;
        if (n.left >= t.nodes.size() || n.right >= t.nodes.size())
            throw ConfigError("tree node " + std::to_string(i) +
                              " has a child index out of range");
        stack.push_back(n.left);
        stack.push_back(n.right);
    }
    for (std::size_t i = 0; i < visits.size(); ++i) {
        if (visits[i] == 0)
            throw ConfigError("tree node " + std::to_string(i) +
                              " is unreachable from the root");
    }
}

namespace detail {

// Numeric feature reader for model evaluation: Numeric as-is, Boolean as
// 1/0. Missing and wrongly-typed data raise before any row is scored.
class FeatureReader {
public:
    FeatureReader(const Model& m, const Table& t) : table_(&t) {
        for (const auto& name : consumed_features(m)) {
            if (!t.has_column(name))
                throw ContractError("model consumes feature '" + name +
                                    "' which is not a column of the input");
            const Column& col = t.column(name);
            if (col.dtype == Dtype::Categorical)
                throw ContractError("model consumes feature '" + name +
                                    "' but the column is categorical");
            for (std::size_t r = 0; r < col.cells.size(); ++r) {
                if (col.cells[r].is_missing() || col.cells[r].is_any())
                    throw DataError("feature '" + name +
                                    "' has no value in row '" +
                                    t.row_ids()[r] + "'");
            }
            columns_[name] = &col;
        }
    }

    double value(const std::string& feature, std::size_t row) const {
        const Column* col = columns_.at(feature);
        const Cell& c = col->cells[row];
        return c.is_numeric() ? c.number() : (c.truth() ? 1.0 : 0.0);
    }

private:
    const Table* table_;
    std::map<std::string, const Column*> columns_;
};

} // namespace detail

// Scores every row of the table. BinaryProbability outputs are clamped to
// [0, 1].
inline std::vector<double> predict(const Model& m, const Table& t) {
    detail::FeatureReader reader(m, t);
    std::vector<double> out;
    out.reserve(t.row_count());
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        double score = 0.0;
        if (m.is_linear()) {
            const LinearModel& lm = m.linear();
            score = lm.intercept;
            for (const auto& [name, w] : lm.weights)
                score += w * reader.value(name, r);
        } else {
            const TreeModel& tm = m.tree();
            std::size_t i = tm.root;
            while (!tm.nodes[i].leaf) {
                const TreeNode& n = tm.nodes[i];
                i = reader.value(n.feature, r) <= n.threshold ? n.left : n.right;
            }
            score = tm.nodes[i].value;
        }
        if (m.task == Task::BinaryProbability) {
            if (score < 0.0) score = 0.0;
            if (score > 1.0) score = 1.0;
        }
        out.push_back(score);
    }
    return out;
}

namespace detail {

// Solves the square system M x = b in place by Gaussian elimination with
// partial pivoting. Near-zero pivots are tolerated because the caller adds a
// ridge term, which keeps the system positive definite.
inline std::vector<double> solve_linear_system(std::vector<std::vector<double>> M,
                                               std::vector<double> b) {
    std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::fabs(M[i][k]) > std::fabs(M[pivot][k])) pivot = i;
        }
        if (std::fabs(M[pivot][k]) == 0.0)
            throw DataError("linear fit produced a singular system");
        if (pivot != k) {
            std::swap(M[pivot], M[k]);
            std::swap(b[pivot], b[k]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = M[i][k] / M[k][k];
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) M[i][j] -= f * M[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= M[k][j] * x[j];
        x[k] = s / M[k][k];
    }
    return x;
}

} // namespace detail

// Least-squares fit via the normal equations with a small ridge term
// (lambda = 1e-8) on the non-intercept weights, which keeps collinear
// feature sets solvable. Input columns must be Numeric or Boolean with no
// Missing cells.
inline LinearModel fit_linear(const Table& X, const std::vector<double>& y) {
    if (X.row_count() == 0) throw DataError("cannot fit a model on zero rows");
    if (y.size() != X.row_count())
        throw DataError("target count " + std::to_string(y.size()) +
                        " does not match row count " +
                        std::to_string(X.row_count()));
    std::size_t n = X.row_count();
    std::size_t d = X.column_count();
    for (const auto& c : X.columns()) {
        if (c.dtype == Dtype::Categorical)
            throw DataError("cannot fit on categorical column '" + c.name +
                            "'");
        for (std::size_t r = 0; r < n; ++r) {
            if (c.cells[r].is_missing() || c.cells[r].is_any())
                throw DataError("column '" + c.name +
                                "' has no value in row '" + X.row_ids()[r] +
                                "'");
        }
    }
    auto value_at = [&](std::size_t col, std::size_t row) {
        const Cell& c = X.column_at(col).cells[row];
        return c.is_numeric() ? c.number() : (c.truth() ? 1.0 : 0.0);
    };

    // Design matrix has the intercept first; the ridge term skips it.
    const double lambda = 1e-8;
    std::size_t m = d + 1;
    std::vector<std::vector<double>> G(m, std::vector<double>(m, 0.0));
    std::vector<double> b(m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> row(m, 1.0);
        for (std::size_t c = 0; c < d; ++c) row[c + 1] = value_at(c, r);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i; j < m; ++j) G[i][j] += row[i] * row[j];
            b[i] += row[i] * y[r];
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < i; ++j) G[i][j] = G[j][i];
    }
    for (std::size_t i = 1; i < m; ++i) G[i][i] += lambda;

    std::vector<double> sol = detail::solve_linear_system(std::move(G),
                                                          std::move(b));
    LinearModel out;
    out.intercept = sol[0];
    for (std::size_t c = 0; c < d; ++c)
        out.weights[X.column_at(c).name] = sol[c + 1];
    return out;
}

} // namespace realpipe
