#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "realpipe/errors.hpp"
#include "realpipe/explanation.hpp"
#include "realpipe/tabular.hpp"

namespace realpipe {

// Which feature spaces a transformer's output belongs to. A transformer with
// model=true is needed to prepare model input, interpret=true to prepare
// what users see. The algorithm flag may be left unset, in which case it
// follows model.
struct FeatureSpaceFlags {
    bool model = false;
    std::optional<bool> algorithm;
    bool interpret = false;

    bool algo() const { return algorithm.value_or(model); }
};

// What to do when a transformer cannot transform a given explanation kind:
// Break stops the whole conversion, Skip records the event and moves on.
enum class UnsupportedMode { Break, Skip };

struct OneHotEncoderSpec {
    std::vector<std::string> columns;
};

struct ImputerSpec {};

struct StandardizerSpec {
    std::vector<std::string> columns;
};

struct FeatureSelectorSpec {
    std::vector<std::string> keep;
};

struct NumericBinnerSpec {
    std::string column;
    std::vector<double> thresholds; // ascending, one more than labels
    std::vector<std::string> labels;
};

struct CategoryCombinerSpec {
    std::string column;
    std::map<std::string, std::string> child_to_parent;
};

struct MappingEncoderSpec {
    std::vector<std::string> source_columns;
    std::string target_column;
    // Concrete source tuples and the label each maps to.
    std::vector<std::pair<std::vector<Cell>, std::string>> lookup;
    std::string default_label;
    int key_precision = 6; // decimals used when matching Numeric keys
};

using TransformerSpec = std::variant<OneHotEncoderSpec, ImputerSpec,
                                     StandardizerSpec, FeatureSelectorSpec,
                                     NumericBinnerSpec, CategoryCombinerSpec,
                                     MappingEncoderSpec>;

// Carried alongside an explanation while it is converted between spaces.
// Holds the original-space rows being explained so inverse transforms can
// restore values that a transform destroyed (dropped columns, binned
// numbers, combined categories).
struct ExplanationContext {
    const Table* original = nullptr;

    std::optional<Cell> original_value(const std::string& row_id,
                                       const std::string& column) const {
        if (!original || !original->has_row_id(row_id) ||
            !original->has_column(column))
            return std::nullopt;
        return original->cell(original->row_index(row_id), column);
    }
};

struct Unsupported {
    std::string reason;
};

// Outcome of one explanation transform step: either a transformed
// explanation (possibly with warnings) or a statement that the operation
// does not exist for this explanation kind.
struct ExplanationStepResult {
    std::optional<Explanation> explanation;
    std::optional<Unsupported> unsupported;
    std::vector<std::string> warnings;

    static ExplanationStepResult ok(Explanation e,
                                    std::vector<std::string> warns = {}) {
        ExplanationStepResult r;
        r.explanation = std::move(e);
        r.warnings = std::move(warns);
        return r;
    }
    static ExplanationStepResult not_applicable(Explanation e,
                                                std::string reason) {
        ExplanationStepResult r;
        r.explanation = std::move(e);
        r.unsupported = Unsupported{std::move(reason)};
        return r;
    }
};

struct AuditEvent {
    std::string event; // "skip", "break" or "warning"
    std::string transformer;
    int step = 0; // 3 = undo, 4 = forward
    std::string detail;
};

using Audit = std::vector<AuditEvent>;

namespace detail {

inline std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out.push_back(',');
        out += n;
    }
    return out;
}

// ---- fitted state ---------------------------------------------------------

struct OneHotFit {
    // encoded column -> categories in first-seen order
    std::vector<std::pair<std::string, std::vector<std::string>>> categories;
};

struct ImputerFit {
    std::vector<std::pair<std::string, Cell>> fills;
};

struct StandardizerStat {
    std::string column;
    double mu = 0.0;
    double sigma = 0.0;
};

struct StandardizerFit {
    std::vector<StandardizerStat> stats;
};

struct SelectorFit {
    std::vector<std::string> input_columns;
};

struct BinnerFit {};

struct CombinerFit {
    std::vector<std::string> fitted_categories;
};

struct MappingFit {
    std::unordered_map<std::string, std::string> compiled;
};

using FittedState = std::variant<std::monostate, OneHotFit, ImputerFit,
                                 StandardizerFit, SelectorFit, BinnerFit,
                                 CombinerFit, MappingFit>;

// ---- shared helpers -------------------------------------------------------

inline std::string onehot_column_name(const std::string& column,
                                      const std::string& category) {
    return column + "_" + category;
}

// Canonical lookup-key component for MappingEncoder, appended in place.
// Numerics are rounded to key_precision decimals; -0 normalizes to 0 so
// signed zeros compare equal.
inline void append_mapping_key_part(std::string& key, const Cell& c,
                                    int precision) {
    if (c.is_numeric()) {
        // to_chars fixed matches printf %.*f digit for digit
        char buf[448];
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), c.number(),
                                       std::chars_format::fixed, precision);
        std::string_view digits(buf, ec == std::errc()
                                         ? static_cast<std::size_t>(end - buf)
                                         : 0);
        if (!digits.empty() && digits[0] == '-' &&
            digits.find_first_not_of("-0.") == std::string_view::npos)
            digits.remove_prefix(1);
        key += "n:";
        key += digits;
        return;
    }
    if (c.is_text()) {
        key += "s:";
        key += c.text();
        return;
    }
    if (c.is_boolean()) {
        key += c.truth() ? "b:1" : "b:0";
        return;
    }
    key += '\x01'; // Missing / Any: never matches a concrete key
}

// Rebuilds `key` from the cells; reusing one scratch string keeps row loops
// free of per-row allocations.
inline void mapping_key_into(std::string& key, const std::vector<Cell>& cells,
                             int precision) {
    key.clear();
    for (const auto& c : cells) {
        append_mapping_key_part(key, c, precision);
        key.push_back('\x1f');
    }
}

inline std::string mapping_key(const std::vector<Cell>& cells, int precision) {
    std::string key;
    mapping_key_into(key, cells, precision);
    return key;
}

} // namespace detail

// A configured preprocessing step plus its fitted state and routing flags.
// Implements the contract trio: transform_data, transform_explanation and
// inverse_transform_explanation.
class Transformer {
public:
    Transformer(TransformerSpec spec, FeatureSpaceFlags flags,
                std::optional<UnsupportedMode> mode = std::nullopt)
        : spec_(std::move(spec)), flags_(flags) {
        check_spec();
        mode_ = mode.value_or(default_mode());
    }

    const TransformerSpec& spec() const { return spec_; }
    const FeatureSpaceFlags& flags() const { return flags_; }
    UnsupportedMode unsupported_mode() const { return mode_; }
    bool fitted() const { return fitted_; }
    const detail::FittedState& fitted_state() const { return state_; }

    // Restores a fitted transformer from persisted state (bundle loading).
    void restore_fitted_state(detail::FittedState state) {
        state_ = std::move(state);
        if (std::holds_alternative<MappingEncoderSpec>(spec_))
            compile_mapping();
        fitted_ = true;
    }

    std::string type_name() const {
        if (std::holds_alternative<OneHotEncoderSpec>(spec_)) return "one_hot_encoder";
        if (std::holds_alternative<ImputerSpec>(spec_)) return "imputer";
        if (std::holds_alternative<StandardizerSpec>(spec_)) return "standardizer";
        if (std::holds_alternative<FeatureSelectorSpec>(spec_)) return "feature_selector";
        if (std::holds_alternative<NumericBinnerSpec>(spec_)) return "numeric_binner";
        if (std::holds_alternative<CategoryCombinerSpec>(spec_)) return "category_combiner";
        return "mapping_encoder";
    }

    // Short display name used in audit events and error messages.
    std::string name() const {
        if (auto* s = std::get_if<OneHotEncoderSpec>(&spec_))
            return "one_hot_encoder(" + detail::join_names(s->columns) + ")";
        if (std::get_if<ImputerSpec>(&spec_)) return "imputer";
        if (auto* s = std::get_if<StandardizerSpec>(&spec_))
            return "standardizer(" + detail::join_names(s->columns) + ")";
        if (auto* s = std::get_if<FeatureSelectorSpec>(&spec_))
            return "feature_selector(" + detail::join_names(s->keep) + ")";
        if (auto* s = std::get_if<NumericBinnerSpec>(&spec_))
            return "numeric_binner(" + s->column + ")";
        if (auto* s = std::get_if<CategoryCombinerSpec>(&spec_))
            return "category_combiner(" + s->column + ")";
        auto* s = std::get_if<MappingEncoderSpec>(&spec_);
        return "mapping_encoder(" + detail::join_names(s->source_columns) +
               "->" + s->target_column + ")";
    }

    // Learns whatever state the transformer needs from its input-space
    // training table. Missing columns raise PipelineError naming them.
    void fit(const Table& train) {
        if (auto* s = std::get_if<OneHotEncoderSpec>(&spec_)) {
            fit_onehot(*s, train);
        } else if (std::get_if<ImputerSpec>(&spec_)) {
            fit_imputer(train);
        } else if (auto* s2 = std::get_if<StandardizerSpec>(&spec_)) {
            fit_standardizer(*s2, train);
        } else if (auto* s3 = std::get_if<FeatureSelectorSpec>(&spec_)) {
            fit_selector(*s3, train);
        } else if (auto* s4 = std::get_if<NumericBinnerSpec>(&spec_)) {
            fit_binner(*s4, train);
        } else if (auto* s5 = std::get_if<CategoryCombinerSpec>(&spec_)) {
            fit_combiner(*s5, train);
        } else {
            fit_mapping(std::get<MappingEncoderSpec>(spec_), train);
        }
        fitted_ = true;
    }

    // Applies the data transform. Non-fatal oddities (an unseen combiner
    // child) are appended to *warnings when a collector is supplied. Takes
    // its input by value: columns the transform leaves alone move through.
    Table transform_data(Table t,
                         std::vector<std::string>* warnings = nullptr) const {
        require_fitted();
        if (auto* s = std::get_if<OneHotEncoderSpec>(&spec_))
            return data_onehot(*s, std::move(t));
        if (std::get_if<ImputerSpec>(&spec_))
            return data_imputer(std::move(t));
        if (auto* s = std::get_if<StandardizerSpec>(&spec_))
            return data_standardizer(*s, std::move(t));
        if (auto* s = std::get_if<FeatureSelectorSpec>(&spec_))
            return data_selector(*s, std::move(t));
        if (auto* s = std::get_if<NumericBinnerSpec>(&spec_))
            return data_binner(*s, std::move(t));
        if (auto* s = std::get_if<CategoryCombinerSpec>(&spec_))
            return data_combiner(*s, std::move(t), warnings);
        return data_mapping(std::get<MappingEncoderSpec>(spec_), std::move(t));
    }

    // Moves an explanation forward along this transform.
    ExplanationStepResult transform_explanation(Explanation e,
                                                const ExplanationContext& ctx) const {
        require_fitted();
        (void)ctx;
        if (std::get_if<OneHotEncoderSpec>(&spec_))
            return ExplanationStepResult::not_applicable(
                std::move(e),
                "one-hot encoding an explanation makes it no more "
                "interpretable");
        if (std::get_if<ImputerSpec>(&spec_))
            return ExplanationStepResult::ok(std::move(e));
        if (auto* s = std::get_if<StandardizerSpec>(&spec_))
            return forward_standardizer(*s, std::move(e));
        if (auto* s = std::get_if<FeatureSelectorSpec>(&spec_))
            return forward_selector(*s, std::move(e));
        if (auto* s = std::get_if<NumericBinnerSpec>(&spec_))
            return forward_binner(*s, std::move(e));
        if (auto* s = std::get_if<CategoryCombinerSpec>(&spec_))
            return forward_combiner(*s, std::move(e));
        return forward_mapping(std::get<MappingEncoderSpec>(spec_),
                               std::move(e));
    }

    // Undoes this transform's effect on an explanation.
    ExplanationStepResult inverse_transform_explanation(
        Explanation e, const ExplanationContext& ctx) const {
        require_fitted();
        if (std::get_if<OneHotEncoderSpec>(&spec_))
            return inverse_onehot(std::move(e));
        if (std::get_if<ImputerSpec>(&spec_))
            return ExplanationStepResult::ok(std::move(e));
        if (auto* s = std::get_if<StandardizerSpec>(&spec_))
            return inverse_standardizer(*s, std::move(e));
        if (auto* s = std::get_if<FeatureSelectorSpec>(&spec_))
            return inverse_selector(*s, std::move(e), ctx);
        if (auto* s = std::get_if<NumericBinnerSpec>(&spec_))
            return inverse_binner(*s, std::move(e), ctx);
        if (auto* s = std::get_if<CategoryCombinerSpec>(&spec_))
            return inverse_combiner(*s, std::move(e), ctx);
        auto* s = std::get_if<MappingEncoderSpec>(&spec_);
        return ExplanationStepResult::not_applicable(
            std::move(e),
            "mapping " + detail::join_names(s->source_columns) + " to " +
                s->target_column + " is many-to-one and cannot be inverted");
    }

private:
    void check_spec() {
        if (auto* s = std::get_if<NumericBinnerSpec>(&spec_)) {
            if (s->thresholds.size() < 2)
                throw ConfigError("numeric_binner needs at least 2 thresholds");
            for (std::size_t i = 1; i < s->thresholds.size(); ++i) {
                if (!(s->thresholds[i - 1] < s->thresholds[i]))
                    throw ConfigError(
                        "numeric_binner thresholds must be strictly "
                        "ascending");
            }
            if (s->labels.size() + 1 != s->thresholds.size())
                throw ConfigError(
                    "numeric_binner needs exactly one label per interval (" +
                    std::to_string(s->thresholds.size() - 1) + " labels, got " +
                    std::to_string(s->labels.size()) + ")");
        } else if (auto* s2 = std::get_if<MappingEncoderSpec>(&spec_)) {
            if (s2->source_columns.empty())
                throw ConfigError("mapping_encoder needs source columns");
            for (const auto& src : s2->source_columns) {
                if (src == s2->target_column)
                    throw ConfigError("mapping_encoder target column '" +
                                      s2->target_column +
                                      "' is also a source column");
            }
            for (const auto& [key, label] : s2->lookup) {
                if (key.size() != s2->source_columns.size())
                    throw ConfigError(
                        "mapping_encoder lookup key has " +
                        std::to_string(key.size()) + " parts, expected " +
                        std::to_string(s2->source_columns.size()));
            }
            if (s2->key_precision < 0 || s2->key_precision > 17)
                throw ConfigError("mapping_encoder key_precision out of range");
        } else if (auto* s3 = std::get_if<OneHotEncoderSpec>(&spec_)) {
            if (s3->columns.empty())
                throw ConfigError("one_hot_encoder needs at least one column");
        }
    }

    UnsupportedMode default_mode() const {
        // Structure-changing transforms default to Break: failing to apply
        // them leaves the explanation in a space later steps cannot use.
        if (std::holds_alternative<ImputerSpec>(spec_) ||
            std::holds_alternative<StandardizerSpec>(spec_))
            return UnsupportedMode::Skip;
        return UnsupportedMode::Break;
    }

    void require_fitted() const {
        if (!fitted_)
            throw ContractError(name() + " used before it was fitted");
    }

    [[noreturn]] void missing_column(const std::string& column) const {
        throw PipelineError(name() + ": column '" + column +
                            "' not found in its input space");
    }

    // ---- one-hot -----------------------------------------------------

    void fit_onehot(const OneHotEncoderSpec& s, const Table& train) {
        detail::OneHotFit fit;
        for (const auto& cname : s.columns) {
            if (!train.has_column(cname)) missing_column(cname);
            const Column& col = train.column(cname);
            if (col.dtype != Dtype::Categorical)
                throw PipelineError(name() + ": column '" + cname +
                                    "' is not categorical");
            std::vector<std::string> cats;
            std::set<std::string> seen;
            for (const auto& cell : col.cells) {
                if (cell.is_missing() || cell.is_any()) continue;
                if (seen.insert(cell.text()).second) cats.push_back(cell.text());
            }
            fit.categories.emplace_back(cname, std::move(cats));
        }
        state_ = std::move(fit);
    }

    const detail::OneHotFit& onehot_fit() const {
        return std::get<detail::OneHotFit>(state_);
    }

    Table data_onehot(const OneHotEncoderSpec&, Table t) const {
        const auto& fit = onehot_fit();
        std::map<std::string, const std::vector<std::string>*> groups;
        for (const auto& [cname, cats] : fit.categories) groups[cname] = &cats;
        for (const auto& [cname, cats] : fit.categories) {
            if (!t.has_column(cname))
                throw DataError(name() + ": column '" + cname + "' not found");
        }
        std::vector<Column> in = std::move(t).take_columns();
        std::vector<Column> out;
        for (auto& col : in) {
            auto it = groups.find(col.name);
            if (it == groups.end()) {
                out.push_back(std::move(col));
                continue;
            }
            for (const auto& cat : *it->second) {
                Column flag{detail::onehot_column_name(col.name, cat),
                            Dtype::Boolean,
                            {}};
                flag.cells.reserve(col.cells.size());
                for (const auto& cell : col.cells)
                    flag.cells.push_back(
                        Cell(cell.is_text() && cell.text() == cat));
                out.push_back(std::move(flag));
            }
        }
        return Table(std::move(out), t);
    }

    // Decodes a one-hot group from (category, cell) pairs. Exactly one true
    // flag names the category; anything else decodes to Missing with a
    // warning (permuted or synthetic rows can be impossible).
    static std::pair<Cell, std::optional<std::string>> decode_group(
        const std::string& column,
        const std::vector<std::pair<std::string, Cell>>& flags) {
        std::size_t true_count = 0;
        std::string category;
        for (const auto& [cat, cell] : flags) {
            if (cell.is_boolean() && cell.truth()) {
                ++true_count;
                category = cat;
            }
        }
        if (true_count == 1) return {Cell(category), std::nullopt};
        return {Cell::missing(),
                "column '" + column + "' decoded " +
                    std::to_string(true_count) +
                    " true flags; expected exactly one"};
    }

    ExplanationStepResult inverse_onehot(Explanation e) const {
        const auto& fit = onehot_fit();
        std::vector<std::string> warnings;
        if (e.is_contributions() || e.is_importance()) {
            Explanation out = std::move(e);
            for (const auto& [cname, cats] : fit.categories) {
                // groups are small: a linear scan beats a map here
                std::vector<std::pair<std::string, std::string>> members;
                members.reserve(cats.size());
                for (const auto& cat : cats)
                    members.emplace_back(detail::onehot_column_name(cname, cat),
                                         cat);
                auto member_cat =
                    [&](const std::string& feature) -> const std::string* {
                    for (const auto& [member, cat] : members)
                        if (member == feature) return &cat;
                    return nullptr;
                };
                if (out.is_contributions()) {
                    std::vector<std::pair<std::string, Cell>> flags;
                    for (auto& row : out.contributions().rows) {
                        flags.clear();
                        double sum = 0.0;
                        for (const auto& entry : row.entries) {
                            const std::string* cat = member_cat(entry.feature);
                            if (!cat) continue;
                            sum += entry.contribution;
                            flags.emplace_back(*cat, entry.value);
                        }
                        if (flags.empty()) continue;
                        auto [value, warn] = decode_group(cname, flags);
                        if (warn)
                            warnings.push_back("row '" + row.row_id + "': " +
                                               *warn);
                        // merged entry replaces the first flag in place;
                        // later flags compact away without reallocating
                        bool merged_emitted = false;
                        std::size_t w = 0;
                        for (std::size_t i = 0; i < row.entries.size(); ++i) {
                            if (member_cat(row.entries[i].feature)) {
                                if (!merged_emitted) {
                                    row.entries[w++] =
                                        ContributionEntry{cname, value, sum};
                                    merged_emitted = true;
                                }
                                continue;
                            }
                            if (w != i)
                                row.entries[w] = std::move(row.entries[i]);
                            ++w;
                        }
                        row.entries.resize(w);
                    }
                } else {
                    auto& entries = out.importance().entries;
                    double sum = 0.0;
                    bool found = false;
                    std::vector<ImportanceEntry> rebuilt;
                    for (const auto& entry : entries) {
                        if (member_cat(entry.feature)) {
                            found = true;
                            sum += entry.importance;
                        }
                    }
                    if (!found) continue;
                    bool merged_emitted = false;
                    for (const auto& entry : entries) {
                        if (member_cat(entry.feature)) {
                            if (!merged_emitted) {
                                rebuilt.push_back(ImportanceEntry{cname, sum});
                                merged_emitted = true;
                            }
                            continue;
                        }
                        rebuilt.push_back(entry);
                    }
                    entries = std::move(rebuilt);
                }
            }
            return ExplanationStepResult::ok(std::move(out),
                                             std::move(warnings));
        }
        // example-based: decode each example row's group back to a category
        Explanation out = std::move(e);
        for (auto& row : out.examples().rows) {
            for (auto& ex : row.examples) {
                for (const auto& [cname, cats] : fit.categories) {
                    std::map<std::string, std::string> member_to_cat;
                    for (const auto& cat : cats)
                        member_to_cat[detail::onehot_column_name(cname, cat)] =
                            cat;
                    std::vector<std::pair<std::string, Cell>> flags;
                    bool found = false;
                    for (const auto& [fname, cell] : ex.example) {
                        auto it = member_to_cat.find(fname);
                        if (it == member_to_cat.end()) continue;
                        found = true;
                        flags.emplace_back(it->second, cell);
                    }
                    if (!found) continue;
                    auto [value, warn] = decode_group(cname, flags);
                    if (warn)
                        warnings.push_back("row '" + row.row_id +
                                           "' example '" + ex.example_id +
                                           "': " + *warn);
                    std::vector<std::pair<std::string, Cell>> rebuilt;
                    bool merged_emitted = false;
                    for (const auto& pair : ex.example) {
                        if (member_to_cat.count(pair.first)) {
                            if (!merged_emitted) {
                                rebuilt.emplace_back(cname, value);
                                merged_emitted = true;
                            }
                            continue;
                        }
                        rebuilt.push_back(pair);
                    }
                    ex.example = std::move(rebuilt);
                }
            }
        }
        return ExplanationStepResult::ok(std::move(out), std::move(warnings));
    }

    // ---- imputer -----------------------------------------------------

    void fit_imputer(const Table& train) {
        detail::ImputerFit fit;
        for (const auto& col : train.columns()) {
            std::size_t present = 0;
            Cell fill;
            if (col.dtype == Dtype::Numeric) {
                double sum = 0.0;
                for (const auto& c : col.cells) {
                    if (c.is_numeric()) {
                        sum += c.number();
                        ++present;
                    }
                }
                if (present) fill = Cell(sum / static_cast<double>(present));
            } else if (col.dtype == Dtype::Categorical) {
                std::map<std::string, std::size_t> counts;
                for (const auto& c : col.cells) {
                    if (c.is_text()) {
                        ++counts[c.text()];
                        ++present;
                    }
                }
                std::size_t best = 0;
                std::string mode;
                for (const auto& [v, n] : counts) {
                    if (n > best) { // map order makes ties lexicographic-min
                        best = n;
                        mode = v;
                    }
                }
                if (present) fill = Cell(mode);
            } else {
                std::size_t trues = 0;
                for (const auto& c : col.cells) {
                    if (c.is_boolean()) {
                        if (c.truth()) ++trues;
                        ++present;
                    }
                }
                if (present) fill = Cell(trues > present - trues);
            }
            if (!present)
                throw PipelineError(name() + ": column '" + col.name +
                                    "' is entirely missing at fit time");
            fit.fills.emplace_back(col.name, fill);
        }
        state_ = std::move(fit);
    }

    Table data_imputer(Table t) const {
        const auto& fit = std::get<detail::ImputerFit>(state_);
        std::map<std::string, const Cell*> fills;
        for (const auto& [cname, cell] : fit.fills) fills[cname] = &cell;
        std::vector<Column> out = std::move(t).take_columns();
        for (auto& col : out) {
            auto it = fills.find(col.name);
            if (it == fills.end()) continue;
            for (auto& cell : col.cells) {
                if (cell.is_missing()) cell = *it->second;
            }
        }
        return Table(std::move(out), t);
    }

    // ---- standardizer --------------------------------------------------

    void fit_standardizer(const StandardizerSpec& s, const Table& train) {
        detail::StandardizerFit fit;
        for (const auto& cname : s.columns) {
            if (!train.has_column(cname)) missing_column(cname);
            const Column& col = train.column(cname);
            if (col.dtype != Dtype::Numeric)
                throw PipelineError(name() + ": column '" + cname +
                                    "' is not numeric");
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& c : col.cells) {
                if (c.is_numeric()) {
                    sum += c.number();
                    ++n;
                }
            }
            if (!n)
                throw PipelineError(name() + ": column '" + cname +
                                    "' is entirely missing at fit time");
            double mu = sum / static_cast<double>(n);
            double sq = 0.0;
            for (const auto& c : col.cells) {
                if (c.is_numeric()) sq += (c.number() - mu) * (c.number() - mu);
            }
            double sigma = std::sqrt(sq / static_cast<double>(n));
            fit.stats.push_back({cname, mu, sigma});
        }
        state_ = std::move(fit);
    }

    const detail::StandardizerFit& standardizer_fit() const {
        return std::get<detail::StandardizerFit>(state_);
    }

    static Cell standardize_cell(const Cell& c, double mu, double sigma) {
        if (!c.is_numeric()) return c;
        return Cell(sigma > 0.0 ? (c.number() - mu) / sigma : 0.0);
    }

    static Cell unstandardize_cell(const Cell& c, double mu, double sigma) {
        if (!c.is_numeric()) return c;
        return Cell(c.number() * sigma + mu);
    }

    Table data_standardizer(const StandardizerSpec&, Table t) const {
        std::vector<std::size_t> indexes;
        for (const auto& stat : standardizer_fit().stats) {
            if (!t.has_column(stat.column))
                throw DataError(name() + ": column '" + stat.column +
                                "' not found");
            indexes.push_back(t.column_index(stat.column));
        }
        std::vector<Column> out = std::move(t).take_columns();
        for (std::size_t k = 0; k < indexes.size(); ++k) {
            const auto& stat = standardizer_fit().stats[k];
            for (auto& c : out[indexes[k]].cells)
                c = standardize_cell(c, stat.mu, stat.sigma);
        }
        return Table(std::move(out), t);
    }

    // Additive scores need no change when values are rescaled; only
    // example-based values move between spaces.
    ExplanationStepResult forward_standardizer(const StandardizerSpec&,
                                               Explanation e) const {
        if (!e.is_example_based())
            return ExplanationStepResult::ok(std::move(e));
        Explanation out = std::move(e);
        for (auto& row : out.examples().rows) {
            for (auto& ex : row.examples) {
                for (const auto& stat : standardizer_fit().stats) {
                    for (auto& [fname, cell] : ex.example) {
                        if (fname == stat.column)
                            cell = standardize_cell(cell, stat.mu, stat.sigma);
                    }
                }
            }
        }
        return ExplanationStepResult::ok(std::move(out));
    }

    ExplanationStepResult inverse_standardizer(const StandardizerSpec&,
                                               Explanation e) const {
        if (!e.is_example_based())
            return ExplanationStepResult::ok(std::move(e));
        Explanation out = std::move(e);
        for (auto& row : out.examples().rows) {
            for (auto& ex : row.examples) {
                for (const auto& stat : standardizer_fit().stats) {
                    for (auto& [fname, cell] : ex.example) {
                        if (fname == stat.column)
                            cell = unstandardize_cell(cell, stat.mu,
                                                      stat.sigma);
                    }
                }
            }
        }
        return ExplanationStepResult::ok(std::move(out));
    }

    // ---- feature selector ------------------------------------------------

    void fit_selector(const FeatureSelectorSpec& s, const Table& train) {
        for (const auto& cname : s.keep) {
            if (!train.has_column(cname)) missing_column(cname);
        }
        detail::SelectorFit fit;
        fit.input_columns = train.column_names();
        state_ = std::move(fit);
    }

    Table data_selector(const FeatureSelectorSpec& s, Table t) const {
        std::vector<std::size_t> picks;
        picks.reserve(s.keep.size());
        for (const auto& cname : s.keep) {
            if (!t.has_column(cname))
                throw DataError(name() + ": column '" + cname + "' not found");
            picks.push_back(t.column_index(cname));
        }
        std::vector<Column> in = std::move(t).take_columns();
        std::vector<Column> out;
        out.reserve(picks.size());
        for (std::size_t k = 0; k < picks.size(); ++k) {
            // a column named twice in keep is copied so the duplicate-name
            // error comes from the table, not from a hollow moved-from column
            bool last = true;
            for (std::size_t k2 = k + 1; k2 < picks.size(); ++k2) {
                if (picks[k2] == picks[k]) {
                    last = false;
                    break;
                }
            }
            out.push_back(last ? std::move(in[picks[k]]) : in[picks[k]]);
        }
        return Table(std::move(out), t);
    }

    ExplanationStepResult forward_selector(const FeatureSelectorSpec& s,
                                           Explanation e) const {
        std::set<std::string> keep(s.keep.begin(), s.keep.end());
        Explanation out = std::move(e);
        if (out.is_contributions()) {
            for (auto& row : out.contributions().rows) {
                std::vector<ContributionEntry> kept;
                for (auto& entry : row.entries) {
                    if (keep.count(entry.feature)) kept.push_back(entry);
                }
                row.entries = std::move(kept);
            }
        } else if (out.is_importance()) {
            std::vector<ImportanceEntry> kept;
            for (auto& entry : out.importance().entries) {
                if (keep.count(entry.feature)) kept.push_back(entry);
            }
            out.importance().entries = std::move(kept);
        } else {
            for (auto& row : out.examples().rows) {
                for (auto& ex : row.examples) {
                    std::vector<std::pair<std::string, Cell>> kept;
                    for (auto& pair : ex.example) {
                        if (keep.count(pair.first)) kept.push_back(pair);
                    }
                    ex.example = std::move(kept);
                }
            }
        }
        return ExplanationStepResult::ok(std::move(out));
    }

    // Dropped features come back with score 0; their displayed values are
    // recovered from the original-space row (additive) or set to Any
    // (example-based). Reinserted entries follow the fitted column order.
    ExplanationStepResult inverse_selector(const FeatureSelectorSpec& s,
                                           Explanation e,
                                           const ExplanationContext& ctx) const {
        const auto& fit = std::get<detail::SelectorFit>(state_);
        std::set<std::string> keep(s.keep.begin(), s.keep.end());
        std::vector<std::string> dropped;
        for (const auto& cname : fit.input_columns) {
            if (!keep.count(cname)) dropped.push_back(cname);
        }
        Explanation out = std::move(e);
        if (out.is_contributions()) {
            for (auto& row : out.contributions().rows) {
                std::map<std::string, ContributionEntry> present;
                for (auto& entry : row.entries)
                    present.emplace(entry.feature, entry);
                std::vector<ContributionEntry> rebuilt;
                std::set<std::string> emitted;
                for (const auto& cname : fit.input_columns) {
                    auto it = present.find(cname);
                    if (it != present.end()) {
                        rebuilt.push_back(it->second);
                    } else if (!keep.count(cname)) {
                        Cell value = Cell::missing();
                        if (auto v = ctx.original_value(row.row_id, cname))
                            value = *v;
                        rebuilt.push_back(ContributionEntry{cname, value, 0.0});
                    } else {
                        continue; // kept column absent from the explanation
                    }
                    emitted.insert(cname);
                }
                for (auto& entry : row.entries) {
                    if (!emitted.count(entry.feature))
                        rebuilt.push_back(entry);
                }
                row.entries = std::move(rebuilt);
            }
        } else if (out.is_importance()) {
            auto& entries = out.importance().entries;
            std::map<std::string, ImportanceEntry> present;
            for (auto& entry : entries) present.emplace(entry.feature, entry);
            std::vector<ImportanceEntry> rebuilt;
            std::set<std::string> emitted;
            for (const auto& cname : fit.input_columns) {
                auto it = present.find(cname);
                if (it != present.end()) {
                    rebuilt.push_back(it->second);
                } else if (!keep.count(cname)) {
                    rebuilt.push_back(ImportanceEntry{cname, 0.0});
                } else {
                    continue;
                }
                emitted.insert(cname);
            }
            for (auto& entry : entries) {
                if (!emitted.count(entry.feature)) rebuilt.push_back(entry);
            }
            entries = std::move(rebuilt);
        } else {
            for (auto& row : out.examples().rows) {
                for (auto& ex : row.examples) {
                    std::map<std::string, Cell> present(ex.example.begin(),
                                                        ex.example.end());
                    std::vector<std::pair<std::string, Cell>> rebuilt;
                    std::set<std::string> emitted;
                    for (const auto& cname : fit.input_columns) {
                        auto it = present.find(cname);
                        if (it != present.end()) {
                            rebuilt.emplace_back(cname, it->second);
                        } else if (!keep.count(cname)) {
                            rebuilt.emplace_back(cname, Cell::any());
                        } else {
                            continue;
                        }
                        emitted.insert(cname);
                    }
                    for (auto& pair : ex.example) {
                        if (!emitted.count(pair.first)) rebuilt.push_back(pair);
                    }
                    ex.example = std::move(rebuilt);
                }
            }
        }
        return ExplanationStepResult::ok(std::move(out));
    }

    // ---- numeric binner ---------------------------------------------------

    void fit_binner(const NumericBinnerSpec& s, const Table& train) {
        if (!train.has_column(s.column)) missing_column(s.column);
        if (train.column(s.column).dtype != Dtype::Numeric)
            throw PipelineError(name() + ": column '" + s.column +
                                "' is not numeric");
        state_ = detail::BinnerFit{};
    }

    std::string binned_name(const NumericBinnerSpec& s) const {
        return s.column + "_binned";
    }

    // Values outside [t0, tm) clamp into the end bins.
    static const std::string& bin_label(const NumericBinnerSpec& s, double v) {
        std::size_t i = 0;
        while (i + 1 < s.labels.size() && v >= s.thresholds[i + 1]) ++i;
        return s.labels[i];
    }

    static std::string interval_text(const NumericBinnerSpec& s,
                                     std::size_t label_index) {
        return s.labels[label_index] + " [" +
               format_double(s.thresholds[label_index]) + ", " +
               format_double(s.thresholds[label_index + 1]) + ")";
    }

    Table data_binner(const NumericBinnerSpec& s, Table t) const {
        if (!t.has_column(s.column))
            throw DataError(name() + ": column '" + s.column + "' not found");
        std::size_t idx = t.column_index(s.column);
        if (t.column_at(idx).dtype != Dtype::Numeric)
            throw DataError(name() + ": column '" + s.column +
                            "' is not numeric");
        std::size_t nrows = t.row_count();
        std::vector<Column> out = std::move(t).take_columns();
        Column binned{binned_name(s), Dtype::Categorical, {}};
        binned.cells.reserve(nrows);
        for (const auto& c : out[idx].cells) {
            if (c.is_numeric())
                binned.cells.push_back(Cell(bin_label(s, c.number())));
            else
                binned.cells.push_back(c);
        }
        out[idx] = std::move(binned);
        return Table(std::move(out), t);
    }

    static Cell bin_value_cell(const NumericBinnerSpec& s, const Cell& c) {
        if (!c.is_numeric()) return c;
        return Cell(bin_label(s, c.number()));
    }

    ExplanationStepResult forward_binner(const NumericBinnerSpec& s,
                                         Explanation e) const {
        Explanation out = std::move(e);
        std::string to = binned_name(s);
        if (out.is_contributions()) {
            for (auto& row : out.contributions().rows) {
                for (auto& entry : row.entries) {
                    if (entry.feature == s.column) {
                        entry.feature = to;
                        entry.value = bin_value_cell(s, entry.value);
                    }
                }
            }
        } else if (out.is_importance()) {
            for (auto& entry : out.importance().entries) {
                if (entry.feature == s.column) entry.feature = to;
            }
        } else {
            for (auto& row : out.examples().rows) {
                for (auto& ex : row.examples) {
                    for (auto& [fname, cell] : ex.example) {
                        if (fname == s.column) {
                            fname = to;
                            cell = bin_value_cell(s, cell);
                        }
                    }
                }
            }
        }
        return ExplanationStepResult::ok(std::move(out));
    }

    ExplanationStepResult inverse_binner(const NumericBinnerSpec& s,
                                         Explanation e,
                                         const ExplanationContext& ctx) const {
        Explanation out = std::move(e);
        std::string from = binned_name(s);
        if (out.is_contributions()) {
            for (auto& row : out.contributions().rows) {
                for (auto& entry : row.entries) {
                    if (entry.feature != from) continue;
                    entry.feature = s.column;
                    entry.value = Cell::missing();
                    if (auto v = ctx.original_value(row.row_id, s.column))
                        entry.value = *v;
                }
            }
        } else if (out.is_importance()) {
            for (auto& entry : out.importance().entries) {
                if (entry.feature == from) entry.feature = s.column;
            }
        } else {
            // Bins cannot be un-binned per example; show the labeled interval.
            for (auto& row : out.examples().rows) {
                for (auto& ex : row.examples) {
                    for (auto& [fname, cell] : ex.example) {
                        if (fname != from) continue;
                        fname = s.column;
                        if (cell.is_text()) {
                            for (std::size_t i = 0; i < s.labels.size(); ++i) {
                                if (s.labels[i] == cell.text()) {
                                    cell = Cell(interval_text(s, i));
                                    break;
                                }
                            }
                        }
                    }
                }
            }
        }
        return ExplanationStepResult::ok(std::move(out));
    }

    // ---- category combiner -----------------------------------------------

    void fit_combiner(const CategoryCombinerSpec& s, const Table& train) {
        if (!train.has_column(s.column)) missing_column(s.column);
        const Column& col = train.column(s.column);
        if (col.dtype != Dtype::Categorical)
            throw PipelineError(name() + ": column '" + s.column +
                                "' is not categorical");
        detail::CombinerFit fit;
        std::set<std::string> seen;
        for (const auto& c : col.cells) {
            if (!c.is_text()) continue;
            if (!seen.insert(c.text()).second) continue;
            fit.fitted_categories.push_back(c.text());
            if (!s.child_to_parent.count(c.text()))
                throw PipelineError(name() + ": category '" + c.text() +
                                    "' seen at fit has no parent mapping");
        }
        state_ = std::move(fit);
    }

    Cell combine_cell(const CategoryCombinerSpec& s, const Cell& c,
                      std::vector<std::string>* warnings) const {
        if (!c.is_text()) return c;
        auto it = s.child_to_parent.find(c.text());
        if (it != s.child_to_parent.end()) return Cell(it->second);
        if (warnings)
            warnings->push_back(name() + ": unseen category '" + c.text() +
                                "' kept as itself");
        return c;
    }

    Table data_combiner(const CategoryCombinerSpec& s, Table t,
                        std::vector<std::string>* warnings) const {
        if (!t.has_column(s.column))
            throw DataError(name() + ": column '" + s.column + "' not found");
        std::size_t idx = t.column_index(s.column);
        std::vector<Column> out = std::move(t).take_columns();
        for (auto& c : out[idx].cells) c = combine_cell(s, c, warnings);
        return Table(std::move(out), t);
    }

    ExplanationStepResult forward_combiner(const CategoryCombinerSpec& s,
                                           Explanation e) const {
        Explanation out = std::move(e);
        std::vector<std::string> warnings;
        if (out.is_contributions()) {
            for (auto& row : out.contributions().rows) {
                for (auto& entry : row.entries) {
                    if (entry.feature == s.column)
                        entry.value = combine_cell(s, entry.value, &warnings);
                }
            }
        } else if (out.is_example_based()) {
            for (auto& row : out.examples().rows) {
                for (auto& ex : row.examples) {
                    for (auto& [fname, cell] : ex.example) {
                        if (fname == s.column)
                            cell = combine_cell(s, cell, &warnings);
                    }
                }
            }
        }
        // importance entries carry no values: nothing to map
        return ExplanationStepResult::ok(std::move(out), std::move(warnings));
    }

    ExplanationStepResult inverse_combiner(const CategoryCombinerSpec& s,
                                           Explanation e,
                                           const ExplanationContext& ctx) const {
        Explanation out = std::move(e);
        if (out.is_contributions()) {
            // The parent's score stands for the child; the displayed value
            // becomes the original child category when it is available.
            for (auto& row : out.contributions().rows) {
                for (auto& entry : row.entries) {
                    if (entry.feature != s.column) continue;
                    if (auto v = ctx.original_value(row.row_id, s.column))
                        entry.value = *v;
                }
            }
        }
        // importance: identity; example-based: examples stay at the parent
        return ExplanationStepResult::ok(std::move(out));
    }

    // ---- mapping encoder -------------------------------------------------

    void compile_mapping() {
        const auto& s = std::get<MappingEncoderSpec>(spec_);
        detail::MappingFit fit;
        for (const auto& [key, label] : s.lookup)
            fit.compiled[detail::mapping_key(key, s.key_precision)] = label;
        state_ = std::move(fit);
    }

    void fit_mapping(const MappingEncoderSpec& s, const Table& train) {
        for (const auto& cname : s.source_columns) {
            if (!train.has_column(cname)) missing_column(cname);
        }
        compile_mapping();
    }

    const std::string& mapping_label(const MappingEncoderSpec& s,
                                     const std::vector<Cell>& key_cells,
                                     std::string& key_scratch) const {
        const auto& fit = std::get<detail::MappingFit>(state_);
        detail::mapping_key_into(key_scratch, key_cells, s.key_precision);
        auto it = fit.compiled.find(key_scratch);
        return it == fit.compiled.end() ? s.default_label : it->second;
    }

    Table data_mapping(const MappingEncoderSpec& s, Table t) const {
        std::vector<std::size_t> src_idx;
        for (const auto& cname : s.source_columns) {
            if (!t.has_column(cname))
                throw DataError(name() + ": column '" + cname + "' not found");
            src_idx.push_back(t.column_index(cname));
        }
        std::size_t nrows = t.row_count();
        std::vector<Column> in = std::move(t).take_columns();
        Column target{s.target_column, Dtype::Categorical, {}};
        target.cells.reserve(nrows);
        std::vector<Cell> key_cells(src_idx.size());
        std::string key_scratch;
        for (std::size_t r = 0; r < nrows; ++r) {
            for (std::size_t k = 0; k < src_idx.size(); ++k)
                key_cells[k] = in[src_idx[k]].cells[r];
            target.cells.push_back(
                Cell(mapping_label(s, key_cells, key_scratch)));
        }
        std::set<std::size_t> sources(src_idx.begin(), src_idx.end());
        std::vector<Column> out;
        for (std::size_t c = 0; c < in.size(); ++c) {
            if (c == src_idx.front()) {
                out.push_back(std::move(target));
                continue;
            }
            if (sources.count(c)) continue;
            out.push_back(std::move(in[c]));
        }
        return Table(std::move(out), t);
    }

    ExplanationStepResult forward_mapping(const MappingEncoderSpec& s,
                                          Explanation e) const {
        std::set<std::string> sources(s.source_columns.begin(),
                                      s.source_columns.end());
        Explanation out = std::move(e);
        if (out.is_contributions()) {
            std::vector<const Cell*> by_source(s.source_columns.size());
            std::vector<Cell> key_cells;
            std::string key_scratch;
            for (auto& row : out.contributions().rows) {
                std::fill(by_source.begin(), by_source.end(), nullptr);
                double sum = 0.0;
                bool any = false;
                for (const auto& entry : row.entries) {
                    for (std::size_t k = 0; k < s.source_columns.size(); ++k) {
                        if (entry.feature != s.source_columns[k]) continue;
                        by_source[k] = &entry.value;
                        sum += entry.contribution;
                        any = true;
                        break;
                    }
                }
                if (!any) continue;
                for (std::size_t k = 0; k < s.source_columns.size(); ++k) {
                    if (!by_source[k])
                        throw DataError(name() + ": explanation row '" +
                                        row.row_id +
                                        "' is missing source feature '" +
                                        s.source_columns[k] + "'");
                }
                key_cells.clear();
                for (const Cell* c : by_source) key_cells.push_back(*c);
                Cell value = Cell(mapping_label(s, key_cells, key_scratch));
                bool emitted = false;
                std::size_t w = 0;
                for (std::size_t i = 0; i < row.entries.size(); ++i) {
                    if (sources.count(row.entries[i].feature)) {
                        if (!emitted) {
                            row.entries[w++] = ContributionEntry{
                                s.target_column, value, sum};
                            emitted = true;
                        }
                        continue;
                    }
                    if (w != i) row.entries[w] = std::move(row.entries[i]);
                    ++w;
                }
                row.entries.resize(w);
            }
        } else if (out.is_importance()) {
            auto& entries = out.importance().entries;
            std::set<std::string> present;
            double sum = 0.0;
            for (const auto& entry : entries) {
                if (!sources.count(entry.feature)) continue;
                present.insert(entry.feature);
                sum += entry.importance;
            }
            if (!present.empty()) {
                for (const auto& cname : s.source_columns) {
                    if (!present.count(cname))
                        throw DataError(name() +
                                        ": explanation is missing source "
                                        "feature '" +
                                        cname + "'");
                }
                std::vector<ImportanceEntry> rebuilt;
                bool emitted = false;
                for (const auto& entry : entries) {
                    if (sources.count(entry.feature)) {
                        if (!emitted) {
                            rebuilt.push_back(
                                ImportanceEntry{s.target_column, sum});
                            emitted = true;
                        }
                        continue;
                    }
                    rebuilt.push_back(entry);
                }
                entries = std::move(rebuilt);
            }
        } else {
            for (auto& row : out.examples().rows) {
                for (auto& ex : row.examples) {
                    std::map<std::string, Cell> found;
                    for (const auto& [fname, cell] : ex.example) {
                        if (sources.count(fname)) found[fname] = cell;
                    }
                    if (found.empty()) continue;
                    for (const auto& cname : s.source_columns) {
                        if (!found.count(cname))
                            throw DataError(name() + ": example '" +
                                            ex.example_id +
                                            "' is missing source feature '" +
                                            cname + "'");
                    }
                    std::vector<Cell> key_cells;
                    for (const auto& cname : s.source_columns)
                        key_cells.push_back(found.at(cname));
                    std::string key_scratch;
                    Cell value = Cell(mapping_label(s, key_cells, key_scratch));
                    std::vector<std::pair<std::string, Cell>> rebuilt;
                    bool emitted = false;
                    for (const auto& pair : ex.example) {
                        if (sources.count(pair.first)) {
                            if (!emitted) {
                                rebuilt.emplace_back(s.target_column, value);
                                emitted = true;
                            }
                            continue;
                        }
                        rebuilt.push_back(pair);
                    }
                    ex.example = std::move(rebuilt);
                }
            }
        }
        return ExplanationStepResult::ok(std::move(out));
    }

    TransformerSpec spec_;
    FeatureSpaceFlags flags_;
    UnsupportedMode mode_ = UnsupportedMode::Break;
    bool fitted_ = false;
    detail::FittedState state_;
};

// ---- pipeline --------------------------------------------------------------

struct RouteReport {
    std::string route;
    bool ok = false;
    std::string error;
    std::vector<std::string> columns;
};

struct PipelineValidationReport {
    std::vector<RouteReport> routes;
    bool composition_ok = false;
    std::string composition_error;
    bool additive_ok = false;
    std::string additive_error;
    Audit additive_audit;
    bool example_ok = false;
    std::string example_error;
    Audit example_audit;

    bool ok() const {
        for (const auto& r : routes) {
            if (!r.ok) return false;
        }
        return composition_ok && additive_ok && example_ok;
    }

    std::string to_text() const {
        std::string out;
        for (const auto& r : routes) {
            out += r.route;
            out += ": ";
            if (r.ok) {
                out += "ok [" + detail::join_names(r.columns) + "]";
            } else {
                out += "FAILED: " + r.error;
            }
            out.push_back('\n');
        }
        out += "composition: ";
        out += composition_ok ? "ok" : ("FAILED: " + composition_error);
        out.push_back('\n');
        auto audit_text = [](const Audit& audit) {
            std::string s;
            for (const auto& ev : audit) {
                s += "  [" + ev.event + "] step " + std::to_string(ev.step) +
                     " " + ev.transformer + ": " + ev.detail + "\n";
            }
            return s;
        };
        out += "additive explanations: ";
        out += additive_ok ? "ok" : ("FAILED: " + additive_error);
        out.push_back('\n');
        out += audit_text(additive_audit);
        out += "example-based explanations: ";
        out += example_ok ? "ok" : ("FAILED: " + example_error);
        out.push_back('\n');
        out += audit_text(example_audit);
        return out;
    }
};

// An ordered list of transformers routed by their feature-space flags.
class TransformPipeline {
public:
    TransformPipeline() = default;
    explicit TransformPipeline(std::vector<Transformer> transformers)
        : transformers_(std::move(transformers)) {}

    const std::vector<Transformer>& transformers() const {
        return transformers_;
    }
    std::vector<Transformer>& transformers() { return transformers_; }

    bool fitted() const { return fitted_; }
    void mark_fitted() { fitted_ = true; } // bundle loading

    // Fits each transformer on the training data as it appears in that
    // transformer's own input space, advancing the three route tables in
    // list order.
    void fit(const Table& train) {
        Table t_model = train;
        Table t_algo = train;
        Table t_interp = train;
        for (auto& tr : transformers_) {
            const Table& input = tr.flags().algo()     ? t_algo
                                 : tr.flags().model    ? t_model
                                 : tr.flags().interpret ? t_interp
                                                        : train;
            const char* route = tr.flags().algo()     ? "algorithm"
                                : tr.flags().model    ? "model"
                                : tr.flags().interpret ? "interpretable"
                                                       : "training";
            try {
                tr.fit(input);
                route = "model";
                if (tr.flags().model) t_model = tr.transform_data(std::move(t_model));
                route = "algorithm";
                if (tr.flags().algo()) t_algo = tr.transform_data(std::move(t_algo));
                route = "interpretable";
                if (tr.flags().interpret)
                    t_interp = tr.transform_data(std::move(t_interp));
            } catch (const PipelineError&) {
                throw;
            } catch (const Error& e) {
                throw PipelineError(tr.name() + ": " + e.what() + " (on the " +
                                    route + " route)");
            }
        }
        fitted_ = true;
    }

    Table to_model_space(Table t) const {
        require_fitted();
        for (const auto& tr : transformers_) {
            if (tr.flags().model) t = tr.transform_data(std::move(t));
        }
        return t;
    }

    Table to_algorithm_space(Table t) const {
        require_fitted();
        for (const auto& tr : transformers_) {
            if (tr.flags().algo()) t = tr.transform_data(std::move(t));
        }
        return t;
    }

    // Finishes the job on data already in algorithm space.
    Table algorithm_to_model_space(Table t) const {
        require_fitted();
        for (const auto& tr : transformers_) {
            if (tr.flags().model && !tr.flags().algo())
                t = tr.transform_data(std::move(t));
        }
        return t;
    }

    Table to_interpretable_space(Table t) const {
        require_fitted();
        for (const auto& tr : transformers_) {
            if (tr.flags().interpret) t = tr.transform_data(std::move(t));
        }
        return t;
    }

    // Converts an algorithm-space explanation to the interpretable space.
    // Step 3 undoes transformers that only served the algorithm (reverse
    // order), step 4 applies the interpret-only ones forward (list order).
    // Transformers flagged for both spaces stay put. A Break-mode
    // Unsupported stops the process; the explanation transformed so far is
    // returned with space "partial".
    std::pair<Explanation, Audit> explanation_to_interpretable(
        Explanation e, const ExplanationContext& ctx = {}) const {
        require_fitted();
        {
            auto problems = validate(e);
            if (!problems.empty())
                throw ContractError("explanation is not valid: " +
                                    problems.front());
        }
        Explanation current = std::move(e);
        Audit audit;
        auto run_step = [&](const Transformer& tr, int step) -> bool {
            ExplanationStepResult r =
                step == 3
                    ? tr.inverse_transform_explanation(std::move(current), ctx)
                    : tr.transform_explanation(std::move(current), ctx);
            current = std::move(*r.explanation);
            for (const auto& w : r.warnings)
                audit.push_back(AuditEvent{"warning", tr.name(), step, w});
            if (r.unsupported) {
                bool brk = tr.unsupported_mode() == UnsupportedMode::Break;
                audit.push_back(AuditEvent{brk ? "break" : "skip", tr.name(),
                                           step, r.unsupported->reason});
                return !brk;
            }
            return true;
        };
        for (auto it = transformers_.rbegin(); it != transformers_.rend();
             ++it) {
            if (!(it->flags().algo() && !it->flags().interpret)) continue;
            if (!run_step(*it, 3)) {
                current.set_space("partial");
                return {std::move(current), std::move(audit)};
            }
        }
        for (const auto& tr : transformers_) {
            if (!(tr.flags().interpret && !tr.flags().algo())) continue;
            if (!run_step(tr, 4)) {
                current.set_space("partial");
                return {std::move(current), std::move(audit)};
            }
        }
        current.set_space("interpretable");
        return {std::move(current), std::move(audit)};
    }

    // Dry-runs every route on a one-row slice of train plus synthetic zero
    // explanations, and checks that going to model space directly agrees
    // with going through algorithm space. Failures land in the report;
    // nothing throws.
    PipelineValidationReport validate_pipeline(const Table& train) const {
        require_fitted();
        PipelineValidationReport report;
        Table slice = train.row_count() > 0
                          ? select_row_indices(train, {0})
                          : train;

        std::optional<Table> model_t, algo_t, interp_t, algo_model_t;
        auto run_route = [&](const std::string& label, auto&& fn,
                             std::optional<Table>& out) {
            RouteReport r;
            r.route = label;
            try {
                out = fn();
                r.ok = true;
                r.columns = out->column_names();
            } catch (const std::exception& e) {
                r.error = e.what();
            }
            report.routes.push_back(std::move(r));
        };
        run_route("model", [&] { return to_model_space(slice); }, model_t);
        run_route("algorithm", [&] { return to_algorithm_space(slice); },
                  algo_t);
        if (algo_t) {
            run_route(
                "algorithm_to_model",
                [&] { return algorithm_to_model_space(*algo_t); },
                algo_model_t);
        } else {
            RouteReport r;
            r.route = "algorithm_to_model";
            r.error = "skipped: algorithm route failed";
            report.routes.push_back(std::move(r));
        }
        run_route("interpretable",
                  [&] { return to_interpretable_space(slice); }, interp_t);

        if (model_t && algo_model_t) {
            auto diff = first_table_difference(*model_t, *algo_model_t);
            if (diff) {
                report.composition_error =
                    "model route and algorithm->model route disagree: " +
                    *diff;
            } else {
                report.composition_ok = true;
            }
        } else {
            report.composition_error = "skipped: a data route failed";
        }

        if (algo_t && slice.row_count() == 1) {
            ExplanationContext ctx;
            ctx.original = &slice;
            try {
                FeatureContributions c;
                ContributionRow row;
                row.row_id = slice.row_ids().front();
                for (const auto& col : algo_t->columns())
                    row.entries.push_back(
                        ContributionEntry{col.name, col.cells.front(), 0.0});
                c.rows.push_back(std::move(row));
                auto [expl, audit] =
                    explanation_to_interpretable(Explanation(c), ctx);
                report.additive_audit = std::move(audit);
                report.additive_ok = true;
            } catch (const std::exception& e) {
                report.additive_error = e.what();
            }
            try {
                ExampleBased ex;
                ExampleBasedRow row;
                row.row_id = slice.row_ids().front();
                ExampleNeighbor nb;
                nb.example_id = slice.row_ids().front();
                for (const auto& col : algo_t->columns())
                    nb.example.emplace_back(col.name, col.cells.front());
                nb.target = Cell::missing();
                nb.distance = 0.0;
                row.examples.push_back(std::move(nb));
                ex.rows.push_back(std::move(row));
                auto [expl, audit] =
                    explanation_to_interpretable(Explanation(ex), ctx);
                report.example_audit = std::move(audit);
                report.example_ok = true;
            } catch (const std::exception& e) {
                report.example_error = e.what();
            }
        } else if (!algo_t) {
            report.additive_error = "skipped: algorithm route failed";
            report.example_error = "skipped: algorithm route failed";
        } else {
            // no rows to synthesize from; nothing to check
            report.additive_ok = true;
            report.example_ok = true;
        }
        return report;
    }

private:
    void require_fitted() const {
        if (!fitted_)
            throw ContractError("pipeline used before it was fitted");
    }

    static std::optional<std::string> first_table_difference(const Table& a,
                                                             const Table& b) {
        if (a.column_count() != b.column_count())
            return "column counts differ (" +
                   std::to_string(a.column_count()) + " vs " +
                   std::to_string(b.column_count()) + ")";
        for (std::size_t c = 0; c < a.column_count(); ++c) {
            const Column& ca = a.column_at(c);
            const Column& cb = b.column_at(c);
            if (ca.name != cb.name)
                return "column " + std::to_string(c) + " named '" + ca.name +
                       "' vs '" + cb.name + "'";
            if (ca.dtype != cb.dtype)
                return "column '" + ca.name + "' dtype differs";
            for (std::size_t r = 0; r < ca.cells.size(); ++r) {
                if (!(ca.cells[r] == cb.cells[r]))
                    return "column '" + ca.name + "' row " +
                           std::to_string(r) + " differs";
            }
        }
        return std::nullopt;
    }

    std::vector<Transformer> transformers_;
    bool fitted_ = false;
};

} // namespace realpipe
