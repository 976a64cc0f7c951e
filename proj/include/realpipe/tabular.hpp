#pragma once

#include <charconv>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "realpipe/errors.hpp"

namespace realpipe {

enum class Dtype { Numeric, Categorical, Boolean };

inline const char* dtype_name(Dtype d) {
    switch (d) {
        case Dtype::Numeric: return "numeric";
        case Dtype::Categorical: return "categorical";
        case Dtype::Boolean: return "boolean";
    }
    return "unknown";
}

inline Dtype dtype_from_name(std::string_view name) {
    if (name == "numeric") return Dtype::Numeric;
    if (name == "categorical") return Dtype::Categorical;
    if (name == "boolean") return Dtype::Boolean;
    throw SchemaError("unknown dtype '" + std::string(name) + "'");
}

// Shortest decimal string that round-trips back to the same double.
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

// Strict decimal parse: the whole token must be consumed and the result must
// be finite. "nan", "inf" and friends are rejected on purpose, so columns
// containing them stay categorical.
inline std::optional<double> parse_double(std::string_view text) {
    if (text.empty()) return std::nullopt;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first; // from_chars does not accept a leading '+'
    if (first == last) return std::nullopt;
    double value = 0.0;
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
    if (!(value == value) || value > 1.7976931348623157e308 ||
        value < -1.7976931348623157e308)
        return std::nullopt;
    return value;
}

// One value in a table. Missing marks an absent value; Any is a sentinel
// meaning "unconstrained", used only inside example-based explanations.
class Cell {
    struct MissingTag {
        bool operator==(const MissingTag&) const { return true; }
    };
    struct AnyTag {
        bool operator==(const AnyTag&) const { return true; }
    };

public:
    Cell() : value_(MissingTag{}) {}
    Cell(double v) : value_(v) {}
    Cell(bool v) : value_(v) {}
    Cell(std::string v) : value_(std::move(v)) {}
    Cell(const char* v) : value_(std::string(v)) {}

    static Cell missing() { return Cell(); }
    static Cell any() {
        Cell c;
        c.value_ = AnyTag{};
        return c;
    }

    bool is_numeric() const { return std::holds_alternative<double>(value_); }
    bool is_text() const { return std::holds_alternative<std::string>(value_); }
    bool is_boolean() const { return std::holds_alternative<bool>(value_); }
    bool is_missing() const { return std::holds_alternative<MissingTag>(value_); }
    bool is_any() const { return std::holds_alternative<AnyTag>(value_); }

    double number() const { return std::get<double>(value_); }
    const std::string& text() const { return std::get<std::string>(value_); }
    bool truth() const { return std::get<bool>(value_); }

    bool matches(Dtype d) const {
        if (is_missing() || is_any()) return true;
        switch (d) {
            case Dtype::Numeric: return is_numeric();
            case Dtype::Categorical: return is_text();
            case Dtype::Boolean: return is_boolean();
        }
        return false;
    }

    bool operator==(const Cell& other) const { return value_ == other.value_; }
    bool operator!=(const Cell& other) const { return !(*this == other); }

    // Rendering used by CSV output and text reports.
    std::string to_display() const {
        if (is_missing()) return "";
        if (is_any()) return "(any)";
        if (is_numeric()) return format_double(number());
        if (is_boolean()) return truth() ? "true" : "false";
        return text();
    }

private:
    std::variant<double, std::string, bool, MissingTag, AnyTag> value_;
};

struct Column {
    std::string name;
    Dtype dtype = Dtype::Numeric;
    std::vector<Cell> cells;
};

// Immutable-after-construction table: named, typed columns of equal length
// plus unique row ids. Transformations build new tables instead of editing.
// Row ids and their lookup index are shared between tables that keep rows
// as they are, so a chain of column transforms never re-hashes ids.
class Table {
public:
    Table() = default;

    Table(std::vector<Column> columns, std::vector<std::string> row_ids)
        : columns_(std::move(columns)),
          row_ids_(std::make_shared<const std::vector<std::string>>(
              std::move(row_ids))) {
        validate_columns();
        validate_row_ids();
        index_columns();
        index_rows();
    }

    // Convenience: default row ids "0", "1", ...
    explicit Table(std::vector<Column> columns)
        : columns_(std::move(columns)) {
        std::size_t n = columns_.empty() ? 0 : columns_.front().cells.size();
        std::vector<std::string> ids;
        ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
        row_ids_ =
            std::make_shared<const std::vector<std::string>>(std::move(ids));
        validate_columns();
        index_columns();
        index_rows();
    }

    // New columns over the same rows: shares `like`'s ids and row index.
    Table(std::vector<Column> columns, const Table& like)
        : columns_(std::move(columns)),
          row_ids_(like.row_ids_),
          row_index_(like.row_index_) {
        validate_columns();
        index_columns();
    }

    Table(const Table&) = default;
    Table& operator=(const Table&) = default;

    // Moved-from tables stay safe to query: they read as empty rather than
    // holding dangling id storage.
    Table(Table&& other) noexcept
        : columns_(std::move(other.columns_)),
          row_ids_(std::move(other.row_ids_)),
          column_index_(std::move(other.column_index_)),
          row_index_(std::move(other.row_index_)) {
        other.row_ids_ = empty_ids();
        other.row_index_ = empty_index();
        other.columns_.clear();
        other.column_index_.clear();
    }

    Table& operator=(Table&& other) noexcept {
        if (this == &other) return *this;
        columns_ = std::move(other.columns_);
        row_ids_ = std::move(other.row_ids_);
        column_index_ = std::move(other.column_index_);
        row_index_ = std::move(other.row_index_);
        other.row_ids_ = empty_ids();
        other.row_index_ = empty_index();
        other.columns_.clear();
        other.column_index_.clear();
        return *this;
    }

    std::size_t row_count() const { return row_ids_->size(); }
    std::size_t column_count() const { return columns_.size(); }

    const std::vector<Column>& columns() const { return columns_; }
    const std::vector<std::string>& row_ids() const { return *row_ids_; }

    bool has_column(std::string_view name) const {
        return column_index_.find(std::string(name)) != column_index_.end();
    }

    std::size_t column_index(std::string_view name) const {
        auto it = column_index_.find(std::string(name));
        if (it == column_index_.end())
            throw LookupError("no column named '" + std::string(name) + "'");
        return it->second;
    }

    const Column& column(std::string_view name) const {
        return columns_[column_index(name)];
    }

    const Column& column_at(std::size_t i) const { return columns_.at(i); }

    const Cell& cell(std::size_t row, std::string_view name) const {
        return column(name).cells.at(row);
    }

    bool has_row_id(std::string_view id) const {
        return row_index_->find(std::string(id)) != row_index_->end();
    }

    std::size_t row_index(std::string_view id) const {
        auto it = row_index_->find(std::string(id));
        if (it == row_index_->end())
            throw LookupError("no row with id '" + std::string(id) + "'");
        return it->second;
    }

    std::vector<std::string> column_names() const {
        std::vector<std::string> names;
        names.reserve(columns_.size());
        for (const auto& c : columns_) names.push_back(c.name);
        return names;
    }

    // Surrenders the column storage so transforms can rework columns without
    // copying the untouched ones. Ids and indexes stay behind, keeping the
    // hollowed table valid as the row-shape witness for the sharing
    // constructor.
    std::vector<Column> take_columns() && { return std::move(columns_); }

private:
    using RowIds = std::vector<std::string>;
    using RowIndex = std::unordered_map<std::string, std::size_t>;

    static const std::shared_ptr<const RowIds>& empty_ids() {
        static const auto ids = std::make_shared<const RowIds>();
        return ids;
    }
    static const std::shared_ptr<const RowIndex>& empty_index() {
        static const auto index = std::make_shared<const RowIndex>();
        return index;
    }

    void validate_columns() const {
        std::unordered_map<std::string, int> seen;
        for (const auto& c : columns_) {
            if (c.name.empty()) throw SchemaError("empty column name");
            if (++seen[c.name] > 1)
                throw SchemaError("duplicate column name '" + c.name + "'");
            if (c.cells.size() != row_ids_->size())
                throw SchemaError("column '" + c.name + "' has " +
                                  std::to_string(c.cells.size()) +
                                  " cells for " +
                                  std::to_string(row_ids_->size()) + " rows");
            for (const auto& cell : c.cells) {
                if (!cell.matches(c.dtype))
                    throw SchemaError("column '" + c.name +
                                      "' contains a value that is not " +
                                      dtype_name(c.dtype));
            }
        }
    }

    void validate_row_ids() const {
        std::unordered_map<std::string, int> ids;
        for (const auto& id : *row_ids_) {
            if (++ids[id] > 1)
                throw SchemaError("duplicate row id '" + id + "'");
        }
    }

    void index_columns() {
        column_index_.reserve(columns_.size());
        for (std::size_t i = 0; i < columns_.size(); ++i)
            column_index_[columns_[i].name] = i;
    }

    void index_rows() {
        RowIndex index;
        index.reserve(row_ids_->size());
        for (std::size_t i = 0; i < row_ids_->size(); ++i)
            index[(*row_ids_)[i]] = i;
        row_index_ = std::make_shared<const RowIndex>(std::move(index));
    }

    std::vector<Column> columns_;
    std::shared_ptr<const RowIds> row_ids_ = empty_ids();
    std::unordered_map<std::string, std::size_t> column_index_;
    std::shared_ptr<const RowIndex> row_index_ = empty_index();
};

namespace detail {

// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, and
// either LF or CRLF record ends. Produces one vector of fields per record.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false; // something seen since the last delimiter
    std::size_t line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line;
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                if (field.empty() && !field_started) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    throw ParseError("line " + std::to_string(line) +
                                     ": quote inside unquoted field");
                }
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') {
                    end_record();
                    ++i;
                    ++line;
                } else {
                    field.push_back(ch); // lone CR is kept as data
                }
                break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                field.push_back(ch);
                field_started = true;
                break;
        }
    }
    if (in_quotes)
        throw ParseError("line " + std::to_string(line) +
                         ": unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

inline bool is_true_word(std::string_view s) {
    return s.size() == 4 && (s[0] == 't' || s[0] == 'T') &&
           (s[1] == 'r' || s[1] == 'R') && (s[2] == 'u' || s[2] == 'U') &&
           (s[3] == 'e' || s[3] == 'E');
}

inline bool is_false_word(std::string_view s) {
    return s.size() == 5 && (s[0] == 'f' || s[0] == 'F') &&
           (s[1] == 'a' || s[1] == 'A') && (s[2] == 'l' || s[2] == 'L') &&
           (s[3] == 's' || s[3] == 'S') && (s[4] == 'e' || s[4] == 'E');
}

inline bool needs_quoting(std::string_view s) {
    for (char c : s) {
        if (c == ',' || c == '"' || c == '\n' || c == '\r') return true;
    }
    return false;
}

inline void write_csv_field(std::string& out, std::string_view s) {
    if (!needs_quoting(s)) {
        out.append(s);
        return;
    }
    out.push_back('"');
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

} // namespace detail

// Parses CSV text into a Table. Column dtypes are inferred per column from
// the non-empty fields: all case-insensitive true/false -> Boolean, all
// decimal numbers -> Numeric, otherwise Categorical. Empty fields become
// Missing. If id_column is given, that column supplies the row ids and is
// removed from the data; otherwise row ids are "0", "1", ...
inline Table read_table(std::string_view csv_text,
                        const std::optional<std::string>& id_column = std::nullopt) {
    auto records = detail::parse_csv(csv_text);
    if (records.empty()) throw ParseError("empty input: no header row");
    const auto& header = records.front();
    std::size_t width = header.size();

    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != width)
            throw ParseError("row " + std::to_string(r) + ": expected " +
                             std::to_string(width) + " fields, got " +
                             std::to_string(records[r].size()));
    }

    std::optional<std::size_t> id_idx;
    if (id_column) {
        for (std::size_t c = 0; c < width; ++c) {
            if (header[c] == *id_column) {
                id_idx = c;
                break;
            }
        }
        if (!id_idx)
            throw SchemaError("id column '" + *id_column +
                              "' not found in header");
    }

    std::size_t n_rows = records.size() - 1;
    std::vector<std::string> row_ids;
    row_ids.reserve(n_rows);
    if (id_idx) {
        for (std::size_t r = 0; r < n_rows; ++r)
            row_ids.push_back(records[r + 1][*id_idx]);
    } else {
        for (std::size_t r = 0; r < n_rows; ++r)
            row_ids.push_back(std::to_string(r));
    }

    std::vector<Column> columns;
    columns.reserve(width);
    for (std::size_t c = 0; c < width; ++c) {
        if (id_idx && c == *id_idx) continue;
        bool all_bool = true;
        bool all_num = true;
        bool saw_value = false;
        for (std::size_t r = 0; r < n_rows; ++r) {
            const std::string& f = records[r + 1][c];
            if (f.empty()) continue;
            saw_value = true;
            if (all_bool && !detail::is_true_word(f) && !detail::is_false_word(f))
                all_bool = false;
            if (all_num && !parse_double(f)) all_num = false;
            if (!all_bool && !all_num) break;
        }
        Column col;
        col.name = header[c];
        col.dtype = !saw_value          ? Dtype::Categorical
                    : all_bool          ? Dtype::Boolean
                    : all_num           ? Dtype::Numeric
                                        : Dtype::Categorical;
        col.cells.reserve(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) {
            const std::string& f = records[r + 1][c];
            if (f.empty()) {
                col.cells.push_back(Cell::missing());
            } else if (col.dtype == Dtype::Boolean) {
                col.cells.push_back(Cell(detail::is_true_word(f)));
            } else if (col.dtype == Dtype::Numeric) {
                col.cells.push_back(Cell(*parse_double(f)));
            } else {
                col.cells.push_back(Cell(f));
            }
        }
        columns.push_back(std::move(col));
    }
    return Table(std::move(columns), std::move(row_ids));
}

// Serializes a table back to CSV (LF line ends). Numerics use the shortest
// round-tripping decimal form, booleans are true/false, Missing is an empty
// field. With include_ids an "id" column is prepended; read it back with
// read_table(text, "id").
inline std::string write_table(const Table& t, bool include_ids = false) {
    std::string out;
    bool first = true;
    if (include_ids) {
        detail::write_csv_field(out, "id");
        first = false;
    }
    for (const auto& c : t.columns()) {
        if (!first) out.push_back(',');
        detail::write_csv_field(out, c.name);
        first = false;
    }
    out.push_back('\n');
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        first = true;
        if (include_ids) {
            detail::write_csv_field(out, t.row_ids()[r]);
            first = false;
        }
        for (const auto& c : t.columns()) {
            if (!first) out.push_back(',');
            detail::write_csv_field(out, c.cells[r].to_display());
            first = false;
        }
        out.push_back('\n');
    }
    return out;
}

// New table holding the requested rows in the requested order.
inline Table select_rows(const Table& t, const std::vector<std::string>& ids) {
    std::vector<std::size_t> picks;
    picks.reserve(ids.size());
    for (const auto& id : ids) picks.push_back(t.row_index(id));
    std::vector<Column> columns;
    columns.reserve(t.column_count());
    for (const auto& c : t.columns()) {
        Column out{c.name, c.dtype, {}};
        out.cells.reserve(picks.size());
        for (std::size_t p : picks) out.cells.push_back(c.cells[p]);
        columns.push_back(std::move(out));
    }
    return Table(std::move(columns), ids);
}

// New table holding the rows at the given positions, ids carried over.
inline Table select_row_indices(const Table& t,
                                const std::vector<std::size_t>& picks) {
    std::vector<std::string> ids;
    ids.reserve(picks.size());
    for (std::size_t p : picks) ids.push_back(t.row_ids().at(p));
    std::vector<Column> columns;
    columns.reserve(t.column_count());
    for (const auto& c : t.columns()) {
        Column out{c.name, c.dtype, {}};
        out.cells.reserve(picks.size());
        for (std::size_t p : picks) out.cells.push_back(c.cells.at(p));
        columns.push_back(std::move(out));
    }
    return Table(std::move(columns), std::move(ids));
}

// Replaces one column's cells, keeping name, dtype and everything else.
inline Table with_column_cells(const Table& t, std::size_t column,
                               std::vector<Cell> cells) {
    std::vector<Column> columns = t.columns();
    columns.at(column).cells = std::move(cells);
    return Table(std::move(columns), t);
}

} // namespace realpipe
