#include <gtest/gtest.h>

#include <utility>
#include <vector>

#include <realpipe/tabular.hpp>

using namespace realpipe;

namespace {

Table small_table() {
    std::vector<Column> cols;
    cols.push_back({"age", Dtype::Numeric, {Cell(34.0), Cell(51.0), Cell::missing()}});
    cols.push_back({"city", Dtype::Categorical, {Cell("lyon"), Cell("nice"), Cell("lyon")}});
    cols.push_back({"member", Dtype::Boolean, {Cell(true), Cell(false), Cell(true)}});
    return Table(std::move(cols), {"a", "b", "c"});
}

} // namespace

TEST(Cell, TypePredicatesAndAccessors) {
    EXPECT_TRUE(Cell(1.5).is_numeric());
    EXPECT_DOUBLE_EQ(Cell(1.5).number(), 1.5);
    EXPECT_TRUE(Cell("x").is_text());
    EXPECT_EQ(Cell("x").text(), "x");
    EXPECT_TRUE(Cell(true).is_boolean());
    EXPECT_TRUE(Cell(true).truth());
    EXPECT_TRUE(Cell().is_missing());
    EXPECT_TRUE(Cell::missing().is_missing());
    EXPECT_TRUE(Cell::any().is_any());
}

TEST(Cell, EqualityIsTypedAndExact) {
    EXPECT_EQ(Cell(2.0), Cell(2.0));
    EXPECT_NE(Cell(2.0), Cell(2.0000001));
    EXPECT_NE(Cell(1.0), Cell("1"));
    EXPECT_NE(Cell(true), Cell("true"));
    EXPECT_EQ(Cell::missing(), Cell::missing());
    EXPECT_EQ(Cell::any(), Cell::any());
    EXPECT_NE(Cell::missing(), Cell::any());
}

TEST(Cell, MatchesTreatsMissingAndAnyAsWildcards) {
    EXPECT_TRUE(Cell(1.0).matches(Dtype::Numeric));
    EXPECT_FALSE(Cell(1.0).matches(Dtype::Categorical));
    EXPECT_TRUE(Cell::missing().matches(Dtype::Numeric));
    EXPECT_TRUE(Cell::missing().matches(Dtype::Boolean));
    EXPECT_TRUE(Cell::any().matches(Dtype::Categorical));
    EXPECT_FALSE(Cell("yes").matches(Dtype::Boolean));
}

TEST(Cell, DisplayRendering) {
    EXPECT_EQ(Cell::missing().to_display(), "");
    EXPECT_EQ(Cell::any().to_display(), "(any)");
    EXPECT_EQ(Cell(true).to_display(), "true");
    EXPECT_EQ(Cell(false).to_display(), "false");
    EXPECT_EQ(Cell(2.5).to_display(), "2.5");
    EXPECT_EQ(Cell("near bay").to_display(), "near bay");
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(-3.0), "-3");
    EXPECT_EQ(format_double(1e300), "1e+300");
    double tricky = 0.1 + 0.2;
    EXPECT_EQ(parse_double(format_double(tricky)), tricky);
}

TEST(ParseDouble, AcceptsPlainNumbersOnly) {
    EXPECT_EQ(parse_double("42"), 42.0);
    EXPECT_EQ(parse_double("-0.5"), -0.5);
    EXPECT_EQ(parse_double("+3"), 3.0);
    EXPECT_EQ(parse_double("1e-3"), 1e-3);
    EXPECT_FALSE(parse_double("").has_value());
    EXPECT_FALSE(parse_double("  1").has_value());
    EXPECT_FALSE(parse_double("1x").has_value());
    EXPECT_FALSE(parse_double("nan").has_value());
    EXPECT_FALSE(parse_double("inf").has_value());
}

TEST(Dtype, NamesRoundTrip) {
    EXPECT_EQ(dtype_from_name(dtype_name(Dtype::Numeric)), Dtype::Numeric);
    EXPECT_EQ(dtype_from_name(dtype_name(Dtype::Categorical)), Dtype::Categorical);
    EXPECT_EQ(dtype_from_name(dtype_name(Dtype::Boolean)), Dtype::Boolean);
    EXPECT_THROW(dtype_from_name("floatish"), SchemaError);
}

TEST(Table, BasicShapeAndLookup) {
    Table t = small_table();
    EXPECT_EQ(t.row_count(), 3u);
    EXPECT_EQ(t.column_count(), 3u);
    EXPECT_EQ(t.row_ids(), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_TRUE(t.has_column("city"));
    EXPECT_FALSE(t.has_column("zip"));
    EXPECT_EQ(t.column_index("member"), 2u);
    EXPECT_EQ(t.column("city").cells[1], Cell("nice"));
    EXPECT_EQ(t.cell(0, "age"), Cell(34.0));
    EXPECT_TRUE(t.has_row_id("b"));
    EXPECT_EQ(t.row_index("c"), 2u);
    EXPECT_EQ(t.column_names(),
              (std::vector<std::string>{"age", "city", "member"}));
}

TEST(Table, LookupErrorsNameTheMissingThing) {
    Table t = small_table();
    EXPECT_THROW(t.column("zip"), LookupError);
    EXPECT_THROW(t.row_index("zz"), LookupError);
}

TEST(Table, DefaultRowIdsCountUpFromZero) {
    Table t(std::vector<Column>{
        {"x", Dtype::Numeric, {Cell(1.0), Cell(2.0)}}});
    EXPECT_EQ(t.row_ids(), (std::vector<std::string>{"0", "1"}));
}

TEST(Table, ConstructionRejectsBadShapes) {
    EXPECT_THROW(Table(std::vector<Column>{
                     {"x", Dtype::Numeric, {Cell(1.0)}},
                     {"y", Dtype::Numeric, {Cell(1.0), Cell(2.0)}}},
                     std::vector<std::string>{"a"}),
                 SchemaError);
    EXPECT_THROW(Table(std::vector<Column>{
                     {"x", Dtype::Numeric, {Cell(1.0)}},
                     {"x", Dtype::Numeric, {Cell(2.0)}}},
                     std::vector<std::string>{"a"}),
                 SchemaError);
    EXPECT_THROW(Table(std::vector<Column>{
                     {"", Dtype::Numeric, {Cell(1.0)}}},
                     std::vector<std::string>{"a"}),
                 SchemaError);
    EXPECT_THROW(Table(std::vector<Column>{
                     {"x", Dtype::Numeric, {Cell(1.0), Cell(2.0)}}},
                     std::vector<std::string>{"a", "a"}),
                 SchemaError);
    EXPECT_THROW(Table(std::vector<Column>{
                     {"x", Dtype::Numeric, {Cell(1.0)}}},
                     std::vector<std::string>{"a", "b"}),
                 SchemaError);
}

TEST(Table, ConstructionRejectsDtypeMismatches) {
    EXPECT_THROW(Table(std::vector<Column>{
                     {"x", Dtype::Numeric, {Cell("oops")}}},
                     std::vector<std::string>{"a"}),
                 SchemaError);
    EXPECT_THROW(Table(std::vector<Column>{
                     {"b", Dtype::Boolean, {Cell(0.0)}}},
                     std::vector<std::string>{"a"}),
                 SchemaError);
}

TEST(Table, SharingConstructorReusesRowIdStorage) {
    Table t = small_table();
    std::vector<Column> swapped;
    swapped.push_back(t.column("member"));
    swapped.push_back(t.column("age"));
    Table u(std::move(swapped), t);
    EXPECT_EQ(u.row_count(), 3u);
    EXPECT_EQ(&u.row_ids(), &t.row_ids());
    EXPECT_EQ(u.row_index("c"), 2u);
    EXPECT_EQ(u.column_names(), (std::vector<std::string>{"member", "age"}));
}

TEST(Table, SharingConstructorStillChecksColumns) {
    Table t = small_table();
    std::vector<Column> bad;
    bad.push_back(t.column("age"));
    bad.push_back(t.column("age"));
    EXPECT_THROW(Table(std::move(bad), t), SchemaError);
}

TEST(Table, TakeColumnsLeavesARowShapeWitness) {
    Table t = small_table();
    std::vector<Column> cols = std::move(t).take_columns();
    EXPECT_EQ(cols.size(), 3u);
    EXPECT_EQ(t.column_count(), 0u);
    EXPECT_EQ(t.row_count(), 3u);
    cols[0].name = "years";
    Table u(std::move(cols), t);
    EXPECT_EQ(u.row_count(), 3u);
    EXPECT_EQ(u.column_names(),
              (std::vector<std::string>{"years", "city", "member"}));
}

TEST(Table, MovedFromTablesReadAsEmpty) {
    Table t = small_table();
    Table u = std::move(t);
    EXPECT_EQ(t.row_count(), 0u);
    EXPECT_EQ(t.column_count(), 0u);
    EXPECT_FALSE(t.has_column("age"));
    EXPECT_FALSE(t.has_row_id("a"));
    EXPECT_EQ(u.row_count(), 3u);

    Table v;
    v = std::move(u);
    EXPECT_EQ(u.row_count(), 0u);
    EXPECT_EQ(v.row_count(), 3u);
    EXPECT_EQ(v.cell(1, "city"), Cell("nice"));
}

TEST(Table, CopyIsIndependentOfTheOriginal) {
    Table t = small_table();
    Table u = t;
    Table scrap = std::move(t);
    EXPECT_EQ(u.row_count(), 3u);
    EXPECT_EQ(u.cell(0, "age"), Cell(34.0));
    EXPECT_EQ(scrap.row_count(), 3u);
}

TEST(ReadTable, InfersDtypesFromValues) {
    Table t = read_table(
        "n,flag,word\n"
        "1.5,true,abc\n"
        "2,false,1x\n");
    EXPECT_EQ(t.column("n").dtype, Dtype::Numeric);
    EXPECT_EQ(t.column("flag").dtype, Dtype::Boolean);
    EXPECT_EQ(t.column("word").dtype, Dtype::Categorical);
    EXPECT_EQ(t.cell(0, "n"), Cell(1.5));
    EXPECT_EQ(t.cell(1, "flag"), Cell(false));
    EXPECT_EQ(t.cell(1, "word"), Cell("1x"));
    EXPECT_EQ(t.row_ids(), (std::vector<std::string>{"0", "1"}));
}

TEST(ReadTable, MixedColumnFallsBackToCategorical) {
    Table t = read_table("x\n1\napple\n");
    EXPECT_EQ(t.column("x").dtype, Dtype::Categorical);
    EXPECT_EQ(t.cell(0, "x"), Cell("1"));
}

TEST(ReadTable, EmptyFieldsBecomeMissing) {
    Table t = read_table("x,y\n1,\n,b\n");
    EXPECT_TRUE(t.cell(1, "x").is_missing());
    EXPECT_TRUE(t.cell(0, "y").is_missing());
    EXPECT_EQ(t.column("x").dtype, Dtype::Numeric);
    EXPECT_EQ(t.column("y").dtype, Dtype::Categorical);
}

TEST(ReadTable, IdColumnBecomesRowIds) {
    Table t = read_table("id,x\nr1,1\nr2,2\n", std::string("id"));
    EXPECT_EQ(t.row_ids(), (std::vector<std::string>{"r1", "r2"}));
    EXPECT_FALSE(t.has_column("id"));
    EXPECT_THROW(read_table("x\n1\n", std::string("id")), SchemaError);
}

TEST(ReadTable, QuotedFieldsAndCrlf) {
    Table t = read_table("a,b\r\n\"1,5\",\"say \"\"hi\"\"\"\r\n");
    EXPECT_EQ(t.cell(0, "a"), Cell("1,5"));
    EXPECT_EQ(t.cell(0, "b"), Cell("say \"hi\""));
}

TEST(ReadTable, RaggedRowsAreAParseError) {
    EXPECT_THROW(read_table("a,b\n1\n"), ParseError);
    EXPECT_THROW(read_table("a,b\n1,2,3\n"), ParseError);
}

TEST(ReadTable, DuplicateIdsAreRejected) {
    EXPECT_THROW(read_table("id,x\nr,1\nr,2\n", std::string("id")),
                 SchemaError);
}

TEST(WriteTable, RoundTripsThroughRead) {
    Table t = small_table();
    std::string csv = write_table(t, true);
    Table back = read_table(csv, std::string("id"));
    EXPECT_EQ(back.row_ids(), t.row_ids());
    EXPECT_EQ(back.column_names(), t.column_names());
    for (std::size_t c = 0; c < t.column_count(); ++c) {
        EXPECT_EQ(back.column_at(c).dtype, t.column_at(c).dtype);
        for (std::size_t r = 0; r < t.row_count(); ++r)
            EXPECT_EQ(back.column_at(c).cells[r], t.column_at(c).cells[r]);
    }
}

TEST(WriteTable, QuotesOnlyWhenNeeded) {
    Table t(std::vector<Column>{
        {"note", Dtype::Categorical,
         {Cell("plain"), Cell("a,b"), Cell("line\nbreak")}}});
    std::string csv = write_table(t);
    EXPECT_EQ(csv, "note\nplain\n\"a,b\"\n\"line\nbreak\"\n");
}

TEST(SelectRows, PicksByIdInRequestOrder) {
    Table t = small_table();
    Table picked = select_rows(t, {"c", "a"});
    EXPECT_EQ(picked.row_ids(), (std::vector<std::string>{"c", "a"}));
    EXPECT_EQ(picked.cell(0, "city"), Cell("lyon"));
    EXPECT_EQ(picked.cell(1, "age"), Cell(34.0));
    EXPECT_THROW(select_rows(t, {"nope"}), LookupError);
}

TEST(SelectRowIndices, PicksByPosition) {
    Table t = small_table();
    Table picked = select_row_indices(t, {1});
    EXPECT_EQ(picked.row_count(), 1u);
    EXPECT_EQ(picked.row_ids().front(), "b");
    EXPECT_EQ(picked.cell(0, "member"), Cell(false));
    EXPECT_THROW(select_row_indices(t, {9}), std::out_of_range);
}

TEST(WithColumnCells, ReplacesOneColumnKeepsRows) {
    Table t = small_table();
    Table u = with_column_cells(t, 0,
                                {Cell(1.0), Cell(2.0), Cell(3.0)});
    EXPECT_EQ(u.cell(2, "age"), Cell(3.0));
    EXPECT_EQ(u.cell(2, "city"), Cell("lyon"));
    EXPECT_EQ(&u.row_ids(), &t.row_ids());
    EXPECT_EQ(t.cell(0, "age"), Cell(34.0));
}
