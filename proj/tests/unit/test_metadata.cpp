#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../generators.hpp"
#include "../oracles.hpp"
#include "../support.hpp"
#include "tabprov/errors.hpp"
#include "tabprov/metadata.hpp"

using namespace tabprov;

namespace {

const Tokenizer kTok = Tokenizer::heuristic();

Table column_table(const std::string& header, const std::vector<std::string>& cells) {
  std::vector<Row> grid;
  for (const auto& c : cells) grid.push_back({Cell(c)});
  return Table("", "", HeaderTree::flat({header}), grid);
}

std::vector<Cell> cells_of(std::initializer_list<const char*> texts) {
  std::vector<Cell> out;
  for (auto t : texts) out.emplace_back(t);
  return out;
}

bool close(const std::optional<double>& got, const std::optional<double>& want) {
  if (got.has_value() != want.has_value()) return false;
  if (!got) return true;
  return std::abs(*got - *want) <= 1e-9 * std::max(1.0, std::abs(*want));
}

// Every feature, paired with its oracle value.
std::vector<std::pair<const char*, std::pair<std::optional<double>, std::optional<double>>>> features(
    const StatisticsFeatureSet& s, const oracle::Stats& o) {
  return {{"changeRate", {s.change_rate, o.change_rate}},
          {"partialOrdered", {s.partial_ordered, o.partial_ordered}},
          {"orderedConfidence", {s.ordered_confidence, o.ordered_confidence}},
          {"aggrPercentFormatted", {s.aggr_percent_formatted, o.aggr_percent_formatted}},
          {"commonPrefix", {s.common_prefix, o.common_prefix}},
          {"commonSuffix", {s.common_suffix, o.common_suffix}},
          {"aggr01Ranged", {s.aggr_01_ranged, o.aggr_01_ranged}},
          {"aggr0100Ranged", {s.aggr_0100_ranged, o.aggr_0100_ranged}},
          {"aggrIntegers", {s.aggr_integers, o.aggr_integers}},
          {"aggrNegative", {s.aggr_negative, o.aggr_negative}},
          {"variance", {s.variance, o.variance}},
          {"range", {s.range, o.range}},
          {"cardinality", {s.cardinality, o.cardinality}},
          {"spread", {s.spread, o.spread}},
          {"major", {s.major, o.major}},
          {"benford", {s.benford, o.benford}},
          {"skewness", {s.skewness, o.skewness}},
          {"kurtosis", {s.kurtosis, o.kurtosis}},
          {"gini", {s.gini, o.gini}}};
}

}  // namespace

TEST_SUITE("metadata") {
  TEST_CASE("dimension or measure") {
    const auto price = column_table("Price", {"3.5", "2.0", "9.9"});
    CHECK(classify_dimension_measure(price, 0).role == FieldRole::measure);
    CHECK(classify_dimension_measure(price, 0).confidence == 1.0);
    const auto names = column_table("Product Name", {"Widget", "Gadget", "Doohickey"});
    CHECK(classify_dimension_measure(names, 0).role == FieldRole::dimension);
    CHECK(classify_dimension_measure(names, 0).confidence == 1.0);
    const auto years = column_table("Season", {"2001", "2002", "2003"});
    CHECK(is_identifier_like(years, 0));
    CHECK(classify_dimension_measure(years, 0).role == FieldRole::dimension);
    CHECK(infer_semantic_field_type(years, 0, Taxonomy::defaults()).label == "Year");
    CHECK(classify_dimension_measure(column_table("Team ID", {"1", "2", "3"}), 0).role == FieldRole::dimension);
    CHECK(classify_dimension_measure(column_table("Idea count", {"1", "2", "3"}), 0).role == FieldRole::measure);
    for (const auto* header : {"Rank", "Team ID", "Zip code", "Years", "fiscal_year"}) {
      CHECK_MESSAGE(is_identifier_like(column_table(header, {"5"}), 0), header);
    }
    for (const auto* header : {"Paid amount", "Width", "Valid votes", "Decoder hits", "Frank score"}) {
      CHECK_FALSE_MESSAGE(is_identifier_like(column_table(header, {"5"}), 0), header);
    }
    CHECK(classify_dimension_measure(column_table("x", {"", ""}), 0).role == FieldRole::dimension);
    const auto mixed = column_table("v", {"1", "2", "3", "4", "n/a"});
    CHECK(classify_dimension_measure(mixed, 0).role == FieldRole::measure);
    CHECK(classify_dimension_measure(mixed, 0).confidence == doctest::Approx(0.8));
    const auto mostly_text = column_table("v", {"1", "2", "3", "x", "y"});
    CHECK(classify_dimension_measure(mostly_text, 0).role == FieldRole::dimension);
    CHECK(classify_dimension_measure(mostly_text, 0).confidence == doctest::Approx(0.4));
  }

  TEST_CASE("property: all-numeric non-identifier columns are measures, text columns dimensions") {
    gen::Rng r(91);
    for (int i = 0; i < 300; ++i) {
      std::vector<std::string> nums, words;
      const auto n = r.between(1, 30);
      for (std::size_t k = 0; k < n; ++k) {
        nums.push_back(std::to_string(r.below(900)) + (r.chance(50) ? ".5" : ""));
        words.push_back(gen::words()[r.below(gen::words().size())] + "x");
      }
      CHECK(classify_dimension_measure(column_table("amount", nums), 0).role == FieldRole::measure);
      CHECK(classify_dimension_measure(column_table("amount", words), 0).role == FieldRole::dimension);
    }
  }

  TEST_CASE("semantic field types") {
    const auto tax = Taxonomy::defaults();
    CHECK(infer_semantic_field_type(column_table("Price", {"$3.50", "$4.00"}), 0, tax).label == "Money");
    CHECK(infer_semantic_field_type(column_table("Share", {"12%", "40%"}), 0, tax).label == "Ratio/Percent");
    CHECK(infer_semantic_field_type(column_table("Host City", {"Paris", "Rome"}), 0, tax).label == "Location");
    CHECK(infer_semantic_field_type(column_table("Code", {"AB-12", "CD-34"}), 0, tax).label == "Identifier");
    CHECK(infer_semantic_field_type(column_table("Goals", {"3", "0", "12"}), 0, tax).label == "Count");
    CHECK(infer_semantic_field_type(column_table("Person", {"Alice Smith", "Bob Lee"}), 0, tax).label ==
          "PersonName");
    // No rule matches and two distinct values out of two: cardinality 1.0, so FreeText.
    const auto names = infer_semantic_field_type(column_table("Remarks", {"Alice Smith", "Bob Lee"}), 0, tax);
    CHECK(names.label == "FreeText");
    // One distinct value out of three: cardinality 1/3 < 0.5, so Category.
    const auto cat = infer_semantic_field_type(column_table("Kind", {"red", "red", "red"}), 0, tax);
    CHECK(cat.label == "Category");
    CHECK(cat.evidence == std::vector<std::string>{"fallback-low-cardinality"});
    const auto money = infer_semantic_field_type(column_table("Price", {"$3.50", "$4.00"}), 0, tax);
    CHECK(money.evidence == std::vector<std::string>{"money-symbol"});
  }

  TEST_CASE("taxonomy from a file and label membership") {
    const auto tax = Taxonomy::from_file(support::data_path("fixtures/taxonomy.json"));
    CHECK(tax.contains("Money"));
    CHECK_FALSE(tax.contains("Location"));
    CHECK(infer_semantic_field_type(column_table("c", {"$3", "$4"}), 0, tax).label == "Money");
    CHECK(infer_semantic_field_type(column_table("c", {"1999", "2004"}), 0, tax).label == "Year");
    gen::Rng r(92);
    for (int i = 0; i < 200; ++i) {
      std::vector<std::string> cells;
      for (std::size_t k = 0; k < r.between(1, 8); ++k) cells.push_back(gen::cell(r, 20));
      CHECK(tax.contains(infer_semantic_field_type(column_table("h", cells), 0, tax).label));
    }
    CHECK_THROWS_AS(Taxonomy(std::vector<TaxonomyEntry>{}), ConfigError);
    CHECK_THROWS_AS(Taxonomy::from_json(R"([{"label":"X","rules":[{"cell_regex":"("}]}])"), ConfigError);
  }

  TEST_CASE("statistics examples") {
    CHECK(*compute_statistics(cells_of({"1", "1", "2", "2"})).change_rate == doctest::Approx(1.0 / 3));
    const auto s112 = compute_statistics(cells_of({"1", "1", "2"}));
    CHECK(*s112.cardinality == doctest::Approx(2.0 / 3));
    CHECK(*s112.major == doctest::Approx(2.0 / 3));
    CHECK(*compute_statistics(cells_of({"2", "4", "4", "4", "5", "5", "7", "9"})).variance == 2.0);
    const auto flat = compute_statistics(cells_of({"5", "5", "5"}));
    CHECK(*flat.range == 0.0);
    CHECK_FALSE(flat.spread.has_value());
    CHECK_FALSE(flat.skewness.has_value());
    CHECK_FALSE(flat.kurtosis.has_value());
    const auto tenths = compute_statistics(cells_of({"0.1", "0.1", "0.1"}));
    CHECK(*tenths.variance == 0.0);
    CHECK_FALSE(tenths.skewness.has_value());
    const auto single = compute_statistics(cells_of({"7"}));
    CHECK_FALSE(single.variance.has_value());
    CHECK(*single.cardinality == 1.0);
    CHECK_FALSE(single.change_rate.has_value());
    const auto neg = compute_statistics(cells_of({"-1", "-5", "-2"}));
    CHECK_FALSE(neg.gini.has_value());
    CHECK(*neg.aggr_negative == 1.0);
    CHECK(*compute_statistics(cells_of({"1", "2", "3"})).ordered_confidence == 1.0);
    CHECK(*compute_statistics(cells_of({"1", "3", "2", "4"})).partial_ordered == doctest::Approx(2.0 / 3));
    CHECK(*compute_statistics(cells_of({"0", "0", "0", "10"})).gini == doctest::Approx(0.75));
  }

  TEST_CASE("benford distance") {
    std::array<double, 9> exact{};
    for (int d = 1; d <= 9; ++d) exact[d - 1] = std::log10(1.0 + 1.0 / d);
    CHECK(benford_distance(exact) < 1e-15);
    // 1000 values whose digit counts are the Benford shares rounded:
    // 301,176,125,97,79,67,58,51,46.
    const std::array<int, 9> counts{301, 176, 125, 97, 79, 67, 58, 51, 46};
    std::vector<Cell> col;
    for (int d = 1; d <= 9; ++d)
      for (int k = 0; k < counts[d - 1]; ++k) col.emplace_back(std::to_string(d * 100 + k % 100));
    REQUIRE(col.size() == 1000);
    CHECK(*compute_statistics(col).benford < 9 * 0.0005);
    CHECK(leading_digit(0.5) == 0);
    CHECK(leading_digit(-345.0) == 3);
    CHECK(leading_digit(1.0) == 1);
    CHECK(leading_digit(9.999e20) == 9);
  }

  TEST_CASE("property: statistics agree with direct formulas") {
    gen::Rng r(101);
    for (int i = 0; i < 200; ++i) {
      const auto col = gen::numeric_column(r, 1000);
      const auto got = compute_statistics(col);
      const auto want = oracle::statistics(col);
      for (const auto& [name, pair] : features(got, want)) {
        INFO(name);
        CHECK(close(pair.first, pair.second));
      }
    }
  }

  TEST_CASE("property: ranges and permutation sensitivity") {
    gen::Rng r(102);
    for (int i = 0; i < 200; ++i) {
      auto col = gen::numeric_column(r, 200);
      const auto s = compute_statistics(col);
      for (auto v : {s.change_rate, s.partial_ordered, s.ordered_confidence, s.aggr_percent_formatted,
                     s.common_prefix, s.common_suffix, s.aggr_01_ranged, s.aggr_0100_ranged, s.aggr_integers,
                     s.aggr_negative, s.major}) {
        if (v) CHECK((*v >= 0.0 && *v <= 1.0));
      }
      if (s.variance) CHECK(*s.variance >= 0.0);
      if (s.cardinality) CHECK((*s.cardinality > 0.0 && *s.cardinality <= 1.0));
      if (s.benford) CHECK((*s.benford >= 0.0 && *s.benford <= 2.0));
      std::reverse(col.begin(), col.end());
      std::rotate(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(col.size() / 2), col.end());
      const auto p = compute_statistics(col);
      CHECK(close(p.variance, s.variance));
      CHECK(close(p.range, s.range));
      CHECK(close(p.cardinality, s.cardinality));
      CHECK(close(p.spread, s.spread));
      CHECK(close(p.major, s.major));
      CHECK(close(p.benford, s.benford));
      CHECK(close(p.gini, s.gini));
      CHECK(close(p.aggr_integers, s.aggr_integers));
      CHECK(close(p.common_prefix, s.common_prefix));
      CHECK(close(p.skewness, s.skewness));
      CHECK(close(p.kurtosis, s.kurtosis));
    }
  }

  TEST_CASE("combined statistics rendering") {
    const auto t = parse_table_json(
        R"({"title":"","headers":["Score","Name"],"rows":[["1","a"],["2","b"],["4","a"]]})");
    const auto num = render_combined_statistics(t, 0);
    for (auto name : {"variance=", "range=", "cardinality=", "major=", "changeRate="}) {
      CHECK(num.find(name) != std::string::npos);
    }
    CHECK(num.rfind("Score: ", 0) == 0);
    const auto text = render_combined_statistics(t, 1);
    CHECK(text == "Name: cardinality=0.666667, major=0.666667, changeRate=1");
    const auto item = combined_statistics(t, 0, kTok, 4);
    CHECK(item.kind == KnowledgeKind::statistics);
    CHECK(item.token_cost == kTok.count(item.text));
    CHECK(item.priority == 4);
  }

  TEST_CASE("header hierarchy") {
    CHECK(render_header_hierarchy(parse_table_json(R"({"title":"","headers":["a","b","c"],"rows":[]})")) ==
          "flat header, 3 columns: a, b, c");
    const auto t = support::fixture_table("hierarchical.json");
    const auto text = render_header_hierarchy(t);
    CHECK(text.rfind("hierarchical header, 3 levels, 7 columns:", 0) == 0);
    CHECK(text.find("\n  Medals\n    Gold\n    Silver\n    Bronze") != std::string::npos);
    // Leaves of the outline appear in column order.
    std::size_t at = 0;
    for (const auto& label : t.column_labels()) {
      const auto found = text.find("  " + label, at);
      REQUIRE(found != std::string::npos);
      at = found;
    }
    const auto item = extract_header_hierarchy(t, kTok);
    CHECK(item.kind == KnowledgeKind::header_hierarchy);
    CHECK(item.token_cost == kTok.count(item.text));
  }

  TEST_CASE("metadata bundle") {
    const auto t = parse_table_json(R"({"title":"","headers":["a","b"],"rows":[["1","x"]]})");
    const auto tax = Taxonomy::defaults();
    const std::vector<KnowledgeKind> size{KnowledgeKind::table_size};
    const auto one = render_metadata_bundle(t, size, kTok, tax);
    REQUIRE(one.items.size() == 1);
    CHECK(one.items[0].text == "table has 1 rows, 2 columns");
    CHECK(render_metadata_bundle(t, {}, kTok, tax).items.empty());
    const std::vector<KnowledgeKind> two{KnowledgeKind::dimension_measure, KnowledgeKind::statistics};
    const auto b = render_metadata_bundle(t, two, kTok, tax);
    REQUIRE(b.items.size() == 2);
    CHECK(b.items[0].priority == 1);
    CHECK(b.items[1].priority == 2);
    CHECK(b.items[0].text == "dimension/measure: a=measure, b=dimension");
    for (const auto& item : b.items) CHECK(item.token_cost == kTok.count(item.text));
    const std::vector<KnowledgeKind> bad{KnowledgeKind::doc_reference};
    CHECK_THROWS_AS(render_metadata_bundle(t, bad, kTok, tax), ConfigError);
    const std::vector<KnowledgeKind> sem{KnowledgeKind::semantic_type};
    CHECK(render_metadata_bundle(t, sem, kTok, tax).items[0].text.rfind("semantic field types: a=", 0) == 0);
  }
}
