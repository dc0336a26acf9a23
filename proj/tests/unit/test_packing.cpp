#include <doctest.h>

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "../generators.hpp"
#include "../oracles.hpp"
#include "../support.hpp"
#include "tabprov/errors.hpp"
#include "tabprov/packing.hpp"

using namespace tabprov;

namespace {

const Tokenizer kTok = Tokenizer::heuristic();

const char* extension(SerializationFormat f) {
  switch (f) {
    case SerializationFormat::html: return "html";
    case SerializationFormat::xml: return "xml";
    case SerializationFormat::json: return "json";
    case SerializationFormat::csv: return "csv";
    case SerializationFormat::markdown: return "md";
    case SerializationFormat::nlsep: return "txt";
  }
  return "";
}

SubTable whole(const Table& t) {
  SubTable s;
  s.table = t;
  for (std::size_t r = 0; r < t.row_count(); ++r) s.source_rows.push_back(r);
  for (std::size_t c = 0; c < t.column_count(); ++c) s.source_cols.push_back(c);
  return s;
}

KnowledgeItem item(KnowledgeKind kind, std::string text, std::size_t priority) {
  return make_item(kind, std::move(text), priority, kTok);
}

}  // namespace

TEST_SUITE("packing") {
  TEST_CASE("allocation") {
    CHECK(allocate_tokens(1000, {5, 5}) == Allocation{500, 500});
    CHECK(allocate_tokens(2000, {4, 6}) == Allocation{800, 1200});
    CHECK(allocate_tokens(1001, {5, 5}) == Allocation{500, 501});
    CHECK(allocate_tokens(7, {0, 3}) == Allocation{0, 7});
    CHECK(allocate_tokens(7, {3, 0}) == Allocation{7, 0});
    CHECK_THROWS_AS(allocate_tokens(0, {1, 1}), ConfigError);
    CHECK_THROWS_AS(AllocationRatio(0, 0), ConfigError);
    CHECK(AllocationRatio::parse("4:6") == AllocationRatio{4, 6});
    CHECK_THROWS_AS(AllocationRatio::parse("4-6"), ConfigError);
    CHECK_THROWS_AS(AllocationRatio::parse("a:6"), ConfigError);
    CHECK(AllocationRatio(3, 7).str() == "3:7");
  }

  TEST_CASE("property: allocation is an exact floor split") {
    gen::Rng r(131);
    for (int i = 0; i < 20000; ++i) {
      const std::size_t budget = r.between(1, 100000);
      const AllocationRatio ratio(r.below(50), r.between(1, 50));
      const auto a = allocate_tokens(budget, ratio);
      CHECK(a.table_budget + a.aug_budget == budget);
      const auto exact = static_cast<unsigned long long>(budget) * ratio.table_share /
                         (ratio.table_share + ratio.aug_share);
      CHECK(a.table_budget == exact);
    }
  }

  TEST_CASE("canonical forms of a small table") {
    const auto t = parse_table_json(R"({"title":"","headers":["a","b"],"rows":[["1","2"]]})");
    CHECK(serialize(t, SerializationFormat::nlsep) == "a | b\n1 | 2");
    CHECK(serialize(t, SerializationFormat::csv) == "a,b\n1,2\n");
    CHECK(serialize(t, SerializationFormat::markdown) == "| a | b |\n| --- | --- |\n| 1 | 2 |");
    CHECK(serialize(t, SerializationFormat::json) == R"({"title":"","headers":["a","b"],"rows":[["1","2"]]})");
    CHECK(serialize(t, SerializationFormat::html) ==
          "<table><tr><th>a</th><th>b</th></tr><tr><td>1</td><td>2</td></tr></table>");
    CHECK(serialize(t, SerializationFormat::xml) ==
          "<table><header><cell>a</cell><cell>b</cell></header><row><cell>1</cell><cell>2</cell></row></table>");
    CHECK(parse_format("NL+Sep") == SerializationFormat::nlsep);
    CHECK(parse_format("md") == SerializationFormat::markdown);
    CHECK_THROWS_AS(parse_format("yaml"), ConfigError);
  }

  TEST_CASE("golden files for every format") {
    for (const auto* name : {"escapes", "hierarchical"}) {
      const auto t = support::fixture_table(std::string(name) + ".json");
      for (auto f : kAllFormats) {
        const auto path = support::data_path(std::string("golden/") + name + "." + extension(f));
        INFO(path);
        CHECK(serialize(t, f) == support::read_file(path));
      }
    }
  }

  TEST_CASE("property: JSON and CSV round trips") {
    gen::Rng r(141);
    for (int i = 0; i < 200; ++i) {
      const auto t = gen::table(r, {.nasty_percent = 40, .hierarchical = true});
      CHECK(parse_table_json(serialize_json(t)) == t);
      const auto flat = gen::table(r, {.nasty_percent = 40, .titled = false});
      const auto back = parse_csv(serialize_csv(flat));
      CHECK(back.table == flat);
      CHECK(back.warnings.empty());
    }
  }

  TEST_CASE("format cost ordering on the shipped fixtures") {
    for (const auto* name : {"olympics.json", "hierarchical.json", "long_table.json", "escapes.json"}) {
      const auto t = support::fixture_table(name);
      const auto html = serialized_tokens(t, SerializationFormat::html, kTok);
      const auto md = serialized_tokens(t, SerializationFormat::markdown, kTok);
      const auto csv = serialized_tokens(t, SerializationFormat::csv, kTok);
      CHECK(html >= md);
      CHECK(md >= csv);
    }
  }

  TEST_CASE("row counts recovered from serialized text") {
    gen::Rng r(151);
    for (int i = 0; i < 200; ++i) {
      const auto t = gen::table(r, {.nasty_percent = 40, .hierarchical = true});
      for (auto f : kAllFormats) CHECK(count_serialized_rows(serialize(t, f), f) == t.row_count());
    }
  }

  TEST_CASE("truncation") {
    const auto t = support::fixture_table("olympics.json");
    auto sub = whole(t);
    const auto full = serialized_tokens(t, SerializationFormat::nlsep, kTok);
    CHECK(truncate_rows_to_budget(sub, TokenBudget(full), kTok, SerializationFormat::nlsep).sub.table == t);

    const auto header = serialized_tokens(t.select(std::vector<std::size_t>{}, std::vector<std::size_t>{0, 1, 2}),
                                          SerializationFormat::nlsep, kTok);
    const auto empty = truncate_rows_to_budget(sub, TokenBudget(header), kTok, SerializationFormat::nlsep);
    CHECK(empty.sub.table.row_count() == 0);
    CHECK(empty.dropped_rows == std::vector<std::size_t>{5, 4, 3, 2, 1, 0});
    CHECK_THROWS_AS(truncate_rows_to_budget(sub, TokenBudget(header - 1), kTok, SerializationFormat::nlsep),
                    BudgetError);

    // Three scored rows, budget one row short: the lowest score goes.
    const auto three = t.select(std::vector<std::size_t>{0, 1, 2}, std::vector<std::size_t>{0, 1, 2});
    auto scored = whole(three);
    scored.scores = std::vector<double>{0.9, 0.1, 0.5};
    scored.rank_order = {0, 2, 1};
    const auto cost3 = serialized_tokens(three, SerializationFormat::nlsep, kTok);
    const auto cost_row1 = kTok.count(nlsep_row_line(three.row(1)));
    const auto cut = truncate_rows_to_budget(scored, TokenBudget(cost3 - 1), kTok, SerializationFormat::nlsep);
    CHECK(cut.sub.source_rows == std::vector<std::size_t>{0, 2});
    CHECK(cut.dropped_rows == std::vector<std::size_t>{1});
    CHECK(serialized_tokens(cut.sub.table, SerializationFormat::nlsep, kTok) == cost3 - cost_row1);
    CHECK(*cut.sub.scores == std::vector<double>{0.9, 0.5});
  }

  TEST_CASE("pack examples") {
    const auto t = support::fixture_table("olympics.json");
    const auto bare = pack(whole(t), {}, SerializationFormat::nlsep, TokenBudget(10000), {5, 5}, kTok);
    CHECK(bare.text == serialize_nlsep(t));
    CHECK(bare.manifest.aug_tokens_used == 0);

    // Two item lines of 61 and 60 tokens against a 100-token augmentation share.
    // "[table-size] " costs 6 and "[statistics] " costs 5.
    const std::string sixty = [] {
      std::string s;
      for (int i = 0; i < 55; ++i) s += "w ";
      return s;
    }();
    AugmentationBundle bundle;
    bundle.items = {item(KnowledgeKind::table_size, sixty, 1), item(KnowledgeKind::statistics, sixty, 2)};
    REQUIRE(kTok.count(item_line(bundle.items[0])) == 61);
    REQUIRE(kTok.count(item_line(bundle.items[1])) == 60);
    const auto packed = pack(whole(t), bundle, SerializationFormat::nlsep, TokenBudget(200), {1, 1}, kTok);
    CHECK(packed.manifest.aug_budget == 100);
    CHECK(packed.manifest.items_included == 1);
    CHECK(packed.manifest.dropped_items == std::vector<KnowledgeKind>{KnowledgeKind::statistics});
    CHECK(packed.text.rfind("[table-size] w w", 0) == 0);
    CHECK(packed.text.find("\n\nYear | Host City") != std::string::npos);

    const auto after = pack(whole(t), bundle, SerializationFormat::nlsep, TokenBudget(200), {1, 1}, kTok,
                            PromptLayout::table_first);
    CHECK(after.text.rfind("Year | Host City", 0) == 0);
  }

  TEST_CASE("pack borrows for a header larger than the table share") {
    const auto t = support::fixture_table("olympics.json");
    const auto header = serialized_tokens(t.select(std::vector<std::size_t>{}, std::vector<std::size_t>{0, 1, 2}),
                                          SerializationFormat::html, kTok);
    const auto p = pack(whole(t), {}, SerializationFormat::html, TokenBudget(header + 2), {1, 9}, kTok);
    CHECK(p.manifest.table_budget == header);
    CHECK(p.manifest.table_budget + p.manifest.aug_budget == header + 2);
    CHECK(p.manifest.warnings.size() == 1);
    CHECK_THROWS_AS(pack(whole(t), {}, SerializationFormat::html, TokenBudget(header - 1), {1, 1}, kTok),
                    BudgetError);
  }

  TEST_CASE("property: packed prompts respect the budget and recount exactly") {
    gen::Rng r(161);
    for (int i = 0; i < 400; ++i) {
      const auto t = gen::table(r, {.max_rows = 25, .nasty_percent = 30, .hierarchical = true});
      const auto f = kAllFormats[r.below(kAllFormats.size())];
      AugmentationBundle bundle;
      for (std::size_t k = 0; k < r.below(5); ++k) {
        std::string text;
        for (std::size_t w = 0; w < r.between(1, 30); ++w) text += gen::cell(r, 20) + " ";
        bundle.items.push_back(item(static_cast<KnowledgeKind>(r.below(8)), text, r.between(1, 5)));
      }
      const auto header = serialized_tokens(t.select(std::vector<std::size_t>{}, [&] {
        std::vector<std::size_t> c(t.column_count());
        for (std::size_t k = 0; k < c.size(); ++k) c[k] = k;
        return c;
      }()), f, kTok);
      const auto budget = header + r.below(400);
      const AllocationRatio ratio(r.between(1, 9), r.between(1, 9));
      auto sub = whole(t);
      if (r.chance(50)) {
        sub.rank_order = sub.source_rows;
        std::reverse(sub.rank_order.begin(), sub.rank_order.end());
      }
      const auto p = pack(sub, bundle, f, TokenBudget(budget), ratio, kTok,
                          r.chance(50) ? PromptLayout::augmentation_first : PromptLayout::table_first);
      CHECK(kTok.count(p.text) <= budget);
      CHECK(p.manifest.table_tokens_used == kTok.count(p.table_text));
      std::string joined;
      for (std::size_t k = 0; k < p.item_lines.size(); ++k) joined += (k ? "\n" : "") + p.item_lines[k];
      CHECK(p.manifest.aug_tokens_used == kTok.count(joined));
      CHECK(p.manifest.table_budget + p.manifest.aug_budget == budget);
      CHECK(p.manifest.table_tokens_used <= p.manifest.table_budget);
      CHECK(p.manifest.aug_tokens_used <= p.manifest.aug_budget);
      CHECK(count_serialized_rows(p.table_text, f) == p.manifest.rows_included);
      CHECK(p.manifest.rows_included + p.manifest.dropped_rows.size() == t.row_count());
      CHECK(p.manifest.items_included + p.manifest.dropped_items.size() == bundle.items.size());
      if (f == SerializationFormat::json) {
        // The table segment re-parses to whole rows of the original.
        const auto back = parse_table_json(p.table_text);
        for (std::size_t k = 0; k < back.row_count(); ++k) {
          CHECK(back.row(k) == t.row(p.manifest.included_rows[k]));
        }
      }
      if (f == SerializationFormat::csv) {
        const auto back = parse_csv(p.table_text).table;
        for (std::size_t k = 0; k < back.row_count(); ++k) {
          CHECK(back.row(k) == t.row(p.manifest.included_rows[k]));
        }
      }
    }
  }

  TEST_CASE("manifest JSON") {
    const auto t = support::fixture_table("olympics.json");
    const auto p = pack(whole(t), {}, SerializationFormat::markdown, TokenBudget(60), {5, 5}, kTok);
    const auto j = nlohmann::json::parse(manifest_json(p.manifest));
    CHECK(j["format"] == "markdown");
    CHECK(j["budget"] == 60);
    CHECK(j["ratio"] == "5:5");
    CHECK(j["rows_included"] == p.manifest.rows_included);
    CHECK(j["dropped_rows"].size() == p.manifest.dropped_rows.size());
  }
}
