#include <doctest.h>

#include <algorithm>

#include "../generators.hpp"
#include "../oracles.hpp"
#include "../support.hpp"
#include "tabprov/errors.hpp"
#include "tabprov/retrieval.hpp"

using namespace tabprov;

namespace {

const Tokenizer kTok = Tokenizer::heuristic();
const LocalEmbedder kEmb;

Corpus fixture_corpus() { return Corpus::load(support::data_path("fixtures/corpus.jsonl")); }

// Ranking by exhaustive scoring, ties by id.
std::vector<std::string> brute_force_ids(const std::string& query, const Corpus& corpus, std::size_t k) {
  const auto q = kEmb.embed(query).values;
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& d : corpus.docs()) {
    std::size_t cut = std::min<std::size_t>(256, d.body.size());
    while (cut > 0 && cut < d.body.size() && (static_cast<unsigned char>(d.body[cut]) & 0xC0) == 0x80) --cut;
    scored.emplace_back(oracle::cosine(kEmb.embed(d.title + " " + d.body.substr(0, cut)).values, q), d.id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) ids.push_back(scored[i].second);
  return ids;
}

std::vector<std::string> ids_of(const std::vector<ScoredDoc>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.doc.id);
  return out;
}

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("corpus loading") {
    const auto c = fixture_corpus();
    CHECK(c.size() == 10);
    CHECK(Corpus::from_jsonl("\n\n").empty());
    CHECK_THROWS_AS(Corpus::from_jsonl(R"({"id":"a","title":"","body":"","source":""}
{"id":"a","title":"","body":"","source":""})"),
                    IngestionError);
    CHECK_THROWS_AS(Corpus::from_jsonl("{broken"), IngestionError);
    CHECK_THROWS_AS(Corpus::load("no/such/corpus.jsonl"), IngestionError);
  }

  TEST_CASE("doc query from title and headers") {
    const auto t = parse_table_json(
        R"({"title":"2023 Fortune 500 Companies","headers":["Revenue","Employees"],"rows":[]})");
    CHECK(build_doc_query(t) == "2023 Fortune 500 Companies Revenue Employees");
    CHECK(build_doc_query(t) == build_doc_query(t));
    CHECK(build_doc_query(parse_table_json(R"({"title":"","headers":["a","b"],"rows":[]})")) == "a b");
  }

  TEST_CASE("ranking text keeps UTF-8 intact") {
    KnowledgeDoc d{"x", "T", std::string(255, 'a') + "é tail", "s"};
    const auto text = doc_ranking_text(d);
    CHECK(text == "T " + std::string(255, 'a'));
    d.body = "short";
    CHECK(doc_ranking_text(d) == "T short");
  }

  TEST_CASE("retrieve_docs") {
    const auto c = fixture_corpus();
    const auto t = parse_table_json(
        R"({"title":"2023 Fortune 500 Companies","headers":["Revenue","Employees"],"rows":[]})");
    const auto q = build_doc_query(t);
    const auto top = retrieve_docs(q, c, 10, kEmb);
    REQUIRE(top.size() == 10);
    CHECK(top[0].doc.id == "doc-fortune");
    CHECK(ids_of(top) == brute_force_ids(q, c, 10));
    CHECK(retrieve_docs(q, c, 3, kEmb).size() == 3);
    CHECK(retrieve_docs(q, Corpus{}, 3, kEmb).empty());
    CHECK_THROWS_AS(retrieve_docs(q, c, 0, kEmb), ConfigError);
    const Corpus one({{"only", "Solo", "Body.", "src"}});
    CHECK(ids_of(retrieve_docs("anything", one, 5, kEmb)) == std::vector<std::string>{"only"});
  }

  TEST_CASE("property: retrieval equals brute-force ranking") {
    gen::Rng r(111);
    for (int i = 0; i < 30; ++i) {
      std::vector<KnowledgeDoc> docs;
      const auto n = r.between(1, 200);
      for (std::size_t k = 0; k < n; ++k) {
        std::string body;
        for (std::size_t w = 0; w < r.between(0, 80); ++w) body += gen::plain_cell(r) + " ";
        docs.push_back({"d" + std::to_string(k), r.chance(30) ? "" : gen::plain_cell(r), body, "gen"});
      }
      const Corpus c(docs);
      const auto q = gen::plain_cell(r) + " " + gen::plain_cell(r);
      const auto k = r.between(1, 20);
      CHECK(ids_of(retrieve_docs(q, c, k, kEmb)) == brute_force_ids(q, c, k));
    }
  }

  TEST_CASE("first sentence") {
    CHECK(first_sentence("GDP is big. It grows.") == "GDP is big.");
    CHECK(first_sentence("Version 3.5 is out! Yes") == "Version 3.5 is out!");
    CHECK(first_sentence("no terminator") == "no terminator");
    CHECK(first_sentence("  Why? Because.") == "Why?");
    CHECK(first_sentence("") == "");
  }

  TEST_CASE("doc reference items") {
    const auto t = parse_table_json(
        R"({"title":"2023 Fortune 500 Companies","headers":["Revenue","Employees"],"rows":[]})");
    const auto items = doc_reference_items(t, fixture_corpus(), 2, kEmb, kTok);
    REQUIRE(items.size() == 2);
    CHECK(items[0].text ==
          "reference: 2023 Fortune 500 Companies (encyclopedia): The Fortune 500 is an annual list of the largest "
          "United States corporations ranked by total revenue.");
    CHECK(items[0].priority == 1);
    CHECK(items[1].priority == 2);
    CHECK(items[0].kind == KnowledgeKind::doc_reference);
    CHECK(items[0].token_cost == kTok.count(items[0].text));
  }

  TEST_CASE("heuristic cell selection examples") {
    const auto pts = parse_table_json(
        R"({"title":"","headers":["Player","Points"],"rows":[["Ann","30"],["Bo","45"],["Cy","12"]]})");
    const auto cmp = select_cells_heuristic(pts, Query("Who scored more than 30 points?"));
    CHECK(cmp.cells == std::vector<SelectedCell>{{0, 1, SelectionReason::explicit_mention},
                                                 {1, 1, SelectionReason::comparative}});
    const auto rev = parse_table_json(R"({"title":"","headers":["Revenue"],"rows":[["1"],["9"],["3"]]})");
    CHECK(select_cells_heuristic(rev, Query("highest revenue")).cells ==
          std::vector<SelectedCell>{{1, 0, SelectionReason::superlative}});
    CHECK(select_cells_heuristic(rev, Query("lowest revenue")).cells ==
          std::vector<SelectedCell>{{0, 0, SelectionReason::superlative}});
    const auto oly = support::fixture_table("olympics.json");
    const auto sel = select_cells_heuristic(oly, Query("Which city hosted after London?"));
    CHECK(sel.cells == std::vector<SelectedCell>{{3, 1, SelectionReason::explicit_mention}});
    const auto than = select_cells_heuristic(rev, Query("anything other than 3"));
    CHECK(than.cells == std::vector<SelectedCell>{{0, 0, SelectionReason::comparative},
                                                  {1, 0, SelectionReason::comparative},
                                                  {2, 0, SelectionReason::explicit_mention}});
  }

  TEST_CASE("property: heuristic selection matches brute force") {
    gen::Rng r(121);
    const std::vector<std::string> cues = {"more", "less", "than", "over", "under", "most", "least", "highest",
                                           "lowest", "best", "worst", "fewer", "greater", "maximum", "minimum"};
    for (int i = 0; i < 300; ++i) {
      const auto t = gen::table(r, {.max_rows = 20, .max_cols = 10, .nasty_percent = 5});
      std::string q = gen::query(r, t);
      for (std::size_t k = 0; k < r.between(0, 3); ++k) q += " " + r.pick(cues) + " " + std::to_string(r.below(2000));
      const auto got = select_cells_heuristic(t, Query(q));
      const auto want = oracle::heuristic_cells(t, q);
      REQUIRE(got.cells.size() == want.size());
      for (std::size_t k = 0; k < want.size(); ++k) {
        CHECK(got.cells[k].row == want[k].row);
        CHECK(got.cells[k].col == want[k].col);
        CHECK(to_string(got.cells[k].reason) == want[k].reason);
      }
    }
  }

  TEST_CASE("LLM cell selection prompt and parsing") {
    const auto oly = support::fixture_table("olympics.json");
    const auto prompt = cell_selection_prompt(oly, kCellCriteria);
    CHECK(prompt.rfind("You will be given a parsed table {\"Year\":[\"2000\"", 0) == 0);
    CHECK(prompt.find("Cell Position, Cell Content, Cell Formatting, Cell Context, Cell Properties.") !=
          std::string::npos);
    CHECK(prompt.find("Only return the cells name in a python List[str].") != std::string::npos);
    CHECK(parse_cell_name_list(R"(["London", 'Tokyo'])") == std::vector<std::string>{"London", "Tokyo"});
    CHECK(parse_cell_name_list("  []  ") == std::vector<std::string>{});
    CHECK(parse_cell_name_list(R"(["a\"b"])") == std::vector<std::string>{"a\"b"});
    CHECK_FALSE(parse_cell_name_list("London").has_value());
    CHECK_FALSE(parse_cell_name_list(R"(["a",])").has_value());
    CHECK_FALSE(parse_cell_name_list(R"(["a" "b"])").has_value());
    const auto dup = parse_table_json(R"({"title":"","headers":["a","a"],"rows":[["1","2"]]})");
    CHECK(table_as_dictionary(dup) == R"j({"a":["1"],"a (2)":["2"]})j");
  }

  TEST_CASE("LLM cell selection") {
    const auto oly = support::fixture_table("olympics.json");
    const auto london = select_cells_llm(oly, kCellCriteria, ScriptedLlm::constant(R"(["London"])"));
    CHECK(london.cells == std::vector<SelectedCell>{{3, 1, SelectionReason::llm}});
    CHECK(london.warnings.empty());
    const auto junk = select_cells_llm(oly, kCellCriteria, ScriptedLlm::constant("I think London"));
    CHECK(junk.cells.empty());
    CHECK(junk.warnings.size() == 1);
    const auto absent = select_cells_llm(oly, kCellCriteria, ScriptedLlm::constant(R"(["Paris"])"));
    CHECK(absent.cells.empty());
    CHECK(absent.warnings.size() == 1);
    const auto script = ScriptedLlm::from_file(support::data_path("fixtures/llm_script.json"));
    CHECK(select_cells_llm(oly, kCellCriteria, script).cells.size() == 1);
    CHECK(script.prompts().size() == 1);
  }

  TEST_CASE("term explanations") {
    const auto c = fixture_corpus();
    const auto t = parse_table_json(R"({"title":"","headers":["Metric"],"rows":[["GDP"],["Quux"]]})");
    CellSelection sel;
    sel.cells = {{0, 0, SelectionReason::explicit_mention}, {1, 0, SelectionReason::explicit_mention}};
    const auto items = explain_terms(sel, t, c, kEmb, 3, kTok);
    REQUIRE(items.size() == 2);
    CHECK(items[0].text ==
          "GDP — Gross domestic product (GDP) is the monetary value of all final goods and services produced in a "
          "period. (encyclopedia)");
    CHECK(items[1].text == "Quux — no reference found");
    CHECK(items[0].kind == KnowledgeKind::term_explanation);
    CHECK(items[1].priority == 2);
    CHECK(explain_terms(CellSelection{}, t, c, kEmb, 3, kTok).empty());
  }

  TEST_CASE("self prompting") {
    const auto oly = support::fixture_table("olympics.json");
    const ScriptedLlm llm = ScriptedLlm::constant("rows 2–3 are critical");
    const auto item = self_prompt(oly, "London hosted in 2012", llm, kTok);
    CHECK(item.text == "rows 2–3 are critical");
    CHECK(item.kind == KnowledgeKind::self_prompt);
    const auto sent = llm.prompts();
    REQUIRE(sent.size() == 1);
    CHECK(sent[0].find("Identify critical values and ranges of the last table related to the statement") !=
          std::string::npos);
    CHECK(sent[0].find("London hosted in 2012") != std::string::npos);
    CHECK_THROWS_AS(self_prompt(oly, "  ", llm, kTok), ConfigError);
  }

  TEST_CASE("scripted LLM looks replies up by prompt digest") {
    const auto digest = sha256("hello").hex();
    const auto llm = ScriptedLlm::from_json(R"({")" + digest + R"(": "hi", "*": "default"})");
    CHECK(llm.complete("hello") == "hi");
    CHECK(llm.complete("other") == "default");
    const ScriptedLlm strict(std::map<std::string, std::string>{});
    CHECK_THROWS_AS(strict.complete("x"), ProviderError);
  }
}
