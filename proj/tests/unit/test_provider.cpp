#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "../generators.hpp"
#include "../support.hpp"
#include "tabprov/errors.hpp"
#include "tabprov/provider.hpp"

using namespace tabprov;

namespace {

ProviderConfig base_config() {
  ProviderConfig c;
  c.corpus_path = support::data_path("fixtures/corpus.jsonl");
  c.llm.script_path = support::data_path("fixtures/llm_script.json");
  return c;
}

Table edited(const Table& t, std::size_t r, std::size_t c, std::string text) {
  auto rows = t.rows();
  rows[r][c] = Cell(std::move(text));
  return Table(t.id(), t.title(), t.headers(), rows);
}

}  // namespace

TEST_SUITE("provider") {
  TEST_CASE("config parsing") {
    const auto c = ProviderConfig::parse(R"(
      # pipeline
      sampling.kind = query-based
      sampling.grounding = true
      sampling.max_columns = 3
      augmentation.kinds = table-size, statistics
      packing.format = markdown
      packing.budget = 300   # tokens
      packing.ratio = 4:6
      packing.layout = table-first
    )");
    CHECK(c.sampling.kind == SamplingKind::query_based);
    CHECK(c.sampling.grounding);
    CHECK(c.sampling.max_columns == 3);
    CHECK(c.augmentation == std::vector<KnowledgeKind>{KnowledgeKind::table_size, KnowledgeKind::statistics});
    CHECK(c.format == SerializationFormat::markdown);
    CHECK(c.budget == 300);
    CHECK(c.ratio == AllocationRatio{4, 6});
    CHECK(c.layout == PromptLayout::table_first);
    CHECK_THROWS_AS(ProviderConfig::parse("nonsense.key = 1"), ConfigError);
    CHECK_THROWS_AS(ProviderConfig::parse("packing.budget = many"), ConfigError);
    CHECK_THROWS_AS(ProviderConfig::parse("just words"), ConfigError);
    try {
      ProviderConfig::parse("\n\nsampling.kind = nope");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).rfind("config line 3:", 0) == 0);
    }
  }

  TEST_CASE("config validation") {
    auto c = ProviderConfig::parse("sampling.kind = random");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ProviderConfig::parse("augmentation.kinds = doc-reference");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ProviderConfig::parse("embedder.kind = remote");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ProviderConfig::parse("llm.kind = remote\nllm.endpoint = http://127.0.0.1:1/x");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(TableProvider(ProviderConfig::parse("sampling.kind = random")), ConfigError);
  }

  TEST_CASE("config file paths resolve against the file") {
    const auto dir = std::filesystem::temp_directory_path() / "tabprov_cfg_test";
    std::filesystem::create_directories(dir);
    {
      std::ofstream(dir / "p.conf") << "corpus.path = corpus.jsonl\nllm.script_path = /abs/script.json\n";
    }
    const auto c = ProviderConfig::load((dir / "p.conf").string());
    CHECK(c.corpus_path == (dir / "corpus.jsonl").string());
    CHECK(c.llm.script_path == "/abs/script.json");
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("evenly sampling with a size item") {
    auto c = base_config();
    c.sampling.kind = SamplingKind::evenly;
    c.augmentation = {KnowledgeKind::table_size};
    c.format = SerializationFormat::nlsep;
    c.budget = 200;
    const TableProvider p(c);
    const auto t = support::fixture_table("olympics.json");
    const auto out = p.provide(Query("Which city hosted in 2008?"), t);
    CHECK(out.text.rfind("[table-size] table has 6 rows, 3 columns\n\nYear | Host City", 0) == 0);
    CHECK(out.manifest.sampling_method == "evenly");
    CHECK(out.manifest.augmentation_kinds == std::vector<KnowledgeKind>{KnowledgeKind::table_size});
    CHECK(p.provide(Query("Which city hosted in 2008?"), t) == out);
  }

  TEST_CASE("olympics pipeline with a synthetic row") {
    auto c = base_config();
    c.sampling.kind = SamplingKind::content_snapshot;
    c.sampling.k = 1;
    c.budget = 300;
    c.augmentation = {KnowledgeKind::term_explanation, KnowledgeKind::self_prompt};
    const TableProvider p(c);
    const auto out =
        p.provide(Query("How many more participants were there in 2008 than in the London Olympics?"),
                  support::fixture_table("olympics.json"));
    CHECK(out.table_text.find("2008") != std::string::npos);
    CHECK(out.table_text.find("London") != std::string::npos);
    CHECK(out.manifest.rows_included == 1);
    CHECK(out.text.find("[term-explanation] London — London is the capital") != std::string::npos);
  }

  TEST_CASE("all augmentation kinds together stay within budget") {
    auto c = base_config();
    c.sampling.kind = SamplingKind::query_based;
    c.augmentation = {KnowledgeKind::dimension_measure, KnowledgeKind::semantic_type, KnowledgeKind::table_size,
                      KnowledgeKind::statistics,        KnowledgeKind::header_hierarchy,
                      KnowledgeKind::doc_reference,     KnowledgeKind::term_explanation,
                      KnowledgeKind::self_prompt};
    c.cell_selection = CellSelectionMode::llm;
    for (std::size_t budget : {60, 150, 400, 2000}) {
      c.budget = budget;
      const TableProvider p(c);
      const auto out = p.provide(Query("Which host city had the most participants?"),
                                 support::fixture_table("olympics.json"));
      CHECK(p.tokenizer().count(out.text) <= budget);
    }
  }

  TEST_CASE("stage errors carry the stage") {
    auto c = base_config();
    c.budget = 3;
    const TableProvider p(c);
    try {
      p.provide(Query("x"), support::fixture_table("olympics.json"));
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == Stage::packing);
    }
    auto s = base_config();
    s.augmentation = {KnowledgeKind::self_prompt};
    const TableProvider q(s, nullptr, std::make_shared<ScriptedLlm>(std::map<std::string, std::string>{}));
    try {
      q.provide(Query("x"), support::fixture_table("olympics.json"));
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == Stage::augmentation);
    }
  }

  TEST_CASE("manager lifecycle") {
    TableManager m;
    const auto t = support::fixture_table("olympics.json");
    const auto id = m.register_table(t);
    CHECK(id == "olympics");
    CHECK(m.get(id).version == 1);
    CHECK(m.get(id).hash == content_hash(t));
    CHECK(m.update(id, t) == 1);
    CHECK(m.update(id, edited(t, 0, 1, "Sydney!")) == 2);
    const auto pulled = m.sync_pull(id, 1);
    CHECK(pulled.changed);
    CHECK(pulled.current->version == 2);
    CHECK(pulled.current->table.cell(0, 1).text() == "Sydney!");
    CHECK_FALSE(m.sync_pull(id, 2).changed);
    CHECK_THROWS_AS(m.get("nope"), UnknownTableError);
    CHECK_THROWS_AS(m.update("nope", t), UnknownTableError);
    CHECK_THROWS_AS(m.register_table(t), ConfigError);
    CHECK(m.register_table(t.with_id("")) == "table-2");
    const TableProvider p(base_config());
    CHECK(provide(Query("x"), id, m, p).text == p.provide(Query("x"), m.get(id).table).text);
    CHECK_THROWS_AS(provide(Query("x"), "nope", m, p), UnknownTableError);
  }

  TEST_CASE("journal persistence") {
    const auto path = (std::filesystem::temp_directory_path() / "tabprov_journal_test.jsonl").string();
    std::filesystem::remove(path);
    const auto t = support::fixture_table("hierarchical.json");
    {
      TableManager m(path);
      m.register_table(t);
      m.update(t.id(), edited(t, 0, 0, "9"));
      m.update(t.id(), edited(t, 0, 0, "9"));
    }
    const TableManager reopened(path);
    const auto got = reopened.get(t.id());
    CHECK(got.version == 2);
    CHECK(got.table == edited(t, 0, 0, "9"));
    CHECK(got.hash == content_hash(edited(t, 0, 0, "9")));
    std::filesystem::remove(path);
  }

  TEST_CASE("manager updates are linearizable per id") {
    TableManager m;
    const auto t = support::fixture_table("olympics.json");
    const auto id = m.register_table(t);
    std::vector<std::thread> threads;
    for (int w = 0; w < 4; ++w) {
      threads.emplace_back([&, w] {
        for (int i = 0; i < 50; ++i) m.update(id, edited(t, 0, 1, "w" + std::to_string(w) + "-" + std::to_string(i)));
      });
    }
    std::atomic<bool> monotone{true};
    threads.emplace_back([&] {
      std::uint64_t last = 0;
      for (int i = 0; i < 500; ++i) {
        const auto v = m.get(id).version;
        if (v < last) monotone = false;
        last = v;
      }
    });
    for (auto& th : threads) th.join();
    CHECK(monotone);
    CHECK(m.get(id).version == 201);
  }

  TEST_CASE("sweep") {
    auto c = base_config();
    c.augmentation = {KnowledgeKind::table_size, KnowledgeKind::statistics};
    const std::vector<SweepFixture> fx{{"olympics", support::fixture_table("olympics.json"), Query("London")}};
    const std::vector<AllocationRatio> one{{5, 5}};
    const std::vector<SerializationFormat> formats(kAllFormats.begin(), kAllFormats.end());
    const auto rows = sweep_allocation(fx, one, formats, 200, c, nullptr, nullptr);
    CHECK(rows.size() == 6);
    for (const auto& r : rows) CHECK(r.table_tokens + r.aug_tokens <= 200);
    const auto csv = sweep_csv(rows);
    CHECK(csv.rfind("fixture,ratio,format,table_tokens,aug_tokens,rows_included,items_included\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

    const std::vector<SweepFixture> long_fx{
        {"long", support::fixture_table("long_table.json"), Query("medal results")}};
    const std::vector<AllocationRatio> two{{3, 7}, {5, 5}};
    const std::vector<SerializationFormat> nl{SerializationFormat::nlsep};
    const auto cmp = sweep_allocation(long_fx, two, nl, 400, c, nullptr, nullptr);
    CHECK(cmp[0].rows_included < cmp[1].rows_included);
    CHECK_THROWS_AS(sweep_allocation({}, two, nl, 400, c, nullptr, nullptr), ConfigError);
  }

  TEST_CASE("recall") {
    CHECK(recall({1, 2, 3}, {1, 2}) == 1.0);
    CHECK(recall({4}, {1, 2}) == 0.0);
    CHECK(recall({1}, {1, 2}) == 0.5);
    CHECK(recall({}, {}) == 1.0);
    const auto f = load_recall_fixture(support::data_path("fixtures/planted/planted_00.json"));
    CHECK(f.name == "planted_00.json");
    CHECK(f.gold_rows.size() >= 9);
    CHECK_THROWS_AS(parse_recall_fixture(R"({"table":{"title":"","headers":["a"],"rows":[]},"query":"q","gold_rows":[0]})"),
                    SchemaError);
    SamplingMethod random;
    random.kind = SamplingKind::random;
    random.seed = 0;
    const LocalEmbedder emb;
    const auto res = evaluate_recall({f}, {random}, TokenBudget(100000), Tokenizer::heuristic(), emb);
    REQUIRE(res.size() == 1);
    CHECK(res[0].mean_recall == 1.0);
    CHECK(res[0].method == "random(seed=0)");
  }
}
