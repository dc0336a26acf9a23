#include "tabprov/provider.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabprov/errors.hpp"

namespace tabprov {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, value));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, value));
}

std::vector<KnowledgeKind> parse_kinds(std::string_view value) {
  std::vector<KnowledgeKind> kinds;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const auto part = trim(value.substr(0, comma));
    if (!part.empty()) kinds.push_back(parse_knowledge_kind(part));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return kinds;
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open {} '{}'", what, path));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void ProviderConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  const std::string v(value);
  if (key == "tokenizer.kind") tokenizer.kind = parse_tokenizer_kind(value);
  else if (key == "tokenizer.divisor") tokenizer.chars_per_token = parse_unsigned(key, value);
  else if (key == "tokenizer.vocab_path") tokenizer.vocab_path = v;
  else if (key == "embedder.kind") embedder.kind = parse_embedder_kind(value);
  else if (key == "embedder.dimension") embedder.dimension = parse_unsigned(key, value);
  else if (key == "embedder.endpoint") embedder.endpoint = v;
  else if (key == "embedder.model") embedder.model = v;
  else if (key == "sampling.kind") sampling.kind = parse_sampling_kind(value);
  else if (key == "sampling.seed") sampling.seed = parse_unsigned(key, value);
  else if (key == "sampling.k") sampling.k = parse_unsigned(key, value);
  else if (key == "sampling.ngram") sampling.ngram = parse_unsigned(key, value);
  else if (key == "sampling.n_clusters") sampling.n_clusters = parse_unsigned(key, value);
  else if (key == "sampling.per_cluster_k") sampling.per_cluster_k = parse_unsigned(key, value);
  else if (key == "sampling.grounding") sampling.grounding = parse_bool(key, value);
  else if (key == "sampling.max_columns") sampling.max_columns = parse_unsigned(key, value);
  else if (key == "augmentation.kinds") augmentation = parse_kinds(value);
  else if (key == "augmentation.cell_selection") {
    if (value == "heuristic") cell_selection = CellSelectionMode::heuristic;
    else if (value == "llm") cell_selection = CellSelectionMode::llm;
    else throw ConfigError(fmt::format("{}: expected heuristic or llm, got '{}'", key, value));
  } else if (key == "augmentation.top_k") top_k = parse_unsigned(key, value);
  else if (key == "augmentation.taxonomy") taxonomy_path = v;
  else if (key == "packing.format") format = parse_format(value);
  else if (key == "packing.budget") budget = parse_unsigned(key, value);
  else if (key == "packing.ratio") ratio = AllocationRatio::parse(value);
  else if (key == "packing.layout") layout = parse_layout(value);
  else if (key == "llm.kind") llm.kind = parse_llm_kind(value);
  else if (key == "llm.endpoint") llm.endpoint = v;
  else if (key == "llm.model") llm.model = v;
  else if (key == "llm.script_path") llm.script_path = v;
  else if (key == "corpus.path") corpus_path = v;
  else throw ConfigError(fmt::format("unknown config key '{}'", key));
}

ProviderConfig ProviderConfig::parse(std::string_view text) {
  ProviderConfig config;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("config line {}: expected key = value", line_no));
    try {
      config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
  return config;
}

ProviderConfig ProviderConfig::load(const std::string& path) {
  auto config = parse(read_file(path, "config"));
  // Relative paths inside the file are relative to the file itself.
  const auto base = std::filesystem::path(path).parent_path();
  for (auto* p : {&config.tokenizer.vocab_path, &config.llm.script_path, &config.corpus_path, &config.taxonomy_path}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).string();
  }
  return config;
}

void ProviderConfig::validate() const {
  sampling.validate();
  if (budget == 0) throw ConfigError("packing.budget must be at least 1");
  if (top_k == 0) throw ConfigError("augmentation.top_k must be at least 1");
  for (auto kind : augmentation) {
    const bool needs_corpus = kind == KnowledgeKind::doc_reference || kind == KnowledgeKind::term_explanation;
    if (needs_corpus && corpus_path.empty()) {
      throw ConfigError(fmt::format("augmentation kind '{}' requires corpus.path", to_string(kind)));
    }
  }
  if (embedder.kind == EmbedderKind::remote && (embedder.endpoint.empty() || embedder.model.empty())) {
    throw ConfigError("a remote embedder requires embedder.endpoint and embedder.model");
  }
  if (llm.kind == LlmKind::remote && (llm.endpoint.empty() || llm.model.empty())) {
    throw ConfigError("a remote LLM requires llm.endpoint and llm.model");
  }
}

// ---- provider ----

TableProvider::TableProvider(ProviderConfig config)
    : config_(std::move(config)), tokenizer_((config_.validate(), config_.tokenizer)) {
  embedder_ = make_embedder(config_.embedder);
  llm_ = make_llm_client(config_.llm);
  load_resources();
}

TableProvider::TableProvider(ProviderConfig config, std::shared_ptr<const Embedder> embedder,
                             std::shared_ptr<const LlmClient> llm)
    : config_(std::move(config)),
      tokenizer_((config_.validate(), config_.tokenizer)),
      embedder_(std::move(embedder)),
      llm_(std::move(llm)) {
  if (!embedder_) embedder_ = make_embedder(config_.embedder);
  if (!llm_) llm_ = make_llm_client(config_.llm);
  load_resources();
}

void TableProvider::load_resources() {
  if (!config_.corpus_path.empty()) corpus_ = Corpus::load(config_.corpus_path);
  taxonomy_ = config_.taxonomy_path.empty() ? Taxonomy::defaults() : Taxonomy::from_file(config_.taxonomy_path);
}

std::size_t TableProvider::sampling_budget(const Table& table) const {
  const auto alloc = allocate_tokens(config_.budget, config_.ratio);
  const NlsepCost cost(table, tokenizer_);
  return std::max({alloc.table_budget, cost.header(), std::size_t{1}});
}

SubTable TableProvider::sample(const Table& table, const Query& query) const {
  return tabprov::sample(table, query, config_.sampling, TokenBudget(sampling_budget(table)), tokenizer_,
                         embedder_.get());
}

AugmentationBundle TableProvider::augment(const Table& table, const SubTable& sub, const Query& query) const {
  AugmentationBundle bundle;
  for (auto kind : config_.augmentation) {
    if (is_metadata_kind(kind)) {
      const KnowledgeKind one[] = {kind};
      auto part = render_metadata_bundle(table, one, tokenizer_, *taxonomy_);
      bundle.items.insert(bundle.items.end(), part.items.begin(), part.items.end());
      continue;
    }
    switch (kind) {
      case KnowledgeKind::doc_reference: {
        auto items = doc_reference_items(table, *corpus_, config_.top_k, *embedder_, tokenizer_);
        bundle.items.insert(bundle.items.end(), items.begin(), items.end());
        break;
      }
      case KnowledgeKind::term_explanation: {
        auto selection = config_.cell_selection == CellSelectionMode::llm
                             ? select_cells_llm(sub.table, kCellCriteria, *llm_)
                             : select_cells_heuristic(sub.table, query);
        bundle.warnings.insert(bundle.warnings.end(), selection.warnings.begin(), selection.warnings.end());
        auto items = explain_terms(selection, sub.table, *corpus_, *embedder_, config_.top_k, tokenizer_);
        bundle.items.insert(bundle.items.end(), items.begin(), items.end());
        break;
      }
      case KnowledgeKind::self_prompt:
        bundle.items.push_back(self_prompt(sub.table, query.text, *llm_, tokenizer_, 1, config_.format));
        break;
      default:
        break;
    }
  }
  std::size_t priority = 0;
  for (auto& item : bundle.items) item.priority = ++priority;
  return bundle;
}

PackedPrompt TableProvider::provide(const Query& query, const Table& table) const {
  SubTable sub;
  try {
    sub = sample(table, query);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(Stage::sampling, e.what());
  }
  AugmentationBundle bundle;
  try {
    bundle = augment(table, sub, query);
  } catch (const Error& e) {
    throw StageError(Stage::augmentation, e.what());
  }
  try {
    auto packed = pack(sub, bundle, config_.format, TokenBudget(config_.budget), config_.ratio, tokenizer_,
                       config_.layout);
    packed.manifest.augmentation_kinds = config_.augmentation;
    return packed;
  } catch (const Error& e) {
    throw StageError(Stage::packing, e.what());
  }
}

// ---- table manager ----

TableManager::TableManager(std::string journal_path) : journal_path_(std::move(journal_path)) {
  std::ifstream in(journal_path_, std::ios::binary);
  if (!in) return;  // a new journal
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManagedTable entry;
      entry.id = j.at("id").get<std::string>();
      entry.version = j.at("version").get<std::uint64_t>();
      entry.table = parse_table_json(j.at("table").dump()).with_id(entry.id);
      entry.hash = content_hash(entry.table);
      auto& slot = tables_[entry.id];
      if (entry.version > slot.version) slot = std::move(entry);
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(fmt::format("journal {} line {}: {}", journal_path_, line_no, e.what()));
    } catch (const SchemaError& e) {
      throw IngestionError(fmt::format("journal {} line {}: {}", journal_path_, line_no, e.what()));
    }
  }
}

void TableManager::append(const ManagedTable& entry) {
  if (journal_path_.empty()) return;
  std::ofstream out(journal_path_, std::ios::binary | std::ios::app);
  if (!out) throw IngestionError(fmt::format("cannot append to journal '{}'", journal_path_));
  nlohmann::ordered_json j;
  j["id"] = entry.id;
  j["version"] = entry.version;
  j["table"] = nlohmann::ordered_json::parse(serialize_json(entry.table));
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw IngestionError(fmt::format("cannot append to journal '{}'", journal_path_));
}

std::string TableManager::register_table(const Table& table) {
  std::unique_lock lock(mutex_);
  std::string id = table.id();
  if (id.empty()) {
    for (std::size_t n = tables_.size() + 1;; ++n) {
      id = fmt::format("table-{}", n);
      if (!tables_.contains(id)) break;
    }
  } else if (tables_.contains(id)) {
    throw ConfigError(fmt::format("table id '{}' is already registered", id));
  }
  ManagedTable entry{id, table.with_id(id), 1, content_hash(table)};
  append(entry);
  tables_.emplace(id, std::move(entry));
  return id;
}

ManagedTable TableManager::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = tables_.find(id);
  if (it == tables_.end()) throw UnknownTableError(fmt::format("unknown table id '{}'", id));
  return it->second;
}

std::uint64_t TableManager::update(const std::string& id, const Table& table) {
  std::unique_lock lock(mutex_);
  const auto it = tables_.find(id);
  if (it == tables_.end()) throw UnknownTableError(fmt::format("unknown table id '{}'", id));
  const auto hash = content_hash(table);
  if (hash == it->second.hash) return it->second.version;
  ManagedTable next{id, table.with_id(id), it->second.version + 1, hash};
  append(next);
  it->second = std::move(next);
  return it->second.version;
}

SyncResult TableManager::sync_pull(const std::string& id, std::uint64_t known_version) const {
  std::shared_lock lock(mutex_);
  const auto it = tables_.find(id);
  if (it == tables_.end()) throw UnknownTableError(fmt::format("unknown table id '{}'", id));
  if (known_version == it->second.version) return {false, std::nullopt};
  return {true, it->second};
}

bool TableManager::contains(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return tables_.contains(id);
}

std::vector<std::string> TableManager::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : tables_) out.push_back(id);
  return out;
}

PackedPrompt provide(const Query& query, const std::string& table_id, const TableManager& manager,
                     const TableProvider& provider) {
  return provider.provide(query, manager.get(table_id).table);
}

// ---- harnesses ----

std::vector<SweepRow> sweep_allocation(const std::vector<SweepFixture>& fixtures,
                                       const std::vector<AllocationRatio>& ratios,
                                       const std::vector<SerializationFormat>& formats, std::size_t budget,
                                       const ProviderConfig& config, std::shared_ptr<const Embedder> embedder,
                                       std::shared_ptr<const LlmClient> llm) {
  if (fixtures.empty()) throw ConfigError("sweep needs at least one fixture");
  if (ratios.empty()) throw ConfigError("sweep needs at least one ratio");
  if (formats.empty()) throw ConfigError("sweep needs at least one format");
  std::vector<SweepRow> rows;
  for (const auto& fixture : fixtures) {
    for (const auto& ratio : ratios) {
      for (auto format : formats) {
        auto cfg = config;
        cfg.ratio = ratio;
        cfg.format = format;
        cfg.budget = budget;
        const TableProvider provider(std::move(cfg), embedder, llm);
        const auto packed = provider.provide(fixture.query, fixture.table);
        rows.push_back({fixture.name, ratio, format, budget, packed.manifest.table_tokens_used,
                        packed.manifest.aug_tokens_used, packed.manifest.rows_included,
                        packed.manifest.items_included});
      }
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "fixture,ratio,format,table_tokens,aug_tokens,rows_included,items_included\n";
  for (const auto& r : rows) {
    std::string name = r.fixture;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : name) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      name = quoted + "\"";
    }
    out += fmt::format("{},{},{},{},{},{},{}\n", name, r.ratio.str(), to_string(r.format), r.table_tokens,
                       r.aug_tokens, r.rows_included, r.items_included);
  }
  return out;
}

RecallFixture parse_recall_fixture(std::string_view document, std::string name) {
  try {
    const auto j = nlohmann::json::parse(document);
    RecallFixture f;
    f.name = std::move(name);
    f.table = parse_table_json(j.at("table").dump());
    f.query = Query(j.at("query").get<std::string>());
    f.gold_rows = j.at("gold_rows").get<std::vector<std::size_t>>();
    for (auto r : f.gold_rows) {
      if (r >= f.table.row_count()) throw SchemaError(fmt::format("gold row {} is outside the table", r));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("recall fixture: {}", e.what()));
  }
}

RecallFixture load_recall_fixture(const std::string& path) {
  auto name = path.substr(path.find_last_of('/') + 1);
  return parse_recall_fixture(read_file(path, "fixture"), std::move(name));
}

double recall(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& gold) {
  const std::set<std::size_t> gold_set(gold.begin(), gold.end());
  if (gold_set.empty()) return 1.0;
  const std::set<std::size_t> picked(selected.begin(), selected.end());
  std::size_t hit = 0;
  for (auto g : gold_set) hit += picked.contains(g) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(gold_set.size());
}

std::vector<RecallResult> evaluate_recall(const std::vector<RecallFixture>& fixtures,
                                          const std::vector<SamplingMethod>& methods, TokenBudget budget,
                                          const Tokenizer& tokenizer, const Embedder& embedder) {
  std::vector<RecallResult> results;
  for (const auto& method : methods) {
    RecallResult result;
    result.method = method.describe();
    for (const auto& f : fixtures) {
      double value = 0.0;
      if (method.kind == SamplingKind::random) {
        const std::uint64_t base = method.seed.value_or(0);
        for (std::size_t i = 0; i < kRandomSeedSweep; ++i) {
          auto m = method;
          m.seed = base + i;
          value += recall(sample(f.table, f.query, m, budget, tokenizer, &embedder).source_rows, f.gold_rows);
        }
        value /= static_cast<double>(kRandomSeedSweep);
      } else {
        value = recall(sample(f.table, f.query, method, budget, tokenizer, &embedder).source_rows, f.gold_rows);
      }
      result.per_fixture.push_back(value);
    }
    double sum = 0.0;
    for (double v : result.per_fixture) sum += v;
    result.mean_recall = fixtures.empty() ? 0.0 : sum / static_cast<double>(fixtures.size());
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace tabprov
