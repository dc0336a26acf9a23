#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tabprov/embeddings.hpp"
#include "tabprov/knowledge.hpp"
#include "tabprov/llm.hpp"
#include "tabprov/metadata.hpp"
#include "tabprov/packing.hpp"
#include "tabprov/retrieval.hpp"
#include "tabprov/sampling.hpp"
#include "tabprov/table.hpp"
#include "tabprov/tokenizer.hpp"

namespace tabprov {

enum class CellSelectionMode { heuristic, llm };

/// Everything a pipeline run needs. Loaded from a flat `key = value` file
/// ('#' starts a comment); see set() for the keys.
struct ProviderConfig {
  TokenizerSpec tokenizer;
  EmbedderSpec embedder;
  SamplingMethod sampling;
  std::vector<KnowledgeKind> augmentation;
  CellSelectionMode cell_selection = CellSelectionMode::heuristic;
  std::size_t top_k = 3;  // docs per table and per explained term
  SerializationFormat format = SerializationFormat::nlsep;
  std::size_t budget = 1000;
  AllocationRatio ratio{5, 5};
  PromptLayout layout = PromptLayout::augmentation_first;
  LlmClientSpec llm;
  std::string corpus_path;
  std::string taxonomy_path;  // empty = built-in taxonomy

  /// Keys: tokenizer.{kind,divisor,vocab_path}; embedder.{kind,dimension,
  /// endpoint,model}; sampling.{kind,seed,k,ngram,n_clusters,per_cluster_k,
  /// grounding,max_columns}; augmentation.{kinds,cell_selection,top_k,
  /// taxonomy}; packing.{format,budget,ratio,layout};
  /// llm.{kind,endpoint,model,script_path}; corpus.path.
  /// Throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  static ProviderConfig parse(std::string_view text);
  /// Relative paths in the file resolve against the file's directory.
  static ProviderConfig load(const std::string& path);

  /// Cross-field checks. Throws ConfigError.
  void validate() const;
};

/// Runs sample -> augment -> pack with one set of clients.
class TableProvider {
 public:
  /// Builds tokenizer, embedder, LLM client, corpus and taxonomy from the config.
  explicit TableProvider(ProviderConfig config);
  /// Uses the given clients instead of building them from the config.
  TableProvider(ProviderConfig config, std::shared_ptr<const Embedder> embedder,
                std::shared_ptr<const LlmClient> llm);

  const ProviderConfig& config() const noexcept { return config_; }
  const Tokenizer& tokenizer() const noexcept { return tokenizer_; }
  const Embedder& embedder() const noexcept { return *embedder_; }

  /// Table share of the budget under the configured ratio, raised to the
  /// NL+Sep header cost so sampling can always keep the header.
  std::size_t sampling_budget(const Table& table) const;

  SubTable sample(const Table& table, const Query& query) const;
  /// Metadata items describe `table`; cell selection and self-prompting use
  /// the sampled rows. Priorities run 1.. in configured kind order.
  AugmentationBundle augment(const Table& table, const SubTable& sub, const Query& query) const;
  /// Errors are rethrown as StageError tagged with the failing stage.
  PackedPrompt provide(const Query& query, const Table& table) const;

 private:
  void load_resources();

  ProviderConfig config_;
  Tokenizer tokenizer_;
  std::shared_ptr<const Embedder> embedder_;
  std::shared_ptr<const LlmClient> llm_;
  std::optional<Corpus> corpus_;
  std::optional<Taxonomy> taxonomy_;
};

struct ManagedTable {
  std::string id;
  Table table;
  std::uint64_t version = 0;
  Digest hash;
};

struct SyncResult {
  bool changed = false;
  std::optional<ManagedTable> current;  // set when changed
};

/// Versioned table store. The version of an id starts at 1 and moves up by
/// one exactly when an update changes the content hash. With a journal
/// path, every new version is appended as one JSON line
/// {"id","version","table"} and the store is rebuilt from it on open.
class TableManager {
 public:
  TableManager() = default;
  explicit TableManager(std::string journal_path);

  /// Uses the table's id, or "table-N" when it has none. Throws ConfigError
  /// when the id is taken.
  std::string register_table(const Table& table);
  ManagedTable get(const std::string& id) const;
  /// Returns the (possibly unchanged) version.
  std::uint64_t update(const std::string& id, const Table& table);
  SyncResult sync_pull(const std::string& id, std::uint64_t known_version) const;

  bool contains(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  void append(const ManagedTable& entry);

  std::string journal_path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, ManagedTable> tables_;
};

/// Pipeline over a managed table. Throws UnknownTableError.
PackedPrompt provide(const Query& query, const std::string& table_id, const TableManager& manager,
                     const TableProvider& provider);

struct SweepFixture {
  std::string name;
  Table table;
  Query query;
};

struct SweepRow {
  std::string fixture;
  AllocationRatio ratio{5, 5};
  SerializationFormat format = SerializationFormat::nlsep;
  std::size_t budget = 0;
  std::size_t table_tokens = 0;
  std::size_t aug_tokens = 0;
  std::size_t rows_included = 0;
  std::size_t items_included = 0;
};

/// One provide() per (fixture, ratio, format), in that nesting order, with
/// the config's ratio, format and budget overridden.
std::vector<SweepRow> sweep_allocation(const std::vector<SweepFixture>& fixtures,
                                       const std::vector<AllocationRatio>& ratios,
                                       const std::vector<SerializationFormat>& formats, std::size_t budget,
                                       const ProviderConfig& config, std::shared_ptr<const Embedder> embedder,
                                       std::shared_ptr<const LlmClient> llm);

/// Header `fixture,ratio,format,table_tokens,aug_tokens,rows_included,items_included`.
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct RecallFixture {
  std::string name;
  Table table;
  Query query;
  std::vector<std::size_t> gold_rows;
};

/// {"table": <table document>, "query": str, "gold_rows": [int]}.
RecallFixture parse_recall_fixture(std::string_view document, std::string name = "");
RecallFixture load_recall_fixture(const std::string& path);

/// |selected ∩ gold| / |gold|; 1 for an empty gold set.
double recall(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& gold);

struct RecallResult {
  std::string method;
  double mean_recall = 0.0;
  std::vector<double> per_fixture;
};

inline constexpr std::size_t kRandomSeedSweep = 10;

/// Mean recall of each method's selected rows. Random sampling is averaged
/// over seeds s, s+1, ..., s+9 (s = the method's seed).
std::vector<RecallResult> evaluate_recall(const std::vector<RecallFixture>& fixtures,
                                          const std::vector<SamplingMethod>& methods, TokenBudget budget,
                                          const Tokenizer& tokenizer, const Embedder& embedder);

}  // namespace tabprov
