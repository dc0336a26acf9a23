// Command-line front end: render, sample, provide, sweep, recall, stats and store.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tabprov/errors.hpp"
#include "tabprov/provider.hpp"

using namespace tabprov;

namespace {

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;  // key=value
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.path, "Provider config file (key = value)");
  cmd->add_option("--set", args.overrides, "Override one config key, e.g. --set packing.budget=400");
}

ProviderConfig build_config(const ConfigArgs& args) {
  auto config = args.path.empty() ? ProviderConfig{} : ProviderConfig::load(args.path);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  config.validate();
  return config;
}

Table load_table(const std::string& path) {
  auto loaded = load_table_file(path);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
  return std::move(loaded.table);
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + out_path);
  out << text;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table provider: sampling, augmentation and packing of tables into prompts"};
  app.require_subcommand(1);

  std::string table_path, query_text, out_path, format_name, store_path, table_id;
  ConfigArgs cfg;

  auto* render = app.add_subcommand("render", "Serialize a table file in one format");
  render->add_option("--table", table_path, "Table file (.csv or .json)")->required();
  render->add_option("--format", format_name, "html|xml|json|csv|markdown|nlsep")->default_val("nlsep");
  render->add_option("--out", out_path, "Output file (default stdout)");

  auto* sample_cmd = app.add_subcommand("sample", "Sample rows under the configured table budget");
  add_config_options(sample_cmd, cfg);
  sample_cmd->add_option("--table", table_path)->required();
  sample_cmd->add_option("--query", query_text)->required();
  sample_cmd->add_option("--out", out_path);

  bool show_manifest = false;
  auto* provide_cmd = app.add_subcommand("provide", "Run sample, augment and pack into one prompt");
  add_config_options(provide_cmd, cfg);
  provide_cmd->add_option("--table", table_path, "Table file, or a table id with --store")->required();
  provide_cmd->add_option("--query", query_text)->required();
  provide_cmd->add_option("--store", store_path, "Journal file of a managed table store");
  provide_cmd->add_flag("--manifest", show_manifest, "Print the pack manifest JSON to stderr");
  provide_cmd->add_option("--out", out_path);

  std::vector<std::string> sweep_tables, ratio_names, sweep_formats;
  std::size_t sweep_budget = 1000;
  auto* sweep_cmd = app.add_subcommand("sweep", "Allocation sweep over ratios and formats, as CSV");
  add_config_options(sweep_cmd, cfg);
  sweep_cmd->add_option("--table", sweep_tables)->required();
  sweep_cmd->add_option("--query", query_text)->required();
  sweep_cmd->add_option("--budget", sweep_budget)->default_val(1000);
  sweep_cmd->add_option("--ratio", ratio_names)->default_val(std::vector<std::string>{"7:3", "6:4", "5:5", "4:6", "3:7"});
  sweep_cmd->add_option("--format", sweep_formats)->default_val(std::vector<std::string>{"nlsep"});
  sweep_cmd->add_option("--out", out_path);

  std::vector<std::string> fixture_paths, method_names;
  std::size_t recall_budget = 120;
  auto* recall_cmd = app.add_subcommand("eval-recall", "Mean gold-row recall of sampling methods");
  recall_cmd->add_option("--fixture", fixture_paths, "Recall fixture JSON files")->required();
  recall_cmd->add_option("--method", method_names, "random|evenly|content_snapshot|query_based|clustering|grounding")
      ->default_val(std::vector<std::string>{"grounding", "query_based", "random"});
  recall_cmd->add_option("--budget", recall_budget)->default_val(120);

  std::size_t column = 0;
  auto* stats_cmd = app.add_subcommand("stats", "Statistics features of one column");
  stats_cmd->add_option("--table", table_path)->required();
  stats_cmd->add_option("--column", column, "Zero-based column index")->default_val(0);

  auto* store_cmd = app.add_subcommand("store", "Versioned table store backed by a journal file");
  store_cmd->require_subcommand(1);
  store_cmd->add_option("--store", store_path, "Journal file")->required();
  auto* reg = store_cmd->add_subcommand("register", "Add a table; prints its id");
  reg->add_option("--table", table_path)->required();
  auto* upd = store_cmd->add_subcommand("update", "Replace a table's content; prints the version");
  upd->add_option("--id", table_id)->required();
  upd->add_option("--table", table_path)->required();
  std::uint64_t known_version = 0;
  auto* pull = store_cmd->add_subcommand("pull", "Print the table when newer than --known");
  pull->add_option("--id", table_id)->required();
  pull->add_option("--known", known_version)->default_val(0);
  store_cmd->add_subcommand("list", "List ids with version and hash");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*render) {
      emit(serialize(load_table(table_path), parse_format(format_name)), out_path);
    } else if (*sample_cmd) {
      const TableProvider provider(build_config(cfg));
      const auto sub = provider.sample(load_table(table_path), Query(query_text));
      for (const auto& w : sub.warnings) std::cerr << "warning: " << w << '\n';
      std::cerr << "source rows: " << join(sub.source_rows) << "\nsource cols: " << join(sub.source_cols) << '\n';
      emit(serialize_nlsep(sub.table), out_path);
    } else if (*provide_cmd) {
      const TableProvider provider(build_config(cfg));
      PackedPrompt out;
      if (store_path.empty()) {
        out = provider.provide(Query(query_text), load_table(table_path));
      } else {
        const TableManager manager(store_path);
        out = provide(Query(query_text), table_path, manager, provider);
      }
      if (show_manifest) std::cerr << manifest_json(out.manifest) << '\n';
      emit(out.text, out_path);
    } else if (*sweep_cmd) {
      const auto config = build_config(cfg);
      std::vector<SweepFixture> fixtures;
      for (const auto& p : sweep_tables) {
        auto t = load_table(p);
        fixtures.push_back({t.id().empty() ? p : t.id(), std::move(t), Query(query_text)});
      }
      std::vector<AllocationRatio> ratios;
      for (const auto& r : ratio_names) ratios.push_back(AllocationRatio::parse(r));
      std::vector<SerializationFormat> formats;
      for (const auto& f : sweep_formats) formats.push_back(parse_format(f));
      const auto rows = sweep_allocation(fixtures, ratios, formats, sweep_budget, config, nullptr, nullptr);
      emit(sweep_csv(rows), out_path);
    } else if (*recall_cmd) {
      std::vector<RecallFixture> fixtures;
      for (const auto& p : fixture_paths) fixtures.push_back(load_recall_fixture(p));
      std::vector<SamplingMethod> methods;
      for (const auto& name : method_names) {
        SamplingMethod m;
        if (name == "grounding") {
          m.kind = SamplingKind::query_based;
          m.grounding = true;
          m.max_columns = 2;
        } else {
          m.kind = parse_sampling_kind(name);
        }
        methods.push_back(m);
      }
      const auto results = evaluate_recall(fixtures, methods, TokenBudget(recall_budget), Tokenizer::heuristic(),
                                           LocalEmbedder());
      for (std::size_t i = 0; i < results.size(); ++i) {
        std::cout << fmt::format("{}\t{:.4f}\n", method_names[i], results[i].mean_recall);
      }
    } else if (*stats_cmd) {
      const auto table = load_table(table_path);
      for (const auto& [name, value] : compute_statistics(table, column).entries()) {
        std::cout << name << '\t' << (value ? fmt::format("{:.6g}", *value) : "n/a") << '\n';
      }
    } else if (*store_cmd) {
      TableManager manager(store_path);
      if (*reg) {
        std::cout << manager.register_table(load_table(table_path)) << '\n';
      } else if (*upd) {
        std::cout << manager.update(table_id, load_table(table_path)) << '\n';
      } else if (*pull) {
        const auto res = manager.sync_pull(table_id, known_version);
        if (!res.changed) {
          std::cout << "up to date at version " << known_version << '\n';
        } else {
          std::cerr << "version " << res.current->version << '\n';
          std::cout << serialize_json(res.current->table) << '\n';
        }
      } else {
        for (const auto& id : manager.ids()) {
          const auto m = manager.get(id);
          std::cout << fmt::format("{}\t{}\t{}\n", id, m.version, m.hash.hex());
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
