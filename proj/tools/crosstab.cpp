// Copyright 2026 The Crosstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// crosstab: command-line front end for splitting, pre-training, fine-tuning,
// generation and evaluation.

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crosstab/evaluation/conditional.hpp"
#include "crosstab/evaluation/report.hpp"
#include "crosstab/pipeline/pipeline.hpp"
#include "crosstab/tabular/csv.hpp"
#include "crosstab/tabular/split.hpp"
#include "crosstab/tabular/toy.hpp"

namespace fs = std::filesystem;
using namespace crosstab;

namespace {

constexpr const char* kRootEnv = "CROSSTAB_CHECKPOINT_ROOT";

// Relative checkpoint paths resolve against $CROSSTAB_CHECKPOINT_ROOT when set.
fs::path checkpoint_path(const std::string& p) {
  const fs::path path(p);
  const char* root = std::getenv(kRootEnv);
  if (path.is_absolute() || !root || !*root) return path;
  return fs::path(root) / path;
}

struct ConfigFlags;

// Registers one `--section.key` string option per config field.
struct FlagBinder {
  ConfigFlags* self;
  CLI::App* app;
  nlohmann::json defaults;

  void add(const std::string& section, const std::string& key, const std::string& help);

  template <typename T>
  void operator()(const std::string& section, const std::string& key, const T&, const char* help) {
    add(section, key, help);
  }
  template <typename E>
  void choice(const std::string& section, const std::string& key, const E&,
              const std::vector<std::pair<std::string, E>>& options, const char* help) {
    std::string names;
    for (const auto& [n, e] : options) names += (names.empty() ? "" : "|") + n;
    add(section, key, std::string(help) + " [" + names + "]");
  }
};

// One string slot per config key; filled from the config file or flags.
struct ConfigFlags {
  struct Slot {
    std::string section, key, value;
    CLI::Option* option = nullptr;
    std::optional<std::string> from_file;
  };
  std::deque<Slot> slots;  // options keep references into the slots
  std::string preset = "full";
  std::string config_file;
  CLI::Option* preset_option = nullptr;

  void bind(CLI::App& app) {
    const PipelineConfig defaults;
    FlagBinder binder{this, &app, config_to_json(defaults)};
    visit_config(binder, defaults);
    preset_option = app.add_option("--preset", preset, "base settings before file and flag overrides")
                        ->check(CLI::IsMember({"full", "desk"}))
                        ->group("Configuration")
                        ->capture_default_str();
    app.add_option("--config", config_file, "INI file: [section] then key = value; flags override it")
        ->check(CLI::ExistingFile)
        ->group("Configuration");
  }

  // Reads the INI file; unknown keys are errors.
  void read_file() {
    if (config_file.empty()) return;
    for (const auto& item : CLI::ConfigINI().from_file(config_file)) {
      if (item.name == "++" || item.name == "--") continue;
      if (item.parents.size() > 1 || item.inputs.size() != 1) {
        throw ConfigError(config_file + ": cannot read entry '" + item.fullname() + "'");
      }
      const std::string section = item.parents.empty() ? "" : item.parents.front();
      if (section.empty() && item.name == "preset") {
        if (preset_option->count() == 0) preset = item.inputs.front();
        if (preset != "full" && preset != "desk") throw ConfigError("unknown preset '" + preset + "'");
        continue;
      }
      auto it = std::find_if(slots.begin(), slots.end(),
                             [&](const Slot& s) { return s.section == section && s.key == item.name; });
      if (it == slots.end()) throw ConfigError(config_file + ": unknown key '" + item.fullname() + "'");
      it->from_file = item.inputs.front();
    }
  }

  std::optional<std::string> given(const Slot& s) const {
    if (s.option && s.option->count() > 0) return s.value;
    return s.from_file;
  }

  static nlohmann::json parse_value(const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      return text;
    }
  }

  // Applies every explicitly set slot, or only those in `sections` when given.
  PipelineConfig apply(const PipelineConfig& base, const std::vector<std::string>& sections = {}) const {
    nlohmann::json j = config_to_json(base);
    for (const auto& s : slots) {
      const auto text = given(s);
      if (!text) continue;
      if (!sections.empty() && std::find(sections.begin(), sections.end(), s.section) == sections.end()) {
        logger()->debug("config key {}.{} does not apply to this command", s.section, s.key);
        continue;
      }
      (s.section.empty() ? j[s.key] : j[s.section][s.key]) = parse_value(*text);
    }
    return config_from_json(j);
  }

  PipelineConfig resolve() const { return apply(preset == "desk" ? desk_scale_config() : PipelineConfig{}); }
};

void FlagBinder::add(const std::string& section, const std::string& key, const std::string& help) {
  auto& slot = self->slots.emplace_back();
  slot.section = section;
  slot.key = key;
  const std::string name = section.empty() ? key : section + "." + key;
  const nlohmann::json& d = section.empty() ? defaults[key] : defaults[section][key];
  slot.option = app->add_option("--" + name, slot.value, help + " (default " + d.dump() + ")")
                    ->type_name("VALUE")
                    ->group("Configuration");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Loads a CSV with its descriptor; the table name defaults to the
// descriptor's name, then to the CSV file stem.
TableDataset load_table(const std::string& csv, const std::string& schema) {
  const SchemaDescriptor desc = SchemaDescriptor::load(schema);
  TableDataset t = load_csv(csv, desc);
  if (t.name().empty()) t.set_name(desc.name.empty() ? fs::path(csv).stem().string() : desc.name);
  return t;
}

nlohmann::json command_line(int argc, char** argv) {
  nlohmann::json j = nlohmann::json::array();
  for (int i = 0; i < argc; ++i) j.push_back(argv[i]);
  return j;
}

void write_report(const fs::path& out, const nlohmann::json& j, const std::string& text) {
  save_json(out, j);
  if (!text.empty()) {
    fs::path txt = out;
    txt.replace_extension(".txt");
    write_atomically(txt, [&](std::ostream& o) { o << text; });
  }
}

struct AblationVariant {
  std::string name;
  bool pretrain_diffusion;
  DecoderKind decoder;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-table synthetic data: pre-train, fine-tune, generate and evaluate"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error")->capture_default_str();
  ConfigFlags flags;
  flags.bind(app);

  // split
  auto* split = app.add_subcommand("split", "split one table into train, fine-tune and test files");
  std::string split_data, split_schema, split_out;
  bool split_features_flag = false;
  split->add_option("--data", split_data, "input CSV")->required()->check(CLI::ExistingFile);
  split->add_option("--schema", split_schema, "table descriptor JSON")->required()->check(CLI::ExistingFile);
  split->add_option("--out", split_out, "output directory")->required();
  split->add_flag("--features", split_features_flag, "also split the predictors into two column sets");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "pre-train every stage on a pool of tables");
  std::vector<std::string> pre_data, pre_schema;
  std::string pre_checkpoint;
  pre->add_option("--data", pre_data, "training CSVs")->required();
  pre->add_option("--schema", pre_schema, "one descriptor per CSV, same order")->required();
  pre->add_option("--checkpoint", pre_checkpoint, "output checkpoint directory")->required();

  // finetune
  auto* fine = app.add_subcommand("finetune", "fine-tune the diffusion net on one table");
  std::string fine_in, fine_out, fine_data, fine_schema, fine_columns;
  fine->add_option("--checkpoint", fine_in, "pre-trained checkpoint")->required();
  fine->add_option("--out", fine_out, "output checkpoint directory")->required();
  fine->add_option("--data", fine_data, "fine-tune CSV")->required()->check(CLI::ExistingFile);
  fine->add_option("--schema", fine_schema, "descriptor of the fine-tune CSV")->required()->check(CLI::ExistingFile);
  fine->add_option("--columns", fine_columns, "comma-separated subset of columns to keep");

  // generate
  auto* gen = app.add_subcommand("generate", "sample a synthetic table");
  std::string gen_checkpoint, gen_scheme = "finetuned", gen_table, gen_columns, gen_out;
  std::size_t gen_rows = 0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--checkpoint", gen_checkpoint, "checkpoint directory")->required();
  gen->add_option("--scheme", gen_scheme, "finetuned|cond_gen|cond_aug")
      ->check(CLI::IsMember({"finetuned", "cond_gen", "cond_aug"}))
      ->capture_default_str();
  gen->add_option("--table", gen_table, "target table name (default: the fine-tune table)");
  gen->add_option("--rows", gen_rows, "rows to generate")->required();
  gen->add_option("--columns", gen_columns, "comma-separated columns (default: the target table's)");
  gen->add_option("--seed", gen_seed, "sampling seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output CSV")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score a synthetic table against real data");
  std::string eval_train, eval_test, eval_synth, eval_schema, eval_out, eval_classifiers, eval_pct = "nearest_member";
  std::uint64_t eval_seed = 0;
  eval->add_option("--real-train", eval_train, "real training CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--real-test", eval_test, "real test CSV (enables TSTR and PCT)")->check(CLI::ExistingFile);
  eval->add_option("--synth", eval_synth, "synthetic CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--schema", eval_schema, "descriptor shared by all three CSVs")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "report JSON (a .txt table is written beside it)")->required();
  eval->add_option("--classifiers", eval_classifiers, "comma-separated TSTR classifiers (default: all)");
  eval->add_option("--pct-rule", eval_pct, "nearest_member|pairwise")
      ->check(CLI::IsMember({"nearest_member", "pairwise"}))
      ->capture_default_str();
  eval->add_option("--seed", eval_seed, "classifier seed")->capture_default_str();

  // classify
  auto* classify = app.add_subcommand("classify", "use a feature-conditioned checkpoint as a classifier");
  std::string cls_checkpoint, cls_data, cls_schema, cls_out, cls_scheme = "cond_gen";
  std::uint64_t cls_seed = 0;
  classify->add_option("--checkpoint", cls_checkpoint, "checkpoint trained with diffusion.condition=features")
      ->required();
  classify->add_option("--data", cls_data, "labelled test CSV")->required()->check(CLI::ExistingFile);
  classify->add_option("--schema", cls_schema, "descriptor of the test CSV")->required()->check(CLI::ExistingFile);
  classify->add_option("--scheme", cls_scheme, "finetuned|cond_gen")
      ->check(CLI::IsMember({"finetuned", "cond_gen"}))
      ->capture_default_str();
  classify->add_option("--seed", cls_seed, "sampling seed")->capture_default_str();
  classify->add_option("--out", cls_out, "output JSON")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "pre-training and decoder ablation on one fine-tune table");
  std::vector<std::string> abl_data, abl_schema;
  std::string abl_fine, abl_test, abl_fine_schema, abl_out, abl_classifiers;
  std::uint64_t abl_seed = 0;
  ablate->add_option("--data", abl_data, "pre-training CSVs")->required();
  ablate->add_option("--schema", abl_schema, "one descriptor per pre-training CSV")->required();
  ablate->add_option("--finetune-data", abl_fine, "fine-tune CSV")->required()->check(CLI::ExistingFile);
  ablate->add_option("--test-data", abl_test, "test CSV of the fine-tune table")->required()->check(CLI::ExistingFile);
  ablate->add_option("--finetune-schema", abl_fine_schema, "descriptor of the fine-tune and test CSVs")
      ->required()
      ->check(CLI::ExistingFile);
  ablate->add_option("--out", abl_out, "output directory")->required();
  ablate->add_option("--classifiers", abl_classifiers, "comma-separated TSTR classifiers (default: all)");
  ablate->add_option("--seed", abl_seed, "generation and classifier seed")->capture_default_str();

  // toy
  auto* toy = app.add_subcommand("toy", "write the two-table toy corpus");
  std::string toy_out;
  std::size_t toy_rows = 200;
  std::uint64_t toy_seed = 0;
  toy->add_option("--out", toy_out, "output directory")->required();
  toy->add_option("--rows", toy_rows, "rows per table")->capture_default_str();
  toy->add_option("--seed", toy_seed, "data seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    logger()->set_level(spdlog::level::from_str(log_level));
    flags.read_file();
    const nlohmann::json invocation = command_line(argc, argv);

    if (*toy) {
      std::size_t i = 0;
      for (auto spec : toy_corpus_specs()) {
        spec.rows = toy_rows;
        const TableDataset t = make_blob_table(spec, derive_seed(toy_seed, "toy-corpus", i++));
        save_csv(fs::path(toy_out) / (t.name() + ".csv"), t);
        save_json(fs::path(toy_out) / (t.name() + ".schema.json"), schema_to_json(t));
      }
      return 0;
    }

    if (*split) {
      const PipelineConfig cfg = flags.resolve();
      const TableDataset t = load_table(split_data, split_schema);
      SplitSpec spec = cfg.split;
      spec.seed = derive_seed(cfg.seed, "split");
      const DatasetSplit parts = split_dataset(t, spec);
      const fs::path out(split_out);
      save_csv(out / "train.csv", parts.train);
      save_csv(out / "finetune.csv", parts.finetune);
      save_csv(out / "test.csv", parts.test);
      save_json(out / "schema.json", schema_to_json(t.empty_like()));
      nlohmann::json manifest = split_manifest(parts.rows, spec);
      manifest["config"] = config_to_json(cfg);
      manifest["command"] = invocation;
      if (split_features_flag) {
        const FeatureSplit f = split_features(t, derive_seed(cfg.seed, "split-features"));
        manifest["feature_sets"] = {{"set_a", f.set_a.column_names()}, {"set_b", f.set_b.column_names()}};
      }
      save_json(out / "split.json", manifest);
      return 0;
    }

    if (*pre) {
      if (pre_data.size() != pre_schema.size()) throw ConfigError("--data and --schema must be given the same number of times");
      const PipelineConfig cfg = flags.resolve();
      std::vector<TableDataset> tables;
      for (std::size_t i = 0; i < pre_data.size(); ++i) tables.push_back(load_table(pre_data[i], pre_schema[i]));
      const CheckpointBundle b = pretrain(tables, cfg);
      save_bundle(b, checkpoint_path(pre_checkpoint));
      return 0;
    }

    if (*fine) {
      CheckpointBundle b = load_bundle(checkpoint_path(fine_in));
      b.config = flags.apply(b.config, {"finetune", "generation"});
      TableDataset t = load_table(fine_data, fine_schema);
      if (!fine_columns.empty()) {
        const std::string name = t.name();
        t = t.select_columns(split_list(fine_columns));
        t.set_name(name);
      }
      save_bundle(finetune(b, t), checkpoint_path(fine_out));
      return 0;
    }

    if (*gen) {
      CheckpointBundle b = load_bundle(checkpoint_path(gen_checkpoint));
      b.config = flags.apply(b.config, {"generation"});
      GenerationRequest req;
      req.scheme = parse_scheme(gen_scheme);
      req.table = gen_table;
      req.rows = gen_rows;
      req.columns = split_list(gen_columns);
      req.seed = gen_seed;
      const TableDataset t = generate(b, req);
      save_csv(gen_out, t);
      save_json(gen_out + ".json", {{"command", invocation},
                                    {"config", config_to_json(b.config)},
                                    {"scheme", gen_scheme},
                                    {"table", t.name()},
                                    {"rows", gen_rows},
                                    {"seed", gen_seed},
                                    {"schema", schema_to_json(t)}});
      return 0;
    }

    if (*eval) {
      const SchemaDescriptor desc = SchemaDescriptor::load(eval_schema);
      const TableDataset train = load_csv(eval_train, desc);
      const TableDataset synth = load_csv(eval_synth, desc);
      const TableDataset test = eval_test.empty() ? train.empty_like() : load_csv(eval_test, desc);
      EvaluationOptions opt;
      opt.seed = eval_seed;
      if (!eval_classifiers.empty()) opt.classifiers = split_list(eval_classifiers);
      opt.pct_rule = eval_pct == "pairwise" ? PctRule::pairwise : PctRule::nearest_member;
      MetricReport r = evaluate(train, test, synth, opt);
      r.dataset = desc.name.empty() ? fs::path(eval_train).stem().string() : desc.name;
      nlohmann::json j = r.to_json();
      j["command"] = invocation;
      write_report(eval_out, j, r.to_text());
      std::cout << r.to_text();
      return 0;
    }

    if (*classify) {
      const CheckpointBundle b = load_bundle(checkpoint_path(cls_checkpoint));
      const TableDataset t = load_table(cls_data, cls_schema);
      const auto r = cond_gen_classification(b, t, cls_seed, parse_scheme(cls_scheme));
      save_json(cls_out, {{"command", invocation},
                          {"rows", r.rows},
                          {"accuracy", r.scores.accuracy},
                          {"macro_f1", r.scores.macro_f1},
                          {"micro_f1", r.scores.micro_f1}});
      std::cout << "accuracy " << r.scores.accuracy << " macro_f1 " << r.scores.macro_f1 << "\n";
      return 0;
    }

    if (*ablate) {
      if (abl_data.size() != abl_schema.size()) throw ConfigError("--data and --schema must be given the same number of times");
      const PipelineConfig cfg = flags.resolve();
      std::vector<TableDataset> tables;
      for (std::size_t i = 0; i < abl_data.size(); ++i) tables.push_back(load_table(abl_data[i], abl_schema[i]));
      const SchemaDescriptor fine_desc = SchemaDescriptor::load(abl_fine_schema);
      TableDataset fine_table = load_csv(abl_fine, fine_desc);
      fine_table.set_name(fine_desc.name.empty() ? fs::path(abl_fine).stem().string() : fine_desc.name);
      const TableDataset test_table = load_csv(abl_test, fine_desc);

      EvaluationOptions opt;
      opt.seed = abl_seed;
      if (!abl_classifiers.empty()) opt.classifiers = split_list(abl_classifiers);
      const std::vector<AblationVariant> variants{{"pretrained+type_specific", true, DecoderKind::type_specific},
                                                  {"pretrained+plain", true, DecoderKind::plain},
                                                  {"scratch+type_specific", false, DecoderKind::type_specific},
                                                  {"scratch+plain", false, DecoderKind::plain}};
      // The scratch variants reuse the pre-trained encoders and decoders and
      // only drop the pre-trained diffusion net, so each decoder kind is
      // pre-trained once.
      std::map<DecoderKind, CheckpointBundle> pretrained;
      std::shared_ptr<const NumberEncoder> shared_encoder;
      nlohmann::json rows = nlohmann::json::array();
      std::ostringstream text;
      text << std::fixed << std::setprecision(4);
      text << std::left << std::setw(26) << "variant" << "accuracy  macro_f1  DCR       PCT       fidelity  valid\n";
      for (const auto& v : variants) {
        auto it = pretrained.find(v.decoder);
        if (it == pretrained.end()) {
          PipelineConfig c = cfg;
          c.decoder_kind = v.decoder;
          c.pretrain_diffusion = true;
          it = pretrained.emplace(v.decoder, pretrain(tables, c, shared_encoder)).first;
          shared_encoder = it->second.number_encoder;
        }
        CheckpointBundle base = it->second;
        if (!v.pretrain_diffusion) {
          base.diffusion_pretrained.reset();
          base.config.pretrain_diffusion = false;
        }
        const CheckpointBundle tuned = finetune(base, fine_table);
        GenerationRequest req;
        req.scheme = Scheme::finetuned;
        req.rows = fine_table.row_count();
        req.seed = abl_seed;
        TableDataset synth = generate(tuned, req);
        bool valid = synth.columns() == fine_table.columns() && synth.row_count() == req.rows;
        for (std::size_t c = 0; valid && c < synth.column_count(); ++c) {
          if (synth.column(c).is_categorical()) {
            for (auto code : synth.codes(c)) valid = valid && code < synth.column(c).categories.size();
          } else {
            const auto& q = tuned.finetune_table()->transformers.at(synth.column(c).name);
            for (double x : synth.numbers(c)) valid = valid && x >= q.min() && x <= q.max();
          }
        }
        const fs::path dir = fs::path(abl_out) / v.name;
        save_csv(dir / "synthetic.csv", synth);
        const MetricReport r = evaluate(fine_table, test_table, synth, opt);
        nlohmann::json row = r.to_json();
        row["variant"] = v.name;
        row["pretrained_diffusion"] = v.pretrain_diffusion;
        row["decoder"] = v.decoder == DecoderKind::plain ? "plain" : "type_specific";
        row["schema_valid"] = valid;
        save_json(dir / "report.json", row);
        const double acc = r.tstr ? r.tstr->mean.accuracy : 0.0;
        const double f1 = r.tstr ? r.tstr->mean.macro_f1 : 0.0;
        text << std::left << std::setw(26) << v.name << acc << "    " << f1 << "    " << r.dcr->median << "    "
             << r.pct.value_or(0.0) << "    " << r.column.score << "    " << (valid ? "yes" : "NO") << "\n";
        rows.push_back(std::move(row));
      }
      write_report(fs::path(abl_out) / "ablation.json",
                   {{"command", invocation}, {"config", config_to_json(cfg)}, {"variants", rows}}, text.str());
      std::cout << text.str();
      for (const auto& row : rows) {
        if (!row["schema_valid"].get<bool>()) return 3;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    logger()->error("configuration: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return 1;
  }
  return 0;
}
