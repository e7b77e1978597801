#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rblt/rblt.hpp"
#include "run_config.hpp"

#ifndef RBLT_VERSION
#define RBLT_VERSION "unknown"
#endif

namespace rblt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json build_info() {
  return json{{"rblt", RBLT_VERSION},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Registers --config plus one flag per config key on a subcommand.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::vector<std::string>> values;

  void attach(CLI::App& sub) {
    sub.add_option("--config", config_path, "TOML file of config keys")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) {
      const std::string name(key.name);
      auto* opt = sub.add_option("--" + name, values[name], std::string(key.help));
      if (key.type != ValueType::StringList && key.type != ValueType::TripleList) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  RunConfig resolve() const {
    RunConfig rc = default_run_config();
    if (!config_path.empty()) apply_config_file(rc, config_path);
    for (const auto& [key, texts] : values) {
      if (texts.empty()) continue;
      const auto& info = *std::find_if(config_keys().begin(), config_keys().end(),
                                       [&](const KeyInfo& k) { return k.name == key; });
      const bool list = info.type == ValueType::StringList || info.type == ValueType::TripleList;
      if (list) clear_list(rc, key);
      for (const auto& t : texts) apply_flag(rc, key, t);
    }
    rc.validate();
    return rc;
  }
};

Vocabulary build_run_vocabulary(const RunConfig& rc) {
  VocabularySources sources;
  for (const auto& src : rc.triples) sources.triple_files.push_back(src.path);
  sources.corpus_files = rc.corpus;
  VocabularyOptions opts;
  opts.min_count = rc.min_count;
  opts.strip_senses = rc.strip_senses;
  opts.cooccurrence_relation = rc.cooccurrence_relation;
  return build_vocabulary(sources, opts);
}

std::vector<Triple> load_run_data(const RunConfig& rc, const Vocabulary& vocab) {
  std::vector<Triple> data;
  for (const auto& src : rc.triples) {
    TripleFileOptions opts;
    opts.strip_senses = rc.strip_senses;
    opts.weight_scale = src.weight;
    const auto part = load_triples(src.path, vocab, opts);
    data.insert(data.end(), part.begin(), part.end());
  }
  if (!rc.corpus.empty()) {
    const RelId rel = vocab.relation_id(rc.cooccurrence_relation);
    for (const auto& path : rc.corpus) {
      for_each_cooccurrence(path, rc.window, vocab, rel, [&](const Triple& t) {
        data.push_back(t);
        data.back().weight = rc.corpus_weight;
      });
    }
  }
  return data;
}

int cmd_train(const RunConfig& rc, const std::vector<std::string>& argv, std::ostream& out) {
  if (rc.triples.empty() && rc.corpus.empty()) throw ConfigError("config key 'triples': no training data given");
  const fs::path dir = rc.output_dir;
  const fs::path latest = dir / "checkpoint.rblt";
  fs::create_directories(dir / "checkpoints");

  const bool resuming = rc.resume && fs::exists(latest);
  Vocabulary vocab;
  std::optional<Checkpoint> resume_from;
  if (resuming) {
    vocab = Vocabulary::load(dir / "vocab");
    resume_from = load_checkpoint(latest);
    if (resume_from->energy != rc.train.energy)
      throw ConfigError("config key 'energy': checkpoint was trained with " + std::string(to_string(resume_from->energy)));
    if (resume_from->params.dim() != rc.train.dim)
      throw ConfigError("config key 'dim': checkpoint has dimension " + std::to_string(resume_from->params.dim()));
  } else {
    vocab = build_run_vocabulary(rc);
    fs::create_directories(dir / "vocab");
    vocab.save(dir / "vocab");
  }
  if (vocab.relation_count() == 0) throw ConfigError("config key 'triples': the data names no relations");
  auto data = load_run_data(rc, vocab);

  json manifest{{"command", "train"},
                {"argv", argv},
                {"config", to_json(rc)},
                {"build", build_info()},
                {"started", utc_now()},
                {"vocab_size", vocab.word_count()},
                {"relation_count", vocab.relation_count()},
                {"training_triples", data.size()},
                {"resumed_from_epoch", resume_from ? json(resume_from->epochs_done) : json(nullptr)}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "config.toml", to_toml(rc));

  auto trainer = resume_from ? Trainer(resume_from->params, resume_from->adam, resume_from->pool,
                                       resume_from->epochs_done, std::move(data), rc.train)
                             : Trainer(initialize_params(vocab.word_count(), vocab.relation_count(), rc.train.dim,
                                                         rc.train.seed),
                                       std::move(data), rc.train);

  auto save = [&](const Trainer& t) {
    const Checkpoint ck{t.params(), t.adam(), t.pool(), rc.train.energy, t.epochs_done()};
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04zu.rblt", t.epochs_done());
    save_checkpoint(ck, dir / "checkpoints" / name);
    save_checkpoint(ck, latest);
  };

  std::ofstream log(dir / "train_log.jsonl", resuming ? std::ios::app : std::ios::trunc);
  if (!resuming) save(trainer);
  out << "training " << trainer.epochs_done() << " -> " << rc.train.epochs << " epochs on " << manifest["training_triples"]
      << " triples (|V|=" << vocab.word_count() << ", |R|=" << vocab.relation_count() << ")\n";
  while (trainer.epochs_done() < rc.train.epochs) {
    const auto rec = trainer.run_epoch();
    log << rec.to_json_line() << "\n" << std::flush;
    save(trainer);
    out << rec.to_json_line() << "\n" << std::flush;
  }
  out << "checkpoint: " << latest.string() << "\n";
  return kExitOk;
}

std::vector<Triple> load_all(const std::vector<fs::path>& paths, const Vocabulary& vocab, bool strip) {
  std::vector<Triple> all;
  TripleFileOptions opts;
  opts.strip_senses = strip;
  for (const auto& p : paths) {
    const auto part = load_triples(p, vocab, opts);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

int cmd_eval(RunConfig rc, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  if (rc.checkpoint.empty()) rc.checkpoint = rc.output_dir / "checkpoint.rblt";
  if (rc.vocab.empty()) rc.vocab = rc.output_dir / "vocab";
  if (rc.valid.empty()) throw ConfigError("config key 'valid': no validation files given");
  if (rc.test.empty()) throw ConfigError("config key 'test': no test files given");

  const auto vocab = Vocabulary::load(rc.vocab);
  const auto ck = load_checkpoint(rc.checkpoint);
  if (ck.params.vocab_size() != vocab.word_count() || ck.params.relation_count() != vocab.relation_count())
    throw ConfigError("config key 'vocab': vocabulary does not match the checkpoint");

  const auto valid = load_all(rc.valid, vocab, rc.strip_senses);
  const auto test = load_all(rc.test, vocab, rc.strip_senses);
  std::vector<fs::path> known_files = rc.known;
  for (const auto& src : rc.triples) known_files.push_back(src.path);
  TripleSet known;
  for (const auto& t : load_all(known_files, vocab, rc.strip_senses))
    if (t.fully_observed()) known.insert(t);
  known.insert(valid);
  known.insert(test);

  Rng rng(rc.corruption_seed);
  const auto scored_valid = score_with_corruptions(ck.params, ck.energy, valid, known, rng);
  const auto scored_test = score_with_corruptions(ck.params, ck.energy, test, known, rng);
  std::vector<std::string> warnings;
  const auto thresholds = fit_thresholds(scored_valid, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  const auto report = classify_and_report(scored_test, thresholds);

  fs::create_directories(rc.output_dir);
  const auto table = report.to_table(&vocab);
  out << table;
  write_text(rc.output_dir / "eval_report.txt", table);
  write_text(rc.output_dir / "eval_report.jsonl", report.to_json_lines(&vocab));
  json manifest{{"command", "eval"},
                {"argv", argv},
                {"config", to_json(rc)},
                {"build", build_info()},
                {"started", utc_now()},
                {"energy", std::string(to_string(ck.energy))},
                {"checkpoint_epochs", ck.epochs_done},
                {"corruption_seed", rc.corruption_seed},
                {"warnings", warnings}};
  write_text(rc.output_dir / "eval_manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

struct CoocArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::size_t window = 5;
  std::string vocab_from;
  std::string relation = "appears_in_sentence_with";
  std::size_t min_count = 1;
};

int cmd_extract_cooc(const CoocArgs& a, std::ostream& out) {
  if (a.window == 0) throw ConfigError("config key 'window': must be positive");
  if (a.min_count == 0) throw ConfigError("config key 'min_count': must be positive");
  Vocabulary vocab;
  if (!a.vocab_from.empty()) {
    vocab = Vocabulary::load(a.vocab_from);
  } else {
    VocabularySources sources;
    for (const auto& p : a.inputs) sources.corpus_files.emplace_back(p);
    VocabularyOptions opts;
    opts.min_count = a.min_count;
    opts.cooccurrence_relation = a.relation;
    vocab = build_vocabulary(sources, opts);
  }
  const RelId rel = vocab.add_relation(a.relation);

  std::ofstream file;
  if (a.output != "-") {
    file.open(a.output);
    if (!file) throw std::runtime_error("cannot write " + a.output);
  }
  std::ostream& sink = a.output == "-" ? out : file;
  std::size_t n = 0;
  for (const auto& p : a.inputs) {
    n += for_each_cooccurrence(p, a.window, vocab, rel, [&](const Triple& t) {
      sink << vocab.word(*t.source) << '\t' << a.relation << '\t' << vocab.word(*t.target) << '\n';
    });
  }
  if (a.output != "-") out << n << " triples written to " << a.output << "\n";
  return kExitOk;
}

struct ExportArgs {
  std::string checkpoint;
  std::string vocab;
  std::string which = "source";
  std::string output;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  const auto vocab = Vocabulary::load(a.vocab);
  const auto ck = load_checkpoint(a.checkpoint);
  if (ck.params.vocab_size() != vocab.word_count()) throw ConfigError("config key 'vocab': size does not match checkpoint");
  export_embeddings(ck.params, vocab, a.which == "target" ? EmbeddingTable::Target : EmbeddingTable::Source, a.output);
  out << "wrote " << vocab.word_count() << " " << a.which << " vectors of dimension " << ck.params.dim() << " to "
      << a.output << "\n";
  return kExitOk;
}

int cmd_make_planted(const PlantedConfig& pc, const std::string& dir_name, std::ostream& out) {
  const fs::path dir = dir_name;
  const auto inst = make_planted_instance(pc);
  fs::create_directories(dir / "vocab");
  inst.vocab.save(dir / "vocab");
  save_triples(dir / "train.tsv", inst.train, inst.vocab);
  save_triples(dir / "valid.tsv", inst.valid, inst.vocab);
  save_triples(dir / "test.tsv", inst.test, inst.vocab);
  // The ground truth as a checkpoint so `eval` can score it directly.
  ChainPool pool({ChainState{WordId{0}, RelId{0}, WordId{0}}}, pc.seed);
  save_checkpoint(Checkpoint{inst.truth, AdamState::zeros_like(inst.truth), pool, inst.truth_energy, 0},
                  dir / "truth.rblt");
  write_text(dir / "planted.json", json::parse(inst.describe()).dump(2) + "\n");
  out << "train " << inst.train.size() << ", valid " << inst.valid.size() << ", test " << inst.test.size()
      << " triples in " << dir.string() << "\n";
  return kExitOk;
}

struct OracleArgs {
  std::size_t vocab = 15;
  std::size_t relations = 3;
  std::size_t dim = 4;
  std::string energy = "cosine";
  std::size_t sweeps = 10000;
  std::size_t chains = 10;
  std::size_t burn_in = 50;
  std::uint64_t seed = 1;
  double scale = 1.0;
  double threshold = 0.95;
};

int cmd_oracle_check(const OracleArgs& a, std::ostream& out) {
  const auto kind = parse_energy_kind(a.energy);
  if (a.vocab == 0 || a.relations == 0 || a.dim == 0) throw ConfigError("config key 'vocab': sizes must be positive");
  // Gaussian parameters so the distribution is far from uniform.
  Rng rng(a.seed);
  std::normal_distribution<double> gauss(0.0, a.scale);
  ModelParams params(a.vocab, a.relations, a.dim);
  for (std::size_t b = 0; b < params.block_count(); ++b)
    for (double& x : params.block(b)) x = gauss(rng);

  const auto exact = exact_model_expectation_grad(params, kind);
  const auto sampled = sampled_model_expectation_grad(params, kind, a.chains, a.sweeps, a.burn_in, a.seed);
  const double cos = sampled.dot(exact) / (sampled.norm() * exact.norm());
  out << "states " << a.vocab * a.vocab * a.relations << ", sweeps " << a.sweeps << ", energy " << to_string(kind) << "\n";
  out << "cosine_similarity " << std::setprecision(6) << cos << "\n";
  if (cos < a.threshold) {
    out << "below the expected " << a.threshold << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relational embeddings trained as a Boltzmann model over (source, relation, target) triples", "rblt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", RBLT_VERSION);

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "train with checkpoints every epoch");
  train_flags.attach(*train);

  ConfigFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "triple classification of test files against a checkpoint");
  eval_flags.attach(*eval);

  CoocArgs cooc;
  auto* extract = app.add_subcommand("extract-cooc", "corpus to co-occurrence triple TSV");
  extract->add_option("--in", cooc.inputs, "corpus files, one sentence per line")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", cooc.output, "output TSV, '-' for stdout")->required();
  extract->add_option("--window", cooc.window, "maximum distance between paired tokens")->capture_default_str();
  extract->add_option("--vocab-from", cooc.vocab_from, "vocabulary directory; default builds one from the corpus");
  extract->add_option("--relation", cooc.relation, "relation name written in the TSV")->capture_default_str();
  extract->add_option("--min_count", cooc.min_count, "minimum count when building the vocabulary")->capture_default_str();

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export", "write source or target embeddings as text");
  export_cmd->add_option("--checkpoint", exp.checkpoint)->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--vocab", exp.vocab, "vocabulary directory")->required()->check(CLI::ExistingDirectory);
  export_cmd->add_option("--which", exp.which)->check(CLI::IsMember({"source", "target"}))->capture_default_str();
  export_cmd->add_option("--out", exp.output)->required();

  PlantedConfig planted;
  std::string planted_dir;
  auto* make_planted = app.add_subcommand("make-planted", "synthetic instance drawn from a known ground truth");
  make_planted->add_option("--out", planted_dir, "output directory")->required();
  make_planted->add_option("--vocab_size", planted.vocab_size)->capture_default_str();
  make_planted->add_option("--relations", planted.relation_count)->capture_default_str();
  make_planted->add_option("--dim", planted.dim)->capture_default_str();
  make_planted->add_option("--train_triples", planted.train_triples)->capture_default_str();
  make_planted->add_option("--seed", planted.seed)->capture_default_str();
  make_planted->add_option("--inverse_temperature", planted.inverse_temperature)->capture_default_str();
  make_planted->add_option("--valid_fraction", planted.valid_fraction)->capture_default_str();
  make_planted->add_option("--test_fraction", planted.test_fraction)->capture_default_str();

  OracleArgs oracle;
  auto* oracle_check = app.add_subcommand("oracle-check", "compare the sampled model expectation with exact enumeration");
  oracle_check->add_option("--vocab", oracle.vocab, "vocabulary size")->capture_default_str();
  oracle_check->add_option("--relations", oracle.relations)->capture_default_str();
  oracle_check->add_option("--dim", oracle.dim)->capture_default_str();
  oracle_check->add_option("--energy", oracle.energy)->capture_default_str();
  oracle_check->add_option("--sweeps", oracle.sweeps, "total recorded sweeps over all chains")->capture_default_str();
  oracle_check->add_option("--chains", oracle.chains)->capture_default_str();
  oracle_check->add_option("--burn_in", oracle.burn_in)->capture_default_str();
  oracle_check->add_option("--seed", oracle.seed)->capture_default_str();
  oracle_check->add_option("--scale", oracle.scale, "standard deviation of the random parameters")->capture_default_str();
  oracle_check->add_option("--threshold", oracle.threshold)->capture_default_str();

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags.resolve(), argv, out);
    if (eval->parsed()) return cmd_eval(eval_flags.resolve(), argv, out, err);
    if (extract->parsed()) return cmd_extract_cooc(cooc, out);
    if (export_cmd->parsed()) return cmd_export(exp, out);
    if (make_planted->parsed()) return cmd_make_planted(planted, planted_dir, out);
    if (oracle_check->parsed()) return cmd_oracle_check(oracle, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingAborted& e) {
    err << "training aborted: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace rblt::cli
