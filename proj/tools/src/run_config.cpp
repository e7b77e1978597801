#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include <toml.hpp>

namespace rblt::cli {

using nlohmann::json;

namespace {

[[noreturn]] void bad(std::string_view key, const std::string& what) {
  throw ConfigError("config key '" + std::string(key) + "': " + what);
}

const KeyInfo& find_key(std::string_view key) {
  for (const auto& k : config_keys())
    if (k.name == key) return k;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::uint64_t as_count(std::string_view key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto x = v.get<std::int64_t>();
    if (x < 0) bad(key, "must be non-negative");
    return static_cast<std::uint64_t>(x);
  }
  bad(key, "expected an integer");
}

double as_real(std::string_view key, const json& v) {
  if (!v.is_number()) bad(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(key, "must be finite");
  return x;
}

bool as_bool(std::string_view key, const json& v) {
  if (!v.is_boolean()) bad(key, "expected true or false");
  return v.get<bool>();
}

std::string as_string(std::string_view key, const json& v) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

// "path" or "path@weight", or a table {path = "...", weight = 0.5}.
TripleSource as_triple_source(std::string_view key, const json& v) {
  TripleSource src;
  if (v.is_object()) {
    for (const auto& [k, x] : v.items()) {
      if (k == "path") {
        src.path = as_string(key, x);
      } else if (k == "weight") {
        src.weight = as_real(key, x);
      } else {
        bad(key, "unknown field '" + k + "' in triple source");
      }
    }
    if (src.path.empty()) bad(key, "triple source needs a path");
  } else {
    const auto text = as_string(key, v);
    const auto at = text.rfind('@');
    if (at == std::string::npos) {
      src.path = text;
    } else {
      src.path = text.substr(0, at);
      const auto w = text.substr(at + 1);
      double weight = 0.0;
      const auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), weight);
      if (ec != std::errc() || end != w.data() + w.size()) bad(key, "cannot read weight in '" + text + "'");
      src.weight = weight;
    }
  }
  return src;
}

template <typename F>
void for_each_element(std::string_view key, const json& v, F&& f) {
  if (!v.is_array()) bad(key, "expected an array");
  for (const auto& x : v) f(x);
}

void set_value(RunConfig& c, std::string_view key, const json& v) {
  auto& t = c.train;
  auto paths = [&](std::vector<std::filesystem::path>& out) {
    out.clear();
    for_each_element(key, v, [&](const json& x) { out.emplace_back(as_string(key, x)); });
  };

  if (key == "dim") t.dim = as_count(key, v);
  else if (key == "batch_size") t.batch_size = as_count(key, v);
  else if (key == "chains") t.chains = as_count(key, v);
  else if (key == "gibbs_rounds") t.gibbs_rounds = as_count(key, v);
  else if (key == "epochs") t.epochs = as_count(key, v);
  else if (key == "observed_warmup_epochs") t.observed_warmup_epochs = as_count(key, v);
  else if (key == "seed") t.seed = as_count(key, v);
  else if (key == "threads") t.threads = as_count(key, v);
  else if (key == "learning_rate") t.adam.learning_rate = as_real(key, v);
  else if (key == "beta1") t.adam.beta1 = as_real(key, v);
  else if (key == "beta2") t.adam.beta2 = as_real(key, v);
  else if (key == "epsilon") t.adam.epsilon = as_real(key, v);
  else if (key == "beta1_decay") t.adam.beta1_decay = as_real(key, v);
  else if (key == "l2_relations") t.l2_relations = as_real(key, v);
  else if (key == "l2_all") t.l2_all = as_real(key, v);
  else if (key == "energy") {
    try {
      t.energy = parse_energy_kind(as_string(key, v));
    } catch (const ConfigError& e) {
      bad(key, e.what());
    }
  }
  else if (key == "triples") {
    c.triples.clear();
    for_each_element(key, v, [&](const json& x) { c.triples.push_back(as_triple_source(key, x)); });
  }
  else if (key == "corpus") paths(c.corpus);
  else if (key == "window") c.window = as_count(key, v);
  else if (key == "corpus_weight") c.corpus_weight = as_real(key, v);
  else if (key == "min_count") c.min_count = as_count(key, v);
  else if (key == "strip_senses") c.strip_senses = as_bool(key, v);
  else if (key == "cooccurrence_relation") c.cooccurrence_relation = as_string(key, v);
  else if (key == "output_dir") c.output_dir = as_string(key, v);
  else if (key == "resume") c.resume = as_bool(key, v);
  else if (key == "checkpoint") c.checkpoint = as_string(key, v);
  else if (key == "vocab") c.vocab = as_string(key, v);
  else if (key == "valid") paths(c.valid);
  else if (key == "test") paths(c.test);
  else if (key == "known") paths(c.known);
  else if (key == "corruption_seed") c.corruption_seed = as_count(key, v);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

json from_toml(std::string_view key, const toml::node& node) {
  if (auto x = node.as_integer()) return x->get();
  if (auto x = node.as_floating_point()) return x->get();
  if (auto x = node.as_boolean()) return x->get();
  if (auto x = node.as_string()) return x->get();
  if (auto arr = node.as_array()) {
    json out = json::array();
    for (const auto& el : *arr) out.push_back(from_toml(key, el));
    return out;
  }
  if (auto tbl = node.as_table()) {
    if (!tbl->is_inline()) bad(key, "sections are not supported; the config is a flat list of keys");
    json out = json::object();
    for (const auto& [k, el] : *tbl) out[std::string(k.str())] = from_toml(key, el);
    return out;
  }
  bad(key, "unsupported value type");
}

json parse_flag_text(std::string_view key, ValueType type, std::string_view text) {
  const std::string s(text);
  switch (type) {
    case ValueType::Integer: {
      std::uint64_t x = 0;
      const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
      if (ec != std::errc() || end != s.data() + s.size()) bad(key, "expected a non-negative integer, got '" + s + "'");
      return x;
    }
    case ValueType::Real: {
      double x = 0.0;
      const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
      if (ec != std::errc() || end != s.data() + s.size()) bad(key, "expected a number, got '" + s + "'");
      return x;
    }
    case ValueType::Boolean:
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
      bad(key, "expected true or false, got '" + s + "'");
    default:
      return s;
  }
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (window == 0) bad("window", "must be positive");
  if (!(corpus_weight >= 0.0)) bad("corpus_weight", "must be non-negative");
  if (min_count == 0) bad("min_count", "must be positive");
  if (cooccurrence_relation.empty()) bad("cooccurrence_relation", "must not be empty");
  if (output_dir.empty()) bad("output_dir", "must not be empty");
  for (const auto& src : triples)
    if (!(src.weight >= 0.0) || !std::isfinite(src.weight)) bad("triples", "weights must be finite and non-negative");
  if (train.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) bad("seed", "too large");
}

const std::vector<KeyInfo>& config_keys() {
  using enum ValueType;
  static const std::vector<KeyInfo> keys{
      {"dim", Integer, "embedding dimension d"},
      {"batch_size", Integer, "data triples per step (B)"},
      {"chains", Integer, "persistent Gibbs chains (M)"},
      {"gibbs_rounds", Integer, "Gibbs sweeps per step"},
      {"learning_rate", Real, "Adam step size alpha"},
      {"beta1", Real, "Adam first-moment decay"},
      {"beta2", Real, "Adam second-moment decay"},
      {"epsilon", Real, "Adam epsilon"},
      {"beta1_decay", Real, "lambda, per-step decay of beta1"},
      {"l2_relations", Real, "L2 weight on relation operators"},
      {"l2_all", Real, "L2 weight on all parameters"},
      {"epochs", Integer, "total epochs"},
      {"observed_warmup_epochs", Integer, "leading epochs that skip partially observed triples"},
      {"seed", Integer, "initialization, chain and shuffle seed"},
      {"energy", String, "dot, cosine or frobenius"},
      {"threads", Integer, "worker threads for chain sweeps"},
      {"triples", TripleList, "triple TSV files, 'path' or 'path@weight'"},
      {"corpus", StringList, "text corpora, one sentence per line"},
      {"window", Integer, "co-occurrence window"},
      {"corpus_weight", Real, "weight of corpus co-occurrence triples"},
      {"min_count", Integer, "minimum count for corpus-only words"},
      {"strip_senses", Boolean, "remove trailing sense markers like _1"},
      {"cooccurrence_relation", String, "relation name for corpus pairs"},
      {"output_dir", String, "run directory"},
      {"resume", Boolean, "continue from output_dir/checkpoint.rblt"},
      {"checkpoint", String, "checkpoint to evaluate"},
      {"vocab", String, "vocabulary directory"},
      {"valid", StringList, "validation triple files"},
      {"test", StringList, "test triple files"},
      {"known", StringList, "extra true triples excluded from corruption"},
      {"corruption_seed", Integer, "seed for evaluation corruptions"},
  };
  return keys;
}

RunConfig default_run_config() {
  RunConfig c;
  if (const char* env = std::getenv("RBLT_THREADS"); env != nullptr && *env != '\0') {
    try {
      c.train.threads = parse_flag_text("RBLT_THREADS", ValueType::Integer, env).get<std::uint64_t>();
    } catch (const ConfigError&) {
      throw ConfigError("environment variable RBLT_THREADS must be a positive integer");
    }
  }
  return c;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  toml::table doc;
  try {
    doc = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config file " << path.string() << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  for (const auto& [k, node] : doc) {
    const std::string key(k.str());
    find_key(key);
    set_value(config, key, from_toml(key, node));
  }
}

void apply_flag(RunConfig& config, std::string_view key, std::string_view text) {
  const auto& info = find_key(key);
  if (info.type == ValueType::StringList || info.type == ValueType::TripleList) {
    json current = to_json(config)[std::string(key)];
    current.push_back(std::string(text));
    set_value(config, key, current);
  } else {
    set_value(config, key, parse_flag_text(key, info.type, text));
  }
}

void clear_list(RunConfig& config, std::string_view key) { set_value(config, key, json::array()); }

json to_json(const RunConfig& c) {
  const auto& t = c.train;
  auto paths = [](const std::vector<std::filesystem::path>& ps) {
    json out = json::array();
    for (const auto& p : ps) out.push_back(p.string());
    return out;
  };
  json triples = json::array();
  for (const auto& s : c.triples) triples.push_back({{"path", s.path.string()}, {"weight", s.weight}});
  return json{
      {"dim", t.dim},
      {"batch_size", t.batch_size},
      {"chains", t.chains},
      {"gibbs_rounds", t.gibbs_rounds},
      {"learning_rate", t.adam.learning_rate},
      {"beta1", t.adam.beta1},
      {"beta2", t.adam.beta2},
      {"epsilon", t.adam.epsilon},
      {"beta1_decay", t.adam.beta1_decay},
      {"l2_relations", t.l2_relations},
      {"l2_all", t.l2_all},
      {"epochs", t.epochs},
      {"observed_warmup_epochs", t.observed_warmup_epochs},
      {"seed", t.seed},
      {"energy", to_string(t.energy)},
      {"threads", t.threads},
      {"triples", triples},
      {"corpus", paths(c.corpus)},
      {"window", c.window},
      {"corpus_weight", c.corpus_weight},
      {"min_count", c.min_count},
      {"strip_senses", c.strip_senses},
      {"cooccurrence_relation", c.cooccurrence_relation},
      {"output_dir", c.output_dir.string()},
      {"resume", c.resume},
      {"checkpoint", c.checkpoint.string()},
      {"vocab", c.vocab.string()},
      {"valid", paths(c.valid)},
      {"test", paths(c.test)},
      {"known", paths(c.known)},
      {"corruption_seed", c.corruption_seed},
  };
}

std::string to_toml(const RunConfig& config) {
  const json j = to_json(config);
  toml::table doc;
  for (const auto& info : config_keys()) {
    const auto& v = j.at(std::string(info.name));
    const std::string key(info.name);
    switch (info.type) {
      case ValueType::Integer: doc.insert(key, static_cast<std::int64_t>(v.get<std::uint64_t>())); break;
      case ValueType::Real: doc.insert(key, v.get<double>()); break;
      case ValueType::Boolean: doc.insert(key, v.get<bool>()); break;
      case ValueType::String: doc.insert(key, v.get<std::string>()); break;
      case ValueType::StringList: {
        toml::array arr;
        for (const auto& x : v) arr.push_back(x.get<std::string>());
        doc.insert(key, std::move(arr));
        break;
      }
      case ValueType::TripleList: {
        toml::array arr;
        for (const auto& x : v) {
          toml::table entry{{"path", x.at("path").get<std::string>()}, {"weight", x.at("weight").get<double>()}};
          entry.is_inline(true);
          arr.push_back(std::move(entry));
        }
        doc.insert(key, std::move(arr));
        break;
      }
    }
  }
  std::ostringstream out;
  out << doc << "\n";
  return out.str();
}

}  // namespace rblt::cli
