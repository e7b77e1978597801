#include "rblt/triple_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <type_traits>

#include "rblt/corpus.hpp"

namespace rblt {

namespace {

[[noreturn]] void fail(std::string_view where, const std::string& what) {
  throw ParseError(std::string(where) + ": " + what);
}

}  // namespace

TripleRecord parse_triple_line(std::string_view line, std::string_view where) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (fields.size() < 3 || fields.size() > 4)
    fail(where, "expected 3 or 4 tab-separated fields, found " + std::to_string(fields.size()));
  for (std::size_t i = 0; i < 3; ++i)
    if (fields[i].empty()) fail(where, "empty field " + std::to_string(i + 1));

  TripleRecord rec{std::string(fields[0]), std::string(fields[1]), std::string(fields[2]), 1.0};
  const int unobserved = (rec.source == kUnobserved) + (rec.relation == kUnobserved) + (rec.target == kUnobserved);
  if (unobserved > 1) fail(where, "at most one slot may be '?'");

  if (fields.size() == 4) {
    const auto w = fields[3];
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), rec.weight);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail(where, "weight '" + std::string(w) + "' is not a number");
    if (!std::isfinite(rec.weight) || rec.weight <= 0.0)
      fail(where, "weight must be a positive finite number, got " + std::string(w));
  }
  return rec;
}

std::vector<TripleRecord> read_triple_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read triple file " + path.string());
  std::vector<TripleRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    out.push_back(parse_triple_line(line, path.string() + ":" + std::to_string(lineno)));
  }
  return out;
}

namespace {

template <class Vocab>
std::vector<Triple> load_impl(const std::filesystem::path& path, Vocab& vocab, const TripleFileOptions& options) {
  if (!(options.weight_scale >= 0.0) || !std::isfinite(options.weight_scale))
    throw ConfigError("triple file weight must be finite and non-negative");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read triple file " + path.string());
  std::vector<Triple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    auto rec = parse_triple_line(line, where);
    if (options.strip_senses) {
      if (rec.source != kUnobserved) rec.source = strip_sense_ids(rec.source);
      if (rec.target != kUnobserved) rec.target = strip_sense_ids(rec.target);
    }

    auto word = [&](const std::string& tok) -> std::optional<WordId> {
      if (tok == kUnobserved) return std::nullopt;
      if (auto id = vocab.find_word(tok)) return id;
      if constexpr (!std::is_const_v<Vocab>) {
        if (options.extend_vocabulary) return vocab.add_word(tok);
      }
      fail(where, "unknown word '" + tok + "'");
    };
    auto relation = [&](const std::string& name) -> std::optional<RelId> {
      if (name == kUnobserved) return std::nullopt;
      if (auto id = vocab.find_relation(name)) return id;
      if constexpr (!std::is_const_v<Vocab>) {
        if (options.extend_vocabulary) return vocab.add_relation(name);
      }
      fail(where, "unknown relation '" + name + "'");
    };
    out.push_back(Triple{word(rec.source), relation(rec.relation), word(rec.target), rec.weight * options.weight_scale});
  }
  return out;
}

}  // namespace

std::vector<Triple> load_triples(const std::filesystem::path& path, Vocabulary& vocab,
                                 const TripleFileOptions& options) {
  return load_impl(path, vocab, options);
}

std::vector<Triple> load_triples(const std::filesystem::path& path, const Vocabulary& vocab,
                                 const TripleFileOptions& options) {
  return load_impl(path, vocab, options);
}

void write_triples(std::ostream& out, std::span<const Triple> triples, const Vocabulary& vocab, bool include_weight) {
  char buf[32];
  for (const auto& t : triples) {
    out << (t.source ? vocab.word(*t.source) : std::string(kUnobserved)) << '\t'
        << (t.relation ? vocab.relation(*t.relation) : std::string(kUnobserved)) << '\t'
        << (t.target ? vocab.word(*t.target) : std::string(kUnobserved));
    if (include_weight) {
      std::snprintf(buf, sizeof buf, "%.17g", t.weight);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

void save_triples(const std::filesystem::path& path, std::span<const Triple> triples, const Vocabulary& vocab,
                  bool include_weight) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write triple file " + path.string());
  write_triples(out, triples, vocab, include_weight);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void export_embeddings(const ModelParams& params, const Vocabulary& vocab, EmbeddingTable which,
                       const std::filesystem::path& path) {
  if (vocab.word_count() != params.vocab_size())
    throw ConfigError("vocabulary has " + std::to_string(vocab.word_count()) + " words but the model has " +
                      std::to_string(params.vocab_size()));
  const RowMatrix& table = which == EmbeddingTable::Source ? params.source : params.target;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embeddings to " + path.string());
  out << table.rows() << ' ' << table.cols() << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    out << vocab.word(WordId{static_cast<std::size_t>(i)});
    for (Eigen::Index k = 0; k < table.cols(); ++k) {
      std::snprintf(buf, sizeof buf, " %.17g", table(i, k));
      out << buf;
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace rblt
