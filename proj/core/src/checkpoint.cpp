#include "rblt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rblt {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <class T>
  void put(T value) {
    value = byteswap_if_big(value);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_bytes(const std::string& s) {
    put<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void put_blocks(const ParameterBlocks& p) {
    for (std::size_t b = 0; b < p.block_count(); ++b)
      for (double v : p.block(b)) put(v);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <class T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) throw ParseError(path_ + ": truncated checkpoint");
    return byteswap_if_big(value);
  }
  std::string get_bytes(std::uint64_t limit) {
    const auto n = get<std::uint64_t>();
    if (n > limit) throw ParseError(path_ + ": corrupt checkpoint (string length " + std::to_string(n) + ")");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw ParseError(path_ + ": truncated checkpoint");
    return s;
  }
  void get_blocks(ParameterBlocks& p) {
    for (std::size_t b = 0; b < p.block_count(); ++b)
      for (double& v : p.block(b)) v = get<double>();
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw ParseError(path_ + ": trailing bytes after checkpoint");
  }
  const std::string& path() const { return path_; }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  // Write to a sibling file and rename so an interrupted save never clobbers the last good checkpoint.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    Writer w(out);
    out.write(kCheckpointMagic, 4);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.energy));
    w.put<std::uint64_t>(ck.epochs_done);
    w.put<std::uint64_t>(ck.params.vocab_size());
    w.put<std::uint64_t>(ck.params.dim());
    w.put<std::uint64_t>(ck.params.relation_count());
    w.put_blocks(ck.params);
    w.put<std::uint64_t>(ck.adam.step);
    w.put_blocks(ck.adam.first_moment);
    w.put_blocks(ck.adam.second_moment);
    w.put<std::uint64_t>(ck.pool.size());
    for (const auto& chain : ck.pool.chains()) {
      w.put<std::uint64_t>(chain.state.source.index);
      w.put<std::uint64_t>(chain.state.relation.index);
      w.put<std::uint64_t>(chain.state.target.index);
      std::ostringstream rng_text;
      rng_text << chain.rng;
      w.put_bytes(rng_text.str());
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed for checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  Reader r(in, path.string());

  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw ParseError(path.string() + ": not an RBLT checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw ParseError(path.string() + ": checkpoint format version " + std::to_string(version) + ", expected " +
                     std::to_string(kCheckpointVersion));

  Checkpoint ck;
  const auto kind = r.get<std::uint32_t>();
  if (kind > static_cast<std::uint32_t>(EnergyKind::FrobeniusCosine))
    throw ParseError(path.string() + ": unknown energy kind " + std::to_string(kind));
  ck.energy = static_cast<EnergyKind>(kind);
  ck.epochs_done = r.get<std::uint64_t>();
  const auto nv = r.get<std::uint64_t>();
  const auto d = r.get<std::uint64_t>();
  const auto nr = r.get<std::uint64_t>();
  constexpr std::uint64_t kSane = std::uint64_t{1} << 32;
  if (nv >= kSane || d >= kSane || nr >= kSane || d == 0 || nr == 0)
    throw ParseError(path.string() + ": implausible model shape");

  ck.params = ModelParams(nv, nr, d);
  r.get_blocks(ck.params);
  ck.adam = AdamState::zeros_like(ck.params);
  ck.adam.step = r.get<std::uint64_t>();
  r.get_blocks(ck.adam.first_moment);
  r.get_blocks(ck.adam.second_moment);

  const auto m = r.get<std::uint64_t>();
  if (m >= kSane) throw ParseError(path.string() + ": implausible chain count");
  std::vector<ChainState> states;
  std::vector<std::string> rng_states;
  for (std::uint64_t k = 0; k < m; ++k) {
    ChainState s{WordId{r.get<std::uint64_t>()}, RelId{r.get<std::uint64_t>()}, WordId{r.get<std::uint64_t>()}};
    if (s.source.index >= nv || s.target.index >= nv || s.relation.index >= nr)
      throw ParseError(path.string() + ": chain " + std::to_string(k) + " is outside the model");
    states.push_back(s);
    rng_states.push_back(r.get_bytes(1 << 20));
  }
  r.expect_end();

  ck.pool = ChainPool(states, 0);
  for (std::size_t k = 0; k < states.size(); ++k) {
    std::istringstream text(rng_states[k]);
    text >> ck.pool.chains()[k].rng;
    if (!text) throw ParseError(path.string() + ": bad generator state for chain " + std::to_string(k));
  }
  return ck;
}

}  // namespace rblt
