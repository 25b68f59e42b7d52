#include "prlc/codec.hpp"

#include <stdexcept>

namespace prlc::codec {

SourceBlock random_sources(const gf::Field& f, const GenerationSpec& spec, int payload_symbols,
                           Stream& rng) {
  SourceBlock sources(spec.total_packets(), std::vector<uint16_t>(payload_symbols));
  for (auto& row : sources)
    for (auto& sym : row) sym = static_cast<uint16_t>(rng.below(f.order()));
  return sources;
}

Packet encode_packet(const gf::Field& f, const GenerationSpec& spec, const SourceBlock& sources,
                     int generation, int klass, Stream& rng) {
  if (klass < 1 || klass > spec.layers()) throw std::domain_error("encode: class out of range");
  const int width = spec.beta[klass - 1];
  if (static_cast<int>(sources.size()) < width) throw std::domain_error("encode: sources missing");
  const int payload_symbols = sources.empty() ? 0 : static_cast<int>(sources[0].size());

  Packet p;
  p.generation = generation;
  p.klass = klass;
  p.coeffs.assign(spec.total_packets(), 0);
  p.payload.assign(payload_symbols, 0);
  for (int i = 0; i < width; ++i) {
    const uint16_t c = static_cast<uint16_t>(rng.below(f.order()));
    p.coeffs[i] = c;
    if (c == 0) continue;
    for (int j = 0; j < payload_symbols; ++j)
      p.payload[j] = f.add(p.payload[j], f.mul(c, sources[i][j]));
  }
  return p;
}

DecodingBuffer::DecodingBuffer(const gf::Field& f, const GenerationSpec& spec, int payload_symbols,
                               int generation)
    : f_(f), spec_(spec), payload_(payload_symbols), generation_(generation) {
  spec_.validate();
  if (payload_symbols < 0) throw std::domain_error("buffer: negative payload size");
  levels_.reserve(spec_.layers());
  for (int l = 0; l < spec_.layers(); ++l)
    levels_.emplace_back(f_, spec_.beta[l], payload_symbols);
  rank_.assign(spec_.layers(), 0);
}

bool DecodingBuffer::receive(const Packet& p) {
  if (p.generation != generation_) throw std::domain_error("buffer: packet from another generation");
  if (p.klass < 1 || p.klass > spec_.layers()) throw std::domain_error("buffer: class out of range");
  if (static_cast<int>(p.coeffs.size()) != spec_.total_packets() ||
      static_cast<int>(p.payload.size()) != payload_)
    throw std::domain_error("buffer: malformed packet");
  for (int i = spec_.beta[p.klass - 1]; i < spec_.total_packets(); ++i)
    if (p.coeffs[i] != 0) throw std::domain_error("buffer: nonzero coefficient above the packet class");

  // A class-c packet participates in every level >= c.  Innovation means
  // rank growth at its own level; such packets are the ones worth keeping.
  bool innovative = false;
  std::vector<uint16_t> row;
  for (int l = p.klass - 1; l < spec_.layers(); ++l) {
    row.assign(p.coeffs.begin(), p.coeffs.begin() + spec_.beta[l]);
    row.insert(row.end(), p.payload.begin(), p.payload.end());
    const bool grew = levels_[l].insert(row);
    rank_[l] = levels_[l].rank();
    if (l == p.klass - 1) innovative = grew;
  }
  if (innovative) stored_.push_back(p);
  return innovative;
}

std::vector<int> DecodingBuffer::layer_counts() const {
  std::vector<int> counts(rank_.size());
  for (size_t l = 0; l < rank_.size(); ++l) counts[l] = rank_[l] - (l ? rank_[l - 1] : 0);
  return counts;
}

int DecodingBuffer::decodable_layers() const {
  int best = 0;
  for (int l = 0; l < spec_.layers(); ++l)
    if (rank_[l] == spec_.beta[l]) best = l + 1;
  return best;
}

SourceBlock DecodingBuffer::decode(int layers) const {
  if (layers == 0) return {};
  if (layers < 0 || layers > spec_.layers()) throw std::domain_error("decode: layer count out of range");
  // Solve at the lowest full level covering the request: a full level
  // recovers every source beneath it even when lower levels never filled
  // on their own.
  int solve_at = -1;
  for (int l = layers - 1; l < spec_.layers(); ++l)
    if (rank_[l] == spec_.beta[l]) {
      solve_at = l;
      break;
    }
  if (solve_at < 0) throw std::domain_error("decode: insufficient rank");
  const auto& lvl = levels_[solve_at];
  // Full level rank means the reduced rows form the identity in pivot
  // order, so the mirrored payload rows are the sources themselves.
  SourceBlock sources(spec_.beta[layers - 1]);
  for (int i = 0; i < static_cast<int>(sources.size()); ++i) {
    const auto row = lvl.row(i);
    sources[i].assign(row.begin() + lvl.cols(), row.end());
  }
  return sources;
}

}  // namespace prlc::codec
