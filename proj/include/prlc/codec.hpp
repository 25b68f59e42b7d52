#pragma once

#include <vector>

#include "prlc/galois.hpp"
#include "prlc/generation.hpp"
#include "prlc/rng.hpp"

// Operational prioritized random linear codec.  A class-l packet is a
// uniform random combination of the first beta_l source packets of its
// generation, so priority is embedded in the code structure itself.
namespace prlc::codec {

struct Packet {
  int generation = 0;
  int klass = 0;                   // 1-based priority class
  std::vector<uint16_t> coeffs;    // beta_L header symbols; zero above beta_klass
  std::vector<uint16_t> payload;
};

// Uniform-size source block of one generation: beta_L rows of symbols.
using SourceBlock = std::vector<std::vector<uint16_t>>;

SourceBlock random_sources(const gf::Field& f, const GenerationSpec& spec, int payload_symbols,
                           Stream& rng);

// Fresh random combination over the first beta_klass sources.
Packet encode_packet(const gf::Field& f, const GenerationSpec& spec, const SourceBlock& sources,
                     int generation, int klass, Stream& rng);

// Receiver-side decoding state of a single generation.
//
// One reduced accumulator per class level tracks the span of every
// received packet of class <= l, with payload columns mirrored through
// the same row operations.  The rank vector is therefore order
// independent and equals batch Gaussian elimination on all received
// headers, and a full level solves to the sources directly.
class DecodingBuffer {
 public:
  DecodingBuffer(const gf::Field& f, const GenerationSpec& spec, int payload_symbols,
                 int generation = 0);

  // true when the packet raised the rank at its own class level; such
  // packets are retained, the rest carry no new information there.
  // Packets of another generation are rejected with a domain error.
  bool receive(const Packet& p);

  const std::vector<int>& rank() const { return rank_; }       // cumulative r_1..r_L
  std::vector<int> layer_counts() const;                       // r_l - r_{l-1}
  int decodable_layers() const;                                // largest l: r_l = beta_l
  int generation() const { return generation_; }
  const std::vector<Packet>& stored() const { return stored_; }

  // Recovered sources of layers 1..layers (beta_layers rows); requires
  // decodable_layers() >= layers.
  SourceBlock decode(int layers) const;

 private:
  const gf::Field& f_;
  GenerationSpec spec_;
  int payload_;
  int generation_;
  std::vector<gf::RrefBuilder> levels_;
  std::vector<int> rank_;
  std::vector<Packet> stored_;
};

}  // namespace prlc::codec
