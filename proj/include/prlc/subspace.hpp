#pragma once

#include <vector>

#include "prlc/rational.hpp"

// Exact laws of spans and unions of uniformly drawn vectors over GF(q),
// and the layered rank-evolution chain built from them.  Every pmf is a
// vector of exact rationals indexed by dimension and sums to exactly 1.
namespace prlc::subspace {

// Number of b-dimensional subspaces of an a-dimensional space over GF(q).
BigInt gaussian_binomial(int a, int b, unsigned q);

// pmf over r = 0..k: dimension spanned by `draws` uniform i.i.d. vectors
// from a k-dimensional space.
std::vector<Rational> span_dim_pmf(int draws, int k, unsigned q);

// pmf over s = 0..k: dim(U + W) for a fixed y-dimensional U and a
// uniformly random m-dimensional W inside a k-dimensional ambient space.
// Valid for arbitrary U; only W's uniformity matters.
std::vector<Rational> union_dim_step(int y, int m, int k, unsigned q);

// One group of uniform draws: `draws` vectors from the coordinate-prefix
// subspace of dimension `dim`.
struct DrawGroup {
  int draws = 0;
  int dim = 0;
};

// pmf over s = 0..k: dimension of the sum of the groups' spans.  The
// source subspaces are the nested coordinate-prefix spaces, so groups are
// processed in ascending dimension and each union step runs in the
// current group's own ambient dimension, which keeps the law exact.
std::vector<Rational> union_dim_pmf_many(std::vector<DrawGroup> groups, int k, unsigned q);

// Cumulative rank vectors r with 0 <= r_1 <= ... <= r_L and r_l <= beta_l.
void validate_rank_vector(const std::vector<int>& rank, const std::vector<int>& beta);

// Largest l with r_l = beta_l (0 when none): the decodable layer count.
int max_decodable(const std::vector<int>& rank, const std::vector<int>& beta);

struct RankAtom {
  std::vector<int> rank;  // cumulative next rank vector
  Rational prob;
};

// Joint pmf of the next cumulative rank vector when arrivals[l] fresh
// class-(l+1) packets reach a buffer whose current rank vector is `rank`.
// The buffer is modeled as conditionally uniform given its ranks, which
// holds exactly when it was itself built from uniformly coded packets.
// exact = false switches to the infinite-field-size limit, where every
// arriving packet is innovative until its level saturates (deterministic).
std::vector<RankAtom> rank_transition_pmf(const std::vector<int>& rank,
                                          const std::vector<int>& arrivals,
                                          const std::vector<int>& beta, unsigned q,
                                          bool exact = true);

// pmf over l = 0..L: exactly the first l layers become decodable, i.e.
// max_decodable of the next rank vector equals l.
std::vector<Rational> decode_layers_pmf(const std::vector<int>& rank,
                                        const std::vector<int>& arrivals,
                                        const std::vector<int>& beta, unsigned q,
                                        bool exact = true);

}  // namespace prlc::subspace
