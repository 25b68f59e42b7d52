#include "prlc/subspace.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

namespace prlc::subspace {

namespace {

// Internal consistency guard: rational pmfs must sum to exactly 1.
void check_normalized(const std::vector<Rational>& pmf) {
  Rational total = 0;
  for (const auto& p : pmf) {
    if (p < 0) throw std::logic_error("pmf atom below zero");
    total += p;
  }
  if (total != 1) throw std::logic_error("pmf does not sum to one");
}

unsigned binom2(int n) { return n < 2 ? 0u : static_cast<unsigned>(n) * (n - 1) / 2; }

}  // namespace

BigInt gaussian_binomial(int a, int b, unsigned q) {
  if (a < 0) throw std::domain_error("gaussian_binomial: negative upper index");
  if (b < 0 || b > a) return 0;
  b = std::min(b, a - b);  // symmetry keeps the products short
  BigInt numer = 1, denom = 1;
  const BigInt qq = q;
  for (int i = 1; i <= b; ++i) {
    numer *= big_pow(qq, static_cast<unsigned>(a - b + i)) - 1;
    denom *= big_pow(qq, static_cast<unsigned>(i)) - 1;
  }
  return numer / denom;  // exact: the q-binomial is an integer
}

std::vector<Rational> span_dim_pmf(int draws, int k, unsigned q) {
  if (draws < 0 || k < 0) throw std::domain_error("span_dim_pmf: negative argument");
  // The planner evaluates the same small laws thousands of times.
  thread_local std::map<std::tuple<int, int, unsigned>, std::vector<Rational>> cache;
  const auto key = std::make_tuple(draws, k, q);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  std::vector<Rational> pmf(static_cast<size_t>(k) + 1, Rational(0));
  const BigInt qq = q;
  const BigInt scale = big_pow(qq, static_cast<unsigned>(draws) * static_cast<unsigned>(k));
  for (int r = 0; r <= std::min(draws, k); ++r) {
    // Inclusion-exclusion over the subspaces the draws may fall into.
    BigInt sum = 0;
    for (int i = 0; i <= r; ++i) {
      BigInt term = gaussian_binomial(r, i, q) *
                    big_pow(qq, static_cast<unsigned>(draws) * static_cast<unsigned>(i)) *
                    big_pow(qq, binom2(r - i));
      if ((r - i) % 2) sum -= term; else sum += term;
    }
    pmf[r] = Rational(gaussian_binomial(k, r, q) * sum, scale);
  }
  check_normalized(pmf);
  cache.emplace(key, pmf);
  return pmf;
}

std::vector<Rational> union_dim_step(int y, int m, int k, unsigned q) {
  if (y < 0 || m < 0 || y > k || m > k)
    throw std::domain_error("union_dim_step: dimensions exceed the ambient space");
  thread_local std::map<std::tuple<int, int, int, unsigned>, std::vector<Rational>> cache;
  const auto key = std::make_tuple(y, m, k, q);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  std::vector<Rational> pmf(static_cast<size_t>(k) + 1, Rational(0));
  const BigInt denom = gaussian_binomial(k, m, q);
  const BigInt qq = q;
  for (int s = std::max(y, m); s <= std::min(k, y + m); ++s) {
    // Count of m-dimensional W with dim(U cap W) = y+m-s, summing to
    // [k choose m]_q by the q-Vandermonde identity.
    BigInt numer = big_pow(qq, static_cast<unsigned>(s - m) * static_cast<unsigned>(s - y)) *
                   gaussian_binomial(k - y, s - y, q) * gaussian_binomial(y, y + m - s, q);
    pmf[s] = Rational(numer, denom);
  }
  check_normalized(pmf);
  cache.emplace(key, pmf);
  return pmf;
}

std::vector<Rational> union_dim_pmf_many(std::vector<DrawGroup> groups, int k, unsigned q) {
  if (k < 0) throw std::domain_error("union_dim_pmf_many: negative ambient dimension");
  for (const auto& g : groups)
    if (g.dim < 0 || g.dim > k || g.draws < 0)
      throw std::domain_error("union_dim_pmf_many: group outside the ambient space");
  // Nested prefix subspaces: ascending order makes every union-so-far a
  // subset of the next group's source space.
  std::stable_sort(groups.begin(), groups.end(),
                   [](const DrawGroup& a, const DrawGroup& b) { return a.dim < b.dim; });

  std::vector<Rational> dist{Rational(1)};  // dim 0 with certainty
  for (const auto& g : groups) {
    const auto span = span_dim_pmf(g.draws, g.dim, q);
    std::vector<Rational> next(static_cast<size_t>(g.dim) + 1, Rational(0));
    for (int y = 0; y < static_cast<int>(dist.size()); ++y) {
      if (dist[y] == 0) continue;
      for (int m = 0; m < static_cast<int>(span.size()); ++m) {
        if (span[m] == 0) continue;
        const auto step = union_dim_step(y, m, g.dim, q);
        for (int s = 0; s <= g.dim; ++s)
          if (step[s] != 0) next[s] += dist[y] * span[m] * step[s];
      }
    }
    dist = std::move(next);
  }
  dist.resize(static_cast<size_t>(k) + 1, Rational(0));
  check_normalized(dist);
  return dist;
}

void validate_rank_vector(const std::vector<int>& rank, const std::vector<int>& beta) {
  if (beta.empty()) throw std::domain_error("rank vector: empty layer structure");
  for (size_t l = 0; l < beta.size(); ++l) {
    if (beta[l] <= (l ? beta[l - 1] : 0))
      throw std::domain_error("rank vector: beta must be strictly increasing");
  }
  if (rank.size() != beta.size()) throw std::domain_error("rank vector: size mismatch");
  for (size_t l = 0; l < rank.size(); ++l) {
    if (rank[l] < (l ? rank[l - 1] : 0) || rank[l] > beta[l])
      throw std::domain_error("rank vector: entries must be nested and bounded by beta");
  }
}

int max_decodable(const std::vector<int>& rank, const std::vector<int>& beta) {
  int best = 0;
  for (size_t l = 0; l < beta.size(); ++l)
    if (rank[l] == beta[l]) best = static_cast<int>(l) + 1;
  return best;
}

std::vector<RankAtom> rank_transition_pmf(const std::vector<int>& rank,
                                          const std::vector<int>& arrivals,
                                          const std::vector<int>& beta, unsigned q, bool exact) {
  validate_rank_vector(rank, beta);
  if (arrivals.size() != beta.size()) throw std::domain_error("rank transition: arrival size mismatch");
  for (int z : arrivals)
    if (z < 0) throw std::domain_error("rank transition: negative arrival count");
  const int levels = static_cast<int>(beta.size());

  if (!exact) {
    // Infinite-field limit: every draw is innovative until its level fills.
    std::vector<int> next(levels);
    int c = 0;
    for (int l = 0; l < levels; ++l) {
      int n_l = rank[l] - (l ? rank[l - 1] : 0);
      int x = std::min(beta[l], c + n_l);
      c = std::min(beta[l], x + arrivals[l]);
      next[l] = c;
    }
    return {{std::move(next), Rational(1)}};
  }

  // The chain tracks the joint law of the cumulative dimensions level by
  // level.  At level l the union so far is extended first by the buffer's
  // own class-l rows (uniform in the quotient of the level ambient by the
  // lower buffer part), then by the span of the fresh class-l arrivals.
  std::map<std::vector<int>, Rational> paths{{{}, Rational(1)}};
  for (int l = 0; l < levels; ++l) {
    const int r_prev = l ? rank[l - 1] : 0;
    const int n_l = rank[l] - r_prev;
    const auto arrival_span = span_dim_pmf(arrivals[l], beta[l], q);
    std::map<std::vector<int>, Rational> grown;
    for (const auto& [prefix, prob] : paths) {
      const int c = prefix.empty() ? 0 : prefix.back();
      const int quotient_dim = beta[l] - r_prev;
      std::vector<Rational> buffer_ext;  // pmf of the quotient union dim
      if (n_l == 0) {
        buffer_ext.assign(static_cast<size_t>(quotient_dim) + 1, Rational(0));
        buffer_ext[c - r_prev] = 1;
      } else {
        buffer_ext = union_dim_step(c - r_prev, n_l, quotient_dim, q);
      }
      for (int yq = 0; yq < static_cast<int>(buffer_ext.size()); ++yq) {
        if (buffer_ext[yq] == 0) continue;
        const int x = r_prev + yq;
        for (int m = 0; m < static_cast<int>(arrival_span.size()); ++m) {
          if (arrival_span[m] == 0) continue;
          const auto step = union_dim_step(x, m, beta[l], q);
          for (int s = 0; s <= beta[l]; ++s) {
            if (step[s] == 0) continue;
            auto key = prefix;
            key.push_back(s);
            grown[std::move(key)] += prob * buffer_ext[yq] * arrival_span[m] * step[s];
          }
        }
      }
    }
    paths = std::move(grown);
  }

  std::vector<RankAtom> out;
  out.reserve(paths.size());
  Rational total = 0;
  for (auto& [vec, prob] : paths) {
    total += prob;
    out.push_back({vec, prob});
  }
  if (total != 1) throw std::logic_error("rank transition pmf does not sum to one");
  return out;
}

std::vector<Rational> decode_layers_pmf(const std::vector<int>& rank,
                                        const std::vector<int>& arrivals,
                                        const std::vector<int>& beta, unsigned q, bool exact) {
  const auto atoms = rank_transition_pmf(rank, arrivals, beta, q, exact);
  std::vector<Rational> pmf(beta.size() + 1, Rational(0));
  for (const auto& atom : atoms) pmf[max_decodable(atom.rank, beta)] += atom.prob;
  return pmf;
}

}  // namespace prlc::subspace
