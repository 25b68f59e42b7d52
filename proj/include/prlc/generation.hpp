#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace prlc {

// Source-data layout of one generation: layered packets with one shared
// decoding deadline.  Quality increments are abstract dB-scale scalars.
struct GenerationSpec {
  std::vector<int> alpha;     // packets per layer
  std::vector<int> beta;      // cumulative packet counts, strictly increasing
  std::vector<double> delta;  // distortion reduction per decoded layer
  int playback_delay = 0;     // slots until the first deadline
  int duration = 0;           // slots between consecutive deadlines

  int layers() const { return static_cast<int>(alpha.size()); }
  int total_packets() const { return beta.empty() ? 0 : beta.back(); }

  // Cumulative quality after decoding the first l layers (l = 0 gives 0).
  double cumulative_delta(int l) const {
    double sum = 0;
    for (int i = 0; i < l; ++i) sum += delta[i];
    return sum;
  }

  // Deadline of generation n.
  long long deadline(long long n) const { return playback_delay + n * static_cast<long long>(duration); }

  void validate() const {
    if (alpha.empty()) throw std::domain_error("generation: no layers");
    if (alpha.size() != delta.size() || alpha.size() != beta.size())
      throw std::domain_error("generation: layer array sizes disagree");
    int cum = 0;
    for (size_t l = 0; l < alpha.size(); ++l) {
      if (alpha[l] <= 0) throw std::domain_error("generation: alpha[" + std::to_string(l) + "] must be positive");
      cum += alpha[l];
      if (beta[l] != cum) throw std::domain_error("generation: beta[" + std::to_string(l) + "] is not the cumulative sum");
      if (delta[l] < 0) throw std::domain_error("generation: delta[" + std::to_string(l) + "] must be nonnegative");
    }
    if (playback_delay < 0 || duration <= 0)
      throw std::domain_error("generation: deadline parameters out of range");
  }

  static GenerationSpec make(std::vector<int> alpha, std::vector<double> delta, int playback_delay,
                             int duration) {
    GenerationSpec g;
    g.alpha = std::move(alpha);
    g.delta = std::move(delta);
    g.playback_delay = playback_delay;
    g.duration = duration;
    g.beta.resize(g.alpha.size());
    int cum = 0;
    for (size_t l = 0; l < g.alpha.size(); ++l) {
      cum += g.alpha[l];
      g.beta[l] = cum;
    }
    g.validate();
    return g;
  }
};

}  // namespace prlc
