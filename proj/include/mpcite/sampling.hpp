#ifndef MPCITE_SAMPLING_HPP_
#define MPCITE_SAMPLING_HPP_

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "mpcite/corpus.hpp"
#include "mpcite/rng.hpp"

namespace mpcite {

// Frequency^power noise distribution with a prefix-sum table for
// inverse-CDF draws via binary search.
class NoiseDistribution {
 public:
  NoiseDistribution() = default;
  // items and raw weights (frequencies already raised to `power`).
  NoiseDistribution(std::vector<std::string> items, std::vector<double> weights,
                    double power);

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }
  const std::vector<double>& weights() const { return weights_; }
  double power() const { return power_; }

  // One draw (with replacement).
  const std::string& draw(Rng& rng) const;

  // k distinct items via successive renormalization; k is clamped to size().
  std::vector<std::string> draw_without_replacement(std::size_t k, Rng& rng) const;

 private:
  std::vector<std::string> items_;
  std::vector<double> weights_;     // normalized, sum 1
  std::vector<double> cumulative_;  // nondecreasing, ends at 1
  double power_ = 0.75;
};

NoiseDistribution positive_distribution(const CocitationTable& table,
                                        const std::string& target_id, double power);

std::vector<std::string> draw_positives(const NoiseDistribution& dist, std::size_t n,
                                        Rng& rng);

NoiseDistribution negative_distribution(const CitationCountTable& counts,
                                        const std::unordered_set<std::string>& excluded,
                                        double power);

std::vector<std::string> draw_negatives(const NoiseDistribution& dist, std::size_t m,
                                        Rng& rng);

enum class ContextRole { manuscript, citation };

// One encoder input: fundamental backbone sentences plus randomly sampled
// supplemental sentences, both kept in document order.
struct ContextSample {
  ContextRole role = ContextRole::manuscript;
  std::vector<Sentence> fundamental;
  std::vector<Sentence> supplemental;
  std::vector<int> fundamental_indices;   // indices into the source section
  std::vector<int> supplemental_indices;  // indices into the body
  bool fundamental_from_abstract = false;

  std::size_t sentence_count() const {
    return fundamental.size() + supplemental.size();
  }
};

struct SamplingConfig {
  int manuscript_total = 30;
  int manuscript_fundamental = 3;
  int citation_fundamental = 10;
  int citation_supplemental = 30;
  int positive_n = 3;
  int negative_m = 4;
  double power = 0.75;
  bool dynamic = true;  // false: fundamental context only (ablation)
  std::uint64_t seed = 0;

  void validate() const;
};

// Fundamental = anchor sentence +/- 1 clipped to the body; supplemental is
// sampled uniformly without replacement from sentences strictly before the
// window, preserving document order.
ContextSample sample_manuscript_context(const Paper& paper, int anchor_sentence_index,
                                        const SamplingConfig& config, Rng& rng);

// Fundamental = leading abstract sentences (falls back to the body head when
// the abstract is empty); supplemental sampled from the remaining body.
ContextSample sample_citation_context(const Paper& paper, const SamplingConfig& config,
                                      Rng& rng);

}  // namespace mpcite

#endif  // MPCITE_SAMPLING_HPP_
