#include "mpcite/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpcite {

NoiseDistribution::NoiseDistribution(std::vector<std::string> items,
                                     std::vector<double> weights, double power)
    : items_(std::move(items)), weights_(std::move(weights)), power_(power) {
  if (items_.size() != weights_.size()) {
    throw Error("noise distribution: item/weight size mismatch");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw Error("noise distribution: negative weight");
    total += w;
  }
  if (items_.empty()) return;
  if (total <= 0.0) throw Error("noise distribution: all weights zero");
  cumulative_.resize(weights_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= total;
    acc += weights_[i];
    cumulative_[i] = acc;
  }
  cumulative_.back() = 1.0;
}

const std::string& NoiseDistribution::draw(Rng& rng) const {
  if (empty()) throw Error("noise distribution: draw from empty support");
  const double u = rng.uniform();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t idx = static_cast<std::size_t>(it - cumulative_.begin());
  if (idx >= items_.size()) idx = items_.size() - 1;
  return items_[idx];
}

std::vector<std::string> NoiseDistribution::draw_without_replacement(std::size_t k,
                                                                     Rng& rng) const {
  if (k >= items_.size()) k = items_.size();
  std::vector<std::string> out;
  out.reserve(k);
  if (k == 0) return out;

  std::vector<double> w = weights_;
  std::vector<char> taken(w.size(), 0);
  double remaining = 1.0;
  for (std::size_t round = 0; round < k; ++round) {
    const double u = rng.uniform() * remaining;
    double acc = 0.0;
    std::size_t pick = w.size();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (taken[i]) continue;
      acc += w[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    if (pick == w.size()) {  // fp roundoff at the tail: take the last live item
      for (std::size_t i = w.size(); i-- > 0;) {
        if (!taken[i]) {
          pick = i;
          break;
        }
      }
    }
    taken[pick] = 1;
    remaining -= w[pick];
    out.push_back(items_[pick]);
  }
  return out;
}

NoiseDistribution positive_distribution(const CocitationTable& table,
                                        const std::string& target_id, double power) {
  if (!(power > 0.0)) throw Error("positive distribution: power must be > 0");
  const auto& nbrs = table.neighbours(target_id);
  std::vector<std::string> items;
  std::vector<double> weights;
  items.reserve(nbrs.size());
  weights.reserve(nbrs.size());
  for (const auto& [id, freq] : nbrs) {
    items.push_back(id);
    weights.push_back(std::pow(static_cast<double>(freq), power));
  }
  return NoiseDistribution(std::move(items), std::move(weights), power);
}

std::vector<std::string> draw_positives(const NoiseDistribution& dist, std::size_t n,
                                        Rng& rng) {
  if (n == 0 || dist.empty()) return {};
  return dist.draw_without_replacement(n, rng);
}

NoiseDistribution negative_distribution(const CitationCountTable& counts,
                                        const std::unordered_set<std::string>& excluded,
                                        double power) {
  if (!(power > 0.0)) throw Error("negative distribution: power must be > 0");
  std::vector<std::string> items;
  std::vector<double> weights;
  for (const auto& [id, count] : counts.counts()) {
    if (count < 1 || excluded.count(id)) continue;
    items.push_back(id);
    weights.push_back(std::pow(static_cast<double>(count), power));
  }
  if (items.empty()) {
    throw Error("negative distribution: empty support (corpus too small?)");
  }
  return NoiseDistribution(std::move(items), std::move(weights), power);
}

std::vector<std::string> draw_negatives(const NoiseDistribution& dist, std::size_t m,
                                        Rng& rng) {
  if (m < 1) throw Error("draw_negatives: m must be >= 1");
  if (dist.size() < m) {
    throw Error("draw_negatives: support of " + std::to_string(dist.size()) +
                " is smaller than m=" + std::to_string(m));
  }
  return dist.draw_without_replacement(m, rng);
}

void SamplingConfig::validate() const {
  if (manuscript_total < 0 || citation_fundamental < 0 || citation_supplemental < 0 ||
      positive_n < 0 || negative_m < 0) {
    throw Error("sampling config: budgets must be >= 0");
  }
  if (manuscript_fundamental != 3) {
    throw Error("sampling config: manuscript fundamental window is fixed at 3 sentences");
  }
  if (manuscript_total < manuscript_fundamental) {
    throw Error("sampling config: manuscript_total must be >= manuscript_fundamental");
  }
  if (!(power > 0.0)) throw Error("sampling config: power must be > 0");
}

ContextSample sample_manuscript_context(const Paper& paper, int anchor_sentence_index,
                                        const SamplingConfig& config, Rng& rng) {
  const int n_body = static_cast<int>(paper.body.size());
  if (anchor_sentence_index < 0 || anchor_sentence_index >= n_body) {
    throw Error("manuscript context: anchor index out of range for paper '" +
                paper.id + "'");
  }
  ContextSample sample;
  sample.role = ContextRole::manuscript;

  const int lo = std::max(0, anchor_sentence_index - 1);
  const int hi = std::min(n_body - 1, anchor_sentence_index + 1);
  for (int i = lo; i <= hi; ++i) {
    sample.fundamental.push_back(paper.body[i]);
    sample.fundamental_indices.push_back(i);
  }

  if (config.dynamic) {
    const int pool = lo;  // sentences with index < lo ("finished content")
    const int budget =
        std::max(0, config.manuscript_total - static_cast<int>(sample.fundamental.size()));
    const int take = std::min(pool, budget);
    if (take > 0) {
      auto picks = rng.sample_indices(static_cast<std::size_t>(pool),
                                      static_cast<std::size_t>(take));
      for (std::size_t idx : picks) {
        sample.supplemental.push_back(paper.body[idx]);
        sample.supplemental_indices.push_back(static_cast<int>(idx));
      }
    }
  }
  return sample;
}

ContextSample sample_citation_context(const Paper& paper, const SamplingConfig& config,
                                      Rng& rng) {
  if (paper.abstract.empty() && paper.body.empty()) {
    throw Error("citation context: paper '" + paper.id + "' has no content");
  }
  ContextSample sample;
  sample.role = ContextRole::citation;

  int body_head_used = 0;
  if (!paper.abstract.empty()) {
    sample.fundamental_from_abstract = true;
    const int take = std::min<int>(config.citation_fundamental,
                                   static_cast<int>(paper.abstract.size()));
    for (int i = 0; i < take; ++i) {
      sample.fundamental.push_back(paper.abstract[i]);
      sample.fundamental_indices.push_back(i);
    }
  } else {
    // Empty abstract: backbone falls back to the leading body sentences.
    body_head_used = std::min<int>(config.citation_fundamental,
                                   static_cast<int>(paper.body.size()));
    for (int i = 0; i < body_head_used; ++i) {
      sample.fundamental.push_back(paper.body[i]);
      sample.fundamental_indices.push_back(i);
    }
  }

  if (config.dynamic) {
    const int pool = static_cast<int>(paper.body.size()) - body_head_used;
    const int take = std::min(pool, config.citation_supplemental);
    if (take > 0) {
      auto picks = rng.sample_indices(static_cast<std::size_t>(pool),
                                      static_cast<std::size_t>(take));
      for (std::size_t idx : picks) {
        const int body_idx = static_cast<int>(idx) + body_head_used;
        sample.supplemental.push_back(paper.body[body_idx]);
        sample.supplemental_indices.push_back(body_idx);
      }
    }
  }
  return sample;
}

}  // namespace mpcite
