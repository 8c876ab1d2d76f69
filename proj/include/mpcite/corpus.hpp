#ifndef MPCITE_CORPUS_HPP_
#define MPCITE_CORPUS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mpcite/common.hpp"

namespace mpcite {

using Sentence = std::vector<std::string>;

struct CitationAnchor {
  int sentence_index = 0;  // index into body sentences
  std::string target_id;
};

struct Paper {
  std::string id;
  std::vector<Sentence> abstract;
  std::vector<Sentence> body;
  std::vector<CitationAnchor> anchors;
};

enum class Split { train, test };

// Immutable after construction; id -> Paper mapping is bijective.
class Corpus {
 public:
  Corpus() = default;

  void add(Paper paper);
  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  const Paper& paper(const std::string& id) const;
  const Paper& at(std::size_t i) const { return papers_[i]; }
  std::size_t size() const { return papers_.size(); }

  Split split_of(const std::string& id) const { return splits_[index_.at(id)]; }
  void set_split(const std::string& id, Split s) { splits_[index_.at(id)] = s; }
  std::vector<std::string> ids_in_split(Split s) const;

  bool operator==(const Corpus& other) const;

 private:
  std::vector<Paper> papers_;
  std::vector<Split> splits_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadStats {
  std::size_t papers = 0;
  std::size_t dropped_anchors = 0;  // anchors whose target id is absent
};

// Line-delimited record format with a "#mpcite-corpus v1" header line.
Corpus load_corpus(const std::string& path, LoadStats* stats = nullptr);
void save_corpus(const Corpus& corpus, const std::string& path);

// One training/evaluation unit: a merged anchor window and its cited set.
struct CitationInstance {
  std::string source_id;
  int anchor_sentence_index = 0;  // first anchor sentence of the merged window
  std::vector<std::string> target_ids;  // distinct, sorted, never contains source
};

std::vector<CitationInstance> extract_citation_instances(const Corpus& corpus);

// Symmetric pair -> co-citation frequency, plus per-id adjacency for sampling.
class CocitationTable {
 public:
  void increment(const std::string& a, const std::string& b);
  int lookup(const std::string& a, const std::string& b) const;
  std::size_t pair_count() const { return pairs_.size(); }
  const std::map<std::pair<std::string, std::string>, int>& pairs() const {
    return pairs_;
  }
  // Co-cited neighbours of `id` with their frequencies, sorted by neighbour id.
  const std::vector<std::pair<std::string, int>>& neighbours(
      const std::string& id) const;

 private:
  std::map<std::pair<std::string, std::string>, int> pairs_;
  mutable std::unordered_map<std::string, std::vector<std::pair<std::string, int>>>
      adjacency_;
  mutable bool adjacency_built_ = false;
  void build_adjacency() const;
};

CocitationTable build_cocitation_table(const std::vector<CitationInstance>& instances);

class CitationCountTable {
 public:
  void increment(const std::string& id) { ++counts_[id]; }
  int count(const std::string& id) const;
  const std::map<std::string, int>& counts() const { return counts_; }
  std::int64_t total() const;

 private:
  std::map<std::string, int> counts_;
};

CitationCountTable build_citation_counts(const std::vector<CitationInstance>& instances);

// floor(n * fraction) test papers, clamped so both splits are nonempty.
std::size_t test_split_size(std::size_t n_papers, double test_fraction);
Corpus split_corpus(Corpus corpus, double test_fraction, std::uint64_t seed);

}  // namespace mpcite

#endif  // MPCITE_CORPUS_HPP_
