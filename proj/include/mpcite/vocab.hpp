#ifndef MPCITE_VOCAB_HPP_
#define MPCITE_VOCAB_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpcite/corpus.hpp"
#include "mpcite/sampling.hpp"

namespace mpcite {

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;

  Vocab();
  explicit Vocab(std::vector<std::string> tokens);  // includes the reserved ones

  int size() const { return static_cast<int>(tokens_.size()); }
  int index_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_at(int index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::uint64_t hash() const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

Vocab build_vocab(const Corpus& corpus, int min_freq);

// Truncates to max_len - 1 tokens, then appends EOS; unknown tokens map to UNK.
std::vector<int> tokenize(const Sentence& sentence, const Vocab& vocab, int max_len);

using TokenizedSentences = std::vector<std::vector<int>>;

// Fundamental sentences first, then supplemental, each tokenized.
TokenizedSentences tokenize_sample(const ContextSample& sample, const Vocab& vocab,
                                   int max_len);

}  // namespace mpcite

#endif  // MPCITE_VOCAB_HPP_
