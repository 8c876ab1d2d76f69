#include "mpcite/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace mpcite {

namespace {
constexpr const char* kVocabHeader = "#mpcite-vocab v1";
const char* const kReserved[] = {"<pad>", "<unk>", "<eos>"};
}  // namespace

Vocab::Vocab() : Vocab({kReserved[0], kReserved[1], kReserved[2]}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 3 || tokens_[kPad] != kReserved[0] ||
      tokens_[kUnk] != kReserved[1] || tokens_[kEos] != kReserved[2]) {
    throw Error("vocab: reserved tokens <pad>, <unk>, <eos> must occupy indices 0..2");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error("vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
}

int Vocab::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("vocab: cannot write '" + path + "'");
  out << kVocabHeader << "\n";
  for (const auto& t : tokens_) out << t << "\n";
  if (!out) throw Error("vocab: write failed for '" + path + "'");
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("vocab: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kVocabHeader) {
    throw Error("vocab: '" + path + "' missing header '" + kVocabHeader + "'");
  }
  std::vector<std::string> tokens;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocab(std::move(tokens));
}

Vocab build_vocab(const Corpus& corpus, int min_freq) {
  if (min_freq < 1) throw Error("vocab: min_freq must be >= 1");
  if (corpus.size() == 0) throw Error("vocab: empty corpus");

  std::map<std::string, std::int64_t> freq;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Paper& p = corpus.at(i);
    for (const auto& sent : p.abstract)
      for (const auto& tok : sent) ++freq[tok];
    for (const auto& sent : p.body)
      for (const auto& tok : sent) ++freq[tok];
  }

  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [tok, f] : freq) {
    if (f >= min_freq) kept.emplace_back(tok, f);
  }
  // Frequency-descending, token-ascending: stable indices across runs.
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens = {kReserved[0], kReserved[1], kReserved[2]};
  tokens.reserve(kept.size() + 3);
  for (auto& [tok, f] : kept) tokens.push_back(tok);
  return Vocab(std::move(tokens));
}

std::vector<int> tokenize(const Sentence& sentence, const Vocab& vocab, int max_len) {
  if (max_len < 1) throw Error("tokenize: max_len must be >= 1");
  std::vector<int> out;
  const std::size_t keep = std::min(sentence.size(), static_cast<std::size_t>(max_len - 1));
  out.reserve(keep + 1);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(vocab.index_of(sentence[i]));
  out.push_back(Vocab::kEos);
  return out;
}

TokenizedSentences tokenize_sample(const ContextSample& sample, const Vocab& vocab,
                                   int max_len) {
  TokenizedSentences out;
  out.reserve(sample.sentence_count());
  for (const auto& s : sample.fundamental) out.push_back(tokenize(s, vocab, max_len));
  for (const auto& s : sample.supplemental) out.push_back(tokenize(s, vocab, max_len));
  return out;
}

}  // namespace mpcite
