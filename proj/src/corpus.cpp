#include "mpcite/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mpcite/rng.hpp"

namespace mpcite {

namespace {
constexpr const char* kCorpusHeader = "#mpcite-corpus v1";
}

void Corpus::add(Paper paper) {
  if (paper.id.empty()) throw Error("corpus: paper with empty id");
  if (index_.count(paper.id)) throw Error("corpus: duplicate paper id '" + paper.id + "'");
  for (const auto& anchor : paper.anchors) {
    if (anchor.sentence_index < 0 ||
        anchor.sentence_index >= static_cast<int>(paper.body.size())) {
      throw Error("corpus: paper '" + paper.id + "' anchor sentence index " +
                  std::to_string(anchor.sentence_index) + " out of range");
    }
  }
  index_.emplace(paper.id, papers_.size());
  papers_.push_back(std::move(paper));
  splits_.push_back(Split::train);
}

const Paper& Corpus::paper(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("corpus: unknown paper id '" + id + "'");
  return papers_[it->second];
}

std::vector<std::string> Corpus::ids_in_split(Split s) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < papers_.size(); ++i) {
    if (splits_[i] == s) out.push_back(papers_[i].id);
  }
  return out;
}

bool Corpus::operator==(const Corpus& other) const {
  if (size() != other.size()) return false;
  for (const auto& p : papers_) {
    if (!other.contains(p.id)) return false;
    const Paper& q = other.paper(p.id);
    if (p.abstract != q.abstract || p.body != q.body) return false;
    if (p.anchors.size() != q.anchors.size()) return false;
    for (std::size_t i = 0; i < p.anchors.size(); ++i) {
      if (p.anchors[i].sentence_index != q.anchors[i].sentence_index ||
          p.anchors[i].target_id != q.anchors[i].target_id)
        return false;
    }
  }
  return true;
}

namespace {

std::vector<Sentence> parse_sentences(const nlohmann::json& j, const char* field,
                                      std::size_t line_no) {
  if (!j.is_array()) {
    throw Error("corpus: line " + std::to_string(line_no) + ": field '" +
                field + "' must be an array of sentences");
  }
  std::vector<Sentence> out;
  out.reserve(j.size());
  for (const auto& sent : j) {
    if (!sent.is_array()) {
      throw Error("corpus: line " + std::to_string(line_no) + ": field '" +
                  field + "' must contain token arrays");
    }
    Sentence s;
    s.reserve(sent.size());
    for (const auto& tok : sent) s.push_back(tok.get<std::string>());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Corpus load_corpus(const std::string& path, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error("corpus: cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error("corpus: '" + path + "' is empty");
  ++line_no;
  if (line != kCorpusHeader) {
    throw Error("corpus: line 1: expected header '" + std::string(kCorpusHeader) + "'");
  }

  // First pass collects records so dangling anchors can be detected corpus-wide.
  struct Record {
    Paper paper;
    std::size_t line_no;
  };
  std::vector<Record> records;
  std::set<std::string> ids;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("corpus: line " + std::to_string(line_no) + ": parse error: " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("abstract") ||
        !j.contains("body") || !j.contains("citations")) {
      throw Error("corpus: line " + std::to_string(line_no) +
                  ": record must have fields id, abstract, body, citations");
    }
    Paper p;
    p.id = j["id"].get<std::string>();
    if (p.id.empty()) throw Error("corpus: line " + std::to_string(line_no) + ": empty id");
    if (!ids.insert(p.id).second) {
      throw Error("corpus: line " + std::to_string(line_no) + ": duplicate id '" + p.id + "'");
    }
    p.abstract = parse_sentences(j["abstract"], "abstract", line_no);
    p.body = parse_sentences(j["body"], "body", line_no);
    for (const auto& c : j["citations"]) {
      if (!c.is_object() || !c.contains("sent") || !c.contains("target")) {
        throw Error("corpus: line " + std::to_string(line_no) +
                    ": citation entries need fields sent, target");
      }
      CitationAnchor a;
      a.sentence_index = c["sent"].get<int>();
      a.target_id = c["target"].get<std::string>();
      if (a.sentence_index < 0 || a.sentence_index >= static_cast<int>(p.body.size())) {
        throw Error("corpus: line " + std::to_string(line_no) + ": anchor sentence " +
                    std::to_string(a.sentence_index) + " out of range for paper '" +
                    p.id + "'");
      }
      p.anchors.push_back(std::move(a));
    }
    records.push_back({std::move(p), line_no});
  }

  Corpus corpus;
  std::size_t dropped = 0;
  for (auto& rec : records) {
    std::vector<CitationAnchor> kept;
    kept.reserve(rec.paper.anchors.size());
    for (auto& a : rec.paper.anchors) {
      if (ids.count(a.target_id)) {
        kept.push_back(std::move(a));
      } else {
        ++dropped;
      }
    }
    rec.paper.anchors = std::move(kept);
    corpus.add(std::move(rec.paper));
  }
  if (stats) {
    stats->papers = corpus.size();
    stats->dropped_anchors = dropped;
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("corpus: cannot write '" + path + "'");
  out << kCorpusHeader << "\n";

  // Canonical order: ascending id.
  std::vector<const Paper*> papers;
  papers.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) papers.push_back(&corpus.at(i));
  std::sort(papers.begin(), papers.end(),
            [](const Paper* a, const Paper* b) { return a->id < b->id; });

  for (const Paper* p : papers) {
    nlohmann::ordered_json j;
    j["id"] = p->id;
    j["abstract"] = p->abstract;
    j["body"] = p->body;
    auto cits = nlohmann::ordered_json::array();
    for (const auto& a : p->anchors) {
      cits.push_back({{"sent", a.sentence_index}, {"target", a.target_id}});
    }
    j["citations"] = std::move(cits);
    out << j.dump() << "\n";
  }
  if (!out) throw Error("corpus: write failed for '" + path + "'");
}

std::vector<CitationInstance> extract_citation_instances(const Corpus& corpus) {
  std::vector<CitationInstance> out;
  for (std::size_t pi = 0; pi < corpus.size(); ++pi) {
    const Paper& p = corpus.at(pi);
    if (p.anchors.empty()) continue;

    // Anchor sentence -> targets cited there.
    std::map<int, std::set<std::string>> by_sentence;
    for (const auto& a : p.anchors) {
      if (a.target_id == p.id) continue;  // self-citation anchors dropped
      by_sentence[a.sentence_index].insert(a.target_id);
    }

    // Merge anchors whose three-sentence windows overlap, transitively.
    // Windows [a-1, a+1] and [b-1, b+1] overlap iff |a - b| <= 2; the gap
    // test chains off the most recent anchor of the open cluster.
    int cluster_first = -1;
    int cluster_last = -1;
    std::set<std::string> cluster_targets;
    auto flush = [&]() {
      if (cluster_first < 0 || cluster_targets.empty()) return;
      CitationInstance inst;
      inst.source_id = p.id;
      inst.anchor_sentence_index = cluster_first;
      inst.target_ids.assign(cluster_targets.begin(), cluster_targets.end());
      out.push_back(std::move(inst));
    };
    for (auto& [sent, targets] : by_sentence) {
      if (cluster_first >= 0 && sent - cluster_last <= 2) {
        cluster_targets.insert(targets.begin(), targets.end());
        cluster_last = sent;
      } else {
        flush();
        cluster_first = sent;
        cluster_last = sent;
        cluster_targets = std::move(targets);
      }
    }
    flush();
  }
  return out;
}

void CocitationTable::increment(const std::string& a, const std::string& b) {
  if (a == b) throw Error("cocitation: self pair '" + a + "'");
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  ++pairs_[key];
  adjacency_built_ = false;
}

int CocitationTable::lookup(const std::string& a, const std::string& b) const {
  if (a == b) return 0;
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  auto it = pairs_.find(key);
  return it == pairs_.end() ? 0 : it->second;
}

void CocitationTable::build_adjacency() const {
  adjacency_.clear();
  for (const auto& [key, freq] : pairs_) {
    adjacency_[key.first].emplace_back(key.second, freq);
    adjacency_[key.second].emplace_back(key.first, freq);
  }
  for (auto& [id, vec] : adjacency_) {
    std::sort(vec.begin(), vec.end());
  }
  adjacency_built_ = true;
}

const std::vector<std::pair<std::string, int>>& CocitationTable::neighbours(
    const std::string& id) const {
  if (!adjacency_built_) build_adjacency();
  static const std::vector<std::pair<std::string, int>> kEmpty;
  auto it = adjacency_.find(id);
  return it == adjacency_.end() ? kEmpty : it->second;
}

CocitationTable build_cocitation_table(const std::vector<CitationInstance>& instances) {
  CocitationTable table;
  for (const auto& inst : instances) {
    const auto& t = inst.target_ids;
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = i + 1; j < t.size(); ++j) {
        table.increment(t[i], t[j]);
      }
    }
  }
  return table;
}

int CitationCountTable::count(const std::string& id) const {
  auto it = counts_.find(id);
  return it == counts_.end() ? 0 : it->second;
}

std::int64_t CitationCountTable::total() const {
  std::int64_t sum = 0;
  for (const auto& [id, c] : counts_) sum += c;
  return sum;
}

CitationCountTable build_citation_counts(const std::vector<CitationInstance>& instances) {
  CitationCountTable table;
  for (const auto& inst : instances) {
    for (const auto& id : inst.target_ids) table.increment(id);
  }
  return table;
}

std::size_t test_split_size(std::size_t n_papers, double test_fraction) {
  auto n = static_cast<std::size_t>(std::floor(static_cast<double>(n_papers) * test_fraction));
  if (n < 1) n = 1;
  if (n > n_papers - 1) n = n_papers - 1;
  return n;
}

Corpus split_corpus(Corpus corpus, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error("split: test_fraction must be in (0, 1)");
  }
  if (corpus.size() < 2) throw Error("split: corpus smaller than 2 papers");

  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) ids.push_back(corpus.at(i).id);
  std::sort(ids.begin(), ids.end());

  Rng rng(mix_seed(seed, "split"));
  rng.shuffle(ids);

  const std::size_t n_test = test_split_size(corpus.size(), test_fraction);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    corpus.set_split(ids[i], i < n_test ? Split::test : Split::train);
  }
  return corpus;
}

}  // namespace mpcite
