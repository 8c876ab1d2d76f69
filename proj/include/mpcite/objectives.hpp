#ifndef MPCITE_OBJECTIVES_HPP_
#define MPCITE_OBJECTIVES_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "mpcite/encoder.hpp"

namespace mpcite {

enum class Objective { triplet, mpt_tgt, mpt_src, mpt_src_tgt };

std::string objective_name(Objective o);
Objective objective_from_name(const std::string& name);

// One loss evaluation unit: manuscript embedding, ground-truth target,
// n positive co-citations, m negatives.
template <typename S>
struct TripletBatch {
  VecX<S> source;
  VecX<S> target;
  std::vector<VecX<S>> positives;
  std::vector<VecX<S>> negatives;
  S margin = S(1);
};

template <typename S>
struct LossResult {
  S value = S(0);
  VecX<S> d_source, d_target;
  std::vector<VecX<S>> d_positives, d_negatives;
};

namespace detail {

// Guard keeps the distance gradient finite at zero distance; the value
// itself stays exact (sqrt of the true squared norm).
template <typename S>
struct PairDistance {
  S dist;
  VecX<S> unit;  // (x - y) / max(dist, guard)
};

template <typename S>
PairDistance<S> euclidean(const VecX<S>& x, const VecX<S>& y) {
  PairDistance<S> out;
  VecX<S> diff = x - y;
  out.dist = diff.norm();
  out.unit = diff / std::max(out.dist, S(1e-12));
  return out;
}

template <typename S>
void check_batch(const TripletBatch<S>& batch, bool need_positive) {
  const Eigen::Index dim = batch.source.size();
  if (dim == 0) throw Error("objective: empty source embedding");
  auto check = [&](const VecX<S>& v, const char* what) {
    if (v.size() != dim) {
      throw Error(std::string("objective: dimension mismatch on ") + what);
    }
  };
  check(batch.target, "target");
  for (const auto& p : batch.positives) check(p, "positive");
  for (const auto& n : batch.negatives) check(n, "negative");
  if (batch.negatives.empty()) throw Error("objective: at least one negative required");
  if (need_positive && batch.positives.empty()) {
    throw Error("objective: this objective requires n >= 1 positives");
  }
  if (batch.margin < S(0)) throw Error("objective: margin must be >= 0");
}

template <typename S>
LossResult<S> zero_result(const TripletBatch<S>& batch) {
  LossResult<S> r;
  r.d_source = VecX<S>::Zero(batch.source.size());
  r.d_target = VecX<S>::Zero(batch.source.size());
  r.d_positives.assign(batch.positives.size(), VecX<S>::Zero(batch.source.size()));
  r.d_negatives.assign(batch.negatives.size(), VecX<S>::Zero(batch.source.size()));
  return r;
}

}  // namespace detail

// Hinge triplet, summed over negatives:
//   sum_j max(D(s,t) - D(s,ns_j) + margin, 0).
// Subgradient is zero at inactive hinges.
template <typename S>
LossResult<S> triplet_loss(const TripletBatch<S>& batch) {
  detail::check_batch(batch, /*need_positive=*/false);
  LossResult<S> r = detail::zero_result(batch);

  const auto st = detail::euclidean(batch.source, batch.target);
  for (std::size_t j = 0; j < batch.negatives.size(); ++j) {
    const auto sn = detail::euclidean(batch.source, batch.negatives[j]);
    const S a = st.dist - sn.dist + batch.margin;
    if (a > S(0)) {
      r.value += a;
      r.d_source += st.unit - sn.unit;
      r.d_target -= st.unit;
      r.d_negatives[j] += sn.unit;
    }
  }
  return r;
}

namespace detail {

// Shared N-tuplet core:
//   log(1 + sum_j exp(A_j) [+ sum_ij exp(C_ij)] [+ sum_ij exp(B_ij)])
// with A_j = D(s,t) - D(s,ns_j), C_ij = D(s,c_i) - D(s,ns_j),
// B_ij = D(c_i,t) - D(c_i,ns_j). Computed via a shifted log-sum-exp so
// exponent arguments up to +-500 stay finite.
template <typename S>
LossResult<S> ntuplet_loss(const TripletBatch<S>& batch, bool with_src_terms,
                           bool with_tgt_terms) {
  LossResult<S> r = zero_result(batch);
  const std::size_t n = batch.positives.size();
  const std::size_t m = batch.negatives.size();

  const auto st = euclidean(batch.source, batch.target);
  std::vector<PairDistance<S>> s_ns(m);
  for (std::size_t j = 0; j < m; ++j) {
    s_ns[j] = euclidean(batch.source, batch.negatives[j]);
  }
  std::vector<PairDistance<S>> s_c(n), c_t(n);
  std::vector<std::vector<PairDistance<S>>> c_ns(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (with_src_terms) s_c[i] = euclidean(batch.source, batch.positives[i]);
    if (with_tgt_terms) {
      c_t[i] = euclidean(batch.positives[i], batch.target);
      c_ns[i].resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        c_ns[i][j] = euclidean(batch.positives[i], batch.negatives[j]);
      }
    }
  }

  struct Term {
    S arg;
    enum Kind { A, B, C } kind;
    std::size_t i, j;
  };
  std::vector<Term> terms;
  terms.reserve(m + 2 * n * m);
  for (std::size_t j = 0; j < m; ++j) {
    terms.push_back({st.dist - s_ns[j].dist, Term::A, 0, j});
  }
  if (with_src_terms) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        terms.push_back({s_c[i].dist - s_ns[j].dist, Term::C, i, j});
      }
    }
  }
  if (with_tgt_terms) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        terms.push_back({c_t[i].dist - c_ns[i][j].dist, Term::B, i, j});
      }
    }
  }

  S shift = S(0);  // the implicit "1" term has argument 0
  for (const auto& t : terms) shift = std::max(shift, t.arg);
  S denom = std::exp(S(0) - shift);
  for (const auto& t : terms) denom += std::exp(t.arg - shift);
  r.value = shift + std::log(denom);

  for (const auto& t : terms) {
    const S w = std::exp(t.arg - shift) / denom;  // dL/d(arg)
    switch (t.kind) {
      case Term::A:
        r.d_source += w * (st.unit - s_ns[t.j].unit);
        r.d_target -= w * st.unit;
        r.d_negatives[t.j] += w * s_ns[t.j].unit;
        break;
      case Term::C:
        r.d_source += w * (s_c[t.i].unit - s_ns[t.j].unit);
        r.d_positives[t.i] -= w * s_c[t.i].unit;
        r.d_negatives[t.j] += w * s_ns[t.j].unit;
        break;
      case Term::B:
        r.d_positives[t.i] += w * (c_t[t.i].unit - c_ns[t.i][t.j].unit);
        r.d_target -= w * c_t[t.i].unit;
        r.d_negatives[t.j] += w * c_ns[t.i][t.j].unit;
        break;
    }
  }
  return r;
}

}  // namespace detail

// log(1 + sum_j exp(A_j) + sum_ij exp(B_ij)); the source-target term counts
// once per negative. Accepts n = 0, where it degrades to the A-terms only.
template <typename S>
LossResult<S> mpt_tgt_loss(const TripletBatch<S>& batch) {
  detail::check_batch(batch, /*need_positive=*/false);
  return detail::ntuplet_loss(batch, /*with_src_terms=*/false, /*with_tgt_terms=*/true);
}

// log(1 + sum_j exp(A_j) + sum_ij exp(C_ij)).
template <typename S>
LossResult<S> mpt_src_loss(const TripletBatch<S>& batch) {
  detail::check_batch(batch, /*need_positive=*/false);
  return detail::ntuplet_loss(batch, /*with_src_terms=*/true, /*with_tgt_terms=*/false);
}

// log(1 + sum_j exp(A_j) + sum_ij exp(C_ij) + sum_ij exp(B_ij)).
template <typename S>
LossResult<S> mpt_src_tgt_loss(const TripletBatch<S>& batch) {
  detail::check_batch(batch, /*need_positive=*/false);
  return detail::ntuplet_loss(batch, /*with_src_terms=*/true, /*with_tgt_terms=*/true);
}

template <typename S>
LossResult<S> objective_loss(Objective objective, const TripletBatch<S>& batch) {
  switch (objective) {
    case Objective::triplet:
      return triplet_loss(batch);
    case Objective::mpt_tgt:
      return mpt_tgt_loss(batch);
    case Objective::mpt_src:
      return mpt_src_loss(batch);
    case Objective::mpt_src_tgt:
      return mpt_src_tgt_loss(batch);
  }
  throw Error("objective: unknown objective");
}

}  // namespace mpcite

#endif  // MPCITE_OBJECTIVES_HPP_
