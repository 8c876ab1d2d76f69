#include "mpcite/encoder.hpp"
#include "mpcite/objectives.hpp"
#include "mpcite/corpus.hpp"
#include <iostream>

int main() {
  using namespace mpcite;
  EncoderConfig cfg; cfg.blocks = 2; cfg.hidden = 16; cfg.heads = 2; cfg.ffn = 32;
  Rng rng(7);
  auto params = init_params<double>(cfg, 50, rng);
  TokenizedSentences sents = {{3, 4, 5, Vocab::kEos}, {6, 7, Vocab::kEos, Vocab::kPad}};
  ForwardRecord<double> rec;
  auto emb = encode_tokens(params, sents, &rec);
  std::cout << "emb mean=" << emb.mean() << " var=" << (emb.array() - emb.mean()).square().mean() << "\n";
  auto grads = zeros_like(params);
  VecX<double> up = VecX<double>::Ones(16);
  encode_backward(params, rec, up, grads);
  std::cout << "emb grad norm=" << grads.embedding.norm() << "\n";
  EmbeddingLoss<double> loss = [](const VecX<double>& e) {
    return std::make_pair(e.sum() + 0.5 * e.squaredNorm(), (VecX<double>::Ones(e.size()) + e).eval());
  };
  GradCheckOptions opt; opt.coords_per_tensor = 6;
  auto report = grad_check<double>(cfg, 50, loss, opt);
  std::cout << "gradcheck max_rel_err=" << report.max_rel_err << " pass=" << report.pass << "\n";
  return 0;
}
