#include "fsp/mlp.hpp"

namespace fsp {

MlpHead::MlpHead(const std::string& prefix, int in_dim, int hidden_dim, int out_dim,
                 ag::ParameterStore& store, std::mt19937_64& rng)
    : out_dim_(out_dim) {
  W1_ = store.add(prefix + "/W1", hidden_dim, in_dim, ag::Init::Glorot, rng);
  b1_ = store.add(prefix + "/b1", hidden_dim, 1, ag::Init::Zero, rng);
  W2_ = store.add(prefix + "/W2", out_dim, hidden_dim, ag::Init::Glorot, rng);
  b2_ = store.add(prefix + "/b2", out_dim, 1, ag::Init::Zero, rng);
}

ag::Var MlpHead::logits(ag::Graph& g, ag::Var X, bool training, double dropout,
                        std::mt19937_64& rng) const {
  ag::Var h = ag::relu(ag::add_colwise(ag::matmul(g.param(*W1_), X), g.param(*b1_)));
  if (training && dropout > 0.0) h = ag::dropout(h, dropout, rng);
  return ag::add_colwise(ag::matmul(g.param(*W2_), h), g.param(*b2_));
}

}  // namespace fsp
