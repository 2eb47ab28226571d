#pragma once

#include <string>

#include "fsp/autograd.hpp"

namespace fsp {

// One-hidden-layer classifier head with rectified activation, shared by the
// node, frame, and edge scorers. Dropout hits the hidden layer in training.
class MlpHead {
 public:
  MlpHead(const std::string& prefix, int in_dim, int hidden_dim, int out_dim,
          ag::ParameterStore& store, std::mt19937_64& rng);

  ag::Var logits(ag::Graph& g, ag::Var X, bool training, double dropout,
                 std::mt19937_64& rng) const;

  int out_dim() const { return out_dim_; }

 private:
  int out_dim_;
  ag::Parameter* W1_;
  ag::Parameter* b1_;
  ag::Parameter* W2_;
  ag::Parameter* b2_;
};

}  // namespace fsp
