#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fsp::ag {

using Mat = Eigen::MatrixXd;

/// A named, persistent tensor with an accumulated gradient. Owned by a
/// ParameterStore; graphs reference parameters without owning them.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }
  int rows() const { return static_cast<int>(value.rows()); }
  int cols() const { return static_cast<int>(value.cols()); }
};

enum class Init { Zero, Glorot, Gaussian };

class ParameterStore {
 public:
  Parameter* add(const std::string& name, int rows, int cols, Init init, std::mt19937_64& rng);
  Parameter* add(const std::string& name, Mat value);
  Parameter* find(const std::string& name) const;  // nullptr when absent
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  void zero_grads();

  // Binary archive, parameters matched by name against the existing store.
  void save(std::ostream& out) const;
  void load(std::istream& in);
  void save_file(const std::string& path) const;
  void load_file(const std::string& path);

  /// Copies of all values, and restore; used for best-checkpoint tracking.
  std::vector<Mat> snapshot_values() const;
  void restore_values(const std::vector<Mat>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Lightweight handle to a node in a Graph.
struct Var {
  Graph* g = nullptr;
  int i = -1;
  bool valid() const { return g != nullptr && i >= 0; }
  const Mat& value() const;
  int rows() const;
  int cols() const;
};

/// A per-forward-pass computation tape. Nodes are appended in creation
/// order, which is a valid topological order, so backward() is a single
/// reverse sweep. Graphs are not copyable or movable; backward closures
/// capture the graph address.
class Graph {
 public:
  using BackFn = std::function<void(Graph&, const Mat& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Mat value);
  Var param(Parameter& p);
  Var make(Mat value, BackFn back);

  const Mat& value(Var v) const { return nodes_[v.i].value; }
  /// Installs the backward closure after the node exists, so the closure
  /// can capture the output Var and reuse the forward value.
  void set_back(Var v, BackFn back) { nodes_[v.i].back = std::move(back); }
  /// Accumulates into a node's gradient, allocating it lazily.
  void accum(Var v, const Mat& g);
  void accum_block(Var v, int r0, int c0, const Mat& g);
  void accum_col(Var v, int c, const Eigen::Ref<const Eigen::VectorXd>& g);

  /// Runs reverse-mode accumulation from a 1x1 loss node. Parameter
  /// gradients are accumulated into their Parameter::grad.
  void backward(Var loss);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct NodeRec {
    Mat value;
    Mat grad;  // empty until a gradient reaches the node
    BackFn back;
    Parameter* p = nullptr;
  };
  std::vector<NodeRec> nodes_;
  friend struct Var;
};

inline const Mat& Var::value() const { return g->value(*this); }
inline int Var::rows() const { return static_cast<int>(value().rows()); }
inline int Var::cols() const { return static_cast<int>(value().cols()); }

// --------------------------------------------------------------------------
// Ops. All are free functions building one node each (a few build none).

Var add(Var a, Var b);                       // same shape
Var add_colwise(Var m, Var bias);            // bias is (rows x 1), broadcast over columns
Var scale(Var a, double k);
Var affine(Var a, double k, double c);       // k*a + c elementwise
Var matmul(Var a, Var b);
Var cmul(Var a, Var b);                      // elementwise product
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var vconcat(const std::vector<Var>& parts);  // stack rows
Var hconcat(const std::vector<Var>& parts);  // stack columns
Var col(Var a, int j);
Var cols(Var a, std::vector<int> idx);       // gather columns, repeats allowed
Var rows(Var a, int r0, int n);              // contiguous row block
Var transpose(Var a);
Var sum_all(Var a);                          // 1x1
Var square(Var a);

/// Column-wise log-softmax. Entries of -inf are treated as masked out and
/// receive zero probability exactly.
Var log_softmax_cols(Var logits);

/// Sum of -log_probs(labels[j], j) over columns, as a 1x1 node. A label of
/// -1 skips that column.
Var pick_nll(Var log_probs, std::vector<int> labels);

/// Attention-pooled span vectors. H is (d x n), scores (1 x n); for each
/// inclusive column range [s,e] the output column is H[:,s..e] * softmax
/// of scores[s..e].
Var span_attention(Var H, Var scores, const std::vector<std::pair<int, int>>& spans);

/// Inverted-dropout mask applied in place of the value (training only;
/// callers gate on their own training flag). Mask entries are 0 or 1/(1-p).
Var dropout(Var a, double p, std::mt19937_64& rng);

// --------------------------------------------------------------------------
// Numerics helpers shared with non-autograd code.

double logsumexp(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace fsp::ag
