#include "fsp/autograd.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace fsp::ag {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool cond, const char* msg) {
  if (!cond) throw std::logic_error(std::string("autograd: ") + msg);
}
}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore

Parameter* ParameterStore::add(const std::string& name, int rows, int cols, Init init,
                               std::mt19937_64& rng) {
  Mat v(rows, cols);
  switch (init) {
    case Init::Zero:
      v.setZero();
      break;
    case Init::Glorot: {
      const double limit = std::sqrt(6.0 / (rows + cols));
      for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) {
          // 53-bit uniform in [0,1); stable across platforms
          const double u = (rng() >> 11) * (1.0 / 9007199254740992.0);
          v(r, c) = (2.0 * u - 1.0) * limit;
        }
      break;
    }
    case Init::Gaussian: {
      for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) {
          // Box-Muller from the raw engine, avoiding std::normal_distribution
          // so the stream is identical everywhere.
          double u1 = ((rng() >> 11) + 1.0) * (1.0 / 9007199254740993.0);
          double u2 = (rng() >> 11) * (1.0 / 9007199254740992.0);
          v(r, c) = 0.1 * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
        }
      break;
    }
  }
  return add(name, std::move(v));
}

Parameter* ParameterStore::add(const std::string& name, Mat value) {
  if (find(name)) throw std::logic_error("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
  return params_.back().get();
}

Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p->grad.setZero();
}

void ParameterStore::save(std::ostream& out) const {
  const char magic[8] = {'F', 'S', 'P', 'P', 'A', 'R', 'M', '1'};
  out.write(magic, 8);
  std::uint64_t n = params_.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& p : params_) {
    std::uint64_t len = p->name.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(p->name.data(), static_cast<std::streamsize>(len));
    std::int64_t r = p->value.rows(), c = p->value.cols();
    out.write(reinterpret_cast<const char*>(&r), sizeof r);
    out.write(reinterpret_cast<const char*>(&c), sizeof c);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * r * c));
  }
}

void ParameterStore::load(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "FSPPARM1")
    throw std::runtime_error("parameter archive: bad magic");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (n != params_.size())
    throw std::runtime_error("parameter archive: entry count mismatch");
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    std::int64_t r = 0, c = 0;
    in.read(reinterpret_cast<char*>(&r), sizeof r);
    in.read(reinterpret_cast<char*>(&c), sizeof c);
    Parameter* p = find(name);
    if (!p) throw std::runtime_error("parameter archive: unknown parameter '" + name + "'");
    if (p->value.rows() != r || p->value.cols() != c)
      throw std::runtime_error("parameter archive: shape mismatch for '" + name + "'");
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double) * r * c));
    if (!in) throw std::runtime_error("parameter archive: truncated data for '" + name + "'");
  }
}

void ParameterStore::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write parameter archive: " + path);
  save(out);
}

void ParameterStore::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open parameter archive: " + path);
  load(in);
}

std::vector<Mat> ParameterStore::snapshot_values() const {
  std::vector<Mat> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore_values(const std::vector<Mat>& values) {
  require(values.size() == params_.size(), "snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::constant(Mat value) {
  nodes_.push_back(NodeRec{std::move(value), {}, nullptr, nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Parameter& p) {
  nodes_.push_back(NodeRec{p.value, {}, nullptr, &p});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::make(Mat value, BackFn back) {
  nodes_.push_back(NodeRec{std::move(value), {}, std::move(back), nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::accum(Var v, const Mat& g) {
  NodeRec& n = nodes_[v.i];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void Graph::accum_block(Var v, int r0, int c0, const Mat& g) {
  NodeRec& n = nodes_[v.i];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad.block(r0, c0, g.rows(), g.cols()) += g;
}

void Graph::accum_col(Var v, int c, const Eigen::Ref<const Eigen::VectorXd>& g) {
  NodeRec& n = nodes_[v.i];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad.col(c) += g;
}

void Graph::backward(Var loss) {
  require(loss.g == this, "backward on a foreign graph");
  require(nodes_[loss.i].value.rows() == 1 && nodes_[loss.i].value.cols() == 1,
          "loss must be scalar");
  accum(loss, Mat::Ones(1, 1));
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    NodeRec& n = nodes_[i];
    if (n.grad.size() == 0) continue;  // no gradient reached this node
    if (n.p != nullptr)
      n.p->grad += n.grad;
    else if (n.back)
      n.back(*this, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Ops

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return a.g->make(a.value() + b.value(), [a, b](Graph& g, const Mat& go) {
    g.accum(a, go);
    g.accum(b, go);
  });
}

Var add_colwise(Var m, Var bias) {
  require(bias.cols() == 1 && bias.rows() == m.rows(), "add_colwise: bias shape");
  Mat v = m.value();
  v.colwise() += Eigen::VectorXd(bias.value().col(0));
  return m.g->make(std::move(v), [m, bias](Graph& g, const Mat& go) {
    g.accum(m, go);
    g.accum(bias, go.rowwise().sum());
  });
}

Var scale(Var a, double k) {
  return a.g->make(a.value() * k, [a, k](Graph& g, const Mat& go) { g.accum(a, go * k); });
}

Var affine(Var a, double k, double c) {
  return a.g->make((a.value().array() * k + c).matrix(),
                   [a, k](Graph& g, const Mat& go) { g.accum(a, go * k); });
}

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return a.g->make(a.value() * b.value(), [a, b](Graph& g, const Mat& go) {
    g.accum(a, go * b.value().transpose());
    g.accum(b, a.value().transpose() * go);
  });
}

Var cmul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "cmul: shape mismatch");
  return a.g->make(a.value().cwiseProduct(b.value()), [a, b](Graph& g, const Mat& go) {
    g.accum(a, go.cwiseProduct(b.value()));
    g.accum(b, go.cwiseProduct(a.value()));
  });
}

Var tanh(Var a) {
  Var out = a.g->make(a.value().array().tanh().matrix(), nullptr);
  a.g->set_back(out, [a, out](Graph& g, const Mat& go) {
    const Mat& y = g.value(out);
    g.accum(a, (go.array() * (1.0 - y.array().square())).matrix());
  });
  return out;
}

Var sigmoid(Var a) {
  Mat v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Var out = a.g->make(std::move(v), nullptr);
  a.g->set_back(out, [a, out](Graph& g, const Mat& go) {
    const Mat& y = g.value(out);
    g.accum(a, (go.array() * y.array() * (1.0 - y.array())).matrix());
  });
  return out;
}

Var relu(Var a) {
  Mat v = a.value().cwiseMax(0.0);
  return a.g->make(v, [a](Graph& g, const Mat& go) {
    g.accum(a, (go.array() * (a.value().array() > 0.0).cast<double>()).matrix());
  });
}

Var vconcat(const std::vector<Var>& parts) {
  require(!parts.empty(), "vconcat: empty");
  int total = 0;
  const int c = parts[0].cols();
  for (const Var& p : parts) {
    require(p.cols() == c, "vconcat: column mismatch");
    total += p.rows();
  }
  Mat v(total, c);
  int r = 0;
  for (const Var& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> deps = parts;
  return parts[0].g->make(std::move(v), [deps](Graph& g, const Mat& go) {
    int r = 0;
    for (const Var& p : deps) {
      g.accum(p, go.middleRows(r, g.value(p).rows()));
      r += static_cast<int>(g.value(p).rows());
    }
  });
}

Var hconcat(const std::vector<Var>& parts) {
  require(!parts.empty(), "hconcat: empty");
  int total = 0;
  const int r = parts[0].rows();
  for (const Var& p : parts) {
    require(p.rows() == r, "hconcat: row mismatch");
    total += p.cols();
  }
  Mat v(r, total);
  int c = 0;
  for (const Var& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> deps = parts;
  return parts[0].g->make(std::move(v), [deps](Graph& g, const Mat& go) {
    int c = 0;
    for (const Var& p : deps) {
      g.accum(p, go.middleCols(c, g.value(p).cols()));
      c += static_cast<int>(g.value(p).cols());
    }
  });
}

Var col(Var a, int j) {
  return a.g->make(a.value().col(j), [a, j](Graph& g, const Mat& go) {
    g.accum_col(a, j, go.col(0));
  });
}

Var cols(Var a, std::vector<int> idx) {
  Mat v(a.rows(), static_cast<int>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) v.col(static_cast<int>(k)) = a.value().col(idx[k]);
  return a.g->make(std::move(v), [a, idx = std::move(idx)](Graph& g, const Mat& go) {
    for (std::size_t k = 0; k < idx.size(); ++k)
      g.accum_col(a, idx[k], go.col(static_cast<int>(k)));
  });
}

Var rows(Var a, int r0, int n) {
  return a.g->make(a.value().middleRows(r0, n), [a, r0](Graph& g, const Mat& go) {
    g.accum_block(a, r0, 0, go);
  });
}

Var transpose(Var a) {
  return a.g->make(a.value().transpose(),
                   [a](Graph& g, const Mat& go) { g.accum(a, go.transpose()); });
}

Var sum_all(Var a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return a.g->make(std::move(v), [a](Graph& g, const Mat& go) {
    g.accum(a, Mat::Constant(g.value(a).rows(), g.value(a).cols(), go(0, 0)));
  });
}

Var square(Var a) {
  return a.g->make(a.value().cwiseProduct(a.value()), [a](Graph& g, const Mat& go) {
    g.accum(a, 2.0 * go.cwiseProduct(g.value(a)));
  });
}

double logsumexp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i)
    if (v(i) != kNegInf) s += std::exp(v(i) - m);
  return m + std::log(s);
}

Var log_softmax_cols(Var logits) {
  const Mat& x = logits.value();
  Mat v(x.rows(), x.cols());
  for (int c = 0; c < x.cols(); ++c) {
    const double lz = logsumexp(x.col(c));
    require(std::isfinite(lz), "log_softmax: column fully masked");
    v.col(c) = x.col(c).array() - lz;
  }
  Var out = logits.g->make(std::move(v), nullptr);
  logits.g->set_back(out, [logits, out](Graph& g, const Mat& go) {
    const Mat& lp = g.value(out);
    Mat p = lp.array().exp().matrix();  // exp(-inf) == 0 exactly at masked entries
    Eigen::RowVectorXd colsum = go.colwise().sum();
    Mat gx = go - p * colsum.asDiagonal();
    g.accum(logits, gx);
  });
  return out;
}

Var pick_nll(Var log_probs, std::vector<int> labels) {
  require(static_cast<int>(labels.size()) == log_probs.cols(), "pick_nll: label count mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0) continue;
    loss -= log_probs.value()(labels[j], static_cast<int>(j));
  }
  Mat v(1, 1);
  v(0, 0) = loss;
  return log_probs.g->make(std::move(v),
                           [log_probs, labels = std::move(labels)](Graph& g, const Mat& go) {
    Mat gx = Mat::Zero(g.value(log_probs).rows(), g.value(log_probs).cols());
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j] >= 0) gx(labels[j], static_cast<int>(j)) = -go(0, 0);
    g.accum(log_probs, gx);
  });
}

Var span_attention(Var H, Var scores, const std::vector<std::pair<int, int>>& spans) {
  require(scores.rows() == 1 && scores.cols() == H.cols(), "span_attention: score shape");
  const Mat& h = H.value();
  const int d = static_cast<int>(h.rows());
  Mat v(d, static_cast<int>(spans.size()));
  auto alphas = std::make_shared<std::vector<Eigen::VectorXd>>();
  alphas->reserve(spans.size());
  for (std::size_t j = 0; j < spans.size(); ++j) {
    const auto [s, e] = spans[j];
    const int len = e - s + 1;
    Eigen::VectorXd sl = scores.value().block(0, s, 1, len).transpose();
    const double lz = logsumexp(sl);
    Eigen::VectorXd a = (sl.array() - lz).exp();
    v.col(static_cast<int>(j)) = h.middleCols(s, len) * a;
    alphas->push_back(std::move(a));
  }
  return H.g->make(std::move(v), [H, scores, spans, alphas](Graph& g, const Mat& go) {
    const Mat& h = g.value(H);
    Mat gh = Mat::Zero(h.rows(), h.cols());
    Mat gs = Mat::Zero(1, h.cols());
    for (std::size_t j = 0; j < spans.size(); ++j) {
      const auto [s, e] = spans[j];
      const int len = e - s + 1;
      const Eigen::VectorXd& a = (*alphas)[j];
      const Eigen::VectorXd gout = go.col(static_cast<int>(j));
      gh.middleCols(s, len) += gout * a.transpose();
      Eigen::VectorXd da = h.middleCols(s, len).transpose() * gout;
      const double dot = a.dot(da);
      gs.block(0, s, 1, len) += (a.array() * (da.array() - dot)).matrix().transpose();
    }
    g.accum(H, gh);
    g.accum(scores, gs);
  });
}

Var dropout(Var a, double p, std::mt19937_64& rng) {
  require(p >= 0.0 && p < 1.0, "dropout rate must be in [0,1)");
  if (p == 0.0) return a;
  const double keep = 1.0 - p;
  Mat mask(a.rows(), a.cols());
  for (int c = 0; c < a.cols(); ++c)
    for (int r = 0; r < a.rows(); ++r) {
      const double u = (rng() >> 11) * (1.0 / 9007199254740992.0);
      mask(r, c) = u < keep ? 1.0 / keep : 0.0;
    }
  Var m = a.g->constant(std::move(mask));
  return cmul(a, m);
}

}  // namespace fsp::ag
