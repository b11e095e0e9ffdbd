#include "depkit/transformer.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "depkit/error.hpp"
#include "depkit/kernels.hpp"

namespace depkit::nn {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;

constexpr double kLayerNormEps = 1e-12;

CMap view(std::span<const double> buf, const Slot& s) { return {buf.data() + s.offset, s.rows, s.cols}; }
MMap view(std::span<double> buf, const Slot& s) { return {buf.data() + s.offset, s.rows, s.cols}; }

struct NormCache {
  Mat xhat;
  Vec rstd;
};

Mat layer_norm(const Mat& x, const CMap& gain, const CMap& bias, NormCache& cache) {
  Vec mu = x.rowwise().mean();
  Mat centered = x.colwise() - mu;
  Vec var = centered.array().square().rowwise().mean();
  cache.rstd = (var.array() + kLayerNormEps).rsqrt();
  cache.xhat = centered.array().colwise() * cache.rstd.array();
  Mat out = cache.xhat.array().rowwise() * gain.row(0).array();
  out.rowwise() += bias.row(0);
  return out;
}

Mat layer_norm_backward(const Mat& dout, const NormCache& cache, const CMap& gain, MMap dgain, MMap dbias) {
  dgain.row(0) += (dout.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dout.colwise().sum();
  Mat dxhat = dout.array().rowwise() * gain.row(0).array();
  Vec m1 = dxhat.rowwise().mean();
  Vec m2 = (dxhat.array() * cache.xhat.array()).rowwise().mean();
  Mat dx = dxhat.colwise() - m1;
  dx -= (cache.xhat.array().colwise() * m2.array()).matrix();
  return dx.array().colwise() * cache.rstd.array();
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * std::exp(-0.5 * x * x) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
}

void softmax_rows(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
}

struct LayerCache {
  Mat x_in, q, k, v, o, y, hpre, h;
  std::vector<Mat> attn;
  NormCache ln1, ln2;
};

struct ForwardCache {
  NormCache emb_ln;
  std::vector<LayerCache> layers;
  Mat out;
};

void check_ids(const NetConfig& cfg, std::span<const int> ids) {
  if (ids.empty()) throw Error(ErrorKind::EmptyInput, "empty token sequence");
  if (static_cast<int>(ids.size()) > cfg.max_positions)
    throw Error(ErrorKind::LengthMismatch, "sequence of " + std::to_string(ids.size()) + " exceeds " +
                                               std::to_string(cfg.max_positions) + " positions");
  for (int id : ids)
    if (id < 0 || id >= cfg.vocab_size) throw Error(ErrorKind::LabelOutOfRange, "token id " + std::to_string(id));
}

// Returns the CLS logits; fills the cache for backward.
Eigen::RowVectorXd forward(const NetConfig& cfg, const ParamLayout& L, std::span<const double> p,
                           std::span<const int> ids, ForwardCache& cache) {
  const auto T = static_cast<Eigen::Index>(ids.size());
  const int d = cfg.d_model;
  const int dh = d / cfg.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  auto tok = view(p, L.tok_emb);
  auto pos = view(p, L.pos_emb);
  Mat x(T, d);
  for (Eigen::Index t = 0; t < T; ++t) x.row(t) = tok.row(ids[static_cast<std::size_t>(t)]) + pos.row(t);
  x = layer_norm(x, view(p, L.emb_ln_g), view(p, L.emb_ln_b), cache.emb_ln);

  cache.layers.resize(L.layers.size());
  for (std::size_t l = 0; l < L.layers.size(); ++l) {
    const auto& S = L.layers[l];
    auto& c = cache.layers[l];
    c.x_in = x;
    c.q = x * view(p, S.wq);
    c.q.rowwise() += view(p, S.bq).row(0);
    c.k = x * view(p, S.wk);
    c.k.rowwise() += view(p, S.bk).row(0);
    c.v = x * view(p, S.wv);
    c.v.rowwise() += view(p, S.bv).row(0);
    c.o.resize(T, d);
    c.attn.resize(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
      Mat s = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(s);
      c.o.middleCols(h * dh, dh) = s * c.v.middleCols(h * dh, dh);
      c.attn[static_cast<std::size_t>(h)] = std::move(s);
    }
    Mat r1 = c.o * view(p, S.wo);
    r1.rowwise() += view(p, S.bo).row(0);
    r1 += x;
    c.y = layer_norm(r1, view(p, S.ln1_g), view(p, S.ln1_b), c.ln1);
    c.hpre = c.y * view(p, S.w1);
    c.hpre.rowwise() += view(p, S.b1).row(0);
    c.h = c.hpre.unaryExpr([](double v) { return gelu(v); });
    Mat r2 = c.h * view(p, S.w2);
    r2.rowwise() += view(p, S.b2).row(0);
    r2 += c.y;
    x = layer_norm(r2, view(p, S.ln2_g), view(p, S.ln2_b), c.ln2);
  }
  cache.out = std::move(x);
  Eigen::RowVectorXd logits = cache.out.row(0) * view(p, L.head_w);
  logits += view(p, L.head_b).row(0);
  return logits;
}

Slot take(std::size_t& cursor, int rows, int cols) {
  Slot s{cursor, rows, cols};
  cursor += s.size();
  return s;
}

}  // namespace

ParamLayout::ParamLayout(const NetConfig& cfg) {
  if (cfg.vocab_size < 1 || cfg.d_model < 1 || cfg.heads < 1 || cfg.d_model % cfg.heads != 0 || cfg.ff < 1 ||
      cfg.layers < 0 || cfg.classes < 2 || cfg.max_positions < 1)
    throw Error(ErrorKind::ConfigError, "invalid network configuration");
  std::size_t cur = 0;
  const int d = cfg.d_model;
  tok_emb = take(cur, cfg.vocab_size, d);
  pos_emb = take(cur, cfg.max_positions, d);
  emb_ln_g = take(cur, 1, d);
  emb_ln_b = take(cur, 1, d);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerSlots s;
    s.wq = take(cur, d, d);
    s.bq = take(cur, 1, d);
    s.wk = take(cur, d, d);
    s.bk = take(cur, 1, d);
    s.wv = take(cur, d, d);
    s.bv = take(cur, 1, d);
    s.wo = take(cur, d, d);
    s.bo = take(cur, 1, d);
    s.ln1_g = take(cur, 1, d);
    s.ln1_b = take(cur, 1, d);
    s.w1 = take(cur, d, cfg.ff);
    s.b1 = take(cur, 1, cfg.ff);
    s.w2 = take(cur, cfg.ff, d);
    s.b2 = take(cur, 1, d);
    s.ln2_g = take(cur, 1, d);
    s.ln2_b = take(cur, 1, d);
    layers.push_back(s);
  }
  head_w = take(cur, d, cfg.classes);
  head_b = take(cur, 1, cfg.classes);
  total = cur;
}

EncoderNet::EncoderNet(const NetConfig& cfg) : cfg_(cfg), layout_(cfg), params_(layout_.total, 0.0) {}

void EncoderNet::initialize(std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  std::fill(params_.begin(), params_.end(), 0.0);
  auto fill_normal = [&](const Slot& s) {
    for (std::size_t i = 0; i < s.size(); ++i) params_[s.offset + i] = normal(rng);
  };
  auto fill_one = [&](const Slot& s) { std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(s.offset), s.size(), 1.0); };
  fill_normal(layout_.tok_emb);
  fill_normal(layout_.pos_emb);
  fill_one(layout_.emb_ln_g);
  for (const auto& s : layout_.layers) {
    for (const Slot* w : {&s.wq, &s.wk, &s.wv, &s.wo, &s.w1, &s.w2}) fill_normal(*w);
    fill_one(s.ln1_g);
    fill_one(s.ln2_g);
  }
  fill_normal(layout_.head_w);
}

void EncoderNet::predict(std::span<const int> ids, std::span<double> probs) const {
  check_ids(cfg_, ids);
  ForwardCache cache;
  Eigen::RowVectorXd logits = forward(cfg_, layout_, params_, ids, cache);
  double mx = logits.maxCoeff();
  Eigen::RowVectorXd e = (logits.array() - mx).exp();
  e /= e.sum();
  for (int c = 0; c < cfg_.classes; ++c) probs[static_cast<std::size_t>(c)] = e(c);
}

double EncoderNet::accumulate_gradient(std::span<const int> ids, int label, std::span<double> grad) const {
  check_ids(cfg_, ids);
  if (label < 0 || label >= cfg_.classes) throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(label));
  const auto& L = layout_;
  std::span<const double> p = params_;
  const auto T = static_cast<Eigen::Index>(ids.size());
  const int d = cfg_.d_model;
  const int dh = d / cfg_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardCache cache;
  Eigen::RowVectorXd logits = forward(cfg_, L, p, ids, cache);
  const double mx = logits.maxCoeff();
  Eigen::RowVectorXd prob = (logits.array() - mx).exp();
  const double z = prob.sum();
  prob /= z;
  const double loss = -(logits(label) - mx - std::log(z));

  // head
  Eigen::RowVectorXd dlogits = prob;
  dlogits(label) -= 1.0;
  view(grad, L.head_w) += cache.out.row(0).transpose() * dlogits;
  view(grad, L.head_b).row(0) += dlogits;
  Mat dx = Mat::Zero(T, d);
  dx.row(0) = dlogits * view(p, L.head_w).transpose();

  for (std::size_t li = L.layers.size(); li-- > 0;) {
    const auto& S = L.layers[li];
    const auto& c = cache.layers[li];
    Mat dr2 = layer_norm_backward(dx, c.ln2, view(p, S.ln2_g), view(grad, S.ln2_g), view(grad, S.ln2_b));
    // feed-forward
    view(grad, S.w2) += c.h.transpose() * dr2;
    view(grad, S.b2).row(0) += dr2.colwise().sum();
    Mat dhpre = dr2 * view(p, S.w2).transpose();
    dhpre.array() *= c.hpre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    view(grad, S.w1) += c.y.transpose() * dhpre;
    view(grad, S.b1).row(0) += dhpre.colwise().sum();
    Mat dy = dr2 + dhpre * view(p, S.w1).transpose();
    Mat dr1 = layer_norm_backward(dy, c.ln1, view(p, S.ln1_g), view(grad, S.ln1_g), view(grad, S.ln1_b));
    // attention output projection
    view(grad, S.wo) += c.o.transpose() * dr1;
    view(grad, S.bo).row(0) += dr1.colwise().sum();
    Mat d_o = dr1 * view(p, S.wo).transpose();
    Mat dq(T, d), dk(T, d), dv(T, d);
    for (int h = 0; h < cfg_.heads; ++h) {
      const Mat& a = c.attn[static_cast<std::size_t>(h)];
      auto doh = d_o.middleCols(h * dh, dh);
      Mat da = doh * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = a.transpose() * doh;
      Vec row_dot = (da.array() * a.array()).rowwise().sum();
      Mat ds = (a.array() * (da.colwise() - row_dot).array()) * scale;
      dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    view(grad, S.wq) += c.x_in.transpose() * dq;
    view(grad, S.bq).row(0) += dq.colwise().sum();
    view(grad, S.wk) += c.x_in.transpose() * dk;
    view(grad, S.bk).row(0) += dk.colwise().sum();
    view(grad, S.wv) += c.x_in.transpose() * dv;
    view(grad, S.bv).row(0) += dv.colwise().sum();
    dx = dr1 + dq * view(p, S.wq).transpose() + dk * view(p, S.wk).transpose() + dv * view(p, S.wv).transpose();
  }

  Mat de = layer_norm_backward(dx, cache.emb_ln, view(p, L.emb_ln_g), view(grad, L.emb_ln_g), view(grad, L.emb_ln_b));
  auto dtok = view(grad, L.tok_emb);
  auto dpos = view(grad, L.pos_emb);
  for (Eigen::Index t = 0; t < T; ++t) {
    dtok.row(ids[static_cast<std::size_t>(t)]) += de.row(t);
    dpos.row(t) += de.row(t);
  }
  return loss;
}

namespace {

void check_batch(Batch batch, std::span<double> grad, const EncoderNet& net) {
  if (batch.sequences.empty()) throw Error(ErrorKind::EmptyInput, "empty batch");
  if (batch.sequences.size() != batch.labels.size()) throw Error(ErrorKind::LengthMismatch, "batch labels");
  if (grad.size() != net.parameter_count()) throw Error(ErrorKind::ShapeMismatch, "gradient buffer size");
}

}  // namespace

namespace serial {

double batch_gradient(const EncoderNet& net, Batch batch, std::span<double> grad) {
  check_batch(batch, grad, net);
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> tmp(grad.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    std::fill(tmp.begin(), tmp.end(), 0.0);
    loss += net.accumulate_gradient(batch.sequences[i], batch.labels[i], tmp);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += tmp[j];
  }
  const double inv = 1.0 / static_cast<double>(batch.sequences.size());
  for (double& g : grad) g *= inv;
  return loss * inv;
}

}  // namespace serial

namespace parallel {

double batch_gradient(const EncoderNet& net, Batch batch, std::span<double> grad) {
  check_batch(batch, grad, net);
  const auto n = static_cast<std::int64_t>(batch.sequences.size());
  std::vector<std::vector<double>> parts(batch.sequences.size());
  std::vector<double> losses(batch.sequences.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      parts[k].assign(grad.size(), 0.0);
      losses[k] = net.accumulate_gradient(batch.sequences[k], batch.labels[k], parts[k]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  kernels::parallel::reduce_in_order(parts, grad);
  double loss = 0.0;
  for (double l : losses) loss += l;
  const double inv = 1.0 / static_cast<double>(batch.sequences.size());
  for (double& g : grad) g *= inv;
  return loss * inv;
}

}  // namespace parallel

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace depkit::nn
