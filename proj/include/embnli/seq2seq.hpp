#ifndef EMBNLI_SEQ2SEQ_HPP
#define EMBNLI_SEQ2SEQ_HPP

#include "embnli/common.hpp"
#include "embnli/init.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace embnli {

struct ModelConfig {
  int d = 300;
  int layers = 2;
  int num_labels = 3;
  double dropout_p = 0.2;
  bool attention = true;
  int window_D = 5;

  void validate() const {
    if (d < 1) throw UsageError("model dimension must be positive");
    if (layers < 1) throw UsageError("model needs at least one layer");
    if (num_labels < 1) throw UsageError("model needs at least one label");
    if (!(dropout_p >= 0 && dropout_p < 1)) throw UsageError("dropout probability must lie in [0, 1)");
    if (attention && window_D < 1) throw UsageError("attention window half-width must be positive");
  }
};

/// One LSTM layer: W is 4d x 2d acting on [x; h_prev], gate rows ordered i, f, g, o.
template <typename Scalar>
struct LstmLayer {
  Matrix<Scalar> W;
  Vector<Scalar> b;
};

template <typename Scalar>
struct ModelParams {
  Matrix<Scalar> enc_embed;  ///< V x d
  Matrix<Scalar> dec_embed;  ///< V x d
  std::vector<LstmLayer<Scalar>> encoder;
  std::vector<LstmLayer<Scalar>> decoder;
  Matrix<Scalar> attn_W;     ///< d x d, position predictor
  Vector<Scalar> attn_v;     ///< d
  Matrix<Scalar> combine_W;  ///< d x 2d acting on [context; h]
  Matrix<Scalar> out_W;      ///< labels x d
  Vector<Scalar> out_b;      ///< labels

  template <typename Other>
  [[nodiscard]] ModelParams<Other> cast() const;
};

/// Calls f(name, tensor_of_p0, tensor_of_p1, ...) for every parameter tensor,
/// in a fixed order. All params must share a shape.
template <typename F, typename P0, typename... Ps>
void visit_tensors(bool include_embeddings, F&& f, P0& p0, Ps&... ps) {
  if (include_embeddings) {
    f(std::string("enc_embed"), p0.enc_embed, ps.enc_embed...);
    f(std::string("dec_embed"), p0.dec_embed, ps.dec_embed...);
  }
  for (std::size_t l = 0; l < p0.encoder.size(); ++l) {
    const auto pre = "encoder.l" + std::to_string(l);
    f(pre + ".W", p0.encoder[l].W, ps.encoder[l].W...);
    f(pre + ".b", p0.encoder[l].b, ps.encoder[l].b...);
  }
  for (std::size_t l = 0; l < p0.decoder.size(); ++l) {
    const auto pre = "decoder.l" + std::to_string(l);
    f(pre + ".W", p0.decoder[l].W, ps.decoder[l].W...);
    f(pre + ".b", p0.decoder[l].b, ps.decoder[l].b...);
  }
  f(std::string("attn.W"), p0.attn_W, ps.attn_W...);
  f(std::string("attn.v"), p0.attn_v, ps.attn_v...);
  f(std::string("combine.W"), p0.combine_W, ps.combine_W...);
  f(std::string("out.W"), p0.out_W, ps.out_W...);
  f(std::string("out.b"), p0.out_b, ps.out_b...);
}

template <typename Scalar>
template <typename Other>
ModelParams<Other> ModelParams<Scalar>::cast() const {
  ModelParams<Other> out;
  out.encoder.resize(encoder.size());
  out.decoder.resize(decoder.size());
  visit_tensors(true, [](const std::string&, auto& dst, const auto& src) { dst = src.template cast<Other>(); }, out,
                *this);
  return out;
}

template <typename Scalar>
ModelParams<Scalar> zeros_like(const ModelParams<Scalar>& p) {
  ModelParams<Scalar> z;
  z.encoder.resize(p.encoder.size());
  z.decoder.resize(p.decoder.size());
  visit_tensors(true, [](const std::string&, auto& dst, const auto& src) { dst.setZero(src.rows(), src.cols()); }, z,
                p);
  return z;
}

template <typename Scalar>
Scalar squared_norm(const ModelParams<Scalar>& p, bool include_embeddings = true) {
  Scalar s = 0;
  visit_tensors(include_embeddings, [&](const std::string&, const auto& t) { s += t.squaredNorm(); }, p);
  return s;
}

/// dst += alpha * src
template <typename Scalar>
void axpy(Scalar alpha, const ModelParams<Scalar>& src, ModelParams<Scalar>& dst, bool include_embeddings = true) {
  visit_tensors(include_embeddings, [&](const std::string&, auto& d, const auto& s) { d += alpha * s; }, dst, src);
}

template <typename Scalar>
bool params_finite(const ModelParams<Scalar>& p) {
  bool ok = true;
  visit_tensors(true, [&](const std::string&, const auto& t) { ok = ok && t.allFinite(); }, p);
  return ok;
}

/// LSTM weights, attention and softmax matrices from `spec`; biases zero
/// except the forget gate, which starts at 1. Each tensor gets its own seed
/// derived from spec.seed.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, const Matrix<Scalar>& enc_embed,
                                const Matrix<Scalar>& dec_embed, InitSpec spec) {
  cfg.validate();
  if (enc_embed.cols() != cfg.d || dec_embed.cols() != cfg.d)
    throw UsageError("embedding dimension must equal the model dimension");
  if (enc_embed.rows() != dec_embed.rows()) throw UsageError("encoder and decoder vocabularies differ in size");
  spec.num_layers = cfg.layers;
  const Eigen::Index d = cfg.d;
  std::uint64_t stream = 0;
  auto next = [&](Eigen::Index rows, Eigen::Index cols) {
    return init_weight<Scalar>(rows, cols, spec.with_seed(derive_seed(spec.seed, ++stream)), d);
  };
  auto lstm = [&] {
    LstmLayer<Scalar> layer{next(4 * d, 2 * d), Vector<Scalar>::Zero(4 * d)};
    layer.b.segment(d, d).setOnes();
    return layer;
  };
  ModelParams<Scalar> p;
  p.enc_embed = enc_embed;
  p.dec_embed = dec_embed;
  for (int l = 0; l < cfg.layers; ++l) p.encoder.push_back(lstm());
  for (int l = 0; l < cfg.layers; ++l) p.decoder.push_back(lstm());
  p.attn_W = next(d, d);
  p.attn_v = next(d, 1).col(0);
  p.combine_W = next(d, 2 * d);
  p.out_W = next(cfg.num_labels, d);
  p.out_b = Vector<Scalar>::Zero(cfg.num_labels);
  return p;
}

// ---------------------------------------------------------------------------
// LSTM cell

template <typename Scalar>
struct LstmCache {
  Vector<Scalar> input;  ///< [x; h_prev]
  Vector<Scalar> c_prev;
  Vector<Scalar> i, f, g, o;
  Vector<Scalar> c, tanh_c, h;
};

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return (S(1) / (S(1) + (-z.array()).exp())).matrix();
}

template <typename Scalar>
Scalar logistic(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

template <typename Scalar>
void check_finite(const Vector<Scalar>& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string("non-finite activation in ") + what);
}

}  // namespace detail

/// gates = W [x; h_prev] + b; c = f*c_prev + i*g; h = o*tanh(c).
template <typename Scalar>
LstmCache<Scalar> lstm_step(const Vector<Scalar>& h_prev, const Vector<Scalar>& c_prev, const Vector<Scalar>& x,
                            const LstmLayer<Scalar>& layer) {
  const Eigen::Index d = h_prev.size();
  if (c_prev.size() != d || layer.W.rows() != 4 * d || layer.W.cols() != x.size() + d || layer.b.size() != 4 * d)
    throw UsageError("lstm_step: inconsistent dimensions");
  LstmCache<Scalar> k;
  k.input.resize(x.size() + d);
  k.input << x, h_prev;
  const Vector<Scalar> z = layer.W * k.input + layer.b;
  k.c_prev = c_prev;
  k.i = detail::sigmoid(z.segment(0, d));
  k.f = detail::sigmoid(z.segment(d, d));
  k.g = z.segment(2 * d, d).array().tanh().matrix();
  k.o = detail::sigmoid(z.segment(3 * d, d));
  k.c = k.f.cwiseProduct(c_prev) + k.i.cwiseProduct(k.g);
  k.tanh_c = k.c.array().tanh().matrix();
  k.h = k.o.cwiseProduct(k.tanh_c);
  detail::check_finite(k.h, "lstm_step");
  detail::check_finite(k.c, "lstm_step cell");
  return k;
}

template <typename Scalar>
struct LstmGrads {
  Vector<Scalar> dx, dh_prev, dc_prev;
};

/// Accumulates into grad.W / grad.b and returns input-side gradients.
template <typename Scalar>
LstmGrads<Scalar> lstm_step_backward(const LstmLayer<Scalar>& layer, const LstmCache<Scalar>& k,
                                     const Vector<Scalar>& dh, const Vector<Scalar>& dc_next,
                                     LstmLayer<Scalar>& grad) {
  const Eigen::Index d = dh.size();
  const Vector<Scalar> dc =
      dc_next + dh.cwiseProduct(k.o).cwiseProduct((Scalar(1) - k.tanh_c.array().square()).matrix());
  Vector<Scalar> dz(4 * d);
  dz.segment(0, d) = dc.cwiseProduct(k.g).cwiseProduct(k.i.cwiseProduct((Scalar(1) - k.i.array()).matrix()));
  dz.segment(d, d) = dc.cwiseProduct(k.c_prev).cwiseProduct(k.f.cwiseProduct((Scalar(1) - k.f.array()).matrix()));
  dz.segment(2 * d, d) = dc.cwiseProduct(k.i).cwiseProduct((Scalar(1) - k.g.array().square()).matrix());
  dz.segment(3 * d, d) =
      dh.cwiseProduct(k.tanh_c).cwiseProduct(k.o.cwiseProduct((Scalar(1) - k.o.array()).matrix()));
  grad.W.noalias() += dz * k.input.transpose();
  grad.b += dz;
  const Vector<Scalar> dinput = layer.W.transpose() * dz;
  const Eigen::Index in = k.input.size() - d;
  return {dinput.head(in), dinput.tail(d), dc.cwiseProduct(k.f)};
}

// ---------------------------------------------------------------------------
// Local-p attention with dot scores

template <typename Scalar>
struct Attention {
  Scalar u = 0;        ///< v . tanh(W h)
  Scalar position = 0; ///< predicted source position, clamped to [0, S-1]
  bool clamped = false;
  Eigen::Index start = 0;
  Vector<Scalar> weights;  ///< over memory columns start .. start+weights.size()-1
  Vector<Scalar> tanh_Wh;
  Vector<Scalar> context;
};

/// p = S sigmoid(v . tanh(W h)); weights are a softmax over the window
/// |s - p| <= D of h . m_s, times exp(-(s-p)^2 / (2 sigma^2)) with sigma = D/2,
/// renormalized. `memory` holds one state per column.
template <typename Scalar>
Attention<Scalar> attend(const Vector<Scalar>& h, const Matrix<Scalar>& memory, const Matrix<Scalar>& W,
                         const Vector<Scalar>& v, int window_D) {
  const Eigen::Index S = memory.cols();
  if (S < 1) throw UsageError("attend: empty memory");
  Attention<Scalar> a;
  a.tanh_Wh = (W * h).array().tanh().matrix();
  a.u = v.dot(a.tanh_Wh);
  const Scalar raw = static_cast<Scalar>(S) * detail::logistic(a.u);
  const Scalar hi = static_cast<Scalar>(S - 1);
  a.clamped = raw > hi;
  a.position = std::min(raw, hi);
  const auto D = static_cast<Scalar>(window_D);
  a.start = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(a.position - D)));
  const auto stop = std::min<Eigen::Index>(S - 1, static_cast<Eigen::Index>(std::floor(a.position + D)));
  const Eigen::Index n = stop - a.start + 1;
  const Scalar sigma = D / Scalar(2);
  Vector<Scalar> z = memory.middleCols(a.start, n).transpose() * h;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Scalar off = static_cast<Scalar>(a.start + k) - a.position;
    z(k) -= off * off / (Scalar(2) * sigma * sigma);
  }
  a.weights = (z.array() - z.maxCoeff()).exp().matrix();
  a.weights /= a.weights.sum();
  a.context = memory.middleCols(a.start, n) * a.weights;
  return a;
}

// ---------------------------------------------------------------------------
// Dropout on non-recurrent connections (inverted scaling)

class DropoutSampler {
 public:
  DropoutSampler(double p, bool active, std::uint64_t seed) : p_(p), active_(active && p > 0), rng_(seed) {}

  template <typename Scalar>
  Vector<Scalar> mask(Eigen::Index n) {
    if (!active_) return {};
    std::bernoulli_distribution keep(1.0 - p_);
    Vector<Scalar> m(n);
    const auto scale = static_cast<Scalar>(1.0 / (1.0 - p_));
    for (Eigen::Index i = 0; i < n; ++i) m(i) = keep(rng_) ? scale : Scalar(0);
    return m;
  }

 private:
  double p_;
  bool active_;
  std::mt19937_64 rng_;
};

namespace detail {
template <typename Scalar>
Vector<Scalar> apply_mask(const Vector<Scalar>& v, const Vector<Scalar>& mask) {
  return mask.size() ? Vector<Scalar>(v.cwiseProduct(mask)) : v;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Encoder / decoder

struct EncodedExample {
  std::vector<int> premise;
  std::vector<int> hypothesis;
  int label = 0;
};

template <typename Scalar>
struct StackTrace {
  std::vector<int> tokens;
  std::vector<std::vector<LstmCache<Scalar>>> steps;     ///< [t][layer]
  std::vector<std::vector<Vector<Scalar>>> input_masks;  ///< [t][layer], empty when dropout is off
};

template <typename Scalar>
struct ForwardState {
  StackTrace<Scalar> stack;
  Matrix<Scalar> memory;  ///< d x T, top-layer hidden states
  std::vector<Vector<Scalar>> final_h, final_c;
};

namespace detail {

template <typename Scalar>
StackTrace<Scalar> run_stack(const std::vector<int>& tokens, const Matrix<Scalar>& embed,
                             const std::vector<LstmLayer<Scalar>>& layers, std::vector<Vector<Scalar>>& h,
                             std::vector<Vector<Scalar>>& c, DropoutSampler& dropout) {
  StackTrace<Scalar> tr;
  tr.tokens = tokens;
  const Eigen::Index d = embed.cols();
  for (int tok : tokens) {
    if (tok < 0 || tok >= embed.rows()) throw DataError("unknown token id " + std::to_string(tok));
    std::vector<LstmCache<Scalar>> step;
    std::vector<Vector<Scalar>> masks;
    Vector<Scalar> x = embed.row(tok).transpose();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      masks.push_back(dropout.mask<Scalar>(d));
      step.push_back(lstm_step<Scalar>(h[l], c[l], apply_mask(x, masks.back()), layers[l]));
      h[l] = step.back().h;
      c[l] = step.back().c;
      x = h[l];
    }
    tr.steps.push_back(std::move(step));
    tr.input_masks.push_back(std::move(masks));
  }
  return tr;
}

/// Backprop through a stack run. dh_state/dc_state hold gradients w.r.t. the
/// final states on entry and w.r.t. the initial states on exit. `extra_top`
/// (optional, d x T) adds gradient to the top layer's h at each step.
template <typename Scalar>
void backprop_stack(const StackTrace<Scalar>& tr, const std::vector<LstmLayer<Scalar>>& layers,
                    std::vector<LstmLayer<Scalar>>& grad_layers, Matrix<Scalar>* grad_embed,
                    std::vector<Vector<Scalar>>& dh_state, std::vector<Vector<Scalar>>& dc_state,
                    const Matrix<Scalar>* extra_top) {
  const auto L = layers.size();
  for (std::size_t t = tr.steps.size(); t-- > 0;) {
    Vector<Scalar> from_above;
    for (std::size_t l = L; l-- > 0;) {
      Vector<Scalar> dh = dh_state[l];
      if (l + 1 < L)
        dh += from_above;
      else if (extra_top)
        dh += extra_top->col(static_cast<Eigen::Index>(t));
      auto g = lstm_step_backward<Scalar>(layers[l], tr.steps[t][l], dh, dc_state[l], grad_layers[l]);
      dh_state[l] = std::move(g.dh_prev);
      dc_state[l] = std::move(g.dc_prev);
      from_above = apply_mask(g.dx, tr.input_masks[t][l]);
    }
    if (grad_embed) grad_embed->row(tr.tokens[t]) += from_above.transpose();
  }
}

}  // namespace detail

/// Runs the encoder stack over the premise from zero states.
template <typename Scalar>
ForwardState<Scalar> encode(const std::vector<int>& premise, const ModelParams<Scalar>& params,
                            const ModelConfig& cfg, DropoutSampler& dropout) {
  if (premise.empty()) throw DataError("empty premise");
  ForwardState<Scalar> s;
  s.final_h.assign(static_cast<std::size_t>(cfg.layers), Vector<Scalar>::Zero(cfg.d));
  s.final_c = s.final_h;
  s.stack = detail::run_stack(premise, params.enc_embed, params.encoder, s.final_h, s.final_c, dropout);
  s.memory.resize(cfg.d, static_cast<Eigen::Index>(premise.size()));
  for (std::size_t t = 0; t < premise.size(); ++t)
    s.memory.col(static_cast<Eigen::Index>(t)) = s.stack.steps[t].back().h;
  return s;
}

template <typename Scalar>
struct ExampleTrace {
  ForwardState<Scalar> encoder;
  StackTrace<Scalar> decoder;
  std::optional<Attention<Scalar>> attention;
  Vector<Scalar> top_h;          ///< decoder's final top-layer state
  Vector<Scalar> attentional;    ///< tanh(combine_W [context; top_h]) when attention is on
  Vector<Scalar> out_mask;
  Vector<Scalar> classifier_in;  ///< after dropout
  Vector<Scalar> logits;
  Vector<Scalar> probs;
};

/// Decoder pass over the hypothesis, started from the encoder's final
/// per-layer states, ending in the softmax.
template <typename Scalar>
ExampleTrace<Scalar> classify_trace(const std::vector<int>& hypothesis, ForwardState<Scalar> encoder,
                                    const ModelParams<Scalar>& params, const ModelConfig& cfg,
                                    DropoutSampler& dropout) {
  if (hypothesis.empty()) throw DataError("empty hypothesis");
  ExampleTrace<Scalar> tr;
  tr.encoder = std::move(encoder);
  auto h = tr.encoder.final_h;
  auto c = tr.encoder.final_c;
  tr.decoder = detail::run_stack(hypothesis, params.dec_embed, params.decoder, h, c, dropout);
  tr.top_h = h.back();
  Vector<Scalar> r = tr.top_h;
  if (cfg.attention) {
    tr.attention = attend<Scalar>(tr.top_h, tr.encoder.memory, params.attn_W, params.attn_v, cfg.window_D);
    Vector<Scalar> cat(2 * cfg.d);
    cat << tr.attention->context, tr.top_h;
    tr.attentional = (params.combine_W * cat).array().tanh().matrix();
    r = tr.attentional;
  }
  tr.out_mask = dropout.mask<Scalar>(cfg.d);
  tr.classifier_in = detail::apply_mask(r, tr.out_mask);
  tr.logits = params.out_W * tr.classifier_in + params.out_b;
  tr.probs = (tr.logits.array() - tr.logits.maxCoeff()).exp().matrix();
  tr.probs /= tr.probs.sum();
  detail::check_finite(tr.probs, "softmax");
  return tr;
}

/// Label distribution for a hypothesis given an encoded premise.
template <typename Scalar>
Vector<Scalar> classify(const std::vector<int>& hypothesis, const ForwardState<Scalar>& encoder,
                        const ModelParams<Scalar>& params, const ModelConfig& cfg) {
  DropoutSampler off(0.0, false, 0);
  return classify_trace(hypothesis, encoder, params, cfg, off).probs;
}

/// Evaluation-mode forward pass.
template <typename Scalar>
Vector<Scalar> predict(const EncodedExample& ex, const ModelParams<Scalar>& params, const ModelConfig& cfg) {
  DropoutSampler off(0.0, false, 0);
  auto enc = encode(ex.premise, params, cfg, off);
  return classify_trace(ex.hypothesis, std::move(enc), params, cfg, off).probs;
}

/// Cross-entropy of one trace; accumulates parameter gradients (scaled by
/// `weight`) into `grads`.
template <typename Scalar>
void backprop_example(const ExampleTrace<Scalar>& tr, int label, const ModelParams<Scalar>& params,
                      const ModelConfig& cfg, Scalar weight, ModelParams<Scalar>& grads, bool embeddings) {
  const Eigen::Index d = cfg.d;
  Vector<Scalar> dlogits = tr.probs;
  dlogits(label) -= Scalar(1);
  dlogits *= weight;
  grads.out_W.noalias() += dlogits * tr.classifier_in.transpose();
  grads.out_b += dlogits;
  const Vector<Scalar> dr = detail::apply_mask<Scalar>(params.out_W.transpose() * dlogits, tr.out_mask);

  Vector<Scalar> dtop;
  Matrix<Scalar> dmemory = Matrix<Scalar>::Zero(d, tr.encoder.memory.cols());
  if (cfg.attention) {
    const auto& a = *tr.attention;
    const Vector<Scalar> dpre = dr.cwiseProduct((Scalar(1) - tr.attentional.array().square()).matrix());
    Vector<Scalar> cat(2 * d);
    cat << a.context, tr.top_h;
    grads.combine_W.noalias() += dpre * cat.transpose();
    const Vector<Scalar> dcat = params.combine_W.transpose() * dpre;
    const Vector<Scalar> dcontext = dcat.head(d);
    dtop = dcat.tail(d);

    const Eigen::Index n = a.weights.size();
    const auto window = tr.encoder.memory.middleCols(a.start, n);
    const Vector<Scalar> dw = window.transpose() * dcontext;
    const Vector<Scalar> dz = a.weights.cwiseProduct((dw.array() - a.weights.dot(dw)).matrix());
    dmemory.middleCols(a.start, n) += dcontext * a.weights.transpose() + tr.top_h * dz.transpose();
    dtop += window * dz;
    if (!a.clamped) {
      const Scalar sigma = static_cast<Scalar>(cfg.window_D) / Scalar(2);
      Scalar dp = 0;
      for (Eigen::Index k = 0; k < n; ++k) dp += dz(k) * (static_cast<Scalar>(a.start + k) - a.position);
      dp /= sigma * sigma;
      const Scalar sig = detail::logistic(a.u);
      const Scalar du = dp * static_cast<Scalar>(tr.encoder.memory.cols()) * sig * (Scalar(1) - sig);
      grads.attn_v += du * a.tanh_Wh;
      const Vector<Scalar> dt =
          du * params.attn_v.cwiseProduct((Scalar(1) - a.tanh_Wh.array().square()).matrix());
      grads.attn_W.noalias() += dt * tr.top_h.transpose();
      dtop += params.attn_W.transpose() * dt;
    }
  } else {
    dtop = dr;
  }

  const auto L = static_cast<std::size_t>(cfg.layers);
  std::vector<Vector<Scalar>> dh(L, Vector<Scalar>::Zero(d)), dc(L, Vector<Scalar>::Zero(d));
  dh.back() = dtop;
  detail::backprop_stack<Scalar>(tr.decoder, params.decoder, grads.decoder, embeddings ? &grads.dec_embed : nullptr,
                                 dh, dc, nullptr);
  detail::backprop_stack<Scalar>(tr.encoder.stack, params.encoder, grads.encoder,
                                 embeddings ? &grads.enc_embed : nullptr, dh, dc, &dmemory);
}

struct BatchOptions {
  bool train = false;  ///< dropout active
  std::uint64_t dropout_seed = 0;
  bool embeddings_trainable = true;
  int threads = 1;
};

namespace detail {
template <typename Scalar>
Scalar example_loss(const ExampleTrace<Scalar>& tr, int label) {
  const Scalar m = tr.logits.maxCoeff();
  return m + std::log((tr.logits.array() - m).exp().sum()) - tr.logits(label);
}
}  // namespace detail

/// Mean cross-entropy over the batch. When `grads` is given it is overwritten
/// with the gradient of that mean; embedding gradients stay zero unless
/// opts.embeddings_trainable. Batch items are split into contiguous chunks,
/// one per thread, and reduced in chunk order.
template <typename Scalar>
Scalar loss_and_gradients(std::span<const EncodedExample> batch, const ModelParams<Scalar>& params,
                          const ModelConfig& cfg, ModelParams<Scalar>* grads, const BatchOptions& opts = {}) {
  if (batch.empty()) throw UsageError("loss_and_gradients: empty batch");
  const auto n = batch.size();
  const Scalar weight = Scalar(1) / static_cast<Scalar>(n);
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, opts.threads)), n);
  std::vector<ModelParams<Scalar>> partial(grads ? workers : 0);
  std::vector<Scalar> losses(n, Scalar(0));
  std::vector<std::exception_ptr> errors(workers);

  auto run = [&](std::size_t w) {
    try {
      const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
      if (grads) partial[w] = zeros_like(params);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& ex = batch[i];
        if (ex.label < 0 || ex.label >= cfg.num_labels) throw DataError("label index out of range");
        DropoutSampler dropout(cfg.dropout_p, opts.train, derive_seed(opts.dropout_seed, i));
        auto enc = encode(ex.premise, params, cfg, dropout);
        auto tr = classify_trace(ex.hypothesis, std::move(enc), params, cfg, dropout);
        losses[i] = detail::example_loss(tr, ex.label);
        if (grads) backprop_example(tr, ex.label, params, cfg, weight, partial[w], opts.embeddings_trainable);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  Scalar loss = 0;
  for (auto l : losses) loss += l;
  loss *= weight;
  if (!std::isfinite(static_cast<double>(loss))) throw NumericalError("non-finite loss");
  if (grads) {
    *grads = std::move(partial[0]);
    for (std::size_t w = 1; w < workers; ++w) axpy(Scalar(1), partial[w], *grads);
  }
  return loss;
}

/// Index of the most likely label; ties go to the lowest index.
template <typename Scalar>
int argmax_label(const Vector<Scalar>& probs) {
  int best = 0;
  for (Eigen::Index k = 1; k < probs.size(); ++k)
    if (probs(k) > probs(best)) best = static_cast<int>(k);
  return best;
}

}  // namespace embnli

#endif  // EMBNLI_SEQ2SEQ_HPP
