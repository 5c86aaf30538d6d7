#include "contrastner/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "contrastner/error.hpp"
#include "contrastner/rng.hpp"

namespace contrastner {
namespace {

constexpr double kLayerNormEps = 1e-5;

// y[n x out] = x[n x in] * w[in x out] + b (b may be null)
void affine(const std::vector<double>& x, std::size_t n, const Tensor& w, const Tensor* b,
            std::vector<double>& y) {
  const std::size_t in = w.shape[0];
  const std::size_t out = w.shape[1];
  y.assign(n * out, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double* yr = y.data() + r * out;
    if (b) std::copy(b->data.begin(), b->data.end(), yr);
    const double* xr = x.data() + r * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      const double* wi = w.data.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
    }
  }
}

// Backward of affine: accumulates dw, db (if non-null) and adds dy * w^T
// into dx.
void affine_backward(const std::vector<double>& x, std::size_t n, const Tensor& w,
                     const std::vector<double>& dy, Tensor& dw, Tensor* db,
                     std::vector<double>& dx) {
  const std::size_t in = w.shape[0];
  const std::size_t out = w.shape[1];
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = dy.data() + r * out;
    const double* xr = x.data() + r * in;
    double* dxr = dx.data() + r * in;
    if (db) {
      for (std::size_t o = 0; o < out; ++o) db->data[o] += dyr[o];
    }
    for (std::size_t i = 0; i < in; ++i) {
      const double* wi = w.data.data() + i * out;
      double* dwi = dw.data.data() + i * out;
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        acc += dyr[o] * wi[o];
        dwi[o] += xr[i] * dyr[o];
      }
      dxr[i] += acc;
    }
  }
}

void layer_norm(const std::vector<double>& x, std::size_t n, std::size_t d, const Tensor& scale,
                const Tensor& offset, std::vector<double>& xhat, std::vector<double>& rstd,
                std::vector<double>& y) {
  xhat.resize(n * d);
  rstd.resize(n);
  y.resize(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.data() + r * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    rstd[r] = rs;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (xr[i] - mean) * rs;
      xhat[r * d + i] = h;
      y[r * d + i] = h * scale.data[i] + offset.data[i];
    }
  }
}

void layer_norm_backward(const std::vector<double>& xhat, const std::vector<double>& rstd,
                         std::size_t n, std::size_t d, const Tensor& scale,
                         const std::vector<double>& dy, Tensor& dscale, Tensor& doffset,
                         std::vector<double>& dx) {
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = dy.data() + r * d;
    const double* hr = xhat.data() + r * d;
    double mean_dxhat = 0.0;
    double mean_dxhat_h = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dscale.data[i] += dyr[i] * hr[i];
      doffset.data[i] += dyr[i];
      dxhat[i] = dyr[i] * scale.data[i];
      mean_dxhat += dxhat[i];
      mean_dxhat_h += dxhat[i] * hr[i];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_h /= static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) {
      dx[r * d + i] += rstd[r] * (dxhat[i] - mean_dxhat - hr[i] * mean_dxhat_h);
    }
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void check_finite(const std::vector<double>& v, const std::string& where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("non-finite activation in " + where);
  }
}

struct LayerCache {
  std::vector<double> x_in;
  std::vector<double> xhat1, rstd1, a;
  std::vector<double> q, k, v;
  std::vector<double> probs;  // heads x n x n
  std::vector<double> ctx;
  std::vector<double> x_mid;
  std::vector<double> xhat2, rstd2, b;
  std::vector<double> h_pre, h_act;
};

struct InstanceCache {
  std::size_t n = 0;
  std::vector<LayerCache> layers;
  std::vector<double> x_final;
};

void validate_instance(const EncodedInstance& inst, const Parameters& params) {
  const auto& cfg = params.config;
  if (inst.attention_len == 0 || inst.attention_len > inst.ids.size()) {
    throw Error("instance attention_len " + std::to_string(inst.attention_len) +
                " is inconsistent with its " + std::to_string(inst.ids.size()) + " ids");
  }
  if (inst.attention_len > cfg.max_len) {
    throw OverflowError(inst.attention_len, cfg.max_len);
  }
  if (inst.mask_index >= inst.attention_len) throw Error("mask index outside attended positions");
  for (std::size_t i = 0; i < inst.attention_len; ++i) {
    if (inst.ids[i] >= cfg.vocab_size) {
      throw Error("token id " + std::to_string(inst.ids[i]) + " out of range for vocabulary of " +
                  std::to_string(cfg.vocab_size));
    }
  }
  if (inst.soft_indices.size() > cfg.p) {
    throw Error("instance has " + std::to_string(inst.soft_indices.size()) +
                " soft slots but the encoder has " + std::to_string(cfg.p));
  }
  for (std::size_t pos : inst.soft_indices) {
    if (pos >= inst.attention_len) throw Error("soft slot outside attended positions");
  }
}

// Runs one instance. When cache is non-null all intermediates are kept for
// the backward pass.
MaskOutput run_instance(const EncodedInstance& inst, const Parameters& params,
                        InstanceCache* cache) {
  validate_instance(inst, params);
  const auto& cfg = params.config;
  const std::size_t n = inst.attention_len;
  const std::size_t d = cfg.d_model;
  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<double> x(n * d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto soft = std::find(inst.soft_indices.begin(), inst.soft_indices.end(), pos);
    const auto src = soft != inst.soft_indices.end()
                         ? params.soft_prompt.row(static_cast<std::size_t>(soft - inst.soft_indices.begin()))
                         : params.word_emb.row(inst.ids[pos]);
    const auto pe = params.pos_emb.row(pos);
    for (std::size_t i = 0; i < d; ++i) x[pos * d + i] = src[i] + pe[i];
  }
  check_finite(x, "embedding");

  InstanceCache local;
  InstanceCache& c = cache ? *cache : local;
  c.n = n;
  c.layers.resize(cfg.n_layers);

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& L = params.layers[l];
    auto& lc = c.layers[l];
    lc.x_in = x;
    layer_norm(x, n, d, L.ln1_scale, L.ln1_offset, lc.xhat1, lc.rstd1, lc.a);
    affine(lc.a, n, L.wq, &L.bq, lc.q);
    affine(lc.a, n, L.wk, nullptr, lc.k);
    affine(lc.a, n, L.wv, &L.bv, lc.v);

    lc.probs.assign(heads * n * n, 0.0);
    lc.ctx.assign(n * d, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < n; ++i) {
        double* pr = lc.probs.data() + (h * n + i) * n;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += lc.q[i * d + off + e] * lc.k[j * d + off + e];
          pr[j] = s * scale;
          mx = std::max(mx, pr[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          pr[j] = std::exp(pr[j] - mx);
          z += pr[j];
        }
        for (std::size_t j = 0; j < n; ++j) pr[j] /= z;
        for (std::size_t j = 0; j < n; ++j) {
          const double pij = pr[j];
          for (std::size_t e = 0; e < dh; ++e) lc.ctx[i * d + off + e] += pij * lc.v[j * d + off + e];
        }
      }
    }
    std::vector<double> attn_out;
    affine(lc.ctx, n, L.wo, &L.bo, attn_out);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += attn_out[i];
    lc.x_mid = x;

    layer_norm(x, n, d, L.ln2_scale, L.ln2_offset, lc.xhat2, lc.rstd2, lc.b);
    affine(lc.b, n, L.ff_w1, &L.ff_b1, lc.h_pre);
    lc.h_act.resize(lc.h_pre.size());
    for (std::size_t i = 0; i < lc.h_pre.size(); ++i) lc.h_act[i] = gelu(lc.h_pre[i]);
    std::vector<double> ff_out;
    affine(lc.h_act, n, L.ff_w2, &L.ff_b2, ff_out);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += ff_out[i];
    check_finite(x, "layer " + std::to_string(l));
  }
  c.x_final = x;

  MaskOutput out;
  out.t.assign(x.begin() + static_cast<std::ptrdiff_t>(inst.mask_index * d),
               x.begin() + static_cast<std::ptrdiff_t>((inst.mask_index + 1) * d));
  affine(out.t, 1, params.head_w, &params.head_b, out.logits);
  check_finite(out.logits, "mlm head");
  return out;
}

void backward_instance(const EncodedInstance& inst, const Parameters& params,
                       const InstanceCache& c, const MaskOutput& out, const MaskGradient& g,
                       Parameters& grads) {
  const auto& cfg = params.config;
  const std::size_t n = c.n;
  const std::size_t d = cfg.d_model;
  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<double> dt(d, 0.0);
  if (!g.d_t.empty()) dt = g.d_t;
  if (!g.d_logits.empty()) {
    affine_backward(out.t, 1, params.head_w, g.d_logits, grads.head_w, &grads.head_b, dt);
  }

  std::vector<double> dx(n * d, 0.0);
  std::copy(dt.begin(), dt.end(), dx.begin() + static_cast<std::ptrdiff_t>(inst.mask_index * d));

  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const auto& L = params.layers[l];
    auto& G = grads.layers[l];
    const auto& lc = c.layers[l];

    // Feed-forward sublayer; dx flows through the residual unchanged.
    std::vector<double> dh_act(n * cfg.d_ff, 0.0);
    affine_backward(lc.h_act, n, L.ff_w2, dx, G.ff_w2, &G.ff_b2, dh_act);
    for (std::size_t i = 0; i < dh_act.size(); ++i) dh_act[i] *= gelu_grad(lc.h_pre[i]);
    std::vector<double> db(n * d, 0.0);
    affine_backward(lc.b, n, L.ff_w1, dh_act, G.ff_w1, &G.ff_b1, db);
    layer_norm_backward(lc.xhat2, lc.rstd2, n, d, L.ln2_scale, db, G.ln2_scale, G.ln2_offset, dx);

    // Attention sublayer.
    std::vector<double> dctx(n * d, 0.0);
    affine_backward(lc.ctx, n, L.wo, dx, G.wo, &G.bo, dctx);
    std::vector<double> dq(n * d, 0.0), dk(n * d, 0.0), dv(n * d, 0.0);
    std::vector<double> dp(n);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < n; ++i) {
        const double* pr = lc.probs.data() + (h * n + i) * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) {
            s += dctx[i * d + off + e] * lc.v[j * d + off + e];
            dv[j * d + off + e] += pr[j] * dctx[i * d + off + e];
          }
          dp[j] = s;
          dot += pr[j] * s;
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double ds = pr[j] * (dp[j] - dot) * scale;
          if (ds == 0.0) continue;
          for (std::size_t e = 0; e < dh; ++e) {
            dq[i * d + off + e] += ds * lc.k[j * d + off + e];
            dk[j * d + off + e] += ds * lc.q[i * d + off + e];
          }
        }
      }
    }
    std::vector<double> da(n * d, 0.0);
    affine_backward(lc.a, n, L.wq, dq, G.wq, &G.bq, da);
    affine_backward(lc.a, n, L.wk, dk, G.wk, nullptr, da);
    affine_backward(lc.a, n, L.wv, dv, G.wv, &G.bv, da);
    layer_norm_backward(lc.xhat1, lc.rstd1, n, d, L.ln1_scale, da, G.ln1_scale, G.ln1_offset, dx);
  }

  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto soft = std::find(inst.soft_indices.begin(), inst.soft_indices.end(), pos);
    auto dst = soft != inst.soft_indices.end()
                   ? grads.soft_prompt.row(static_cast<std::size_t>(soft - inst.soft_indices.begin()))
                   : grads.word_emb.row(inst.ids[pos]);
    auto dpe = grads.pos_emb.row(pos);
    for (std::size_t i = 0; i < d; ++i) {
      dst[i] += dx[pos * d + i];
      dpe[i] += dx[pos * d + i];
    }
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims) : shape(std::move(dims)) {
  std::size_t total = 1;
  for (auto s : shape) total *= s;
  data.assign(total, 0.0);
}

void EncoderConfig::validate() const {
  if (d_model < 1 || n_heads < 1 || d_ff < 1 || max_len < 1 || vocab_size < 1) {
    throw ConfigError("encoder dimensions must be positive (n_layers may be 0)");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (soft_sigma < 0.0 || !std::isfinite(soft_sigma)) throw ConfigError("soft_sigma must be >= 0");
}

Parameters Parameters::zeros(const EncoderConfig& config) {
  config.validate();
  const std::size_t d = config.d_model;
  Parameters p;
  p.config = config;
  p.word_emb = Tensor({config.vocab_size, d});
  p.pos_emb = Tensor({config.max_len, d});
  p.soft_prompt = Tensor({config.p, d});
  p.layers.resize(config.n_layers);
  for (auto& L : p.layers) {
    L.ln1_scale = Tensor({d});
    L.ln1_offset = Tensor({d});
    L.wq = Tensor({d, d});
    L.bq = Tensor({d});
    L.wk = Tensor({d, d});
    L.wv = Tensor({d, d});
    L.bv = Tensor({d});
    L.wo = Tensor({d, d});
    L.bo = Tensor({d});
    L.ln2_scale = Tensor({d});
    L.ln2_offset = Tensor({d});
    L.ff_w1 = Tensor({d, config.d_ff});
    L.ff_b1 = Tensor({config.d_ff});
    L.ff_w2 = Tensor({config.d_ff, d});
    L.ff_b2 = Tensor({d});
  }
  p.head_w = Tensor({d, config.vocab_size});
  p.head_b = Tensor({config.vocab_size});
  return p;
}

std::size_t Parameters::count() const {
  std::size_t total = 0;
  for_each([&](const std::string&, const Tensor& t) { total += t.size(); });
  return total;
}

bool Parameters::operator==(const Parameters& other) const {
  if (!(config == other.config) || layers.size() != other.layers.size()) return false;
  std::vector<const Tensor*> mine, theirs;
  for_each([&](const std::string&, const Tensor& t) { mine.push_back(&t); });
  other.for_each([&](const std::string&, const Tensor& t) { theirs.push_back(&t); });
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (!(*mine[i] == *theirs[i])) return false;
  }
  return true;
}

Parameters init_params(const EncoderConfig& config) {
  Parameters params = Parameters::zeros(config);
  Rng rng(mix_seed(config.seed, 0));
  const double stddev = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  auto gaussian = [&](Tensor& t, double sigma) {
    for (double& x : t.data) x = sigma * rng.normal();
  };

  gaussian(params.word_emb, stddev);
  gaussian(params.pos_emb, stddev);
  if (config.soft_init == SoftInit::kGaussian) {
    gaussian(params.soft_prompt, config.soft_sigma > 0.0 ? config.soft_sigma : stddev);
  } else {
    // Mean of ordinary-token embeddings (all rows if the vocabulary has none).
    const std::size_t ordinary = Vocabulary::kReservedCount + config.p;
    const std::size_t first_row = config.vocab_size > ordinary ? ordinary : 0;
    std::vector<double> mean(config.d_model, 0.0);
    for (std::size_t r = first_row; r < config.vocab_size; ++r) {
      const auto row = params.word_emb.row(r);
      for (std::size_t i = 0; i < config.d_model; ++i) mean[i] += row[i];
    }
    for (double& m : mean) m /= static_cast<double>(config.vocab_size - first_row);
    for (std::size_t j = 0; j < config.p; ++j) std::copy(mean.begin(), mean.end(), params.soft_prompt.row(j).begin());
  }
  for (auto& L : params.layers) {
    std::fill(L.ln1_scale.data.begin(), L.ln1_scale.data.end(), 1.0);
    std::fill(L.ln2_scale.data.begin(), L.ln2_scale.data.end(), 1.0);
    gaussian(L.wq, stddev);
    gaussian(L.wk, stddev);
    gaussian(L.wv, stddev);
    gaussian(L.wo, stddev);
    gaussian(L.ff_w1, stddev);
    gaussian(L.ff_w2, stddev);
  }
  gaussian(params.head_w, stddev);
  return params;
}

std::vector<MaskOutput> forward(std::span<const EncodedInstance> batch, const Parameters& params) {
  std::vector<MaskOutput> outs;
  outs.reserve(batch.size());
  for (const auto& inst : batch) outs.push_back(run_instance(inst, params, nullptr));
  return outs;
}

GradientResult gradients(std::span<const EncodedInstance> batch, const Parameters& params,
                         const LossFn& loss_fn) {
  std::vector<InstanceCache> caches(batch.size());
  std::vector<MaskOutput> outs;
  outs.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    outs.push_back(run_instance(batch[i], params, &caches[i]));
  }

  LossEvaluation eval = loss_fn(outs);
  if (eval.grads.size() != batch.size()) {
    throw std::logic_error("loss function returned " + std::to_string(eval.grads.size()) +
                           " gradients for a batch of " + std::to_string(batch.size()));
  }

  GradientResult result{eval.loss, Parameters::zeros(params.config)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    backward_instance(batch[i], params, caches[i], outs[i], eval.grads[i], result.grads);
  }
  return result;
}

}  // namespace contrastner
