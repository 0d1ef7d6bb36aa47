#include "cmsa/cma.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace cmsa {

void CMAParams::collect(ParamStore& store, const std::string& prefix) const {
  for (int u = 0; u < 4; ++u) {
    std::string p = prefix + ".align" + std::to_string(u);
    store.add(p + ".conv3.w", align[u].conv3.w);
    store.add(p + ".conv3.b", align[u].conv3.b);
    store.add(p + ".conv1.w", align[u].conv1.w);
    store.add(p + ".conv1.b", align[u].conv1.b);
  }
  auto lin = [&](const std::string& name, const Linear& l) {
    store.add(prefix + "." + name + ".w", l.w);
    store.add(prefix + "." + name + ".b", l.b);
  };
  lin("q_feat", q_feat);
  lin("q_tok", q_tok);
  lin("k", k);
  lin("v", v);
  lin("out", out);
  store.add(prefix + ".ln.gamma", ln.gamma);
  store.add(prefix + ".ln.beta", ln.beta);
  lin("ffn1", ffn1);
  lin("ffn2", ffn2);
}

CMAParams init_cma(std::uint64_t seed, int base_channels, int channels, int num_heads, int target_stage,
                   bool multiscale) {
  if (channels % num_heads != 0) throw std::invalid_argument("init_cma: d must be divisible by num_heads");
  if (target_stage < 0 || target_stage > 3) throw std::invalid_argument("init_cma: target_stage in 0..3");
  Rng rng(seed);
  CMAParams p;
  p.target_stage = target_stage;
  p.num_heads = num_heads;
  p.model_dim = channels;  // d = C
  p.channels = channels;
  p.multiscale = multiscale;
  for (int u = 0; u < 4; ++u) {
    p.align[u].conv3 = ConvLayer::init(rng, channels, stage_channels(base_channels, u), 3, 1, 1);
    p.align[u].conv1 = ConvLayer::init(rng, channels, channels, 1, 1, 0);
  }
  int tok = p.token_channels();
  int d = p.model_dim;
  p.q_feat = Linear::init(rng, channels, d);
  p.q_tok = Linear::init(rng, tok, d);
  p.k = Linear::init(rng, tok, d);
  p.v = Linear::init(rng, tok, d);
  p.out = Linear::init(rng, d, channels);
  p.ln = NormLayer::init(channels);
  p.ffn1 = Linear::init(rng, channels, 4 * channels);
  p.ffn2 = Linear::init(rng, 4 * channels, channels);
  return p;
}

ag::Var align_feature(const ag::Var& feature, int source_stage, int target_h, int target_w,
                      const CMAParams& params) {
  if (feature.value().rank() != 3) throw std::invalid_argument("align_feature: expects [C_u,H_u,W_u]");
  if (source_stage < 0 || source_stage > 3) throw std::invalid_argument("align_feature: bad source stage");
  const auto& pair = params.align[source_stage];
  if (feature.value().dim(0) != pair.conv3.w.value().dim(1))
    throw std::invalid_argument("align_feature: channel count does not match stage " +
                                std::to_string(source_stage));
  ag::Var x = ag::bilinear_resize(feature, target_h, target_w);
  return pair.conv1(pair.conv3(x));
}

FrameTokens build_token_set(const FeaturePyramid& pyramid, const CMAParams& params, Role role) {
  for (const auto& st : pyramid)
    if (!st.defined()) throw std::invalid_argument("build_token_set: missing pyramid stage");
  int s = params.target_stage;
  int hs = pyramid[s].value().dim(1);
  int ws = pyramid[s].value().dim(2);
  FrameTokens ft;
  ft.role = role;
  ft.aligned = align_feature(pyramid[s], s, hs, ws, params);
  if (params.multiscale) {
    // channels ordered by ascending source stage
    std::vector<ag::Var> parts;
    for (int u = 0; u < 4; ++u)
      parts.push_back(u == s ? ft.aligned : align_feature(pyramid[u], u, hs, ws, params));
    ft.tokens = ag::concat0(parts);
  } else {
    ft.tokens = ft.aligned;
  }
  return ft;
}

std::vector<int> causal_frames(const std::vector<Role>& roles, int t, bool full_visibility) {
  validate_roles(roles);
  int n = static_cast<int>(roles.size());
  if (t < 0 || t >= n) throw std::invalid_argument("causal_frames: frame index out of range");
  std::vector<int> keep;
  if (full_visibility || roles[t] == Role::Current) {
    for (int i = 0; i < n; ++i) keep.push_back(i);
  } else if (roles[t] == Role::Reference) {
    keep.push_back(t);
  } else {
    for (int i = 0; i < n; ++i)
      if (roles[i] == Role::Reference || (roles[i] == Role::Adjacent && i <= t)) keep.push_back(i);
  }
  return keep;
}

namespace {

// [n,m] -> [m,n]
ag::Var transpose2d(const ag::Var& x) {
  const Tensor& X = x.value();
  int n = X.dim(0), m = X.dim(1);
  // [n,m] viewed as [n,m,1] channels-first permutes to [m,n]
  return ag::tokens_from_chw(ag::reshape(x, {n, m, 1}));
}

ag::Var scaled_attention(const ag::Var& q, const ag::Var& k, const ag::Var& v, double* row_min = nullptr,
                         double* row_max = nullptr) {
  if (q.value().dim(1) != k.value().dim(1) || k.value().dim(0) != v.value().dim(0))
    throw std::invalid_argument("attention: dimension mismatch");
  double scale = 1.0 / std::sqrt(static_cast<double>(q.value().dim(1)));
  ag::Var scores = ag::mul_scalar(ag::matmul(q, transpose2d(k)), scale);
  ag::Var probs = ag::softmax_rows(scores);
  if (row_min && row_max) {
    const Tensor& P = probs.value();
    int n = P.dim(0), m = P.dim(1);
    *row_min = 1e300;
    *row_max = -1e300;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += P.at2(i, j);
      *row_min = std::min(*row_min, s);
      *row_max = std::max(*row_max, s);
    }
  }
  return ag::matmul(probs, v);
}

}  // namespace

ag::Var attention(const ag::Var& q, const ag::Var& k, const ag::Var& v) {
  return scaled_attention(q, k, v);
}

std::vector<ag::Var> cma_forward_tokens(const std::vector<FrameTokens>& frames, const CMAParams& params,
                                        bool full_visibility, std::vector<CmaFrameAudit>* audit) {
  int n = static_cast<int>(frames.size());
  if (n == 0) throw std::invalid_argument("cma_forward: empty clip");
  std::vector<Role> roles;
  for (const auto& f : frames) roles.push_back(f.role);
  validate_roles(roles);
  int hs = frames[0].aligned.value().dim(1);
  int ws = frames[0].aligned.value().dim(2);
  int d = params.model_dim;
  int heads = params.num_heads;
  int dh = d / heads;

  // Per-frame projected K/V token rows; concatenating projections equals
  // projecting the concatenation (row-wise linear map).
  std::vector<ag::Var> kproj(n), vproj(n), tok2d(n);
  for (int t = 0; t < n; ++t) {
    tok2d[t] = ag::tokens_from_chw(frames[t].tokens);
    kproj[t] = params.k(tok2d[t]);
    vproj[t] = params.v(tok2d[t]);
  }

  std::vector<ag::Var> outputs(n);
  for (int t = 0; t < n; ++t) {
    ag::Var q = frames[t].role == Role::Reference ? params.q_tok(tok2d[t])
                                                  : params.q_feat(ag::tokens_from_chw(frames[t].aligned));
    std::vector<int> keep = causal_frames(roles, t, full_visibility);
    std::vector<ag::Var> ks, vs;
    for (int i : keep) {
      ks.push_back(kproj[i]);
      vs.push_back(vproj[i]);
    }
    ag::Var kcat = ks.size() == 1 ? ks[0] : ag::concat0(ks);
    ag::Var vcat = vs.size() == 1 ? vs[0] : ag::concat0(vs);

    double row_min = 1.0, row_max = 1.0;
    std::vector<ag::Var> head_outs;
    for (int hh = 0; hh < heads; ++hh) {
      double rmin = 0, rmax = 0;
      ag::Var o = scaled_attention(ag::slice_cols(q, hh * dh, (hh + 1) * dh),
                                   ag::slice_cols(kcat, hh * dh, (hh + 1) * dh),
                                   ag::slice_cols(vcat, hh * dh, (hh + 1) * dh),
                                   audit ? &rmin : nullptr, audit ? &rmax : nullptr);
      if (audit) {
        row_min = std::min(row_min, rmin);
        row_max = std::max(row_max, rmax);
      }
      head_outs.push_back(o);
    }
    ag::Var agg_tokens = params.out(heads == 1 ? head_outs[0] : ag::concat_cols(head_outs));
    ag::Var agg = ag::chw_from_tokens(agg_tokens, hs, ws);

    // residual fusion: F_hat = F_bar + A; F_tilde = F_hat + FFN(LN(F_hat))
    ag::Var fhat = ag::add(frames[t].aligned, agg);
    ag::Var normed = ag::tokens_from_chw(params.ln(fhat));
    ag::Var ffn = params.ffn2(ag::gelu(params.ffn1(normed)));
    outputs[t] = ag::add(fhat, ag::chw_from_tokens(ffn, hs, ws));

    if (audit) {
      CmaFrameAudit a;
      a.frame = t;
      a.role = role_name(roles[t]);
      a.kv_frames = keep;
      a.row_sum_min = row_min;
      a.row_sum_max = row_max;
      audit->push_back(a);
    }
  }
  return outputs;
}

std::vector<ag::Var> cma_forward(const std::vector<FeaturePyramid>& pyramids, const std::vector<Role>& roles,
                                 const CMAParams& params, bool full_visibility,
                                 std::vector<CmaFrameAudit>* audit) {
  if (pyramids.size() != roles.size()) throw std::invalid_argument("cma_forward: pyramids/roles mismatch");
  std::vector<FrameTokens> frames;
  frames.reserve(pyramids.size());
  for (std::size_t t = 0; t < pyramids.size(); ++t)
    frames.push_back(build_token_set(pyramids[t], params, roles[t]));
  return cma_forward_tokens(frames, params, full_visibility, audit);
}

std::string audit_to_json(const std::vector<CmaFrameAudit>& audit) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& a : audit) {
    j.push_back({{"frame", a.frame},
                 {"role", a.role},
                 {"kv_frames", a.kv_frames},
                 {"row_sum_min", a.row_sum_min},
                 {"row_sum_max", a.row_sum_max}});
  }
  return j.dump(2);
}

}  // namespace cmsa
