#include "cmsa/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmsa::oracle {

namespace {

// All helpers below are deliberately naive re-derivations; they must not call
// into cmsa::ag.

Tensor o_resize(const Tensor& x, int oh, int ow) {
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int xo = 0; xo < ow; ++xo) {
        double sy = (y + 0.5) * (static_cast<double>(h) / oh) - 0.5;
        double sx = (xo + 0.5) * (static_cast<double>(w) / ow) - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        int x0 = static_cast<int>(std::floor(sx));
        double fy = sy - y0, fx = sx - x0;
        auto cl = [](int v, int hi) { return std::min(std::max(v, 0), hi - 1); };
        double v00 = x.at3(ch, cl(y0, h), cl(x0, w));
        double v01 = x.at3(ch, cl(y0, h), cl(x0 + 1, w));
        double v10 = x.at3(ch, cl(y0 + 1, h), cl(x0, w));
        double v11 = x.at3(ch, cl(y0 + 1, h), cl(x0 + 1, w));
        out.at3(ch, y, xo) = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      }
  return out;
}

Tensor o_conv(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  int cout = w.dim(0), k = w.dim(2);
  Tensor out({cout, h + 2 * pad - k + 1, wd + 2 * pad - k + 1});
  for (int oc = 0; oc < cout; ++oc)
    for (int y = 0; y < out.dim(1); ++y)
      for (int xo = 0; xo < out.dim(2); ++xo) {
        double acc = b.data[oc];
        for (int ic = 0; ic < cin; ++ic)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              int iy = y + ky - pad, ix = xo + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              acc += x.at3(ic, iy, ix) * w.data[((static_cast<std::size_t>(oc) * cin + ic) * k + ky) * k + kx];
            }
        out.at3(oc, y, xo) = acc;
      }
  return out;
}

// rows [n,in] x w [in,out] + b
Tensor o_linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  int n = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  Tensor out({n, out_dim});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out_dim; ++j) {
      double acc = b.data[j];
      for (int p = 0; p < in; ++p) acc += x.at2(i, p) * w.at2(p, j);
      out.at2(i, j) = acc;
    }
  return out;
}

Tensor o_tokens(const Tensor& chw) {
  int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor out({h * w, c});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h * w; ++i) out.at2(i, ch) = chw.data[static_cast<std::size_t>(ch) * h * w + i];
  return out;
}

Tensor o_chw(const Tensor& tok, int h, int w) {
  int c = tok.dim(1);
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h * w; ++i) out.data[static_cast<std::size_t>(ch) * h * w + i] = tok.at2(i, ch);
  return out;
}

double o_gelu(double v) { return 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244)); }

Tensor o_layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
  int c = x.dim(0), hw = x.dim(1) * x.dim(2);
  Tensor out(x.shape);
  for (int i = 0; i < hw; ++i) {
    double mu = 0.0;
    for (int ch = 0; ch < c; ++ch) mu += x.data[static_cast<std::size_t>(ch) * hw + i];
    mu /= c;
    double var = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      double d = x.data[static_cast<std::size_t>(ch) * hw + i] - mu;
      var += d * d;
    }
    var /= c;
    double rs = 1.0 / std::sqrt(var + eps);
    for (int ch = 0; ch < c; ++ch)
      out.data[static_cast<std::size_t>(ch) * hw + i] =
          gamma.data[ch] * (x.data[static_cast<std::size_t>(ch) * hw + i] - mu) * rs + beta.data[ch];
  }
  return out;
}

}  // namespace

VisibilityMask visibility_mask(const std::vector<Role>& roles, int tokens_per_frame, bool full_visibility) {
  validate_roles(roles);
  int t = static_cast<int>(roles.size());
  int n = t * tokens_per_frame;
  VisibilityMask m;
  m.tokens_per_frame = tokens_per_frame;
  m.may_attend.assign(n, std::vector<bool>(n, false));
  for (int qi = 0; qi < t; ++qi) {
    for (int ki = 0; ki < t; ++ki) {
      bool allow;
      if (full_visibility || roles[qi] == Role::Current)
        allow = true;
      else if (roles[qi] == Role::Reference)
        allow = (ki == qi);
      else
        allow = roles[ki] == Role::Reference || (roles[ki] == Role::Adjacent && ki <= qi);
      if (!allow) continue;
      for (int a = 0; a < tokens_per_frame; ++a)
        for (int b = 0; b < tokens_per_frame; ++b)
          m.may_attend[static_cast<std::size_t>(qi) * tokens_per_frame + a]
                      [static_cast<std::size_t>(ki) * tokens_per_frame + b] = true;
    }
  }
  return m;
}

OracleFrame oracle_token_set(const std::array<Tensor, 4>& pyramid, Role role, const CMAParams& params) {
  int s = params.target_stage;
  int hs = pyramid[s].dim(1), ws = pyramid[s].dim(2);
  OracleFrame f;
  f.role = role;
  auto align = [&](int u) {
    Tensor r = o_resize(pyramid[u], hs, ws);
    Tensor c3 = o_conv(r, params.align[u].conv3.w.value(), params.align[u].conv3.b.value(), 1);
    return o_conv(c3, params.align[u].conv1.w.value(), params.align[u].conv1.b.value(), 0);
  };
  f.aligned = align(s);
  if (params.multiscale) {
    int c = params.channels;
    Tensor z({4 * c, hs, ws});
    for (int u = 0; u < 4; ++u) {
      Tensor a = u == s ? f.aligned : align(u);
      std::copy(a.data.begin(), a.data.end(), z.data.begin() + static_cast<long>(u) * c * hs * ws);
    }
    f.tokens = std::move(z);
  } else {
    f.tokens = f.aligned;
  }
  return f;
}

std::vector<Tensor> masked_dense_attention(const std::vector<OracleFrame>& frames,
                                           const VisibilityMask& mask, const CMAParams& params) {
  int t = static_cast<int>(frames.size());
  if (t == 0) throw std::invalid_argument("masked_dense_attention: empty clip");
  std::vector<Role> roles;
  for (const auto& f : frames) roles.push_back(f.role);
  int hs = frames[0].aligned.dim(1), ws = frames[0].aligned.dim(2);
  int npf = hs * ws;
  int total = t * npf;
  // mask consistency: must equal the role-derived block mask
  VisibilityMask expect = visibility_mask(roles, npf);
  if (mask.tokens_per_frame != npf || mask.may_attend != expect.may_attend) {
    // allow the full-visibility variant too
    VisibilityMask full = visibility_mask(roles, npf, true);
    if (mask.may_attend != full.may_attend)
      throw std::invalid_argument("masked_dense_attention: mask inconsistent with role layout");
  }

  int d = params.model_dim, heads = params.num_heads, dh = d / heads, c = params.channels;

  // stacked Q/K/V over the whole clip
  Tensor q({total, d}), k({total, d}), v({total, d});
  for (int i = 0; i < t; ++i) {
    Tensor tok = o_tokens(frames[i].tokens);
    Tensor qi = frames[i].role == Role::Reference
                    ? o_linear(tok, params.q_tok.w.value(), params.q_tok.b.value())
                    : o_linear(o_tokens(frames[i].aligned), params.q_feat.w.value(), params.q_feat.b.value());
    Tensor ki = o_linear(tok, params.k.w.value(), params.k.b.value());
    Tensor vi = o_linear(tok, params.v.w.value(), params.v.b.value());
    for (int a = 0; a < npf; ++a)
      for (int j = 0; j < d; ++j) {
        q.at2(i * npf + a, j) = qi.at2(a, j);
        k.at2(i * npf + a, j) = ki.at2(a, j);
        v.at2(i * npf + a, j) = vi.at2(a, j);
      }
  }

  // dense multi-head attention with -inf on masked entries
  Tensor agg({total, d});
  double neg_inf = -std::numeric_limits<double>::infinity();
  for (int hh = 0; hh < heads; ++hh) {
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int i = 0; i < total; ++i) {
      std::vector<double> row(total, neg_inf);
      double mx = neg_inf;
      for (int j = 0; j < total; ++j) {
        if (!mask.may_attend[i][j]) continue;
        double s = 0.0;
        for (int p = 0; p < dh; ++p) s += q.at2(i, hh * dh + p) * k.at2(j, hh * dh + p);
        row[j] = s * scale;
        mx = std::max(mx, row[j]);
      }
      double z = 0.0;
      for (int j = 0; j < total; ++j) {
        if (row[j] == neg_inf)
          row[j] = 0.0;
        else {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
      }
      for (int p = 0; p < dh; ++p) {
        double acc = 0.0;
        for (int j = 0; j < total; ++j)
          if (row[j] != 0.0) acc += row[j] * v.at2(j, hh * dh + p);
        agg.at2(i, hh * dh + p) = acc / z;
      }
    }
  }

  // per-frame output projection + residual + FFN(LN)
  std::vector<Tensor> outputs;
  for (int i = 0; i < t; ++i) {
    Tensor rows({npf, d});
    for (int a = 0; a < npf; ++a)
      for (int j = 0; j < d; ++j) rows.at2(a, j) = agg.at2(i * npf + a, j);
    Tensor proj = o_linear(rows, params.out.w.value(), params.out.b.value());
    Tensor fhat = o_chw(proj, hs, ws);
    for (long p = 0; p < fhat.numel(); ++p) fhat.data[p] += frames[i].aligned.data[p];
    Tensor normed = o_tokens(o_layernorm(fhat, params.ln.gamma.value(), params.ln.beta.value()));
    Tensor h1 = o_linear(normed, params.ffn1.w.value(), params.ffn1.b.value());
    for (auto& x : h1.data) x = o_gelu(x);
    Tensor h2 = o_linear(h1, params.ffn2.w.value(), params.ffn2.b.value());
    Tensor ffn = o_chw(h2, hs, ws);
    Tensor out = fhat;
    for (long p = 0; p < out.numel(); ++p) out.data[p] += ffn.data[p];
    outputs.push_back(std::move(out));
    (void)c;
  }
  return outputs;
}

Tensor dense_attention_ref(const Tensor& q, const Tensor& k, const Tensor& v) {
  int n = q.dim(0), d = q.dim(1), m = k.dim(0), dv = v.dim(1);
  Tensor out({n, dv});
  double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(m);
    double mx = -1e300;
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int p = 0; p < d; ++p) s += q.at2(i, p) * k.at2(j, p);
      row[j] = s * scale;
      mx = std::max(mx, row[j]);
    }
    double z = 0.0;
    for (int j = 0; j < m; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (int p = 0; p < dv; ++p) {
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += row[j] * v.at2(j, p);
      out.at2(i, p) = acc / z;
    }
  }
  return out;
}

DmrSlotTrace dmr_oracle(const std::vector<DmrStreamFrame>& stream, int cooldown_sem, int cooldown_conf) {
  auto protos = [](const DmrStreamFrame& f) {
    int c = f.feature.dim(0), hw = f.feature.dim(1) * f.feature.dim(2);
    std::pair<std::vector<double>, std::vector<double>> p;
    p.first.assign(c, 0.0);
    p.second.assign(c, 0.0);
    double wf = 0.0, wb = 0.0;
    for (int i = 0; i < hw; ++i) {
      wf += f.prob.data[i];
      wb += 1.0 - f.prob.data[i];
    }
    for (int ch = 0; ch < c; ++ch) {
      double sf = 0.0, sb = 0.0;
      for (int i = 0; i < hw; ++i) {
        double x = f.feature.data[static_cast<std::size_t>(ch) * hw + i];
        sf += f.prob.data[i] * x;
        sb += (1.0 - f.prob.data[i]) * x;
      }
      p.first[ch] = sf / (wf + 1e-8);
      p.second[ch] = sb / (wb + 1e-8);
    }
    return p;
  };
  auto cos = [](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      d += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < 1e-8 || nb < 1e-8) return 0.0;
    return std::clamp(d / (na * nb), -1.0, 1.0);
  };
  auto entropy_c = [](const Tensor& prob) {
    double h = 0.0;
    for (double p : prob.data)
      if (p > 0.0 && p < 1.0) h += -p * std::log2(p) - (1 - p) * std::log2(1 - p);
    return 1.0 - h / static_cast<double>(prob.numel());
  };

  int n = static_cast<int>(stream.size());
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pr(n);
  std::vector<double> ssep(n), cdet(n);
  for (int i = 0; i < n; ++i) {
    pr[i] = protos(stream[i]);
    ssep[i] = 1.0 - cos(pr[i].first, pr[i].second);
    cdet[i] = entropy_c(stream[i].prob);
  }

  DmrSlotTrace trace;
  // Replay from scratch up to each step; decisions at step t use the frame
  // completed at t-1 as candidate and frame t as the current frame.
  for (int upto = 0; upto < n; ++upto) {
    int sem = 0, conf = 0;
    int sem_last = 0, conf_last = 0;
    for (int t = 1; t <= upto; ++t) {
      int cand = t - 1;
      double sem_cand = ssep[cand] + cos(pr[cand].first, pr[t].first);
      double sem_slot = ssep[sem] + cos(pr[sem].first, pr[t].first);
      if (t - sem_last >= cooldown_sem && sem_cand > sem_slot) {
        sem = cand;
        sem_last = t;
      }
      double conf_cand = cdet[cand] + cos(pr[cand].first, pr[t].first);
      double conf_slot = cdet[conf] + cos(pr[conf].first, pr[t].first);
      if (t - conf_last >= cooldown_conf && conf_cand > conf_slot) {
        conf = cand;
        conf_last = t;
      }
    }
    trace.sem_frame.push_back(sem);
    trace.conf_frame.push_back(conf);
  }
  return trace;
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> point, double eps) {
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    double orig = point[i];
    point[i] = orig + eps;
    double fp = f(point);
    point[i] = orig - eps;
    double fm = f(point);
    point[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: non-finite function value");
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

}  // namespace cmsa::oracle
