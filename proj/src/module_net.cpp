#include "svqa/module_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "svqa/rng.hpp"

namespace svqa {
namespace {

using ordered_json = nlohmann::ordered_json;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

FeatureMap relu(const FeatureMap& h) {
  FeatureMap out = h;
  for (double& v : out.data) v = std::max(0.0, v);
  return out;
}

void add_inplace(FeatureMap& a, const FeatureMap& b) {
  require(a.data.size() == b.data.size(), "feature map shapes disagree");
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

FeatureMap film_affine(const FeatureMap& h, const std::vector<double>& gamma,
                       const std::vector<double>& beta) {
  require(int(gamma.size()) == h.channels && int(beta.size()) == h.channels,
          "film coefficients do not match channel count");
  FeatureMap out = h;
  for (int c = 0; c < h.channels; ++c) {
    const double g = gamma[size_t(c)], b = beta[size_t(c)];
    for (int y = 0; y < h.height; ++y)
      for (int x = 0; x < h.width; ++x) out.at(c, y, x) = g * h.at(c, y, x) + b;
  }
  return out;
}

FeatureMap concat_channels(const std::vector<const FeatureMap*>& parts) {
  int c = 0;
  for (const FeatureMap* p : parts) {
    require(p->height == parts[0]->height && p->width == parts[0]->width,
            "concatenated maps must share spatial shape");
    c += p->channels;
  }
  FeatureMap out = FeatureMap::zeros(c, parts[0]->height, parts[0]->width);
  int base = 0;
  for (const FeatureMap* p : parts) {
    std::copy(p->data.begin(), p->data.end(),
              out.data.begin() + size_t(base) * p->height * p->width);
    base += p->channels;
  }
  return out;
}

// dL/dinput of conv2d_same given dL/doutput.
FeatureMap conv2d_input_grad(const Conv3x3& kernel, const FeatureMap& dout) {
  FeatureMap din = FeatureMap::zeros(kernel.in_ch, dout.height, dout.width);
  for (int ic = 0; ic < kernel.in_ch; ++ic)
    for (int sy = 0; sy < dout.height; ++sy)
      for (int sx = 0; sx < dout.width; ++sx) {
        double acc = 0.0;
        for (int oc = 0; oc < kernel.out_ch; ++oc)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              int y = sy - (ky - 1), x = sx - (kx - 1);
              if (y < 0 || y >= dout.height || x < 0 || x >= dout.width) continue;
              acc += kernel.at(oc, ic, ky, kx) * dout.at(oc, y, x);
            }
        din.at(ic, sy, sx) = acc;
      }
  return din;
}

void conv2d_weight_grad(const FeatureMap& in, const FeatureMap& dout, Conv3x3& dkernel) {
  for (int oc = 0; oc < dkernel.out_ch; ++oc)
    for (int ic = 0; ic < dkernel.in_ch; ++ic)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          double acc = 0.0;
          for (int y = 0; y < dout.height; ++y)
            for (int x = 0; x < dout.width; ++x) {
              int sy = y + ky - 1, sx = x + kx - 1;
              if (sy < 0 || sy >= in.height || sx < 0 || sx >= in.width) continue;
              acc += dout.at(oc, y, x) * in.at(ic, sy, sx);
            }
          dkernel.w[((size_t(oc) * dkernel.in_ch + ic) * 3 + ky) * 3 + kx] += acc;
        }
}

struct MlpTape {
  std::vector<double> x, hidden_pre, hidden, out;
};

MlpTape mlp_forward_tape(const Mlp& m, const std::vector<double>& x) {
  require(int(x.size()) == m.in, "mlp input size mismatch");
  MlpTape t;
  t.x = x;
  t.hidden_pre.resize(size_t(m.hidden));
  t.hidden.resize(size_t(m.hidden));
  for (int j = 0; j < m.hidden; ++j) {
    double acc = m.b1[size_t(j)];
    const double* row = &m.w1[size_t(j) * m.in];
    for (int i = 0; i < m.in; ++i) acc += row[i] * x[size_t(i)];
    t.hidden_pre[size_t(j)] = acc;
    t.hidden[size_t(j)] = std::max(0.0, acc);
    if (m.bias_inside) t.hidden[size_t(j)] += m.b2[size_t(j)];
  }
  t.out.resize(size_t(m.out));
  for (int k = 0; k < m.out; ++k) {
    double acc = m.bias_inside ? 0.0 : m.b2[size_t(k)];
    const double* row = &m.w2[size_t(k) * m.hidden];
    for (int j = 0; j < m.hidden; ++j) acc += row[j] * t.hidden[size_t(j)];
    t.out[size_t(k)] = acc;
  }
  return t;
}

void mlp_backward(const Mlp& m, const MlpTape& t, const std::vector<double>& dout,
                  Mlp& grads, std::vector<double>& dx) {
  std::vector<double> dhidden(size_t(m.hidden), 0.0);
  for (int k = 0; k < m.out; ++k) {
    const double g = dout[size_t(k)];
    if (!m.bias_inside) grads.b2[size_t(k)] += g;
    for (int j = 0; j < m.hidden; ++j) {
      grads.w2[size_t(k) * m.hidden + j] += g * t.hidden[size_t(j)];
      dhidden[size_t(j)] += m.w2[size_t(k) * m.hidden + j] * g;
    }
  }
  for (int j = 0; j < m.hidden; ++j) {
    if (m.bias_inside) grads.b2[size_t(j)] += dhidden[size_t(j)];
    const double dpre =
        t.hidden_pre[size_t(j)] > 0.0 ? dhidden[size_t(j)] : 0.0;
    grads.b1[size_t(j)] += dpre;
    for (int i = 0; i < m.in; ++i) {
      grads.w1[size_t(j) * m.in + i] += dpre * t.x[size_t(i)];
      dx[size_t(i)] += m.w1[size_t(j) * m.in + i] * dpre;
    }
  }
}

std::vector<double> conditioning(const VectorNmnParams& params, const std::string& token,
                                 const ModuleVector* left, const ModuleVector* right) {
  auto it = params.embeddings.find(token);
  require(it != params.embeddings.end(), "no parameters for token " + token);
  const int c = params.channels;
  if (left) require(int(left->size()) == c, "left argument length mismatch");
  if (right) require(int(right->size()) == c, "right argument length mismatch");
  std::vector<double> cond(size_t(params.embed_dim + 2 * c), 0.0);
  std::copy(it->second.begin(), it->second.end(), cond.begin());
  if (left) std::copy(left->begin(), left->end(), cond.begin() + params.embed_dim);
  if (right)
    std::copy(right->begin(), right->end(), cond.begin() + params.embed_dim + c);
  return cond;
}

// Splits a raw MLP output [beta; gamma_tilde] into film coefficients.
void split_coeffs(const std::vector<double>& raw, int c, std::vector<double>& beta,
                  std::vector<double>& gamma) {
  require(int(raw.size()) == 2 * c, "film mlp output size mismatch");
  beta.assign(raw.begin(), raw.begin() + c);
  gamma.resize(size_t(c));
  for (int i = 0; i < c; ++i) gamma[size_t(i)] = 2.0 * std::tanh(raw[size_t(c + i)]) + 1.0;
}

struct BlockTape {
  MlpTape mlp1, mlp2;
  FiLMCoeffs fc;
  FeatureMap in, pre1, c1, a1, pre2, c2, out;
};

struct VectorTape {
  std::vector<double> cond;
  std::vector<BlockTape> blocks;
  FeatureMap final_out;
  std::vector<int> argmax;  // flat spatial index per channel
  ModuleVector result;
};

VectorTape vector_forward_tape(const VectorNmnParams& params, const std::string& token,
                               const FeatureMap& h_x, const ModuleVector* left,
                               const ModuleVector* right, int blocks) {
  require(h_x.channels == params.channels, "h_x channel count mismatch");
  int n = blocks < 0 ? int(params.blocks.size()) : blocks;
  require(n >= 1 && n <= int(params.blocks.size()), "invalid block count");

  VectorTape tape;
  tape.cond = conditioning(params, token, left, right);
  FeatureMap h = h_x;
  for (int k = 0; k < n; ++k) {
    const FilmBlock& fb = params.blocks[size_t(k)];
    BlockTape bt;
    bt.in = h;
    bt.mlp1 = mlp_forward_tape(fb.film1, tape.cond);
    bt.mlp2 = mlp_forward_tape(fb.film2, tape.cond);
    split_coeffs(bt.mlp1.out, params.channels, bt.fc.beta1, bt.fc.gamma1);
    split_coeffs(bt.mlp2.out, params.channels, bt.fc.beta2, bt.fc.gamma2);
    bt.pre1 = film_affine(h, bt.fc.gamma1, bt.fc.beta1);
    bt.c1 = conv2d_same(bt.pre1, fb.u1);
    bt.a1 = relu(bt.c1);
    bt.pre2 = film_affine(bt.a1, bt.fc.gamma2, bt.fc.beta2);
    bt.c2 = conv2d_same(bt.pre2, fb.u2);
    add_inplace(bt.c2, h_x);
    bt.out = relu(bt.c2);
    h = bt.out;
    tape.blocks.push_back(std::move(bt));
  }
  tape.final_out = h;
  tape.argmax.resize(size_t(h.channels));
  tape.result.resize(size_t(h.channels));
  const int hw = h.height * h.width;
  for (int c = 0; c < h.channels; ++c) {
    int best = 0;
    const double* plane = &h.data[size_t(c) * hw];
    for (int i = 1; i < hw; ++i)
      if (plane[i] > plane[best]) best = i;
    tape.argmax[size_t(c)] = best;
    tape.result[size_t(c)] = plane[best];
  }
  return tape;
}

// Gradients mirroring VectorNmnParams plus the op inputs.
struct VectorGradients {
  VectorNmnParams p;
  FeatureMap dh_x;
  ModuleVector dleft, dright;
};

VectorNmnParams zeros_like(const VectorNmnParams& params) {
  VectorNmnParams z = params;
  for (auto& [name, e] : z.embeddings) std::fill(e.begin(), e.end(), 0.0);
  for (FilmBlock& fb : z.blocks) {
    for (Mlp* m : {&fb.film1, &fb.film2}) {
      std::fill(m->w1.begin(), m->w1.end(), 0.0);
      std::fill(m->b1.begin(), m->b1.end(), 0.0);
      std::fill(m->w2.begin(), m->w2.end(), 0.0);
      std::fill(m->b2.begin(), m->b2.end(), 0.0);
    }
    std::fill(fb.u1.w.begin(), fb.u1.w.end(), 0.0);
    std::fill(fb.u2.w.begin(), fb.u2.w.end(), 0.0);
  }
  return z;
}

// Analytic gradients of sum(vector_nmn_forward(...)) with respect to every
// parameter and input, walking the tape in reverse.
VectorGradients vector_backward(const VectorNmnParams& params, const std::string& token,
                                const FeatureMap& h_x, const ModuleVector* left,
                                const ModuleVector* right, const VectorTape& tape) {
  const int c = params.channels;
  VectorGradients g;
  g.p = zeros_like(params);
  g.dh_x = FeatureMap::zeros(h_x.channels, h_x.height, h_x.width);
  g.dleft.assign(size_t(c), 0.0);
  g.dright.assign(size_t(c), 0.0);
  std::vector<double> dcond(tape.cond.size(), 0.0);

  const int hw = h_x.height * h_x.width;
  FeatureMap dh = FeatureMap::zeros(h_x.channels, h_x.height, h_x.width);
  for (int ch = 0; ch < c; ++ch)
    dh.data[size_t(ch) * hw + tape.argmax[size_t(ch)]] = 1.0;

  for (int k = int(tape.blocks.size()) - 1; k >= 0; --k) {
    const BlockTape& bt = tape.blocks[size_t(k)];
    const FilmBlock& fb = params.blocks[size_t(k)];
    FilmBlock& gfb = g.p.blocks[size_t(k)];

    FeatureMap dc2 = dh;
    for (size_t i = 0; i < dc2.data.size(); ++i)
      if (bt.c2.data[i] <= 0.0) dc2.data[i] = 0.0;
    add_inplace(g.dh_x, dc2);  // residual path
    conv2d_weight_grad(bt.pre2, dc2, gfb.u2);
    FeatureMap dpre2 = conv2d_input_grad(fb.u2, dc2);

    std::vector<double> dgamma2(size_t(c), 0.0), dbeta2(size_t(c), 0.0);
    FeatureMap da1 = dpre2;
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < hw; ++i) {
        const double d = dpre2.data[size_t(ch) * hw + i];
        dgamma2[size_t(ch)] += d * bt.a1.data[size_t(ch) * hw + i];
        dbeta2[size_t(ch)] += d;
        da1.data[size_t(ch) * hw + i] = d * bt.fc.gamma2[size_t(ch)];
      }

    FeatureMap dc1 = da1;
    for (size_t i = 0; i < dc1.data.size(); ++i)
      if (bt.c1.data[i] <= 0.0) dc1.data[i] = 0.0;
    conv2d_weight_grad(bt.pre1, dc1, gfb.u1);
    FeatureMap dpre1 = conv2d_input_grad(fb.u1, dc1);

    std::vector<double> dgamma1(size_t(c), 0.0), dbeta1(size_t(c), 0.0);
    FeatureMap din = dpre1;
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < hw; ++i) {
        const double d = dpre1.data[size_t(ch) * hw + i];
        dgamma1[size_t(ch)] += d * bt.in.data[size_t(ch) * hw + i];
        dbeta1[size_t(ch)] += d;
        din.data[size_t(ch) * hw + i] = d * bt.fc.gamma1[size_t(ch)];
      }

    // Coefficient gradients flow into the MLPs; gamma = 2 tanh(gt) + 1.
    auto back_coeffs = [&](const MlpTape& mt, const Mlp& m, Mlp& gm,
                           const std::vector<double>& dbeta,
                           const std::vector<double>& dgamma) {
      std::vector<double> draw(size_t(2 * c), 0.0);
      for (int i = 0; i < c; ++i) {
        draw[size_t(i)] = dbeta[size_t(i)];
        const double th = std::tanh(mt.out[size_t(c + i)]);
        draw[size_t(c + i)] = dgamma[size_t(i)] * 2.0 * (1.0 - th * th);
      }
      mlp_backward(m, mt, draw, gm, dcond);
    };
    back_coeffs(bt.mlp1, fb.film1, gfb.film1, dbeta1, dgamma1);
    back_coeffs(bt.mlp2, fb.film2, gfb.film2, dbeta2, dgamma2);

    dh = din;
  }
  add_inplace(g.dh_x, dh);  // first block consumed h_x directly

  auto& ge = g.p.embeddings.at(token);
  for (int i = 0; i < params.embed_dim; ++i) ge[size_t(i)] += dcond[size_t(i)];
  if (left)
    for (int i = 0; i < c; ++i) g.dleft[size_t(i)] = dcond[size_t(params.embed_dim + i)];
  if (right)
    for (int i = 0; i < c; ++i)
      g.dright[size_t(i)] = dcond[size_t(params.embed_dim + c + i)];
  return g;
}

void fill_uniform(std::vector<double>& v, Rng& rng) {
  for (double& x : v) x = rng.uniform_real() * 0.2 - 0.1;
}

Mlp make_mlp(int in, int hidden, int out, bool bias_inside, Rng& rng) {
  Mlp m;
  m.in = in;
  m.hidden = hidden;
  m.out = out;
  m.bias_inside = bias_inside;
  m.w1.resize(size_t(hidden) * in);
  m.b1.resize(size_t(hidden));
  m.w2.resize(size_t(out) * hidden);
  m.b2.resize(size_t(bias_inside ? hidden : out));
  fill_uniform(m.w1, rng);
  fill_uniform(m.b1, rng);
  fill_uniform(m.w2, rng);
  fill_uniform(m.b2, rng);
  return m;
}

Conv3x3 make_conv(int out_ch, int in_ch, Rng& rng) {
  Conv3x3 k;
  k.out_ch = out_ch;
  k.in_ch = in_ch;
  k.w.resize(size_t(out_ch) * in_ch * 9);
  fill_uniform(k.w, rng);
  return k;
}

}  // namespace

std::string to_word(TensorVariant v) {
  switch (v) {
    case TensorVariant::plain: return "plain";
    case TensorVariant::shortcut: return "shortcut";
    case TensorVariant::film: return "film";
  }
  return "?";
}

TensorVariant tensor_variant_from_word(std::string_view word) {
  if (word == "plain") return TensorVariant::plain;
  if (word == "shortcut") return TensorVariant::shortcut;
  if (word == "film") return TensorVariant::film;
  throw std::invalid_argument("unknown tensor variant: " + std::string(word));
}

std::vector<double> mlp_forward(const Mlp& m, const std::vector<double>& x) {
  return mlp_forward_tape(m, x).out;
}

FeatureMap conv2d_same(const FeatureMap& in, const Conv3x3& kernel) {
  require(kernel.in_ch == in.channels, "conv input channel mismatch");
  FeatureMap out = FeatureMap::zeros(kernel.out_ch, in.height, in.width);
  const int oc_n = kernel.out_ch, h = in.height, w = in.width;
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < oc_n; ++oc)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int ic = 0; ic < in.channels; ++ic)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = y + ky - 1, sx = x + kx - 1;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              acc += kernel.at(oc, ic, ky, kx) * in.at(ic, sy, sx);
            }
        out.at(oc, y, x) = acc;
      }
  return out;
}

FiLMCoeffs film_coeffs(const VectorNmnParams& params, int block, const std::string& token,
                       const ModuleVector* left, const ModuleVector* right) {
  require(block >= 0 && block < int(params.blocks.size()), "block index out of range");
  std::vector<double> cond = conditioning(params, token, left, right);
  const FilmBlock& fb = params.blocks[size_t(block)];
  FiLMCoeffs out;
  split_coeffs(mlp_forward(fb.film1, cond), params.channels, out.beta1, out.gamma1);
  split_coeffs(mlp_forward(fb.film2, cond), params.channels, out.beta2, out.gamma2);
  return out;
}

ModuleVector vector_nmn_forward(const VectorNmnParams& params, const std::string& token,
                                const FeatureMap& h_x, const ModuleVector* left,
                                const ModuleVector* right, int blocks) {
  return vector_forward_tape(params, token, h_x, left, right, blocks).result;
}

FeatureMap tensor_nmn_forward(const TensorNmnParams& params, const std::string& token,
                              const FeatureMap* left, const FeatureMap* right,
                              const FeatureMap& h_x) {
  if (params.variant == TensorVariant::film) {
    auto eit = params.embeddings.find(token);
    require(eit != params.embeddings.end(), "no parameters for token " + token);
    FeatureMap zero = FeatureMap::zeros(params.channels, h_x.height, h_x.width);
    FeatureMap h = concat_channels({&h_x, left ? left : &zero, right ? right : &zero});
    for (const FilmBlock& fb : params.blocks) {
      std::vector<double> beta1, gamma1, beta2, gamma2;
      split_coeffs(mlp_forward(fb.film1, eit->second), fb.u1.in_ch, beta1, gamma1);
      split_coeffs(mlp_forward(fb.film2, eit->second), fb.u2.in_ch, beta2, gamma2);
      FeatureMap t1 = relu(conv2d_same(film_affine(h, gamma1, beta1), fb.u1));
      FeatureMap t2 = conv2d_same(film_affine(t1, gamma2, beta2), fb.u2);
      add_inplace(t2, h_x);
      h = relu(t2);
    }
    return h;
  }

  auto mit = params.modules.find(token);
  require(mit != params.modules.end(), "no parameters for token " + token);
  std::vector<const FeatureMap*> parts;
  if (left) parts.push_back(left);
  if (right) parts.push_back(right);
  if (params.variant == TensorVariant::shortcut || parts.empty()) parts.push_back(&h_x);
  FeatureMap input = concat_channels(parts);

  const TensorModule& m = mit->second;
  FeatureMap t = relu(conv2d_same(input, m.w1));
  FeatureMap u = conv2d_same(t, m.w2);
  for (int c = 0; c < u.channels; ++c)
    for (int i = 0; i < u.height * u.width; ++i)
      u.data[size_t(c) * u.height * u.width + i] += m.b2[size_t(c)];
  u = relu(u);
  FeatureMap v = conv2d_same(u, m.w3);
  for (int c = 0; c < v.channels; ++c)
    for (int i = 0; i < v.height * v.width; ++i)
      v.data[size_t(c) * v.height * v.width + i] += m.b3[size_t(c)];
  add_inplace(v, t);
  return relu(v);
}

ModuleVector run_program(const TypedProgram& program, const FeatureMap& h_x,
                         const VectorNmnParams& params) {
  const auto& nodes = program.program.nodes;
  std::vector<ModuleVector> slots(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    const ModuleVector* left =
        nodes[i].inputs.size() >= 1 ? &slots[size_t(nodes[i].inputs[0])] : nullptr;
    const ModuleVector* right =
        nodes[i].inputs.size() >= 2 ? &slots[size_t(nodes[i].inputs[1])] : nullptr;
    slots[i] = vector_nmn_forward(params, nodes[i].function, h_x, left, right);
  }
  return slots.back();
}

FeatureMap run_program(const TypedProgram& program, const FeatureMap& h_x,
                       const TensorNmnParams& params) {
  const auto& nodes = program.program.nodes;
  std::vector<FeatureMap> slots(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    const FeatureMap* left =
        nodes[i].inputs.size() >= 1 ? &slots[size_t(nodes[i].inputs[0])] : nullptr;
    const FeatureMap* right =
        nodes[i].inputs.size() >= 2 ? &slots[size_t(nodes[i].inputs[1])] : nullptr;
    slots[i] = tensor_nmn_forward(params, nodes[i].function, left, right, h_x);
  }
  return slots.back();
}

VectorNmnParams make_test_vector_params(uint64_t seed, int channels, int embed_dim,
                                        int hidden_dim, int num_blocks,
                                        bool film_bias_inside) {
  Rng rng(Rng::derive({seed, hash_str64("vector-params")}));
  VectorNmnParams p;
  p.channels = channels;
  p.embed_dim = embed_dim;
  p.hidden_dim = hidden_dim;
  p.film_bias_inside = film_bias_inside;
  for (const FunctionToken& tok : catalog()) {
    std::vector<double> e(static_cast<size_t>(embed_dim));
    fill_uniform(e, rng);
    p.embeddings[tok.name] = std::move(e);
  }
  for (int k = 0; k < num_blocks; ++k) {
    FilmBlock fb;
    fb.film1 = make_mlp(embed_dim + 2 * channels, hidden_dim, 2 * channels,
                        film_bias_inside, rng);
    fb.film2 = make_mlp(embed_dim + 2 * channels, hidden_dim, 2 * channels,
                        film_bias_inside, rng);
    fb.u1 = make_conv(channels, channels, rng);
    fb.u2 = make_conv(channels, channels, rng);
    p.blocks.push_back(std::move(fb));
  }
  return p;
}

TensorNmnParams make_test_tensor_params(uint64_t seed, int channels, TensorVariant variant,
                                        int embed_dim, int hidden_dim, int num_blocks) {
  Rng rng(Rng::derive({seed, hash_str64("tensor-params"), uint64_t(variant)}));
  TensorNmnParams p;
  p.variant = variant;
  p.channels = channels;
  if (variant == TensorVariant::film) {
    p.embed_dim = embed_dim;
    p.hidden_dim = hidden_dim;
    for (const FunctionToken& tok : catalog()) {
      std::vector<double> e(static_cast<size_t>(embed_dim));
      fill_uniform(e, rng);
      p.embeddings[tok.name] = std::move(e);
    }
    for (int k = 0; k < num_blocks; ++k) {
      FilmBlock fb;
      const int in_ch = k == 0 ? 3 * channels : channels;
      fb.film1 = make_mlp(embed_dim, hidden_dim, 2 * in_ch, false, rng);
      fb.film2 = make_mlp(embed_dim, hidden_dim, 2 * channels, false, rng);
      fb.u1 = make_conv(channels, in_ch, rng);
      fb.u2 = make_conv(channels, channels, rng);
      p.blocks.push_back(std::move(fb));
    }
    return p;
  }
  for (const FunctionToken& tok : catalog()) {
    const int arity = int(tok.input_kinds.size());
    int in_ch;
    if (variant == TensorVariant::shortcut) {
      in_ch = (arity + 1) * channels;
    } else {
      in_ch = std::max(1, arity) * channels;  // arity 0 consumes h_x
    }
    TensorModule m;
    m.w1 = make_conv(channels, in_ch, rng);
    m.w2 = make_conv(channels, channels, rng);
    m.w3 = make_conv(channels, channels, rng);
    m.b2.resize(size_t(channels));
    m.b3.resize(size_t(channels));
    fill_uniform(m.b2, rng);
    fill_uniform(m.b3, rng);
    p.modules[tok.name] = std::move(m);
  }
  return p;
}

namespace {

// Flat view over every checked array: (label, live storage, analytic grads).
struct Registry {
  struct Entry {
    std::string name;
    double* data;
    const double* grad;
    size_t size;
  };
  std::vector<Entry> entries;

  void add(const std::string& name, std::vector<double>& data,
           const std::vector<double>& grad) {
    entries.push_back({name, data.data(), grad.data(), data.size()});
  }
  size_t coordinates() const {
    size_t n = 0;
    for (const Entry& e : entries) n += e.size;
    return n;
  }
};

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
}

template <typename Loss>
GradCheckReport run_numeric_check(const std::string& op, uint64_t seed_used,
                                  Registry& reg, Loss loss, double epsilon,
                                  double tolerance) {
  GradCheckReport report;
  report.op = op;
  report.seed_used = seed_used;
  report.epsilon = epsilon;
  report.tolerance = tolerance;
  report.coordinates = int(reg.coordinates());
  for (Registry::Entry& e : reg.entries) {
    for (size_t i = 0; i < e.size; ++i) {
      const double orig = e.data[i];
      e.data[i] = orig + epsilon;
      const double lp = loss();
      e.data[i] = orig - epsilon;
      const double lm = loss();
      e.data[i] = orig;
      const double numeric = (lp - lm) / (2.0 * epsilon);
      report.max_rel_err = std::max(report.max_rel_err, rel_err(e.grad[i], numeric));
    }
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

// The central difference is only trusted when the loss is smooth on each
// probed segment, i.e. no ReLU sign or per-channel argmax changes between
// x-eps and x+eps. That is checked exactly: the activation pattern is
// recomputed at both endpoints for every coordinate, and the instance is
// redrawn if any coordinate flips it.
std::vector<int> vector_pattern(const VectorTape& tape) {
  std::vector<int> p;
  for (const BlockTape& bt : tape.blocks) {
    for (double v : bt.mlp1.hidden_pre) p.push_back(v > 0.0);
    for (double v : bt.mlp2.hidden_pre) p.push_back(v > 0.0);
    for (double v : bt.c1.data) p.push_back(v > 0.0);
    for (double v : bt.c2.data) p.push_back(v > 0.0);
  }
  p.insert(p.end(), tape.argmax.begin(), tape.argmax.end());
  return p;
}

template <typename PatternFn>
bool pattern_stable(Registry& reg, const std::vector<int>& base, PatternFn pattern,
                    double epsilon) {
  for (Registry::Entry& e : reg.entries)
    for (size_t i = 0; i < e.size; ++i) {
      const double orig = e.data[i];
      e.data[i] = orig + epsilon;
      bool ok = pattern() == base;
      if (ok) {
        e.data[i] = orig - epsilon;
        ok = pattern() == base;
      }
      e.data[i] = orig;
      if (!ok) return false;
    }
  return true;
}

GradCheckReport grad_check_film_affine(uint64_t seed, double epsilon, double tolerance) {
  const int c = 3, h = 4, w = 4;
  Rng rng(Rng::derive({seed, hash_str64("film_affine")}));
  FeatureMap input = FeatureMap::zeros(c, h, w);
  for (double& v : input.data) v = rng.uniform_real() * 2.0 - 1.0;
  std::vector<double> beta(static_cast<size_t>(c));
  fill_uniform(beta, rng);

  // gamma fixed at 1: loss = sum(input + beta) is linear in both arguments.
  std::vector<double> dinput(input.data.size(), 1.0);
  std::vector<double> dbeta(size_t(c), double(h * w));

  Registry reg;
  reg.add("input", input.data, dinput);
  reg.add("beta", beta, dbeta);
  auto loss = [&]() {
    double l = 0.0;
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h * w; ++i)
        l += input.data[size_t(ch) * h * w + i] + beta[size_t(ch)];
    return l;
  };
  return run_numeric_check("film_affine", seed, reg, loss, epsilon, tolerance);
}

GradCheckReport grad_check_film_coeffs(uint64_t seed, double epsilon, double tolerance) {
  const int c = 3, e = 4, d = 8;
  const std::string token = "union";

  for (int attempt = 0;; ++attempt) {
    require(attempt < 200, "film_coeffs grad check: no pattern-stable instance found");
    const uint64_t inst = Rng::derive({seed, uint64_t(attempt)});
    VectorNmnParams params = make_test_vector_params(inst, c, e, d, 1);
    Rng rng(Rng::derive({inst, hash_str64("film-coeffs-inputs")}));
    ModuleVector left(static_cast<size_t>(c)), right(static_cast<size_t>(c));
    for (double& v : left) v = rng.uniform_real() * 2.0 - 1.0;
    for (double& v : right) v = rng.uniform_real() * 2.0 - 1.0;

    std::vector<double> cond = conditioning(params, token, &left, &right);
    FilmBlock& fb = params.blocks[0];
    MlpTape t1 = mlp_forward_tape(fb.film1, cond);
    MlpTape t2 = mlp_forward_tape(fb.film2, cond);

    // Analytic gradient of sum(beta1 + gamma1 + beta2 + gamma2).
    VectorNmnParams grads = zeros_like(params);
    std::vector<double> dcond(cond.size(), 0.0);
    auto back = [&](const MlpTape& t, const Mlp& m, Mlp& gm) {
      std::vector<double> draw(size_t(2 * c), 0.0);
      for (int i = 0; i < c; ++i) {
        draw[size_t(i)] = 1.0;
        const double th = std::tanh(t.out[size_t(c + i)]);
        draw[size_t(c + i)] = 2.0 * (1.0 - th * th);
      }
      mlp_backward(m, t, draw, gm, dcond);
    };
    back(t1, fb.film1, grads.blocks[0].film1);
    back(t2, fb.film2, grads.blocks[0].film2);

    std::vector<double> dleft(static_cast<size_t>(c)), dright(static_cast<size_t>(c));
    std::vector<double>& dembed = grads.embeddings.at(token);
    for (int i = 0; i < e; ++i) dembed[size_t(i)] = dcond[size_t(i)];
    for (int i = 0; i < c; ++i) dleft[size_t(i)] = dcond[size_t(e + i)];
    for (int i = 0; i < c; ++i) dright[size_t(i)] = dcond[size_t(e + c + i)];

    Registry reg;
    FilmBlock& gfb = grads.blocks[0];
    reg.add("film1/w1", fb.film1.w1, gfb.film1.w1);
    reg.add("film1/b1", fb.film1.b1, gfb.film1.b1);
    reg.add("film1/w2", fb.film1.w2, gfb.film1.w2);
    reg.add("film1/b2", fb.film1.b2, gfb.film1.b2);
    reg.add("film2/w1", fb.film2.w1, gfb.film2.w1);
    reg.add("film2/b1", fb.film2.b1, gfb.film2.b1);
    reg.add("film2/w2", fb.film2.w2, gfb.film2.w2);
    reg.add("film2/b2", fb.film2.b2, gfb.film2.b2);
    reg.add("embedding", params.embeddings.at(token), grads.embeddings.at(token));
    reg.add("left", left, dleft);
    reg.add("right", right, dright);

    auto pattern = [&]() {
      std::vector<double> cd = conditioning(params, token, &left, &right);
      std::vector<int> p;
      for (double v : mlp_forward_tape(fb.film1, cd).hidden_pre) p.push_back(v > 0.0);
      for (double v : mlp_forward_tape(fb.film2, cd).hidden_pre) p.push_back(v > 0.0);
      return p;
    };
    if (!pattern_stable(reg, pattern(), pattern, epsilon)) continue;

    auto loss = [&]() {
      FiLMCoeffs fc = film_coeffs(params, 0, token, &left, &right);
      double l = 0.0;
      for (double v : fc.beta1) l += v;
      for (double v : fc.gamma1) l += v;
      for (double v : fc.beta2) l += v;
      for (double v : fc.gamma2) l += v;
      return l;
    };
    return run_numeric_check("film_coeffs", inst, reg, loss, epsilon, tolerance);
  }
}

GradCheckReport grad_check_vector(uint64_t seed, double epsilon, double tolerance) {
  const int c = 3, h = 4, w = 4, e = 4, d = 8, blocks = 2;
  const std::string token = "union";

  for (int attempt = 0;; ++attempt) {
    require(attempt < 200, "vector grad check: no pattern-stable instance found");
    const uint64_t inst = Rng::derive({seed, uint64_t(attempt)});
    VectorNmnParams params = make_test_vector_params(inst, c, e, d, blocks);
    Rng rng(Rng::derive({inst, hash_str64("vector-inputs")}));
    FeatureMap h_x = FeatureMap::zeros(c, h, w);
    for (double& v : h_x.data) v = rng.uniform_real() * 2.0 - 1.0;
    ModuleVector left(static_cast<size_t>(c)), right(static_cast<size_t>(c));
    for (double& v : left) v = rng.uniform_real() * 2.0 - 1.0;
    for (double& v : right) v = rng.uniform_real() * 2.0 - 1.0;

    VectorTape tape = vector_forward_tape(params, token, h_x, &left, &right, -1);
    VectorGradients g = vector_backward(params, token, h_x, &left, &right, tape);

    Registry reg;
    reg.add("embedding", params.embeddings.at(token), g.p.embeddings.at(token));
    for (int k = 0; k < blocks; ++k) {
      FilmBlock& fb = params.blocks[size_t(k)];
      FilmBlock& gfb = g.p.blocks[size_t(k)];
      const std::string pre = "block" + std::to_string(k) + "/";
      reg.add(pre + "film1/w1", fb.film1.w1, gfb.film1.w1);
      reg.add(pre + "film1/b1", fb.film1.b1, gfb.film1.b1);
      reg.add(pre + "film1/w2", fb.film1.w2, gfb.film1.w2);
      reg.add(pre + "film1/b2", fb.film1.b2, gfb.film1.b2);
      reg.add(pre + "film2/w1", fb.film2.w1, gfb.film2.w1);
      reg.add(pre + "film2/b1", fb.film2.b1, gfb.film2.b1);
      reg.add(pre + "film2/w2", fb.film2.w2, gfb.film2.w2);
      reg.add(pre + "film2/b2", fb.film2.b2, gfb.film2.b2);
      reg.add(pre + "u1", fb.u1.w, gfb.u1.w);
      reg.add(pre + "u2", fb.u2.w, gfb.u2.w);
    }
    reg.add("h_x", h_x.data, g.dh_x.data);
    reg.add("left", left, g.dleft);
    reg.add("right", right, g.dright);

    auto pattern = [&]() {
      return vector_pattern(vector_forward_tape(params, token, h_x, &left, &right, -1));
    };
    if (!pattern_stable(reg, vector_pattern(tape), pattern, epsilon)) continue;

    auto loss = [&]() {
      ModuleVector out = vector_nmn_forward(params, token, h_x, &left, &right);
      double l = 0.0;
      for (double v : out) l += v;
      return l;
    };
    return run_numeric_check("vector_nmn_forward", inst, reg, loss, epsilon, tolerance);
  }
}

}  // namespace

GradCheckReport grad_check(const std::string& op_id, uint64_t seed, double epsilon,
                           double tolerance) {
  require(epsilon > 0.0, "epsilon must be positive");
  if (op_id == "film_affine") return grad_check_film_affine(seed, epsilon, tolerance);
  if (op_id == "film_coeffs") return grad_check_film_coeffs(seed, epsilon, tolerance);
  if (op_id == "vector_nmn_forward") return grad_check_vector(seed, epsilon, tolerance);
  throw std::invalid_argument("unknown grad check op: " + op_id);
}

namespace {

struct ArraySink {
  ordered_json manifest_arrays = ordered_json::array();
  std::vector<double> flat;

  void add(const std::string& name, std::vector<int> shape,
           const std::vector<double>& data) {
    size_t n = 1;
    for (int s : shape) n *= size_t(s);
    if (n != data.size())
      throw std::logic_error("array " + name + " shape does not match size");
    ordered_json entry;
    entry["name"] = name;
    entry["shape"] = shape;
    entry["offset"] = flat.size();
    manifest_arrays.push_back(std::move(entry));
    flat.insert(flat.end(), data.begin(), data.end());
  }
};

struct ArraySource {
  std::vector<double> flat;
  struct Slot {
    std::vector<int> shape;
    size_t offset;
  };
  std::map<std::string, Slot> slots;

  std::vector<double> take(const std::string& name) const {
    auto it = slots.find(name);
    if (it == slots.end())
      throw std::runtime_error("parameter file is missing array " + name);
    size_t n = 1;
    for (int s : it->second.shape) n *= size_t(s);
    if (it->second.offset + n > flat.size())
      throw std::runtime_error("array " + name + " overruns the binary payload");
    return std::vector<double>(flat.begin() + long(it->second.offset),
                               flat.begin() + long(it->second.offset + n));
  }
};

void write_params_files(const std::string& bin_path, const std::string& manifest_path,
                        const std::string& kind, const ordered_json& config,
                        const ArraySink& sink) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path);
  bin.write(reinterpret_cast<const char*>(sink.flat.data()),
            std::streamsize(sink.flat.size() * sizeof(double)));

  ordered_json manifest;
  manifest["format"] = "svqa-params";
  manifest["kind"] = kind;
  manifest["dtype"] = "float64";
  manifest["byte_order"] = "little";
  manifest["config"] = config;
  manifest["arrays"] = sink.manifest_arrays;
  std::ofstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot write " + manifest_path);
  mf << manifest.dump(2) << "\n";
}

ordered_json read_params_files(const std::string& bin_path,
                               const std::string& manifest_path,
                               const std::string& expect_kind, ArraySource& src) {
  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot read " + manifest_path);
  ordered_json manifest = ordered_json::parse(mf);
  if (manifest.value("format", "") != "svqa-params" ||
      manifest.value("dtype", "") != "float64")
    throw std::runtime_error("unrecognized parameter manifest " + manifest_path);
  if (manifest.value("kind", "") != expect_kind)
    throw std::runtime_error("parameter kind mismatch: expected " + expect_kind);

  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin) throw std::runtime_error("cannot read " + bin_path);
  const auto bytes = size_t(bin.tellg());
  bin.seekg(0);
  src.flat.resize(bytes / sizeof(double));
  bin.read(reinterpret_cast<char*>(src.flat.data()), std::streamsize(bytes));

  for (const auto& entry : manifest.at("arrays")) {
    ArraySource::Slot slot;
    slot.shape = entry.at("shape").get<std::vector<int>>();
    slot.offset = entry.at("offset").get<size_t>();
    src.slots[entry.at("name").get<std::string>()] = std::move(slot);
  }
  return manifest.at("config");
}

void sink_mlp(ArraySink& sink, const std::string& prefix, const Mlp& m) {
  sink.add(prefix + "/w1", {m.hidden, m.in}, m.w1);
  sink.add(prefix + "/b1", {m.hidden}, m.b1);
  sink.add(prefix + "/w2", {m.out, m.hidden}, m.w2);
  sink.add(prefix + "/b2", {int(m.b2.size())}, m.b2);
}

Mlp source_mlp(const ArraySource& src, const std::string& prefix, int in, int hidden,
               int out, bool bias_inside) {
  Mlp m;
  m.in = in;
  m.hidden = hidden;
  m.out = out;
  m.bias_inside = bias_inside;
  m.w1 = src.take(prefix + "/w1");
  m.b1 = src.take(prefix + "/b1");
  m.w2 = src.take(prefix + "/w2");
  m.b2 = src.take(prefix + "/b2");
  return m;
}

void sink_conv(ArraySink& sink, const std::string& name, const Conv3x3& k) {
  sink.add(name, {k.out_ch, k.in_ch, 3, 3}, k.w);
}

Conv3x3 source_conv(const ArraySource& src, const std::string& name, int out_ch,
                    int in_ch) {
  Conv3x3 k;
  k.out_ch = out_ch;
  k.in_ch = in_ch;
  k.w = src.take(name);
  return k;
}

}  // namespace

void save_vector_params(const VectorNmnParams& params, const std::string& bin_path,
                        const std::string& manifest_path) {
  ArraySink sink;
  for (const auto& [token, e] : params.embeddings)
    sink.add("embed/" + token, {int(e.size())}, e);
  for (size_t k = 0; k < params.blocks.size(); ++k) {
    const std::string pre = "block" + std::to_string(k);
    sink_mlp(sink, pre + "/film1", params.blocks[k].film1);
    sink_mlp(sink, pre + "/film2", params.blocks[k].film2);
    sink_conv(sink, pre + "/u1", params.blocks[k].u1);
    sink_conv(sink, pre + "/u2", params.blocks[k].u2);
  }
  ordered_json config;
  config["channels"] = params.channels;
  config["embed_dim"] = params.embed_dim;
  config["hidden_dim"] = params.hidden_dim;
  config["blocks"] = params.blocks.size();
  config["film_bias_inside"] = params.film_bias_inside;
  config["tokens"] = [&] {
    ordered_json names = ordered_json::array();
    for (const auto& [token, e] : params.embeddings) names.push_back(token);
    return names;
  }();
  write_params_files(bin_path, manifest_path, "vector", config, sink);
}

VectorNmnParams load_vector_params(const std::string& bin_path,
                                   const std::string& manifest_path) {
  ArraySource src;
  ordered_json config = read_params_files(bin_path, manifest_path, "vector", src);
  VectorNmnParams p;
  p.channels = config.at("channels").get<int>();
  p.embed_dim = config.at("embed_dim").get<int>();
  p.hidden_dim = config.at("hidden_dim").get<int>();
  p.film_bias_inside = config.at("film_bias_inside").get<bool>();
  const int blocks = config.at("blocks").get<int>();
  for (const auto& name : config.at("tokens"))
    p.embeddings[name.get<std::string>()] = src.take("embed/" + name.get<std::string>());
  const int in = p.embed_dim + 2 * p.channels, out = 2 * p.channels;
  for (int k = 0; k < blocks; ++k) {
    const std::string pre = "block" + std::to_string(k);
    FilmBlock fb;
    fb.film1 = source_mlp(src, pre + "/film1", in, p.hidden_dim, out, p.film_bias_inside);
    fb.film2 = source_mlp(src, pre + "/film2", in, p.hidden_dim, out, p.film_bias_inside);
    fb.u1 = source_conv(src, pre + "/u1", p.channels, p.channels);
    fb.u2 = source_conv(src, pre + "/u2", p.channels, p.channels);
    p.blocks.push_back(std::move(fb));
  }
  return p;
}

void save_tensor_params(const TensorNmnParams& params, const std::string& bin_path,
                        const std::string& manifest_path) {
  ArraySink sink;
  ordered_json config;
  config["variant"] = to_word(params.variant);
  config["channels"] = params.channels;
  if (params.variant == TensorVariant::film) {
    config["embed_dim"] = params.embed_dim;
    config["hidden_dim"] = params.hidden_dim;
    config["blocks"] = params.blocks.size();
    config["film_bias_inside"] = params.film_bias_inside;
    ordered_json names = ordered_json::array();
    for (const auto& [token, e] : params.embeddings) {
      names.push_back(token);
      sink.add("embed/" + token, {int(e.size())}, e);
    }
    config["tokens"] = names;
    for (size_t k = 0; k < params.blocks.size(); ++k) {
      const std::string pre = "block" + std::to_string(k);
      sink_mlp(sink, pre + "/film1", params.blocks[k].film1);
      sink_mlp(sink, pre + "/film2", params.blocks[k].film2);
      sink_conv(sink, pre + "/u1", params.blocks[k].u1);
      sink_conv(sink, pre + "/u2", params.blocks[k].u2);
    }
  } else {
    ordered_json names = ordered_json::array();
    ordered_json in_chs = ordered_json::array();
    for (const auto& [token, m] : params.modules) {
      names.push_back(token);
      in_chs.push_back(m.w1.in_ch);
      const std::string pre = "module/" + token;
      sink_conv(sink, pre + "/w1", m.w1);
      sink_conv(sink, pre + "/w2", m.w2);
      sink_conv(sink, pre + "/w3", m.w3);
      sink.add(pre + "/b2", {int(m.b2.size())}, m.b2);
      sink.add(pre + "/b3", {int(m.b3.size())}, m.b3);
    }
    config["tokens"] = names;
    config["input_channels"] = in_chs;
  }
  write_params_files(bin_path, manifest_path, "tensor", config, sink);
}

TensorNmnParams load_tensor_params(const std::string& bin_path,
                                   const std::string& manifest_path) {
  ArraySource src;
  ordered_json config = read_params_files(bin_path, manifest_path, "tensor", src);
  TensorNmnParams p;
  p.variant = tensor_variant_from_word(config.at("variant").get<std::string>());
  p.channels = config.at("channels").get<int>();
  if (p.variant == TensorVariant::film) {
    p.embed_dim = config.at("embed_dim").get<int>();
    p.hidden_dim = config.at("hidden_dim").get<int>();
    p.film_bias_inside = config.at("film_bias_inside").get<bool>();
    const int blocks = config.at("blocks").get<int>();
    for (const auto& name : config.at("tokens"))
      p.embeddings[name.get<std::string>()] =
          src.take("embed/" + name.get<std::string>());
    for (int k = 0; k < blocks; ++k) {
      const std::string pre = "block" + std::to_string(k);
      const int in_ch = k == 0 ? 3 * p.channels : p.channels;
      FilmBlock fb;
      fb.film1 = source_mlp(src, pre + "/film1", p.embed_dim, p.hidden_dim, 2 * in_ch,
                            p.film_bias_inside);
      fb.film2 = source_mlp(src, pre + "/film2", p.embed_dim, p.hidden_dim,
                            2 * p.channels, p.film_bias_inside);
      fb.u1 = source_conv(src, pre + "/u1", p.channels, in_ch);
      fb.u2 = source_conv(src, pre + "/u2", p.channels, p.channels);
      p.blocks.push_back(std::move(fb));
    }
    return p;
  }
  const auto& names = config.at("tokens");
  const auto& in_chs = config.at("input_channels");
  for (size_t i = 0; i < names.size(); ++i) {
    const std::string token = names[i].get<std::string>();
    const int in_ch = in_chs[i].get<int>();
    const std::string pre = "module/" + token;
    TensorModule m;
    m.w1 = source_conv(src, pre + "/w1", p.channels, in_ch);
    m.w2 = source_conv(src, pre + "/w2", p.channels, p.channels);
    m.w3 = source_conv(src, pre + "/w3", p.channels, p.channels);
    m.b2 = src.take(pre + "/b2");
    m.b3 = src.take(pre + "/b3");
    p.modules[token] = std::move(m);
  }
  return p;
}

}  // namespace svqa
