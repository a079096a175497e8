#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "svqa/dsl.hpp"

namespace svqa {

// Dense (channels, height, width) tensor, double precision, row-major with
// channel outermost.
struct FeatureMap {
  int channels = 0, height = 0, width = 0;
  std::vector<double> data;

  static FeatureMap zeros(int c, int h, int w) {
    return FeatureMap{c, h, w, std::vector<double>(size_t(c) * h * w, 0.0)};
  }
  double& at(int c, int y, int x) {
    return data[(size_t(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(size_t(c) * height + y) * width + x];
  }
};

using ModuleVector = std::vector<double>;

struct FiLMCoeffs {
  std::vector<double> gamma1, beta1, gamma2, beta2;  // each length = block input C
};

// 3x3 kernel bank, weights laid out [out_ch][in_ch][ky][kx].
struct Conv3x3 {
  int out_ch = 0, in_ch = 0;
  std::vector<double> w;

  double at(int oc, int ic, int ky, int kx) const {
    return w[((size_t(oc) * in_ch + ic) * 3 + ky) * 3 + kx];
  }
};

// One-hidden-layer MLP. Default form: y = W2 * ReLU(W1 x + b1) + b2.
// With bias_inside (the printed alternative): y = W2 * (ReLU(W1 x + b1) + b2),
// where b2 then has hidden dimension.
struct Mlp {
  int in = 0, hidden = 0, out = 0;
  bool bias_inside = false;
  std::vector<double> w1, b1, w2, b2;  // w1: [hidden][in], w2: [out][hidden]
};

std::vector<double> mlp_forward(const Mlp& m, const std::vector<double>& x);

// One residual block's conditioning MLPs (film1 for the first affine, film2
// for the second) and its convolution kernels.
struct FilmBlock {
  Mlp film1, film2;
  Conv3x3 u1, u2;
};

struct VectorNmnParams {
  int channels = 0, embed_dim = 0, hidden_dim = 0;
  bool film_bias_inside = false;
  std::map<std::string, std::vector<double>> embeddings;  // token -> e(p)
  std::vector<FilmBlock> blocks;  // convs shared across tokens, per block
};

enum class TensorVariant : uint8_t { plain, shortcut, film };

std::string to_word(TensorVariant v);
TensorVariant tensor_variant_from_word(std::string_view word);  // throws

// Per-token residual module for the plain/shortcut variants.
struct TensorModule {
  Conv3x3 w1, w2, w3;
  std::vector<double> b2, b3;
};

struct TensorNmnParams {
  TensorVariant variant = TensorVariant::plain;
  int channels = 0;
  std::map<std::string, TensorModule> modules;  // plain, shortcut
  // film variant: conditioning from the token embedding alone; the first
  // block consumes [h_x; left-or-zero; right-or-zero] (3C channels).
  int embed_dim = 0, hidden_dim = 0;
  bool film_bias_inside = false;
  std::map<std::string, std::vector<double>> embeddings;
  std::vector<FilmBlock> blocks;
};

// Same-padding stride-1 3x3 convolution; parallel across output cells with a
// fixed-order inner reduction, so results are bitwise reproducible.
FeatureMap conv2d_same(const FeatureMap& in, const Conv3x3& kernel);

// Conditioning vector is [e(token); left-or-zero; right-or-zero].
FiLMCoeffs film_coeffs(const VectorNmnParams& params, int block,
                       const std::string& token, const ModuleVector* left,
                       const ModuleVector* right);

// Stacked FiLM-ed residual blocks over h_x followed by per-channel max over
// all locations. blocks = -1 runs every block in params.
ModuleVector vector_nmn_forward(const VectorNmnParams& params, const std::string& token,
                                const FeatureMap& h_x, const ModuleVector* left,
                                const ModuleVector* right, int blocks = -1);

FeatureMap tensor_nmn_forward(const TensorNmnParams& params, const std::string& token,
                              const FeatureMap* left, const FeatureMap* right,
                              const FeatureMap& h_x);

// Evaluates the program tree bottom-up, wiring each node's children into its
// module call; every module also receives h_x. Returns the root output.
ModuleVector run_program(const TypedProgram& program, const FeatureMap& h_x,
                         const VectorNmnParams& params);
FeatureMap run_program(const TypedProgram& program, const FeatureMap& h_x,
                       const TensorNmnParams& params);

// Seeded uniform [-0.1, 0.1] parameters covering every catalog token.
VectorNmnParams make_test_vector_params(uint64_t seed, int channels, int embed_dim,
                                        int hidden_dim, int num_blocks,
                                        bool film_bias_inside = false);
TensorNmnParams make_test_tensor_params(uint64_t seed, int channels, TensorVariant variant,
                                        int embed_dim = 4, int hidden_dim = 8,
                                        int num_blocks = 2);

struct GradCheckReport {
  std::string op;
  uint64_t seed_used = 0;
  int coordinates = 0;
  double epsilon = 0.0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Compares analytic gradients of the scalar loss sum(output) against central
// finite differences over every parameter and input coordinate. Op ids:
// "film_affine" (beta path, gamma fixed at 1), "film_coeffs",
// "vector_nmn_forward". Instances are redrawn from the seed until the
// activation pattern (ReLU signs, argmax picks) is stable under +-epsilon
// probes of every coordinate, so the loss is smooth where the differences
// are taken.
GradCheckReport grad_check(const std::string& op_id, uint64_t seed,
                           double epsilon = 1e-3, double tolerance = 1e-4);

// Flat binary container of named double arrays plus a JSON manifest mapping
// name -> shape and offset; config settings ride in the manifest.
void save_vector_params(const VectorNmnParams& params, const std::string& bin_path,
                        const std::string& manifest_path);
VectorNmnParams load_vector_params(const std::string& bin_path,
                                   const std::string& manifest_path);
void save_tensor_params(const TensorNmnParams& params, const std::string& bin_path,
                        const std::string& manifest_path);
TensorNmnParams load_tensor_params(const std::string& bin_path,
                                   const std::string& manifest_path);

}  // namespace svqa
