#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pixeldoc/masking.hpp"
#include "pixeldoc/rng.hpp"
#include "pixeldoc/scan.hpp"

namespace pixeldoc {

struct ModelConfig {
  int patch_size = 16;
  int image_hw = 64;
  int channels = 1;
  int enc_layers = 2;
  int dec_layers = 1;
  int width = 64;
  int heads = 4;
  int mlp_ratio = 4;
  /// Normalize each target patch to zero mean and unit variance.
  bool norm_pix = true;
  double dropout = 0.0;
  /// 0: no sequence head, 1: regression, >= 2: classes.
  int seq_classes = 0;
  bool patch_head = false;

  void validate() const;
  int grid_side() const { return image_hw / patch_size; }
  int tokens() const { return grid_side() * grid_side(); }
  int patch_dim() const { return patch_size * patch_size * channels; }
  int mlp_dim() const { return width * mlp_ratio; }
  PatchGrid grid() const { return {grid_side(), grid_side(), patch_size}; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Number of trainable scalars implied by a config.
std::size_t parameter_count(const ModelConfig& cfg);

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Linear {
  Mat<T> w;  // in x out
  Mat<T> b;  // 1 x out
};

template <typename T>
struct LayerNorm {
  Mat<T> gamma;
  Mat<T> beta;
};

template <typename T>
struct Block {
  LayerNorm<T> ln1;
  Linear<T> qkv;
  Linear<T> proj;
  LayerNorm<T> ln2;
  Linear<T> fc1;
  Linear<T> fc2;
};

/// Weights of the encoder, decoder and optional task heads.  Positional
/// tables are fixed 2D sin-cos and are not stored.
template <typename T>
struct ModelParams {
  ModelConfig config;
  Linear<T> patch_embed;
  std::vector<Block<T>> encoder;
  LayerNorm<T> encoder_norm;
  Linear<T> decoder_embed;
  Mat<T> mask_token;
  std::vector<Block<T>> decoder;
  LayerNorm<T> decoder_norm;
  Linear<T> decoder_pred;
  std::optional<Linear<T>> seq_head;
  std::optional<Linear<T>> patch_head;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
  /// Same shapes, all zeros.
  ModelParams zeros_like() const;
  template <typename U>
  ModelParams<U> cast() const;

  /// Visits every tensor with a stable dotted name, in a fixed order.
  template <typename F>
  void for_each(F&& f);
  template <typename F>
  void for_each(F&& f) const;

  std::size_t size() const;
  bool all_finite() const;

  /// Replaces (or adds) the heads implied by a new config, keeping the trunk.
  void reset_heads(int seq_classes, bool patch_head, std::uint64_t seed);
};

/// Fixed 2D sin-cos table, one row per patch in row-major order.
template <typename T>
Mat<T> sincos_positions(int rows, int cols, int width);

/// P x (patch_size^2 * C) matrix, row-major patch order, channel-interleaved pixels.
template <typename T>
Mat<T> patchify(const Image& img, const PatchGrid& grid);
template <typename T>
Image unpatchify(const Mat<T>& patches, const PatchGrid& grid, int channels);

// ---------------------------------------------------------------------------
// Forward / backward

/// Dropout on residual branches; inactive unless `rng` is set and p > 0.
struct DropoutCtx {
  Rng* rng = nullptr;
  double p = 0.0;
};

template <typename T>
struct NormCache {
  Mat<T> xhat;
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std;
};

template <typename T>
struct BlockCache {
  Mat<T> x_in;
  NormCache<T> n1;
  Mat<T> h1;
  Mat<T> qkv;
  std::vector<Mat<T>> probs;
  Mat<T> context;
  Mat<T> drop_attn;
  NormCache<T> n2;
  Mat<T> h2;
  Mat<T> pre_act;
  Mat<T> act;
  Mat<T> drop_mlp;
};

template <typename T>
struct EncoderTape {
  std::vector<int> tokens;
  Mat<T> inputs;
  std::vector<BlockCache<T>> blocks;
  NormCache<T> norm;
  Mat<T> out;
};

template <typename T>
struct MaeTape {
  EncoderTape<T> encoder;
  std::vector<int> masked;
  std::vector<BlockCache<T>> blocks;
  NormCache<T> norm;
  Mat<T> normed;
  Mat<T> pred;
  Mat<T> target;
};

template <typename T>
struct HeadTape {
  EncoderTape<T> encoder;
  Mat<T> pooled;
  Mat<T> logits;
};

template <typename T>
struct MaeOutput {
  Mat<T> reconstruction;  // P x patch_dim, in target space
  T loss = 0;
};

/// Encoder sees only unmasked patches; the decoder predicts every patch and
/// the loss is the mean squared error over masked patches only.
template <typename T>
MaeOutput<T> forward_mae(const ModelParams<T>& params, const Mat<T>& patches, const PatchMask& mask,
                         MaeTape<T>* tape = nullptr, const DropoutCtx& drop = {});
template <typename T>
void backward_mae(const ModelParams<T>& params, const MaeTape<T>& tape, T dloss, ModelParams<T>& grads);

/// Mean-pooled final-layer embeddings mapped to seq_classes logits.
template <typename T>
Mat<T> head_sequence(const ModelParams<T>& params, const Mat<T>& patches, HeadTape<T>* tape = nullptr,
                     const DropoutCtx& drop = {});
/// Cross-entropy for classification, squared error for regression; returns loss and d loss / d logits.
template <typename T>
T sequence_loss(const Mat<T>& logits, int label, T value, Mat<T>& dlogits);
template <typename T>
void backward_sequence(const ModelParams<T>& params, const HeadTape<T>& tape, const Mat<T>& dlogits,
                       ModelParams<T>& grads);

/// Per-patch logits (P x 1).
template <typename T>
Mat<T> head_patch_logits(const ModelParams<T>& params, const Mat<T>& patches, HeadTape<T>* tape = nullptr,
                         const DropoutCtx& drop = {});
/// Per-patch probabilities, PatchMask shaped.
template <typename T>
std::vector<T> head_patch(const ModelParams<T>& params, const Mat<T>& patches);
/// Mean binary cross-entropy over all patches; fills d loss / d logits.
template <typename T>
T patch_loss(const Mat<T>& logits, const PatchMask& labels, Mat<T>& dlogits);
template <typename T>
void backward_patch(const ModelParams<T>& params, const HeadTape<T>& tape, const Mat<T>& dlogits,
                    ModelParams<T>& grads);

/// Maps a reconstruction from target space back to pixels using each
/// original patch's mean and variance (identity without norm_pix).
template <typename T>
Mat<T> to_pixel_space(const Mat<T>& reconstruction, const Mat<T>& patches, bool norm_pix);
/// Mean squared pixel error over the masked patches; 0 for an empty mask.
template <typename T>
double masked_pixel_mse(const Mat<T>& reconstruction, const Mat<T>& patches, const PatchMask& mask, bool norm_pix);

/// Final-layer (post norm) encoder output for every patch, no masking.
template <typename T>
Mat<T> encode_all(const ModelParams<T>& params, const Mat<T>& patches);

enum class Objective { Mae, SeqHead, PatchHead };

template <typename T>
struct Example {
  Mat<T> patches;
  /// Occlusion mask for Mae, label mask for PatchHead.
  PatchMask mask;
  int label = 0;
  T value = 0;
};

/// Loss of one example; accumulates `scale` * d loss / d params into grads.
template <typename T>
T loss_and_grad(const ModelParams<T>& params, const Example<T>& ex, Objective objective, ModelParams<T>& grads,
                T scale = 1, const DropoutCtx& drop = {});
/// Loss only.
template <typename T>
T evaluate_loss(const ModelParams<T>& params, const Example<T>& ex, Objective objective);

}  // namespace pixeldoc

#include "pixeldoc/model_params.inl"
