#include "pixeldoc/model.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>

#include "pixeldoc/errors.hpp"

namespace pixeldoc {

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::ConfigInvalid, "model." + what); };
  check(patch_size > 0, "patch_size: must be positive");
  check(image_hw > 0 && image_hw % patch_size == 0, "image_hw: must be a positive multiple of patch_size");
  check(channels == 1 || channels == 3, "channels: must be 1 or 3");
  check(enc_layers >= 1, "enc_layers: need at least one encoder layer");
  check(dec_layers >= 0, "dec_layers: must be non-negative");
  check(width > 0 && heads > 0 && width % heads == 0, "width: must be divisible by heads");
  check(width % 4 == 0, "width: 2D sin-cos positions need a multiple of 4");
  check(mlp_ratio >= 1, "mlp_ratio: must be at least 1");
  check(dropout >= 0.0 && dropout < 1.0, "dropout: must lie in [0, 1)");
  check(seq_classes >= 0, "seq_classes: must be non-negative");
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t w = cfg.width, m = cfg.mlp_dim(), d = cfg.patch_dim();
  const std::size_t block = 4 * w * w + 2 * w * m + 9 * w + m;
  std::size_t n = d * w + w;                    // patch embedding
  n += cfg.enc_layers * block + 2 * w;          // encoder + norm
  n += w * w + w + w;                           // decoder embedding + mask token
  n += cfg.dec_layers * block + 2 * w;          // decoder + norm
  n += w * d + d;                               // pixel prediction
  if (cfg.seq_classes > 0) n += w * cfg.seq_classes + cfg.seq_classes;
  if (cfg.patch_head) n += w + 1;
  return n;
}

namespace {

template <typename T>
using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;

constexpr double kNormEps = 1e-6;

template <typename T>
Linear<T> xavier(int in, int out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Linear<T> l{Mat<T>(in, out), Mat<T>::Zero(1, out)};
  for (Eigen::Index i = 0; i < l.w.size(); ++i) l.w.data()[i] = static_cast<T>(u(rng));
  return l;
}

template <typename T>
LayerNorm<T> unit_norm(int width) {
  return {Mat<T>::Ones(1, width), Mat<T>::Zero(1, width)};
}

template <typename T>
Block<T> make_block(int width, int mlp, Rng& rng) {
  Block<T> b;
  b.ln1 = unit_norm<T>(width);
  b.qkv = xavier<T>(width, 3 * width, rng);
  b.proj = xavier<T>(width, width, rng);
  b.ln2 = unit_norm<T>(width);
  b.fc1 = xavier<T>(width, mlp, rng);
  b.fc2 = xavier<T>(mlp, width, rng);
  return b;
}

template <typename T>
Mat<T> linear_fwd(const Linear<T>& l, const Mat<T>& x) {
  Mat<T> y = x * l.w;
  y.rowwise() += l.b.row(0);
  return y;
}

template <typename T>
void linear_bwd_params(const Mat<T>& x, const Mat<T>& dy, Linear<T>& g) {
  g.w.noalias() += x.transpose() * dy;
  g.b += dy.colwise().sum();
}

template <typename T>
Mat<T> linear_bwd(const Linear<T>& l, const Mat<T>& x, const Mat<T>& dy, Linear<T>& g) {
  linear_bwd_params(x, dy, g);
  return dy * l.w.transpose();
}

template <typename T>
Mat<T> norm_fwd(const LayerNorm<T>& n, const Mat<T>& x, NormCache<T>& c) {
  const Col<T> mean = x.rowwise().mean();
  Mat<T> centered = x.colwise() - mean;
  const Col<T> var = centered.array().square().rowwise().sum() / static_cast<T>(x.cols());
  c.inv_std = (var.array() + static_cast<T>(kNormEps)).rsqrt();
  c.xhat = centered.array().colwise() * c.inv_std.array();
  Mat<T> y = c.xhat.array().rowwise() * n.gamma.row(0).array();
  y.rowwise() += n.beta.row(0);
  return y;
}

template <typename T>
Mat<T> norm_bwd(const LayerNorm<T>& n, const NormCache<T>& c, const Mat<T>& dy, LayerNorm<T>& g) {
  g.gamma += (dy.array() * c.xhat.array()).matrix().colwise().sum();
  g.beta += dy.colwise().sum();
  const Mat<T> dxhat = dy.array().rowwise() * n.gamma.row(0).array();
  const Col<T> mean_d = dxhat.rowwise().mean();
  const Col<T> mean_dx = (dxhat.array() * c.xhat.array()).matrix().rowwise().mean();
  Mat<T> dx = (dxhat.colwise() - mean_d).array() - c.xhat.array().colwise() * mean_dx.array();
  return dx.array().colwise() * c.inv_std.array();
}

template <typename T>
T gelu(T x) {
  return static_cast<T>(0.5) * x * (1 + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = static_cast<T>(0.5) * (1 + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(static_cast<T>(-0.5) * x * x) / std::sqrt(2 * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

template <typename T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, const DropoutCtx& drop) {
  if (drop.rng == nullptr || drop.p <= 0.0) return {};
  Mat<T> m(rows, cols);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - drop.p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = bernoulli(*drop.rng, drop.p) ? T(0) : keep_scale;
  return m;
}

template <typename T>
Mat<T> attention_fwd(const Block<T>& b, int heads, BlockCache<T>& c) {
  const Eigen::Index n = c.h1.rows(), w = c.h1.cols(), dh = w / heads;
  const T scale = 1 / std::sqrt(static_cast<T>(dh));
  c.qkv = linear_fwd(b.qkv, c.h1);
  c.context.resize(n, w);
  c.probs.resize(heads);
  for (int h = 0; h < heads; ++h) {
    const auto q = c.qkv.middleCols(h * dh, dh);
    const auto k = c.qkv.middleCols(w + h * dh, dh);
    const auto v = c.qkv.middleCols(2 * w + h * dh, dh);
    Mat<T> s = (q * k.transpose()) * scale;
    const Col<T> row_max = s.rowwise().maxCoeff();
    s = (s.colwise() - row_max).array().exp();
    const Col<T> row_sum = s.rowwise().sum();
    s = s.array().colwise() / row_sum.array();
    c.context.middleCols(h * dh, dh).noalias() = s * v;
    c.probs[h] = std::move(s);
  }
  return linear_fwd(b.proj, c.context);
}

template <typename T>
Mat<T> attention_bwd(const Block<T>& b, int heads, const BlockCache<T>& c, const Mat<T>& dout, Block<T>& g) {
  const Eigen::Index n = c.h1.rows(), w = c.h1.cols(), dh = w / heads;
  const T scale = 1 / std::sqrt(static_cast<T>(dh));
  const Mat<T> dcontext = linear_bwd(b.proj, c.context, dout, g.proj);
  Mat<T> dqkv(n, 3 * w);
  for (int h = 0; h < heads; ++h) {
    const auto q = c.qkv.middleCols(h * dh, dh);
    const auto k = c.qkv.middleCols(w + h * dh, dh);
    const auto v = c.qkv.middleCols(2 * w + h * dh, dh);
    const Mat<T>& a = c.probs[h];
    const auto dctx = dcontext.middleCols(h * dh, dh);
    dqkv.middleCols(2 * w + h * dh, dh).noalias() = a.transpose() * dctx;
    const Mat<T> da = dctx * v.transpose();
    const Col<T> rowdot = (da.array() * a.array()).matrix().rowwise().sum();
    const Mat<T> ds = (a.array() * (da.colwise() - rowdot).array()).matrix() * scale;
    dqkv.middleCols(h * dh, dh).noalias() = ds * k;
    dqkv.middleCols(w + h * dh, dh).noalias() = ds.transpose() * q;
  }
  return linear_bwd(b.qkv, c.h1, dqkv, g.qkv);
}

template <typename T>
Mat<T> block_fwd(const Block<T>& b, int heads, const Mat<T>& x, BlockCache<T>& c, const DropoutCtx& drop) {
  c.x_in = x;
  c.h1 = norm_fwd(b.ln1, x, c.n1);
  Mat<T> attn = attention_fwd(b, heads, c);
  c.drop_attn = dropout_mask<T>(attn.rows(), attn.cols(), drop);
  if (c.drop_attn.size() != 0) attn.array() *= c.drop_attn.array();
  Mat<T> mid = x + attn;
  c.h2 = norm_fwd(b.ln2, mid, c.n2);
  c.pre_act = linear_fwd(b.fc1, c.h2);
  c.act = c.pre_act.unaryExpr([](T v) { return gelu(v); });
  Mat<T> mlp = linear_fwd(b.fc2, c.act);
  c.drop_mlp = dropout_mask<T>(mlp.rows(), mlp.cols(), drop);
  if (c.drop_mlp.size() != 0) mlp.array() *= c.drop_mlp.array();
  return mid + mlp;
}

template <typename T>
Mat<T> block_bwd(const Block<T>& b, int heads, const BlockCache<T>& c, const Mat<T>& dout, Block<T>& g) {
  Mat<T> dmlp = dout;
  if (c.drop_mlp.size() != 0) dmlp.array() *= c.drop_mlp.array();
  const Mat<T> dact = linear_bwd(b.fc2, c.act, dmlp, g.fc2);
  const Mat<T> dpre = dact.array() * c.pre_act.unaryExpr([](T v) { return gelu_grad(v); }).array();
  const Mat<T> dh2 = linear_bwd(b.fc1, c.h2, dpre, g.fc1);
  const Mat<T> dmid = dout + norm_bwd(b.ln2, c.n2, dh2, g.ln2);
  Mat<T> dattn = dmid;
  if (c.drop_attn.size() != 0) dattn.array() *= c.drop_attn.array();
  const Mat<T> dh1 = attention_bwd(b, heads, c, dattn, g);
  return dmid + norm_bwd(b.ln1, c.n1, dh1, g.ln1);
}

template <typename T>
void check_patches(const ModelConfig& cfg, const Mat<T>& patches) {
  require(patches.rows() == cfg.tokens() && patches.cols() == cfg.patch_dim(), ErrorKind::ShapeMismatch,
          "patch matrix is " + std::to_string(patches.rows()) + "x" + std::to_string(patches.cols()) +
              ", model expects " + std::to_string(cfg.tokens()) + "x" + std::to_string(cfg.patch_dim()));
}

template <typename T>
const Mat<T>& positions(const ModelConfig& cfg) {
  // one table per thread and config; configs rarely change within a process
  thread_local ModelConfig cached_cfg{};
  thread_local Mat<T> table;
  if (table.size() == 0 || !(cached_cfg == cfg)) {
    table = sincos_positions<T>(cfg.grid_side(), cfg.grid_side(), cfg.width);
    cached_cfg = cfg;
  }
  return table;
}

template <typename T>
Mat<T> gather_rows(const Mat<T>& m, const std::vector<int>& rows) {
  Mat<T> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

template <typename T>
Mat<T> encode(const ModelParams<T>& p, const Mat<T>& patches, std::vector<int> tokens, EncoderTape<T>& tape,
              const DropoutCtx& drop) {
  const ModelConfig& cfg = p.config;
  tape.tokens = std::move(tokens);
  tape.inputs = gather_rows(patches, tape.tokens);
  Mat<T> x = linear_fwd(p.patch_embed, tape.inputs);
  x += gather_rows(positions<T>(cfg), tape.tokens);
  tape.blocks.resize(p.encoder.size());
  for (std::size_t i = 0; i < p.encoder.size(); ++i) x = block_fwd(p.encoder[i], cfg.heads, x, tape.blocks[i], drop);
  tape.out = norm_fwd(p.encoder_norm, x, tape.norm);
  return tape.out;
}

template <typename T>
void encode_bwd(const ModelParams<T>& p, const EncoderTape<T>& tape, const Mat<T>& dout, ModelParams<T>& g) {
  Mat<T> dx = norm_bwd(p.encoder_norm, tape.norm, dout, g.encoder_norm);
  for (std::size_t i = p.encoder.size(); i-- > 0;) dx = block_bwd(p.encoder[i], p.config.heads, tape.blocks[i], dx, g.encoder[i]);
  linear_bwd_params(tape.inputs, dx, g.patch_embed);
}

std::vector<int> all_tokens(int n) {
  std::vector<int> t(n);
  for (int i = 0; i < n; ++i) t[i] = i;
  return t;
}

template <typename T>
Mat<T> pixel_targets(const Mat<T>& patches, bool norm_pix) {
  if (!norm_pix) return patches;
  const Col<T> mean = patches.rowwise().mean();
  Mat<T> centered = patches.colwise() - mean;
  const Col<T> var = centered.array().square().rowwise().sum() / static_cast<T>(patches.cols());
  return centered.array().colwise() * (var.array() + static_cast<T>(kNormEps)).rsqrt();
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed, "model-init");
  ModelParams p;
  p.config = cfg;
  const int w = cfg.width;
  p.patch_embed = xavier<T>(cfg.patch_dim(), w, rng);
  for (int i = 0; i < cfg.enc_layers; ++i) p.encoder.push_back(make_block<T>(w, cfg.mlp_dim(), rng));
  p.encoder_norm = unit_norm<T>(w);
  p.decoder_embed = xavier<T>(w, w, rng);
  p.mask_token.resize(1, w);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (Eigen::Index i = 0; i < w; ++i) p.mask_token(0, i) = static_cast<T>(normal(rng));
  for (int i = 0; i < cfg.dec_layers; ++i) p.decoder.push_back(make_block<T>(w, cfg.mlp_dim(), rng));
  p.decoder_norm = unit_norm<T>(w);
  p.decoder_pred = xavier<T>(w, cfg.patch_dim(), rng);
  p.reset_heads(cfg.seq_classes, cfg.patch_head, seed);
  return p;
}

template <typename T>
void ModelParams<T>::reset_heads(int seq_classes, bool with_patch_head, std::uint64_t seed) {
  config.seq_classes = seq_classes;
  config.patch_head = with_patch_head;
  config.validate();
  Rng rng = make_rng(seed, "head-init");
  seq_head.reset();
  patch_head.reset();
  if (seq_classes > 0) seq_head = xavier<T>(config.width, seq_classes, rng);
  if (with_patch_head) patch_head = xavier<T>(config.width, 1, rng);
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams z = *this;
  z.for_each([](const std::string&, Mat<T>& m) { m.setZero(); });
  return z;
}

template <typename T>
std::size_t ModelParams<T>::size() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Mat<T>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Mat<T>& m) { ok = ok && m.allFinite(); });
  return ok;
}

template <typename T>
Mat<T> sincos_positions(int rows, int cols, int width) {
  require(width % 4 == 0, ErrorKind::ConfigInvalid, "sin-cos positions need width divisible by 4");
  const int quarter = width / 4;
  Mat<T> table(rows * cols, width);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int idx = r * cols + c;
      for (int i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        table(idx, i) = static_cast<T>(std::sin(r * omega));
        table(idx, quarter + i) = static_cast<T>(std::cos(r * omega));
        table(idx, 2 * quarter + i) = static_cast<T>(std::sin(c * omega));
        table(idx, 3 * quarter + i) = static_cast<T>(std::cos(c * omega));
      }
    }
  return table;
}

template <typename T>
Mat<T> patchify(const Image& img, const PatchGrid& grid) {
  require(img.height() == grid.height_px() && img.width() == grid.width_px(), ErrorKind::ShapeMismatch,
          "image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) + " does not match a " +
              std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " patch grid");
  const int ps = grid.patch_size, ch = img.channels();
  Mat<T> out(grid.count(), ps * ps * ch);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const int row = r * grid.cols + c;
      int k = 0;
      for (int y = 0; y < ps; ++y)
        for (int x = 0; x < ps; ++x)
          for (int z = 0; z < ch; ++z) out(row, k++) = static_cast<T>(img.at(r * ps + y, c * ps + x, z));
    }
  return out;
}

template <typename T>
Image unpatchify(const Mat<T>& patches, const PatchGrid& grid, int channels) {
  const int ps = grid.patch_size;
  require(patches.rows() == grid.count() && patches.cols() == ps * ps * channels, ErrorKind::ShapeMismatch,
          "patch matrix does not match grid");
  Image img(grid.height_px(), grid.width_px(), channels);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const int row = r * grid.cols + c;
      int k = 0;
      for (int y = 0; y < ps; ++y)
        for (int x = 0; x < ps; ++x)
          for (int z = 0; z < channels; ++z) img.at(r * ps + y, c * ps + x, z) = static_cast<float>(patches(row, k++));
    }
  return img;
}

template <typename T>
MaeOutput<T> forward_mae(const ModelParams<T>& p, const Mat<T>& patches, const PatchMask& mask, MaeTape<T>* tape,
                         const DropoutCtx& drop) {
  const ModelConfig& cfg = p.config;
  check_patches(cfg, patches);
  require(mask.grid().count() == cfg.tokens(), ErrorKind::ShapeMismatch, "mask grid does not match the model grid");
  MaeTape<T> local;
  MaeTape<T>& t = tape != nullptr ? *tape : local;

  std::vector<int> keep;
  t.masked.clear();
  for (int i = 0; i < cfg.tokens(); ++i) (mask[i] ? t.masked : keep).push_back(i);
  require(!keep.empty(), ErrorKind::AllMasked, "every patch is masked; the encoder has no input");

  const Mat<T> latent = encode(p, patches, std::move(keep), t.encoder, drop);
  const Mat<T> embedded = linear_fwd(p.decoder_embed, latent);
  Mat<T> x(cfg.tokens(), cfg.width);
  for (std::size_t i = 0; i < t.encoder.tokens.size(); ++i) x.row(t.encoder.tokens[i]) = embedded.row(static_cast<Eigen::Index>(i));
  for (int m : t.masked) x.row(m) = p.mask_token.row(0);
  x += positions<T>(cfg);
  t.blocks.resize(p.decoder.size());
  for (std::size_t i = 0; i < p.decoder.size(); ++i) x = block_fwd(p.decoder[i], cfg.heads, x, t.blocks[i], drop);
  t.normed = norm_fwd(p.decoder_norm, x, t.norm);
  t.pred = linear_fwd(p.decoder_pred, t.normed);
  t.target = pixel_targets(patches, cfg.norm_pix);

  MaeOutput<T> out;
  out.reconstruction = t.pred;
  if (t.masked.empty()) {
    spdlog::warn("forward_mae: empty mask, reconstruction loss defined as 0");
    out.loss = 0;
    return out;
  }
  T sum = 0;
  for (int m : t.masked) sum += (t.pred.row(m) - t.target.row(m)).squaredNorm();
  out.loss = sum / static_cast<T>(t.masked.size() * static_cast<std::size_t>(cfg.patch_dim()));
  return out;
}

template <typename T>
void backward_mae(const ModelParams<T>& p, const MaeTape<T>& t, T dloss, ModelParams<T>& g) {
  const ModelConfig& cfg = p.config;
  Mat<T> dpred = Mat<T>::Zero(cfg.tokens(), cfg.patch_dim());
  if (!t.masked.empty()) {
    const T coef = 2 * dloss / static_cast<T>(t.masked.size() * static_cast<std::size_t>(cfg.patch_dim()));
    for (int m : t.masked) dpred.row(m) = coef * (t.pred.row(m) - t.target.row(m));
  }
  const Mat<T> dnormed = linear_bwd(p.decoder_pred, t.normed, dpred, g.decoder_pred);
  Mat<T> dx = norm_bwd(p.decoder_norm, t.norm, dnormed, g.decoder_norm);
  for (std::size_t i = p.decoder.size(); i-- > 0;) dx = block_bwd(p.decoder[i], cfg.heads, t.blocks[i], dx, g.decoder[i]);
  for (int m : t.masked) g.mask_token.row(0) += dx.row(m);
  const Mat<T> dembedded = gather_rows(dx, t.encoder.tokens);
  const Mat<T> dlatent = linear_bwd(p.decoder_embed, t.encoder.out, dembedded, g.decoder_embed);
  encode_bwd(p, t.encoder, dlatent, g);
}

template <typename T>
Mat<T> encode_all(const ModelParams<T>& p, const Mat<T>& patches) {
  check_patches(p.config, patches);
  EncoderTape<T> tape;
  return encode(p, patches, all_tokens(p.config.tokens()), tape, DropoutCtx{});
}

template <typename T>
Mat<T> head_sequence(const ModelParams<T>& p, const Mat<T>& patches, HeadTape<T>* tape, const DropoutCtx& drop) {
  require(p.seq_head.has_value(), ErrorKind::HeadMissing, "model has no sequence head");
  check_patches(p.config, patches);
  HeadTape<T> local;
  HeadTape<T>& t = tape != nullptr ? *tape : local;
  const Mat<T> out = encode(p, patches, all_tokens(p.config.tokens()), t.encoder, drop);
  t.pooled = out.colwise().mean();
  t.logits = linear_fwd(*p.seq_head, t.pooled);
  return t.logits;
}

template <typename T>
T sequence_loss(const Mat<T>& logits, int label, T value, Mat<T>& dlogits) {
  dlogits.resize(1, logits.cols());
  if (logits.cols() == 1) {
    const T diff = logits(0, 0) - value;
    dlogits(0, 0) = 2 * diff;
    return diff * diff;
  }
  require(label >= 0 && label < logits.cols(), ErrorKind::UsageError, "class label out of range");
  const T max = logits.maxCoeff();
  const Mat<T> e = (logits.array() - max).exp();
  const T sum = e.sum();
  dlogits = e / sum;
  dlogits(0, label) -= 1;
  return std::log(sum) + max - logits(0, label);
}

template <typename T>
void backward_sequence(const ModelParams<T>& p, const HeadTape<T>& t, const Mat<T>& dlogits, ModelParams<T>& g) {
  const Mat<T> dpooled = linear_bwd(*p.seq_head, t.pooled, dlogits, *g.seq_head);
  const auto n = static_cast<Eigen::Index>(t.encoder.tokens.size());
  const Mat<T> dout = (dpooled / static_cast<T>(n)).replicate(n, 1);
  encode_bwd(p, t.encoder, dout, g);
}

template <typename T>
Mat<T> head_patch_logits(const ModelParams<T>& p, const Mat<T>& patches, HeadTape<T>* tape, const DropoutCtx& drop) {
  require(p.patch_head.has_value(), ErrorKind::HeadMissing, "model has no patch head");
  check_patches(p.config, patches);
  HeadTape<T> local;
  HeadTape<T>& t = tape != nullptr ? *tape : local;
  const Mat<T> out = encode(p, patches, all_tokens(p.config.tokens()), t.encoder, drop);
  t.logits = linear_fwd(*p.patch_head, out);
  return t.logits;
}

template <typename T>
std::vector<T> head_patch(const ModelParams<T>& p, const Mat<T>& patches) {
  const Mat<T> logits = head_patch_logits(p, patches);
  std::vector<T> probs(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) probs[i] = 1 / (1 + std::exp(-logits(i, 0)));
  return probs;
}

template <typename T>
T patch_loss(const Mat<T>& logits, const PatchMask& labels, Mat<T>& dlogits) {
  require(labels.grid().count() == logits.rows(), ErrorKind::ShapeMismatch, "label mask does not match the patch count");
  const auto n = static_cast<T>(logits.rows());
  dlogits.resize(logits.rows(), 1);
  T loss = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const T z = logits(i, 0);
    const T y = labels[static_cast<int>(i)] ? T(1) : T(0);
    loss += std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z))) - y * z;
    dlogits(i, 0) = (1 / (1 + std::exp(-z)) - y) / n;
  }
  return loss / n;
}

template <typename T>
void backward_patch(const ModelParams<T>& p, const HeadTape<T>& t, const Mat<T>& dlogits, ModelParams<T>& g) {
  const Mat<T> dout = linear_bwd(*p.patch_head, t.encoder.out, dlogits, *g.patch_head);
  encode_bwd(p, t.encoder, dout, g);
}

template <typename T>
T loss_and_grad(const ModelParams<T>& p, const Example<T>& ex, Objective objective, ModelParams<T>& grads, T scale,
                const DropoutCtx& drop) {
  switch (objective) {
    case Objective::Mae: {
      MaeTape<T> tape;
      const T loss = forward_mae(p, ex.patches, ex.mask, &tape, drop).loss;
      backward_mae(p, tape, scale, grads);
      return loss;
    }
    case Objective::SeqHead: {
      HeadTape<T> tape;
      const Mat<T> logits = head_sequence(p, ex.patches, &tape, drop);
      Mat<T> dlogits;
      const T loss = sequence_loss(logits, ex.label, ex.value, dlogits);
      backward_sequence(p, tape, Mat<T>(dlogits * scale), grads);
      return loss;
    }
    case Objective::PatchHead: {
      HeadTape<T> tape;
      const Mat<T> logits = head_patch_logits(p, ex.patches, &tape, drop);
      Mat<T> dlogits;
      const T loss = patch_loss(logits, ex.mask, dlogits);
      backward_patch(p, tape, Mat<T>(dlogits * scale), grads);
      return loss;
    }
  }
  return 0;
}

template <typename T>
T evaluate_loss(const ModelParams<T>& p, const Example<T>& ex, Objective objective) {
  Mat<T> d;
  switch (objective) {
    case Objective::Mae: return forward_mae(p, ex.patches, ex.mask).loss;
    case Objective::SeqHead: return sequence_loss(head_sequence(p, ex.patches), ex.label, ex.value, d);
    case Objective::PatchHead: return patch_loss(head_patch_logits(p, ex.patches), ex.mask, d);
  }
  return 0;
}

template <typename T>
Mat<T> to_pixel_space(const Mat<T>& reconstruction, const Mat<T>& patches, bool norm_pix) {
  require(reconstruction.rows() == patches.rows() && reconstruction.cols() == patches.cols(),
          ErrorKind::ShapeMismatch, "to_pixel_space: reconstruction and patches differ in shape");
  if (!norm_pix) return reconstruction;
  const Col<T> mean = patches.rowwise().mean();
  const Mat<T> centered = patches.colwise() - mean;
  const Col<T> var = centered.array().square().rowwise().sum() / static_cast<T>(patches.cols());
  Mat<T> out = reconstruction.array().colwise() * (var.array() + static_cast<T>(kNormEps)).sqrt();
  return out.colwise() + mean;
}

template <typename T>
double masked_pixel_mse(const Mat<T>& reconstruction, const Mat<T>& patches, const PatchMask& mask, bool norm_pix) {
  require(mask.grid().count() == patches.rows(), ErrorKind::ShapeMismatch, "masked_pixel_mse: mask size");
  const Mat<T> pixels = to_pixel_space(reconstruction, patches, norm_pix);
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < mask.grid().count(); ++i) {
    if (!mask[i]) continue;
    sum += (pixels.row(i) - patches.row(i)).template cast<double>().squaredNorm();
    ++n;
  }
  return n == 0 ? 0.0 : sum / (static_cast<double>(n) * static_cast<double>(patches.cols()));
}

#define PIXELDOC_INSTANTIATE(T)                                                                                    \
  template struct ModelParams<T>;                                                                                 \
  template Mat<T> sincos_positions<T>(int, int, int);                                                             \
  template Mat<T> patchify<T>(const Image&, const PatchGrid&);                                                    \
  template Image unpatchify<T>(const Mat<T>&, const PatchGrid&, int);                                             \
  template MaeOutput<T> forward_mae<T>(const ModelParams<T>&, const Mat<T>&, const PatchMask&, MaeTape<T>*,       \
                                       const DropoutCtx&);                                                        \
  template void backward_mae<T>(const ModelParams<T>&, const MaeTape<T>&, T, ModelParams<T>&);                    \
  template Mat<T> encode_all<T>(const ModelParams<T>&, const Mat<T>&);                                            \
  template Mat<T> head_sequence<T>(const ModelParams<T>&, const Mat<T>&, HeadTape<T>*, const DropoutCtx&);        \
  template T sequence_loss<T>(const Mat<T>&, int, T, Mat<T>&);                                                    \
  template void backward_sequence<T>(const ModelParams<T>&, const HeadTape<T>&, const Mat<T>&, ModelParams<T>&);  \
  template Mat<T> head_patch_logits<T>(const ModelParams<T>&, const Mat<T>&, HeadTape<T>*, const DropoutCtx&);    \
  template std::vector<T> head_patch<T>(const ModelParams<T>&, const Mat<T>&);                                    \
  template T patch_loss<T>(const Mat<T>&, const PatchMask&, Mat<T>&);                                             \
  template void backward_patch<T>(const ModelParams<T>&, const HeadTape<T>&, const Mat<T>&, ModelParams<T>&);     \
  template T loss_and_grad<T>(const ModelParams<T>&, const Example<T>&, Objective, ModelParams<T>&, T,            \
                              const DropoutCtx&);                                                                 \
  template T evaluate_loss<T>(const ModelParams<T>&, const Example<T>&, Objective);                               \
  template Mat<T> to_pixel_space<T>(const Mat<T>&, const Mat<T>&, bool);                                          \
  template double masked_pixel_mse<T>(const Mat<T>&, const Mat<T>&, const PatchMask&, bool);

PIXELDOC_INSTANTIATE(float)
PIXELDOC_INSTANTIATE(double)

#undef PIXELDOC_INSTANTIATE

}  // namespace pixeldoc
