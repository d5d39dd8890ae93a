// Template members of ModelParams that take user callables.
#pragma once

namespace pixeldoc {

namespace detail {

template <typename P, typename F>
void visit_params(P& p, F&& f) {
  auto linear = [&](const std::string& name, auto& l) {
    f(name + ".w", l.w);
    f(name + ".b", l.b);
  };
  auto norm = [&](const std::string& name, auto& n) {
    f(name + ".gamma", n.gamma);
    f(name + ".beta", n.beta);
  };
  auto block = [&](const std::string& name, auto& b) {
    norm(name + ".ln1", b.ln1);
    linear(name + ".attn.qkv", b.qkv);
    linear(name + ".attn.proj", b.proj);
    norm(name + ".ln2", b.ln2);
    linear(name + ".mlp.fc1", b.fc1);
    linear(name + ".mlp.fc2", b.fc2);
  };
  linear("patch_embed", p.patch_embed);
  for (std::size_t i = 0; i < p.encoder.size(); ++i) block("encoder." + std::to_string(i), p.encoder[i]);
  norm("encoder_norm", p.encoder_norm);
  linear("decoder_embed", p.decoder_embed);
  f(std::string("mask_token"), p.mask_token);
  for (std::size_t i = 0; i < p.decoder.size(); ++i) block("decoder." + std::to_string(i), p.decoder[i]);
  norm("decoder_norm", p.decoder_norm);
  linear("decoder_pred", p.decoder_pred);
  if (p.seq_head) linear("seq_head", *p.seq_head);
  if (p.patch_head) linear("patch_head", *p.patch_head);
}

}  // namespace detail

template <typename T>
template <typename F>
void ModelParams<T>::for_each(F&& f) {
  detail::visit_params(*this, std::forward<F>(f));
}

template <typename T>
template <typename F>
void ModelParams<T>::for_each(F&& f) const {
  detail::visit_params(*this, std::forward<F>(f));
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.config = config;
  auto linear = [](const Linear<T>& l) { return Linear<U>{l.w.template cast<U>(), l.b.template cast<U>()}; };
  auto norm = [](const LayerNorm<T>& n) {
    return LayerNorm<U>{n.gamma.template cast<U>(), n.beta.template cast<U>()};
  };
  auto block = [&](const Block<T>& b) {
    return Block<U>{norm(b.ln1), linear(b.qkv), linear(b.proj), norm(b.ln2), linear(b.fc1), linear(b.fc2)};
  };
  out.patch_embed = linear(patch_embed);
  for (const auto& b : encoder) out.encoder.push_back(block(b));
  out.encoder_norm = norm(encoder_norm);
  out.decoder_embed = linear(decoder_embed);
  out.mask_token = mask_token.template cast<U>();
  for (const auto& b : decoder) out.decoder.push_back(block(b));
  out.decoder_norm = norm(decoder_norm);
  out.decoder_pred = linear(decoder_pred);
  if (seq_head) out.seq_head = linear(*seq_head);
  if (patch_head) out.patch_head = linear(*patch_head);
  return out;
}

}  // namespace pixeldoc
