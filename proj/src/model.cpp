// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/model.hpp"

#include "farnet/errors.hpp"
#include "farnet/ops.hpp"

namespace farnet {

QuerySource parse_query_source(std::string_view text) {
  if (text == "u") return QuerySource::U;
  if (text == "mlp_fu") return QuerySource::MlpFu;
  if (text == "mean_u_uprime") return QuerySource::MeanUUprime;
  throw ConfigError("invalid query_source '" + std::string(text) + "' (expected u, mlp_fu or mean_u_uprime)");
}

std::string_view to_string(QuerySource source) {
  switch (source) {
    case QuerySource::U:
      return "u";
    case QuerySource::MlpFu:
      return "mlp_fu";
    default:
      return "mean_u_uprime";
  }
}

QuerySource effective_query_source(QuerySource requested, const LossSwitches& use) {
  auto trained = [&](QuerySource s) {
    switch (s) {
      case QuerySource::U:
        return use.res;
      case QuerySource::MlpFu:
        return use.late;
      default:
        return use.res || use.pi;
    }
  };
  if (trained(requested)) return requested;
  for (auto s : {QuerySource::U, QuerySource::MeanUUprime, QuerySource::MlpFu}) {
    if (trained(s)) return s;
  }
  return requested;
}

FarNetModel::FarNetModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  const std::size_t d = config.embed_dim;
  const Rng root(seed);
  Rng image_rng = root.substream(1), target_rng = root.substream(2), text_rng = root.substream(3),
      cross_rng = root.substream(4), head_rng = root.substream(5);
  const ImageEncoderConfig image_cfg{config.image_size, config.patch_size, d, config.layers, config.heads,
                                     config.mlp_ratio};
  image_encoder = ImageEncoder(image_cfg, image_rng);
  if (!config.share_image_encoders) separate_target_encoder = ImageEncoder(image_cfg, target_rng);
  text_encoder = TextEncoder({config.vocab_size, config.max_text_length, d, config.layers, config.heads,
                              config.mlp_ratio},
                             text_rng);
  cross_attention = CrossAttentionBlock(d, config.mlp_ratio, cross_rng);
  fusion_mlp = Mlp::create(d, 2 * d, d, head_rng);
  query_head = Linear::identity(d);
}

NamedParameters FarNetModel::parameters() const {
  NamedParameters out;
  image_encoder.collect("image_encoder", out);
  if (!config_.share_image_encoders) separate_target_encoder.collect("target_encoder", out);
  text_encoder.collect("text_encoder", out);
  cross_attention.collect("cross_attention", out);
  fusion_mlp.collect("fusion_mlp", out);
  query_head.collect("query_head", out);
  return out;
}

std::vector<Tensor> FarNetModel::parameter_tensors() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : parameters()) out.push_back(t);
  return out;
}

void FarNetModel::zero_grad() const {
  for (auto& [name, t] : parameters()) {
    Tensor handle = t;
    handle.zero_grad();
  }
}

Tensor FarNetModel::encode_query_u(const Tensor& attended) const {
  return l2_normalize_rows(query_head(reshape(mean_rows(attended), {1, config_.embed_dim})));
}

BatchLosses FarNetModel::forward(std::span<const Example> batch, const LossSettings& settings, Rng* noise_rng,
                                 const arm::Perturbation* fixed_noise, arm::RunningStats* running) const {
  if (batch.size() < 2) throw DimensionError("forward needs a batch of at least 2 triplets");
  const auto& use = settings.use;
  const bool need_cross = use.attention || use.res || use.pi;

  std::vector<Tensor> fused, targets, queries, prompts;
  BatchLosses out;
  for (const auto& ex : batch) {
    const EncoderOutput ref = image_encoder.encode(*ex.reference);
    const EncoderOutput txt = text_encoder.encode(*ex.tokens);
    const EncoderOutput tgt = target_encoder().encode(*ex.target);
    targets.push_back(tgt.pooled);
    if (use.late) fused.push_back(esam::fuse(ref.pooled, txt.pooled, settings.lambda1));
    if (!need_cross) continue;
    const CrossAttentionOutput ca = cross_attention(ref.tokens, txt.tokens);
    if (use.attention) {
      if (ref.tokens.rows() != tgt.tokens.rows()) {
        throw DimensionError("reference and target images yield different region counts");
      }
      out.attention_pairs.push_back({ca.map, cross_attention.attention_map(tgt.tokens, txt.tokens)});
    }
    if (use.res) queries.push_back(encode_query_u(ca.attended));
    if (use.pi) prompts.push_back(arm::prompt_embed(ca.attended, *ex.tokens, text_encoder));
  }

  out.targets = stack(targets);
  if (use.late) {
    out.projected = fusion_mlp(stack(fused));
    out.late = esam::loss_late(out.projected, out.targets, settings.tau);
  }
  if (use.attention) out.attention = esam::loss_attention(out.attention_pairs, settings.tau, settings.attention_negatives);
  if (use.res) {
    out.queries = stack(queries);
    out.stats = arm::estimate_target_stats(out.targets);
    if (running != nullptr) out.stats = running->update(out.stats);
    if (fixed_noise != nullptr) {
      out.noise = *fixed_noise;
    } else {
      if (noise_rng == nullptr) throw ConfigError("forward: resilience loss needs a noise generator");
      out.noise = arm::sample_perturbation(out.targets.shape(), out.stats, *noise_rng);
    }
    const Tensor perturbed = arm::apply_perturbation(out.targets, out.noise);
    out.res = arm::loss_res(out.queries, out.targets, perturbed, settings.tau, settings.lambda2,
                            settings.retrieval_negatives);
  }
  if (use.pi) {
    out.prompts = stack(prompts);
    out.pi = arm::loss_pi(out.prompts, out.targets, settings.tau, settings.retrieval_negatives);
  }
  out.esam = esam::loss_esam(out.late, out.attention);
  out.arm = arm::loss_arm(out.res, out.pi);
  out.total = arm::loss_total(out.esam, out.arm);
  return out;
}

Tensor FarNetModel::query_embedding(const Example& example, QuerySource source, double lambda1) const {
  NoGradScope no_grad;
  const EncoderOutput ref = image_encoder.encode(*example.reference);
  const EncoderOutput txt = text_encoder.encode(*example.tokens);
  if (source == QuerySource::MlpFu) {
    Tensor fused = reshape(esam::fuse(ref.pooled, txt.pooled, lambda1), {1, config_.embed_dim});
    return reshape(l2_normalize_rows(fusion_mlp(fused)), {config_.embed_dim});
  }
  const CrossAttentionOutput ca = cross_attention(ref.tokens, txt.tokens);
  Tensor u = reshape(encode_query_u(ca.attended), {config_.embed_dim});
  if (source == QuerySource::U) return u;
  Tensor u_prime = arm::prompt_embed(ca.attended, *example.tokens, text_encoder);
  return l2_normalize(add(u, u_prime));
}

Tensor FarNetModel::gallery_embedding(const Image& image) const {
  NoGradScope no_grad;
  return target_encoder().encode(image).pooled;
}

Tensor FarNetModel::reference_attention(const Example& example) const {
  NoGradScope no_grad;
  const EncoderOutput ref = image_encoder.encode(*example.reference);
  const EncoderOutput txt = text_encoder.encode(*example.tokens);
  return cross_attention.attention_map(ref.tokens, txt.tokens);
}

}  // namespace farnet
