#include "garmentsynth/manipulation.hpp"

#include <cmath>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

nlohmann::json EditStep::to_json() const {
  return {{"t", t}, {"relevant_pixels", relevant_pixels}, {"consistency", consistency}};
}

nlohmann::json EditResult::report() const {
  nlohmann::json steps_j = nlohmann::json::array();
  for (const auto& s : steps) steps_j.push_back(s.to_json());
  return {{"edited_aps", edited_aps},
          {"relevant_pixels", relevant.count()},
          {"keep_pixels", keep.count()},
          {"consistency", consistency_score(original, edited, keep)},
          {"steps", steps_j}};
}

double consistency_score(const Image& i, const Image& i_star, const Mask& keep) {
  if (i.width() != i_star.width() || i.height() != i_star.height()) {
    throw Error(ErrorCode::kShapeMismatch, "images differ in shape");
  }
  Mask m = keep;
  if (m.width() != i.width() && m.width() > 0 && i.width() % m.width() == 0 && m.height() > 0 &&
      i.height() % m.height() == 0 && i.width() / m.width() == i.height() / m.height()) {
    m = m.upsampled(i.width() / m.width());
  }
  if (m.width() != i.width() || m.height() != i.height()) {
    throw Error(ErrorCode::kShapeMismatch, "mask does not match the image shape");
  }
  const auto idx = m.indices();
  if (idx.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t p : idx) {
    for (int c = 0; c < kChannels; ++c) total += std::abs(i.data()[3 * p + c] - i_star.data()[3 * p + c]);
  }
  return total / (static_cast<double>(idx.size()) * kChannels);
}

EditResult manipulate(const EditRequest& req, const World& world, const PrototypeBank& bank,
                      const EditOptions& options, bool record_latents) {
  if (req.original_cfg && !(*req.original_cfg == req.cfg)) {
    throw Error(ErrorCode::kCfgMismatch, "edit config differs from the original run's config");
  }
  const Sampler sampler(world, bank, req.cfg);
  const PromptState old_state = sampler.prepare(req.old_prompt);
  const PromptState new_state = sampler.prepare(req.new_prompt);
  const std::set<std::size_t> gamma = diff_aps(old_state.tree, new_state.tree);

  EditResult result;
  result.edited_aps.assign(gamma.begin(), gamma.end());

  // Tokens of edited phrases keep the new trajectory's own maps; the rest
  // take the old trajectory's map for the same phrase position.
  Injection injection;
  injection.source.resize(new_state.attention.token_count());
  std::vector<std::size_t> gamma_old_tokens, gamma_new_tokens;
  for (std::size_t a = 0; a < new_state.tree.aps.size(); ++a) {
    const auto new_tokens = new_state.attention.phrase_tokens(a);
    const auto old_tokens = old_state.attention.phrase_tokens(a);
    if (gamma.contains(a)) {
      gamma_new_tokens.insert(gamma_new_tokens.end(), new_tokens.begin(), new_tokens.end());
      gamma_old_tokens.insert(gamma_old_tokens.end(), old_tokens.begin(), old_tokens.end());
      continue;
    }
    for (std::size_t i = 0; i < new_tokens.size(); ++i) injection.source[new_tokens[i]] = old_tokens.at(i);
  }

  Latent z = sampler.initial_noise(req.seed);
  Latent z_star = z;
  const auto& cfg = sampler.config();
  for (int t = cfg.steps; t >= 1; --t) {
    // Edit-region masks from this step's maps.
    std::vector<Mask> masks_old, masks_new;
    if (!gamma.empty()) {
      const auto maps_old = old_state.attention.maps(z);
      const auto maps_new = new_state.attention.maps(z_star);
      for (std::size_t k : gamma_old_tokens) masks_old.push_back(binarize(maps_old[k], cfg.percentile));
      for (std::size_t k : gamma_new_tokens) masks_new.push_back(binarize(maps_new[k], cfg.percentile));
    }
    BlendedMask b;
    if (gamma.empty()) {
      b.relevant = Mask(kLatentSize, kLatentSize, false);
      b.keep = Mask(kLatentSize, kLatentSize, true);
    } else {
      b = blended_mask(masks_old, masks_new);
    }
    if (options.keep_override == EditOptions::KeepOverride::kAllTrue) {
      b.keep = Mask(kLatentSize, kLatentSize, true);
      b.relevant = ~b.keep;
    } else if (options.keep_override == EditOptions::KeepOverride::kAllFalse) {
      b.keep = Mask(kLatentSize, kLatentSize, false);
      b.relevant = ~b.keep;
    }

    StepOutcome old_out = sampler.step(z, t, old_state);

    Latent blended = z_star;
    if (options.blend) {
      for (std::size_t p = 0; p < kLatentPixels; ++p) {
        if (!b.keep[p]) continue;
        for (int c = 0; c < kChannels; ++c) blended.values[3 * p + c] = z.values[3 * p + c];
      }
    }
    if (record_latents) {
      result.blended_inputs.push_back(blended);
      result.old_latents.push_back(z);
    }
    injection.donor = &old_out.bundle_maps;
    StepOutcome new_out = sampler.step(blended, t, new_state, options.inject ? &injection : nullptr);

    z = std::move(old_out.next);
    z_star = std::move(new_out.next);
    EditStep rec;
    rec.t = t;
    rec.relevant_pixels = b.relevant.count();
    rec.consistency = consistency_score(decode(z).clamped(), decode(z_star).clamped(), b.keep);
    result.steps.push_back(rec);
    result.relevant = b.relevant;
    result.keep = b.keep;
  }
  result.original = decode(z).clamped();
  result.edited = decode(z_star).clamped();
  return result;
}

}  // namespace garmentsynth
