#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "garmentsynth/diffusion.hpp"

namespace garmentsynth {

struct EditRequest {
  std::string old_prompt;
  std::string new_prompt;
  std::uint64_t seed = 0;
  Config cfg;
  std::optional<Config> original_cfg;  // config of the run being edited, when known
};

struct EditOptions {
  bool blend = true;     // region-consistent latent blending
  bool inject = true;    // attention injection outside the edited phrases
  enum class KeepOverride { kNone, kAllTrue, kAllFalse };
  KeepOverride keep_override = KeepOverride::kNone;
};

struct EditStep {
  int t = 0;
  std::size_t relevant_pixels = 0;  // latent pixels in B_relevant
  double consistency = 0.0;         // consistency_score of the decoded step outputs over B_keep

  nlohmann::json to_json() const;
};

struct EditResult {
  Image original;
  Image edited;
  Mask relevant;  // last step's masks, latent resolution
  Mask keep;
  std::vector<std::size_t> edited_aps;
  std::vector<EditStep> steps;
  // Latent fed to the new trajectory's denoise step, per step (only with record_blended).
  std::vector<Latent> blended_inputs;
  std::vector<Latent> old_latents;

  nlohmann::json report() const;
};

// Throws StructureMismatch, CfgMismatch and anything parsing or sampling throws.
EditResult manipulate(const EditRequest& req, const World& world, const PrototypeBank& bank,
                      const EditOptions& options = {}, bool record_latents = false);

// Mean absolute per-channel difference over pixels where keep is set. The mask
// may be given at latent or canvas resolution. Empty mask scores 0.
// Throws ShapeMismatch.
double consistency_score(const Image& i, const Image& i_star, const Mask& keep);

}  // namespace garmentsynth
