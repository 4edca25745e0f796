#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "forge/adapters.hpp"
#include "forge/corpus.hpp"
#include "forge/errors.hpp"
#include "forge/image.hpp"

namespace forge::visual {

struct PerturbationBudget {
  double epsilon = 32.0 / 255.0;  // linf radius in pixel units
  int steps = 5000;
  double step_size = 0.0;  // 0 means auto (epsilon / 8)
  std::uint64_t seed = 0;

  void validate() const;
  double effective_step() const { return step_size > 0.0 ? step_size : epsilon / 8.0; }
};

struct TracePoint {
  int step = 0;
  double objective = 0.0;  // corpus log-likelihood after this step
};

struct AdversarialImage {
  ImageBuffer pixels;
  ImageBuffer clean;  // empty when loaded from disk without the source
  std::string clean_hash;
  PerturbationBudget budget;
  std::vector<TracePoint> objective_trace;
  double final_objective = 0.0;

  // Checks the [0,1] range always, and the linf ball whenever the clean
  // image is present. Throws RangeError on violation.
  void verify_constraints() const;
};

// Thrown when a gradient step fails mid-run; carries the last valid iterate
// so long optimizations are not lost entirely.
class PgdAbortError : public OptimizationError {
 public:
  PgdAbortError(const std::string& what, AdversarialImage last_valid)
      : OptimizationError(what), last_valid_(std::move(last_valid)) {}
  const AdversarialImage& last_valid() const { return last_valid_; }

 private:
  AdversarialImage last_valid_;
};

// Element-wise clamp of candidate to [clean-eps, clean+eps] intersected
// with [0,1]. Idempotent on in-ball inputs.
ImageBuffer project_linf(const ImageBuffer& candidate,
                               const ImageBuffer& clean, double epsilon);

// Sign-gradient PGD ascent on corpus log-likelihood, starting from the clean
// image. Returns the best iterate seen. The trace holds budget.steps+1 full
// corpus objectives. Corpora larger than kFullBatchLimit are subsampled to
// kGradBatch sentences per gradient step (seeded, reproducible).
inline constexpr std::size_t kFullBatchLimit = 32;
inline constexpr std::size_t kGradBatch = 8;

AdversarialImage pgd_ascent(const adapters::WhiteBoxVlm& model,
                            const ImageBuffer& clean, const Corpus& corpus,
                            const PerturbationBudget& budget);

// Rounds pixels to the 1/255 grid and re-verifies the linf constraint against
// the quantized clean image. Throws QuantizationError when rounding pushes a
// pixel out of the ball (possible only when epsilon is off the grid).
AdversarialImage quantize_and_verify(const AdversarialImage& adv);

// PNG plus a JSON sidecar (same basename, .json extension) recording
// clean_hash, epsilon, steps, step_size, seed and final_objective.
void save_adversarial(const AdversarialImage& adv, const std::filesystem::path& png_path);
AdversarialImage load_adversarial(const std::filesystem::path& png_path);

}  // namespace forge::visual
