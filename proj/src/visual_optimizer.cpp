#include "forge/visual_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "forge/png_io.hpp"
#include "forge/rng.hpp"

namespace forge::visual {

namespace {

bool finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void PerturbationBudget::validate() const {
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw ConfigError("budget.epsilon", "must be in (0, 1]");
  }
  if (steps < 0) throw ConfigError("budget.steps", "must be >= 0");
  if (step_size < 0.0) throw ConfigError("budget.step_size", "must be >= 0 (0 = auto)");
}

void AdversarialImage::verify_constraints() const {
  pixels.validate();
  if (clean.pixels.empty()) return;
  require_same_shape(pixels, clean, "verify_constraints");
  const double dist = linf_distance(pixels, clean);
  if (dist > budget.epsilon + 1e-12) {
    throw RangeError("adversarial image violates linf budget: " + std::to_string(dist) +
                     " > " + std::to_string(budget.epsilon));
  }
}

ImageBuffer project_linf(const ImageBuffer& candidate,
                               const ImageBuffer& clean, double epsilon) {
  require_same_shape(candidate, clean, "project_linf");
  if (!(epsilon > 0.0)) throw RangeError("project_linf: epsilon must be > 0");

  ImageBuffer out = candidate;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double lo = std::max(clean.pixels[i] - epsilon, 0.0);
    const double hi = std::min(clean.pixels[i] + epsilon, 1.0);
    out.pixels[i] = std::clamp(out.pixels[i], lo, hi);
  }
  return out;
}

AdversarialImage pgd_ascent(const adapters::WhiteBoxVlm& model,
                            const ImageBuffer& clean, const Corpus& corpus,
                            const PerturbationBudget& budget) {
  budget.validate();
  clean.validate();
  if (corpus.sentences.empty()) throw ConfigError("corpus", "must not be empty");

  const double alpha = budget.effective_step();

  AdversarialImage result;
  result.clean = clean;
  result.clean_hash = content_hash(clean);
  result.budget = budget;

  ImageBuffer x = clean;  // zero perturbation init
  double obj = adapters::corpus_log_likelihood(model, x, corpus);
  if (!std::isfinite(obj)) throw OptimizationError("initial objective is not finite");
  result.objective_trace.push_back({0, obj});

  ImageBuffer best = x;
  double best_obj = obj;

  Rng batch_rng(derive_seed(budget.seed, 0x70676462, 0));  // "pgdb"

  for (int step = 1; step <= budget.steps; ++step) {
    Corpus batch;
    if (corpus.sentences.size() > kFullBatchLimit) {
      for (std::size_t k = 0; k < kGradBatch; ++k) {
        batch.sentences.push_back(corpus.sentences[batch_rng.below(corpus.sentences.size())]);
      }
    } else {
      batch.sentences = corpus.sentences;
    }

    try {
      ImageBuffer grad = adapters::corpus_grad(model, x, batch);
      if (!finite(grad.pixels)) throw OptimizationError("non-finite gradient");
      for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        const double g = grad.pixels[i];
        x.pixels[i] += alpha * (g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0));
      }
      x = project_linf(x, clean, budget.epsilon);
      obj = adapters::corpus_log_likelihood(model, x, corpus);
      if (!std::isfinite(obj)) throw OptimizationError("non-finite objective");
    } catch (const Error& e) {
      AdversarialImage partial = result;
      partial.pixels = best;
      partial.final_objective = best_obj;
      throw PgdAbortError("pgd step " + std::to_string(step) + " failed: " + e.what(),
                          std::move(partial));
    }

    result.objective_trace.push_back({step, obj});
    if (obj > best_obj) {
      best_obj = obj;
      best = x;
    }
  }

  result.pixels = std::move(best);
  result.final_objective = best_obj;
  result.verify_constraints();
  return result;
}

AdversarialImage quantize_and_verify(const AdversarialImage& adv) {
  adv.pixels.validate();

  AdversarialImage out = adv;
  out.pixels = quantize8(adv.pixels);

  if (!adv.clean.pixels.empty()) {
    require_same_shape(adv.pixels, adv.clean, "quantize_and_verify");
    const ImageBuffer qclean = quantize8(adv.clean);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
      const long qi = std::lround(out.pixels.pixels[i] * 255.0);
      const long ci = std::lround(qclean.pixels[i] * 255.0);
      const double diff = static_cast<double>(std::labs(qi - ci));
      if (diff > adv.budget.epsilon * 255.0 + 1e-6) {
        throw QuantizationError("pixel " + std::to_string(i) +
                                " exits the linf ball after 8-bit rounding (diff " +
                                std::to_string(qi - ci) + "/255, epsilon " +
                                std::to_string(adv.budget.epsilon) + ")");
      }
    }
  }
  return out;
}

namespace {

std::filesystem::path sidecar_path(std::filesystem::path png_path) {
  png_path.replace_extension(".json");
  return png_path;
}

}  // namespace

void save_adversarial(const AdversarialImage& adv, const std::filesystem::path& png_path) {
  write_png(png_path, adv.pixels);

  nlohmann::ordered_json side{
      {"clean_hash", adv.clean_hash},
      {"epsilon", adv.budget.epsilon},
      {"steps", adv.budget.steps},
      {"step_size", adv.budget.effective_step()},
      {"seed", adv.budget.seed},
      {"final_objective", adv.final_objective},
  };
  std::ofstream out(sidecar_path(png_path));
  if (!out) throw IoError("cannot write sidecar for " + png_path.string());
  out << side.dump(2) << '\n';
}

AdversarialImage load_adversarial(const std::filesystem::path& png_path) {
  AdversarialImage adv;
  adv.pixels = read_png(png_path);

  std::ifstream in(sidecar_path(png_path));
  if (!in) throw IoError("cannot read sidecar for " + png_path.string());
  nlohmann::json side;
  try {
    in >> side;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar for " + png_path.string() + ": " + e.what());
  }
  try {
    adv.clean_hash = side.at("clean_hash").get<std::string>();
    adv.budget.epsilon = side.at("epsilon").get<double>();
    adv.budget.steps = side.at("steps").get<int>();
    adv.budget.step_size = side.at("step_size").get<double>();
    adv.budget.seed = side.at("seed").get<std::uint64_t>();
    adv.final_objective = side.at("final_objective").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("sidecar missing fields for " + png_path.string() + ": " + e.what());
  }
  return adv;
}

}  // namespace forge::visual
