#include "forge/rft.hpp"

#include <algorithm>
#include <cmath>

#include "forge/errors.hpp"
#include "forge/rng.hpp"

namespace forge::suffix {

namespace {

struct Trajectory {
  std::vector<int> prompt_tokens;
  std::vector<int> prevs;    // token fed at each position (<bos> first)
  std::vector<int> actions;  // sampled tokens
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  std::vector<double> returns;  // reward-to-go including KL penalty
  std::string suffix_text;
  std::string response;
};

// Exact KL(pi(.|s) || pi_ref(.|s)) for one state; both arguments are full
// log-prob vectors over the vocabulary.
double state_kl(const std::vector<double>& p_lp, const std::vector<double>& q_lp) {
  double kl = 0.0;
  for (std::size_t v = 0; v < p_lp.size(); ++v) {
    const double p = std::exp(p_lp[v]);
    if (p > 0.0) kl += p * (p_lp[v] - q_lp[v]);
  }
  return kl;
}

struct Adam {
  std::vector<double> m, v;
  int t = 0;
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  Adam(std::size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}

  // gradient ascent step
  void ascend(std::vector<double>& params, const std::vector<double>& grad) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      params[i] += lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

bool all_finite(const std::vector<double>& xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void RftConfig::validate() const {
  if (!std::isfinite(beta) || beta < 0.0) throw ConfigError("rft.beta", "must be finite and >= 0");
  if (batch_size < 1) throw ConfigError("rft.batch_size", "must be >= 1");
  if (max_epochs < 0) throw ConfigError("rft.max_epochs", "must be >= 0");
  if (!(stop_threshold > 0.0) || stop_threshold > 1.0) {
    throw ConfigError("rft.stop_threshold", "must be in (0, 1]");
  }
  if (!(clip_range > 0.0)) throw ConfigError("rft.clip_range", "must be > 0");
  if (updates_per_batch < 1) throw ConfigError("rft.updates_per_batch", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("rft.learning_rate", "must be > 0");
  if (judge_failure_tolerance < 0.0 || judge_failure_tolerance > 1.0) {
    throw ConfigError("rft.judge_failure_tolerance", "must be in [0, 1]");
  }
}

nlohmann::ordered_json RftConfig::to_json() const {
  return nlohmann::ordered_json{
      {"beta", beta},
      {"batch_size", batch_size},
      {"max_epochs", max_epochs},
      {"stop_threshold", stop_threshold},
      {"seed", seed},
      {"clip_range", clip_range},
      {"updates_per_batch", updates_per_batch},
      {"learning_rate", learning_rate},
      {"judge_failure_tolerance", judge_failure_tolerance},
      {"include_image", include_image},
  };
}

TrainingTrace rft_train(SuffixPolicy& sp,
                        const std::vector<rewrite::RewrittenPrompt>& prompts,
                        adapters::ChatModel& target, judge::JudgeClient& reward_judge,
                        const RftConfig& config, const ImageBuffer* image,
                        const std::filesystem::path* checkpoint_dir) {
  config.validate();
  if (prompts.empty()) throw ConfigError("rft.prompts", "must not be empty");

  const std::string parent_id = sp.checkpoint_id.empty() ? sp.compute_checkpoint_id()
                                                         : sp.checkpoint_id;
  const std::string ref_hash_before = sp.reference.params_hash();

  TrainingTrace trace;
  if (config.max_epochs == 0) {
    if (checkpoint_dir) sp.save(*checkpoint_dir, config.to_json(), parent_id);
    return trace;
  }

  const ImageBuffer neutral = ImageBuffer::filled(1, 1, 1, 0.5);
  const ImageBuffer& roll_image =
      (config.include_image && image != nullptr) ? *image : neutral;

  const int T = sp.suffix_length;
  judge::VerdictCache cache;
  Adam adam(sp.policy.params().size(), config.learning_rate);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng pick_rng(derive_seed(config.seed, 0x706b, static_cast<std::uint64_t>(epoch)));

    std::vector<Trajectory> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    double kl_sum = 0.0;
    std::size_t kl_states = 0;

    for (int b = 0; b < config.batch_size; ++b) {
      const auto& prompt = prompts[pick_rng.below(prompts.size())];

      adapters::DecodeParams roll;
      roll.greedy = false;
      roll.temperature = 1.0;
      roll.seed = derive_seed(config.seed, static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(b));
      GeneratedSuffix gen = generate_suffix(sp, prompt.rewritten, roll);

      Trajectory traj;
      traj.prompt_tokens = sp.policy.vocab().encode(prompt.rewritten, /*strict=*/false);
      traj.actions = gen.tokens;
      traj.logp_old = gen.logprobs;
      traj.suffix_text = gen.text;
      traj.prevs.push_back(WordTokenizer::kBos);
      for (int t = 0; t + 1 < T; ++t) traj.prevs.push_back(gen.tokens[static_cast<std::size_t>(t)]);

      const auto ctx_pol = sp.policy.context_embedding(traj.prompt_tokens);
      const auto ctx_ref = sp.reference.context_embedding(traj.prompt_tokens);
      for (int t = 0; t < T; ++t) {
        const int prev = traj.prevs[static_cast<std::size_t>(t)];
        traj.logp_ref.push_back(sp.reference.action_log_prob(
            ctx_ref, prev, t, traj.actions[static_cast<std::size_t>(t)]));
        kl_sum += state_kl(sp.policy.step_log_probs(ctx_pol, prev, t),
                           sp.reference.step_log_probs(ctx_ref, prev, t));
        ++kl_states;
      }

      const std::string full_text = concat_suffix(prompt.rewritten, gen.tokens,
                                                  sp.policy.vocab());
      adapters::DecodeParams target_params;  // greedy, deterministic
      traj.response = target.generate(roll_image, full_text, target_params);
      batch.push_back(std::move(traj));
    }

    std::vector<std::string> responses;
    responses.reserve(batch.size());
    for (const auto& traj : batch) responses.push_back(traj.response);

    std::vector<judge::Verdict> verdicts;
    try {
      verdicts = judge::batch_judge(responses, reward_judge, &cache,
                                    config.judge_failure_tolerance);
    } catch (const JudgeAvailabilityError& e) {
      std::string partial;
      if (checkpoint_dir) {
        sp.save(*checkpoint_dir, config.to_json(), parent_id);
        partial = checkpoint_dir->string();
      }
      throw JudgeAvailabilityError(std::string("rft aborted at epoch ") +
                                       std::to_string(epoch) + ": " + e.what(),
                                   partial);
    }

    double reward_sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto& traj = batch[i];
      const double R = static_cast<double>(verdicts[i].label);
      reward_sum += R;

      std::vector<double> rewards(static_cast<std::size_t>(T), 0.0);
      for (int t = 0; t < T; ++t) {
        rewards[static_cast<std::size_t>(t)] =
            -config.beta * (traj.logp_old[static_cast<std::size_t>(t)] -
                            traj.logp_ref[static_cast<std::size_t>(t)]);
      }
      rewards[static_cast<std::size_t>(T - 1)] += R;

      traj.returns.assign(static_cast<std::size_t>(T), 0.0);
      double acc = 0.0;
      for (int t = T - 1; t >= 0; --t) {
        acc += rewards[static_cast<std::size_t>(t)];
        traj.returns[static_cast<std::size_t>(t)] = acc;
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_reward = reward_sum / static_cast<double>(batch.size());
    record.mean_kl = kl_states ? kl_sum / static_cast<double>(kl_states) : 0.0;
    for (std::size_t i = 0; i < batch.size() && i < 3; ++i) {
      record.sample_suffixes.push_back(batch[i].suffix_text);
    }
    trace.epochs.push_back(record);

    if (record.mean_reward > config.stop_threshold || epoch == config.max_epochs) break;

    // advantage whitening over every (trajectory, position) pair
    std::vector<double> flat;
    flat.reserve(batch.size() * static_cast<std::size_t>(T));
    for (const auto& traj : batch) {
      flat.insert(flat.end(), traj.returns.begin(), traj.returns.end());
    }
    double mean = 0.0;
    for (double g : flat) mean += g;
    mean /= static_cast<double>(flat.size());
    double var = 0.0;
    for (double g : flat) var += (g - mean) * (g - mean);
    const double stdev = std::sqrt(var / static_cast<double>(flat.size()));
    const double denom = stdev + 1e-8;

    const std::vector<double> snapshot = sp.policy.params();
    const double inv_tokens = 1.0 / static_cast<double>(flat.size());

    for (int pass = 0; pass < config.updates_per_batch; ++pass) {
      std::vector<double> grad(sp.policy.params().size(), 0.0);
      for (const auto& traj : batch) {
        const auto ctx = sp.policy.context_embedding(traj.prompt_tokens);
        for (int t = 0; t < T; ++t) {
          const std::size_t ti = static_cast<std::size_t>(t);
          const double adv = (traj.returns[ti] - mean) / denom;
          const double lp_new = sp.policy.action_log_prob(ctx, traj.prevs[ti], t,
                                                          traj.actions[ti]);
          const double ratio = std::exp(lp_new - traj.logp_old[ti]);
          const bool clipped_out = (adv >= 0.0 && ratio > 1.0 + config.clip_range) ||
                                   (adv <= 0.0 && ratio < 1.0 - config.clip_range);
          if (clipped_out) continue;
          sp.policy.accumulate_grad(ctx, traj.prompt_tokens, traj.prevs[ti], t,
                                    traj.actions[ti], adv * ratio * inv_tokens, grad);
        }
      }
      if (!all_finite(grad)) {
        sp.policy.mutable_params() = snapshot;
        std::string stable;
        if (checkpoint_dir) {
          sp.save(*checkpoint_dir, config.to_json(), parent_id);
          stable = " last stable checkpoint: " + checkpoint_dir->string();
        }
        throw OptimizationError("non-finite policy gradient at epoch " +
                                std::to_string(epoch) + "; rolled back." + stable);
      }
      adam.ascend(sp.policy.mutable_params(), grad);
      if (!all_finite(sp.policy.params())) {
        sp.policy.mutable_params() = snapshot;
        std::string stable;
        if (checkpoint_dir) {
          sp.save(*checkpoint_dir, config.to_json(), parent_id);
          stable = " last stable checkpoint: " + checkpoint_dir->string();
        }
        throw OptimizationError("non-finite policy parameters at epoch " +
                                std::to_string(epoch) + "; rolled back." + stable);
      }
    }
  }

  if (sp.reference.params_hash() != ref_hash_before) {
    throw OptimizationError("reference policy changed during training");
  }

  sp.checkpoint_id = sp.compute_checkpoint_id();
  if (checkpoint_dir) sp.save(*checkpoint_dir, config.to_json(), parent_id);
  return trace;
}

}  // namespace forge::suffix
