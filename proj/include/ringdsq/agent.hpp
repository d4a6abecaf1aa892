#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ringdsq/action.hpp"
#include "ringdsq/neural.hpp"
#include "ringdsq/observe.hpp"
#include "ringdsq/rng.hpp"

namespace ringdsq::agent {

/// How the TD target values the next state.
enum class TargetRule { VanillaMax, DoubleQ };

/// Downstream pooling. Weighted applies the normalized distance weights;
/// UnnormalizedSum is the plain Deep-Sets sum whose magnitude grows with the
/// number of vehicles, kept for the scale-growth comparison.
enum class PoolMode { Weighted, UnnormalizedSum };

/// Encoder phi consumes one 3-feature row; the Q head consumes the pooled
/// downstream embedding, three local embeddings, and the ego embedding.
inline constexpr int kPhiSizes[] = {3, 64, 32};
inline constexpr int kRhoSizes[] = {5 * 32, 64, 64, 64, 32, 16, 8, 3};

struct Transition {
  obs::Observation obs;
  Action action = Action::KeepLane;
  double reward = 0.0;
  obs::Observation next_obs;
  bool done = false;
};

/// FIFO ring of transitions with uniform without-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 500'000) : cap_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  }

  void push(Transition t) {
    if (data_.size() < cap_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
      next_ = (next_ + 1) % cap_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return cap_; }

  /// i-th oldest transition.
  const Transition& oldest(std::size_t i) const {
    if (i >= data_.size()) throw std::out_of_range("replay index");
    return data_.size() < cap_ ? data_[i] : data_[(next_ + i) % cap_];
  }

  /// Uniform without replacement; draws address the i-th oldest transition so
  /// the sequence only depends on the buffer's logical content.
  void sample(std::size_t b, Rng& rng, std::vector<const Transition*>& out) const {
    const std::size_t n = data_.size();
    if (b > n) throw std::invalid_argument("replay sample larger than buffer");
    out.clear();
    out.reserve(b);
    if (b * 2 >= n) {
      // partial Fisher-Yates over all indices
      std::vector<std::uint32_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t j = i + rng.uniform_int(n - i);
        std::swap(idx[i], idx[j]);
        out.push_back(&oldest(idx[i]));
      }
    } else {
      std::vector<std::uint32_t> seen;
      seen.reserve(b);
      while (out.size() < b) {
        const auto j = static_cast<std::uint32_t>(rng.uniform_int(n));
        bool dup = false;
        for (std::uint32_t s : seen) dup |= s == j;
        if (dup) continue;
        seen.push_back(j);
        out.push_back(&oldest(j));
      }
    }
  }

 private:
  std::size_t cap_;
  std::vector<Transition> data_;
  std::size_t next_ = 0;
};

struct AgentConfig {
  double gamma = 0.99;
  double epsilon = 0.3;
  int batch_size = 32;
  double tau = 1e-2;
  obs::WeightScheme scheme = obs::WeightScheme::Linear;
  PoolMode pool = PoolMode::Weighted;
  TargetRule target_rule = TargetRule::DoubleQ;
  long warmup_steps = 500'000;
  std::size_t replay_capacity = 500'000;

  void validate() const {
    if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("gamma must be in (0,1]");
    if (!(epsilon >= 0 && epsilon <= 1))
      throw std::invalid_argument("epsilon must be in [0,1]");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  }
};

/// Per-call workspace for encoding one observation; buffers are reused.
struct EncodeScratch {
  std::vector<nn::MlpCache> down;
  std::array<nn::MlpCache, 3> local;
  nn::MlpCache cav;
  std::vector<double> dx;
  std::vector<double> w;
  std::vector<double> encoded;
};

namespace detail {

inline std::vector<double> pooling_weights(
    const std::vector<std::array<double, 3>>& rows, obs::WeightScheme scheme,
    PoolMode pool, std::vector<double>& dx_scratch) {
  dx_scratch.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) dx_scratch[i] = rows[i][0];
  if (pool == PoolMode::UnnormalizedSum)
    return std::vector<double>(rows.size(), 1.0);
  return obs::weights(dx_scratch, scheme);
}

/// Encodes an observation, keeping every phi cache for backprop. The result
/// lives in scratch.encoded as [F_d ; phi(left) ; phi(current) ; phi(right) ;
/// phi(cav)].
inline void encode_cached(const obs::Observation& o, const nn::Mlp& phi,
                          obs::WeightScheme scheme, PoolMode pool,
                          EncodeScratch& s) {
  const int width = phi.output_size();
  const std::size_t n = o.downstream.size();
  s.w = pooling_weights(o.downstream, scheme, pool, s.dx);
  if (s.down.size() < n) s.down.resize(n);
  s.encoded.assign(5 * static_cast<std::size_t>(width), 0.0);

  double* fd = s.encoded.data();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& out = mlp_forward(phi, o.downstream[i], s.down[i]);
    const double wi = s.w[i];
    for (int k = 0; k < width; ++k) fd[k] += wi * out[k];
  }
  for (int r = 0; r < 3; ++r) {
    const auto& out = mlp_forward(phi, o.local[r], s.local[r]);
    double* dst = s.encoded.data() + static_cast<std::size_t>(width) * (1 + r);
    for (int k = 0; k < width; ++k) dst[k] = out[k];
  }
  const auto& out = mlp_forward(phi, o.cav, s.cav);
  double* dst = s.encoded.data() + static_cast<std::size_t>(width) * 4;
  for (int k = 0; k < width; ++k) dst[k] = out[k];
}

/// Pushes the Q-input gradient back through every phi call of one encoding.
inline void encode_backward(const obs::Observation& o, const nn::Mlp& phi,
                            const EncodeScratch& s,
                            std::span<const double> encoded_grad,
                            nn::MlpGrads& phi_grads,
                            std::vector<double>& chunk_scratch,
                            std::vector<double>& bp_scratch) {
  const int width = phi.output_size();
  const double* fd_grad = encoded_grad.data();
  for (std::size_t i = 0; i < o.downstream.size(); ++i) {
    const double wi = s.w[i];
    chunk_scratch.resize(width);
    for (int k = 0; k < width; ++k) chunk_scratch[k] = wi * fd_grad[k];
    nn::mlp_backward(phi, s.down[i], chunk_scratch, phi_grads, nullptr, &bp_scratch);
  }
  for (int r = 0; r < 3; ++r) {
    std::span<const double> g(encoded_grad.data() + static_cast<std::size_t>(width) * (1 + r),
                              static_cast<std::size_t>(width));
    nn::mlp_backward(phi, s.local[r], g, phi_grads, nullptr, &bp_scratch);
  }
  std::span<const double> g(encoded_grad.data() + static_cast<std::size_t>(width) * 4,
                            static_cast<std::size_t>(width));
  nn::mlp_backward(phi, s.cav, g, phi_grads, nullptr, &bp_scratch);
}

}  // namespace detail

/// Pooled downstream embedding F_d; a zero vector when no vehicle is connected.
inline std::vector<double> embed_downstream(
    const std::vector<std::array<double, 3>>& rows, const nn::Mlp& phi,
    obs::WeightScheme scheme, PoolMode pool = PoolMode::Weighted) {
  std::vector<double> fd(phi.output_size(), 0.0);
  std::vector<double> dx_scratch;
  const std::vector<double> w = detail::pooling_weights(rows, scheme, pool, dx_scratch);
  nn::MlpCache cache;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& out = mlp_forward(phi, rows[i], cache);
    for (int k = 0; k < phi.output_size(); ++k) fd[k] += w[i] * out[k];
  }
  return fd;
}

/// Fixed-width Q-network input regardless of how many vehicles are connected.
inline std::vector<double> encode_state(const obs::Observation& o,
                                        const nn::Mlp& phi,
                                        obs::WeightScheme scheme,
                                        PoolMode pool = PoolMode::Weighted) {
  EncodeScratch s;
  detail::encode_cached(o, phi, scheme, pool, s);
  return s.encoded;
}

inline std::array<double, 3> q_values_scratch(const obs::Observation& o,
                                              const nn::Mlp& phi, const nn::Mlp& rho,
                                              obs::WeightScheme scheme, PoolMode pool,
                                              EncodeScratch& enc, nn::MlpCache& head) {
  detail::encode_cached(o, phi, scheme, pool, enc);
  const auto& out = mlp_forward(rho, enc.encoded, head);
  if (out.size() != 3) throw std::invalid_argument("q head must emit one value per action");
  return {out[0], out[1], out[2]};
}

inline std::array<double, 3> q_values(const obs::Observation& o, const nn::Mlp& phi,
                                      const nn::Mlp& rho, obs::WeightScheme scheme,
                                      PoolMode pool = PoolMode::Weighted) {
  EncodeScratch enc;
  nn::MlpCache head;
  return q_values_scratch(o, phi, rho, scheme, pool, enc, head);
}

/// Greedy over unmasked actions with probability 1-eps, uniform over unmasked
/// otherwise; ties go to the lowest action index.
inline Action select_action(std::span<const double> q,
                            const std::array<bool, 3>& mask, double eps, Rng& rng) {
  if (eps > 0 && rng.uniform() < eps) {
    int legal[kNumActions];
    int count = 0;
    for (int i = 0; i < kNumActions; ++i)
      if (mask[i]) legal[count++] = i;
    return static_cast<Action>(legal[rng.uniform_int(count)]);
  }
  int best = -1;
  for (int i = 0; i < kNumActions; ++i)
    if (mask[i] && (best < 0 || q[i] > q[best])) best = i;
  return static_cast<Action>(best);
}

namespace detail {

inline int argmax_legal(const std::array<double, 3>& q,
                        const std::array<bool, 3>& mask) {
  int best = -1;
  for (int i = 0; i < kNumActions; ++i)
    if (mask[i] && (best < 0 || q[i] > q[best])) best = i;
  return best;
}

}  // namespace detail

/// Workspace owned by whoever drives training; every buffer is reused.
struct TrainScratch {
  EncodeScratch enc, enc_next;
  nn::MlpCache head, head_next;
  nn::MlpGrads phi_grads, rho_grads;
  std::vector<double> targets;
  std::vector<double> head_out_grad;
  std::vector<double> encoded_grad;
  std::vector<double> chunk, bp;
  std::vector<const Transition*> batch;
};

/// TD targets for a batch: r for terminal transitions, otherwise r + gamma
/// times the target network's value of the next state, with the action chosen
/// by the rule. Masked actions never enter the max/argmax.
inline void td_targets(std::span<const Transition* const> batch,
                       const nn::NetworkPair& nets, double gamma, TargetRule rule,
                       obs::WeightScheme scheme, PoolMode pool, TrainScratch& s,
                       std::vector<double>& out) {
  out.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = *batch[i];
    if (tr.done) {
      out[i] = tr.reward;
      continue;
    }
    const auto q_target = q_values_scratch(tr.next_obs, nets.phi_target,
                                           nets.rho_target, scheme, pool,
                                           s.enc_next, s.head_next);
    int a;
    if (rule == TargetRule::DoubleQ) {
      const auto q_online = q_values_scratch(tr.next_obs, nets.phi, nets.rho,
                                             scheme, pool, s.enc, s.head);
      a = detail::argmax_legal(q_online, tr.next_obs.action_mask);
    } else {
      a = detail::argmax_legal(q_target, tr.next_obs.action_mask);
    }
    out[i] = tr.reward + gamma * q_target[a];
  }
}

inline std::vector<double> td_targets(std::span<const Transition* const> batch,
                                      const nn::NetworkPair& nets, double gamma,
                                      TargetRule rule, obs::WeightScheme scheme,
                                      PoolMode pool) {
  TrainScratch s;
  std::vector<double> out;
  td_targets(batch, nets, gamma, rule, scheme, pool, s, out);
  return out;
}

/// Mean squared error on the taken action's Q-value, with gradients
/// accumulated into the scratch holders for both networks. The pooling
/// weights are treated as constants.
inline double batch_loss_and_grads(std::span<const Transition* const> batch,
                                   std::span<const double> targets,
                                   const nn::Mlp& phi, const nn::Mlp& rho,
                                   obs::WeightScheme scheme, PoolMode pool,
                                   TrainScratch& s) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (s.phi_grads.layers.size() != phi.layers.size()) s.phi_grads.match(phi);
  if (s.rho_grads.layers.size() != rho.layers.size()) s.rho_grads.match(rho);
  s.phi_grads.zero();
  s.rho_grads.zero();

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = *batch[i];
    detail::encode_cached(tr.obs, phi, scheme, pool, s.enc);
    const auto& q = mlp_forward(rho, s.enc.encoded, s.head);
    const int a = static_cast<int>(tr.action);
    const double diff = q[a] - targets[i];
    loss += diff * diff * inv_b;

    s.head_out_grad.assign(q.size(), 0.0);
    s.head_out_grad[a] = 2.0 * diff * inv_b;
    nn::mlp_backward(rho, s.head, s.head_out_grad, s.rho_grads, &s.encoded_grad,
                     &s.bp);
    detail::encode_backward(tr.obs, phi, s.enc, s.encoded_grad, s.phi_grads,
                            s.chunk, s.bp);
  }
  return loss;
}

enum class TargetUpdateMode { Soft, None };

/// One gradient step per Algorithm: sample a mini-batch, form targets against
/// the target network, descend the mean squared error on the taken actions,
/// then blend the target network. Returns the loss, or nothing when the
/// buffer cannot fill a batch yet.
inline std::optional<double> train_step(const ReplayBuffer& buffer,
                                        nn::NetworkPair& nets,
                                        nn::AdamState& phi_adam,
                                        nn::AdamState& rho_adam,
                                        const AgentConfig& cfg, Rng& rng,
                                        TrainScratch& s,
                                        TargetUpdateMode update = TargetUpdateMode::Soft) {
  if (buffer.size() < static_cast<std::size_t>(cfg.batch_size)) return std::nullopt;
  buffer.sample(cfg.batch_size, rng, s.batch);
  td_targets(s.batch, nets, cfg.gamma, cfg.target_rule, cfg.scheme, cfg.pool, s,
             s.targets);
  const double loss = batch_loss_and_grads(s.batch, s.targets, nets.phi, nets.rho,
                                           cfg.scheme, cfg.pool, s);
  nn::adam_step(nets.phi, s.phi_grads, phi_adam);
  nn::adam_step(nets.rho, s.rho_grads, rho_adam);
  if (update == TargetUpdateMode::Soft) nn::soft_update(nets);
  return loss;
}

/// Networks plus optimizer state, initialized deterministically from a seed.
struct DsqAgent {
  AgentConfig cfg;
  nn::NetworkPair nets;
  nn::AdamState phi_adam, rho_adam;

  std::array<double, 3> q(const obs::Observation& o) const {
    return q_values(o, nets.phi, nets.rho, cfg.scheme, cfg.pool);
  }
};

inline DsqAgent make_agent(const AgentConfig& cfg, std::uint64_t init_seed,
                           nn::AdamParams adam = {}) {
  cfg.validate();
  DsqAgent a;
  a.cfg = cfg;
  a.nets.phi = nn::make_mlp(kPhiSizes);
  a.nets.rho = nn::make_mlp(kRhoSizes);
  a.nets.tau = cfg.tau;
  Rng rng(init_seed);
  nn::init_glorot_uniform(a.nets.phi, rng);
  nn::init_glorot_uniform(a.nets.rho, rng);
  a.nets.phi_target = a.nets.phi;
  a.nets.rho_target = a.nets.rho;
  a.phi_adam = nn::AdamState(a.nets.phi, adam);
  a.rho_adam = nn::AdamState(a.nets.rho, adam);
  return a;
}

}  // namespace ringdsq::agent
