#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "liststeg/dist.hpp"
#include "liststeg/error.hpp"

namespace liststeg {

/// A conditional next-token distribution: a pure function of the history.
class DistributionSource {
 public:
  virtual ~DistributionSource() = default;

  virtual std::size_t vocab_size() const = 0;

  /// Returned pointers may be shared between calls; callers treat them as
  /// immutable. Equal histories must yield equal distributions.
  virtual std::shared_ptr<const QuantizedDistribution> distribution(
      std::span<const TokenId> history) = 0;

  /// Short description of kind and parameters, used in session headers.
  virtual std::string describe() const = 0;
};

class UniformSource final : public DistributionSource {
 public:
  explicit UniformSource(std::size_t vocab_size)
      : dist_(std::make_shared<QuantizedDistribution>(
            quantize(std::vector<double>(vocab_size, 1.0)))) {}

  std::size_t vocab_size() const override { return dist_->vocab_size(); }
  std::shared_ptr<const QuantizedDistribution> distribution(std::span<const TokenId>) override {
    return dist_;
  }
  std::string describe() const override { return "uniform(" + std::to_string(vocab_size()) + ")"; }

 private:
  std::shared_ptr<const QuantizedDistribution> dist_;
};

/// One token carries 1 - epsilon; epsilon is spread evenly over the rest.
class PeakedSource final : public DistributionSource {
 public:
  PeakedSource(std::size_t vocab_size, double epsilon, TokenId peak = 0)
      : epsilon_(epsilon), peak_(peak) {
    if (vocab_size < 2 || peak >= vocab_size || !(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw Error(ErrorCode::kConfig, "peaked model needs vocab >= 2, peak < vocab, 0 <= epsilon <= 1");
    }
    std::vector<double> raw(vocab_size, epsilon / static_cast<double>(vocab_size - 1));
    raw[peak] = 1.0 - epsilon;
    dist_ = std::make_shared<QuantizedDistribution>(quantize(raw));
  }

  std::size_t vocab_size() const override { return dist_->vocab_size(); }
  std::shared_ptr<const QuantizedDistribution> distribution(std::span<const TokenId>) override {
    return dist_;
  }
  std::string describe() const override {
    return "peaked(" + std::to_string(vocab_size()) + ",eps=" + std::to_string(epsilon_) +
           ",peak=" + std::to_string(peak_) + ")";
  }

 private:
  double epsilon_;
  TokenId peak_;
  std::shared_ptr<const QuantizedDistribution> dist_;
};

/// First-order Markov chain: the next distribution is the row of the last
/// token, or the initial distribution on an empty history.
class MarkovSource final : public DistributionSource {
 public:
  MarkovSource(const std::vector<std::vector<double>>& table, std::vector<double> initial = {}) {
    const std::size_t v = table.size();
    if (v < 2) throw Error(ErrorCode::kConfig, "markov table needs at least two rows");
    for (const auto& row : table) {
      if (row.size() != v) throw Error(ErrorCode::kConfig, "markov table must be square");
      rows_.push_back(std::make_shared<QuantizedDistribution>(quantize(row)));
    }
    if (initial.empty()) initial.assign(v, 1.0);
    if (initial.size() != v) throw Error(ErrorCode::kConfig, "markov initial vector has wrong size");
    initial_ = std::make_shared<QuantizedDistribution>(quantize(initial));
  }

  std::size_t vocab_size() const override { return rows_.size(); }
  std::shared_ptr<const QuantizedDistribution> distribution(std::span<const TokenId> history) override {
    if (history.empty()) return initial_;
    return rows_.at(history.back());
  }
  std::string describe() const override { return "markov(" + std::to_string(vocab_size()) + ")"; }

  const QuantizedDistribution& row(TokenId s) const { return *rows_.at(s); }
  const QuantizedDistribution& initial() const { return *initial_; }

 private:
  std::vector<std::shared_ptr<const QuantizedDistribution>> rows_;
  std::shared_ptr<const QuantizedDistribution> initial_;
};

/// Softmax over seeded logits with a temperature that cycles with position.
///
/// At step t (history length) with last token `last` the distribution is
/// softmax(z[(s + last) mod V] / T[t mod |T|]). Entropy therefore swings
/// between regimes along the sequence while staying history-deterministic.
class TemperatureProfileSource final : public DistributionSource {
 public:
  TemperatureProfileSource(std::size_t vocab_size, std::uint64_t seed, std::vector<double> temperatures)
      : seed_(seed), temperatures_(std::move(temperatures)) {
    if (vocab_size < 2) throw Error(ErrorCode::kConfig, "temperature model needs vocab >= 2");
    if (temperatures_.empty()) throw Error(ErrorCode::kConfig, "temperature profile is empty");
    for (double t : temperatures_) {
      if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::kConfig, "temperatures must be > 0");
    }
    std::mt19937_64 rng(seed);
    logits_.resize(vocab_size);
    for (auto& z : logits_) z = 8.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 4.0;
  }

  std::size_t vocab_size() const override { return logits_.size(); }

  std::shared_ptr<const QuantizedDistribution> distribution(std::span<const TokenId> history) override {
    const std::size_t phase = history.size() % temperatures_.size();
    const std::size_t shift = history.empty() ? 0 : history.back();
    auto key = std::make_pair(phase, shift);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const std::size_t v = logits_.size();
    const double t = temperatures_[phase];
    double zmax = -1e300;
    for (double z : logits_) zmax = std::max(zmax, z);
    std::vector<double> raw(v);
    for (std::size_t s = 0; s < v; ++s) raw[s] = std::exp((logits_[(s + shift) % v] - zmax) / t);
    auto d = std::make_shared<QuantizedDistribution>(quantize(raw));
    cache_.emplace(key, d);
    return d;
  }

  std::string describe() const override {
    return "temperature(" + std::to_string(vocab_size()) + ",seed=" + std::to_string(seed_) + ")";
  }

 private:
  std::uint64_t seed_;
  std::vector<double> temperatures_;
  std::vector<double> logits_;
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const QuantizedDistribution>> cache_;
};

/// A distribution source plus the history fed to it so far.
///
/// Copies share the underlying source (and, for the server kind, the
/// connection) but own their history.
class ModelSource {
 public:
  ModelSource() = default;
  explicit ModelSource(std::shared_ptr<DistributionSource> source, std::vector<TokenId> history = {})
      : source_(std::move(source)), history_(std::move(history)) {
    if (!source_) throw Error(ErrorCode::kConfig, "model source is null");
    for (auto t : history_) check_token(t);
  }

  std::size_t vocab_size() const { return source_->vocab_size(); }
  std::span<const TokenId> history() const noexcept { return history_; }
  DistributionSource& source() const { return *source_; }

  std::shared_ptr<const QuantizedDistribution> next_distribution() const {
    auto d = source_->distribution(history_);
    if (d->vocab_size() != vocab_size()) {
      throw Error(ErrorCode::kModel, "distribution size disagrees with vocabulary");
    }
    return d;
  }

  void append_history(TokenId token) {
    check_token(token);
    history_.push_back(token);
  }

 private:
  void check_token(TokenId t) const {
    if (t >= vocab_size()) throw Error(ErrorCode::kInvalidInput, "token id outside vocabulary");
  }

  std::shared_ptr<DistributionSource> source_;
  std::vector<TokenId> history_;
};

template <typename Source, typename... Args>
ModelSource make_model(Args&&... args) {
  return ModelSource(std::make_shared<Source>(std::forward<Args>(args)...));
}

}  // namespace liststeg
