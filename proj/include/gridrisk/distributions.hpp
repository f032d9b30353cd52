#pragma once

#include <cstdint>
#include <random>
#include <variant>

#include <nlohmann/json.hpp>

namespace gridrisk {

struct UniformMarginal {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const UniformMarginal&) const = default;
};

struct TruncNormalMarginal {
  double mu = 0.0;
  double sigma = 1.0;
  double a = -1.0;
  double b = 1.0;
  bool operator==(const TruncNormalMarginal&) const = default;
};

/// Weibull with shape k and scale lambda.
struct WeibullMarginal {
  double k = 2.0;
  double lambda = 1.0;
  bool operator==(const WeibullMarginal&) const = default;
};

using MarginalSpec = std::variant<UniformMarginal, TruncNormalMarginal, WeibullMarginal>;

void validate(const MarginalSpec& spec);

/// Quantile function; u must lie strictly inside (0, 1).
double inverse_cdf(const MarginalSpec& spec, double u);
double cdf(const MarginalSpec& spec, double x);
double mean(const MarginalSpec& spec);

double std_normal_cdf(double z);
double std_normal_quantile(double p);

nlohmann::json marginal_to_json(const MarginalSpec& spec);
MarginalSpec marginal_from_json(const nlohmann::json& j);

/// Seeded stream with a fixed, platform-independent mapping from engine output to
/// uniforms, so sampled values do not depend on the standard library's distributions.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return std_normal_quantile(uniform()); }
  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

private:
  std::mt19937_64 engine_;
};

/// Derives an independent child seed from a parent seed and a stream label.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace gridrisk
