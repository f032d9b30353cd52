#include "gridrisk/distributions.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "gridrisk/errors.hpp"

namespace gridrisk {

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

template <class... Ts>
struct Overload : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overload(Ts...) -> Overload<Ts...>;

double upper_tail(double z) { return boost::math::cdf(boost::math::complement(kStdNormal, z)); }
double upper_tail_quantile(double q) { return boost::math::quantile(boost::math::complement(kStdNormal, q)); }

}  // namespace

double std_normal_cdf(double z) {
  if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
  return boost::math::cdf(kStdNormal, z);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal quantile requires 0 < p < 1");
  return boost::math::quantile(kStdNormal, p);
}

void validate(const MarginalSpec& spec) {
  std::visit(Overload{
                 [](const UniformMarginal& m) {
                   if (!(m.lo < m.hi)) throw ValidationError("uniform marginal needs lo < hi");
                 },
                 [](const TruncNormalMarginal& m) {
                   if (!(m.sigma > 0.0)) throw ValidationError("truncated normal needs sigma > 0");
                   if (!(m.a < m.b)) throw ValidationError("truncated normal needs a < b");
                   if (!std::isfinite(m.mu)) throw ValidationError("truncated normal mean must be finite");
                 },
                 [](const WeibullMarginal& m) {
                   if (!(m.k > 0.0) || !(m.lambda > 0.0)) throw ValidationError("Weibull needs k > 0 and lambda > 0");
                 },
             },
             spec);
}

double inverse_cdf(const MarginalSpec& spec, double u) {
  if (!(u > 0.0 && u < 1.0)) throw ValidationError("inverse_cdf requires 0 < u < 1");
  return std::visit(Overload{
                        [u](const UniformMarginal& m) { return m.lo + u * (m.hi - m.lo); },
                        [u](const TruncNormalMarginal& m) {
                          const double alpha = (m.a - m.mu) / m.sigma;
                          const double beta = (m.b - m.mu) / m.sigma;
                          double z;
                          if (alpha > 0.0) {
                            // Entirely in the upper tail: work with survival probabilities.
                            const double qa = upper_tail(alpha), qb = upper_tail(beta);
                            const double q = qa - u * (qa - qb);
                            z = q > 0.0 ? upper_tail_quantile(q) : beta;
                          } else {
                            const double pa = std_normal_cdf(alpha), pb = std_normal_cdf(beta);
                            const double p = pa + u * (pb - pa);
                            z = p < 1.0 ? (p > 0.0 ? std_normal_quantile(p) : alpha) : beta;
                          }
                          return std::clamp(m.mu + m.sigma * z, m.a, m.b);
                        },
                        [u](const WeibullMarginal& m) { return m.lambda * std::pow(-std::log1p(-u), 1.0 / m.k); },
                    },
                    spec);
}

double cdf(const MarginalSpec& spec, double x) {
  return std::visit(Overload{
                        [x](const UniformMarginal& m) {
                          if (x <= m.lo) return 0.0;
                          if (x >= m.hi) return 1.0;
                          return (x - m.lo) / (m.hi - m.lo);
                        },
                        [x](const TruncNormalMarginal& m) {
                          if (x <= m.a) return 0.0;
                          if (x >= m.b) return 1.0;
                          const double alpha = (m.a - m.mu) / m.sigma;
                          const double beta = (m.b - m.mu) / m.sigma;
                          const double z = (x - m.mu) / m.sigma;
                          if (alpha > 0.0) {
                            const double qa = upper_tail(alpha), qb = upper_tail(beta);
                            return (qa - upper_tail(z)) / (qa - qb);
                          }
                          const double pa = std_normal_cdf(alpha), pb = std_normal_cdf(beta);
                          return (std_normal_cdf(z) - pa) / (pb - pa);
                        },
                        [x](const WeibullMarginal& m) {
                          if (x <= 0.0) return 0.0;
                          return -std::expm1(-std::pow(x / m.lambda, m.k));
                        },
                    },
                    spec);
}

double mean(const MarginalSpec& spec) {
  return std::visit(Overload{
                        [](const UniformMarginal& m) { return 0.5 * (m.lo + m.hi); },
                        [](const TruncNormalMarginal& m) {
                          const double alpha = (m.a - m.mu) / m.sigma;
                          const double beta = (m.b - m.mu) / m.sigma;
                          const double za = std::isfinite(alpha) ? boost::math::pdf(kStdNormal, alpha) : 0.0;
                          const double zb = std::isfinite(beta) ? boost::math::pdf(kStdNormal, beta) : 0.0;
                          const double mass = alpha > 0.0 ? upper_tail(alpha) - upper_tail(beta)
                                                          : std_normal_cdf(beta) - std_normal_cdf(alpha);
                          return m.mu + m.sigma * (za - zb) / mass;
                        },
                        [](const WeibullMarginal& m) { return m.lambda * std::tgamma(1.0 + 1.0 / m.k); },
                    },
                    spec);
}

nlohmann::json marginal_to_json(const MarginalSpec& spec) {
  return std::visit(Overload{
                        [](const UniformMarginal& m) {
                          return nlohmann::json{{"kind", "uniform"}, {"lo", m.lo}, {"hi", m.hi}};
                        },
                        [](const TruncNormalMarginal& m) {
                          return nlohmann::json{{"kind", "trunc_normal"}, {"mu", m.mu}, {"sigma", m.sigma},
                                                {"a", m.a}, {"b", m.b}};
                        },
                        [](const WeibullMarginal& m) {
                          return nlohmann::json{{"kind", "weibull"}, {"k", m.k}, {"lambda", m.lambda}};
                        },
                    },
                    spec);
}

MarginalSpec marginal_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  MarginalSpec spec;
  if (kind == "uniform") {
    spec = UniformMarginal{j.at("lo").get<double>(), j.at("hi").get<double>()};
  } else if (kind == "trunc_normal") {
    spec = TruncNormalMarginal{j.at("mu").get<double>(), j.at("sigma").get<double>(), j.at("a").get<double>(),
                               j.at("b").get<double>()};
  } else if (kind == "weibull") {
    spec = WeibullMarginal{j.at("k").get<double>(), j.at("lambda").get<double>()};
  } else {
    throw ValidationError("unknown marginal kind '" + kind + "'");
  }
  validate(spec);
  return spec;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace gridrisk
