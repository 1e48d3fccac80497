#include "sgldstab/rng.hpp"

#include <cmath>

namespace sgldstab {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t stream_id(std::uint64_t seed, std::string_view experiment,
                        std::uint64_t replica) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ hash_label(experiment));
  return splitmix64(h ^ splitmix64(replica + 0x632be59bd9b4e019ULL));
}

Rng make_stream(std::uint64_t seed, std::string_view experiment,
                std::uint64_t replica) {
  const std::uint64_t id = stream_id(seed, experiment, replica);
  std::seed_seq seq{static_cast<std::uint32_t>(id),
                    static_cast<std::uint32_t>(id >> 32)};
  return Rng(seq);
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(rng);
}

double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  return uniform(rng);
}

void fill_standard_normal(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal(rng);
}

Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index d) {
  Eigen::VectorXd v(d);
  fill_standard_normal(rng, v);
  return v;
}

Eigen::VectorXd unit_vector(Rng& rng, Eigen::Index d) {
  for (;;) {
    Eigen::VectorXd v = standard_normal_vector(rng, d);
    const double norm = v.norm();
    if (norm > 1e-300) return v / norm;
  }
}

Eigen::VectorXd uniform_in_ball(Rng& rng, Eigen::Index d, double radius) {
  Eigen::VectorXd u = unit_vector(rng, d);
  const double scale = radius * std::pow(uniform01(rng), 1.0 / static_cast<double>(d));
  return scale * u;
}

}  // namespace sgldstab
