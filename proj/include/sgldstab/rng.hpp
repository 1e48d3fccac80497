#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace sgldstab {

/// Engine used by every stochastic routine. Streams are derived, never shared
/// across replicas.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a over the bytes of a label; used to fold experiment names into seeds.
std::uint64_t hash_label(std::string_view label);

/// Stream id for (seed, experiment, replica). Both sides of a coupled pair
/// consume the same stream.
std::uint64_t stream_id(std::uint64_t seed, std::string_view experiment,
                        std::uint64_t replica);

Rng make_stream(std::uint64_t seed, std::string_view experiment,
                std::uint64_t replica);

double standard_normal(Rng& rng);
double uniform01(Rng& rng);

void fill_standard_normal(Rng& rng, Eigen::Ref<Eigen::VectorXd> out);
Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index d);

/// Uniform direction on the unit sphere in R^d.
Eigen::VectorXd unit_vector(Rng& rng, Eigen::Index d);

/// Uniform point in the closed ball of the given radius.
Eigen::VectorXd uniform_in_ball(Rng& rng, Eigen::Index d, double radius);

}  // namespace sgldstab
