#include "sgldstab/couplings.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <stdexcept>

namespace sgldstab {

std::string to_string(CouplingMode mode) {
  switch (mode) {
    case CouplingMode::synchronous: return "synchronous";
    case CouplingMode::reflection: return "reflection";
  }
  return "unknown";
}

CouplingMode coupling_mode_from_string(const std::string& name) {
  if (name == "synchronous") return CouplingMode::synchronous;
  if (name == "reflection") return CouplingMode::reflection;
  throw std::invalid_argument("unknown coupling mode: " + name);
}

Vector reflect(const Vector& xi, const Vector& e) {
  if (xi.size() != e.size()) throw std::invalid_argument("dimension mismatch");
  return xi - 2.0 * e.dot(xi) * e;
}

std::vector<std::size_t> sample_minibatch_forced(std::size_t n, std::size_t k, std::size_t forced,
                                                 Rng& rng) {
  if (k < 1 || k > n) throw std::invalid_argument("batch size k must satisfy 1 <= k <= n");
  if (forced >= n) throw std::out_of_range("forced index out of range");
  std::vector<std::size_t> others;
  others.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    if (i != forced) others.push_back(i);
  std::vector<std::size_t> out;
  out.reserve(k);
  std::sample(others.begin(), others.end(), std::back_inserter(out), k - 1, rng);
  out.insert(std::upper_bound(out.begin(), out.end(), forced), forced);
  return out;
}

double default_meet_threshold(double gamma, double beta) {
  return 0.01 * std::sqrt(2.0 * gamma / beta);
}

namespace {

void check_pair(const CoupledState& cs, const DataSet& a, const DataSet& b) {
  if (a.size() != b.size() || a.dim() != b.dim())
    throw std::invalid_argument("coupled datasets differ in size or dimension");
  if (cs.x.size() != a.dim() || cs.y.size() != a.dim())
    throw std::invalid_argument("coupled state dimension mismatch");
}

void project_pair(CoupledState& cs, const SgldConfig& cfg) {
  if (cfg.variant.kind != VariantKind::projected) return;
  cs.x = project_ball(cs.x, cfg.variant.radius);
  if (cs.met) {
    cs.y = cs.x;
  } else {
    cs.y = project_ball(cs.y, cfg.variant.radius);
  }
}

std::vector<std::size_t> draw_batch(std::size_t n, const SgldConfig& cfg,
                                    const CouplingConfig& ccfg, Rng& rng) {
  if (ccfg.force_index) return sample_minibatch_forced(n, cfg.k, *ccfg.force_index, rng);
  return sample_minibatch(n, cfg.k, rng);
}

}  // namespace

CoupledState synchronous_pair_window(const CoupledState& cs, const LossModel& model,
                                     const DataSet& data_a, const DataSet& data_b,
                                     const SgldConfig& cfg, std::span<const std::size_t> batch,
                                     std::span<const Vector> increments) {
  check_pair(cs, data_a, data_b);
  if (increments.empty()) throw std::invalid_argument("window needs at least one substep");
  CoupledState out = cs;
  const double gamma = cfg.eta / static_cast<double>(increments.size());
  Vector scratch;
  for (const auto& inc : increments) {
    if (inc.size() != cs.x.size()) throw std::invalid_argument("increment dimension mismatch");
    const Vector noise = shape_noise(cfg, inc);
    euler_substep(out.x, model, data_a, batch, cfg.lambda, gamma, cfg.beta, noise, scratch);
    euler_substep(out.y, model, data_b, batch, cfg.lambda, gamma, cfg.beta, noise, scratch);
  }
  project_pair(out, cfg);
  out.step += 1;
  return out;
}

CoupledState synchronous_pair_step(const CoupledState& cs, const LossModel& model,
                                   const DataSet& data_a, const DataSet& data_b,
                                   const SgldConfig& cfg, const NoiseDraw& noise) {
  if (noise.batch.size() != cfg.k) throw std::invalid_argument("batch size differs from k");
  const Vector increments[1] = {noise.xi};
  return synchronous_pair_window(cs, model, data_a, data_b, cfg, noise.batch, increments);
}

CoupledState reflection_pair_step(const CoupledState& cs, const LossModel& model,
                                  const DataSet& data, const SgldConfig& cfg,
                                  const CouplingConfig& ccfg, Rng& rng) {
  check_pair(cs, data, data);
  if (cfg.variant.kind == VariantKind::anisotropic)
    throw std::invalid_argument("reflection coupling does not support anisotropic noise");
  const std::size_t substeps = cfg.window_substeps();
  const double gamma = cfg.eta / static_cast<double>(substeps);
  const double sigma = std::sqrt(2.0 * gamma / cfg.beta);
  const double threshold =
      ccfg.meet_threshold > 0.0 ? ccfg.meet_threshold : default_meet_threshold(gamma, cfg.beta);

  CoupledState out = cs;
  const auto batch = draw_batch(data.size(), cfg, ccfg, rng);
  const Eigen::Index d = cs.x.size();
  const Vector zero = Vector::Zero(d);
  Vector xi(d), scratch, mx(d), my(d), delta(d), e(d);
  for (std::size_t j = 0; j < substeps; ++j) {
    if (!out.met && (out.x - out.y).norm() < kMeetFloor) {
      out.met = true;
      out.meet_step = out.step;
      out.y = out.x;
    }
    fill_standard_normal(rng, xi);
    if (out.met) {
      euler_substep(out.x, model, data, batch, cfg.lambda, gamma, cfg.beta, xi, scratch);
      out.y = out.x;
      continue;
    }
    // Both one-substep laws are N(m, sigma^2 I). Glue with probability
    // min(1, phi(xi + delta) / phi(xi)), otherwise reflect xi across the mean
    // difference; each marginal stays exact.
    mx = out.x;
    my = out.y;
    euler_substep(mx, model, data, batch, cfg.lambda, gamma, cfg.beta, zero, scratch);
    euler_substep(my, model, data, batch, cfg.lambda, gamma, cfg.beta, zero, scratch);
    delta = (mx - my) / sigma;
    const double u = uniform01(rng);
    const double dn = delta.norm();
    out.x = mx + sigma * xi;
    bool glue = dn < kMeetFloor || std::log(u) < -xi.dot(delta) - 0.5 * dn * dn;
    if (!glue) {
      e = delta / dn;
      out.y = my + sigma * reflect(xi, e);
      glue = (out.x - out.y).norm() <= threshold;
    }
    if (glue) {
      out.met = true;
      out.meet_step = out.step + 1;
      out.y = out.x;
    }
  }
  project_pair(out, cfg);
  out.step += 1;
  return out;
}

CoupledRun run_coupled(const CoupledRunSpec& spec, const LossModel& model, const DataSet& data_a,
                       const DataSet& data_b, const SgldConfig& cfg, const CouplingConfig& ccfg) {
  if (spec.replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (spec.record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  cfg.validate(data_a.size());
  if (data_a.size() != data_b.size() || data_a.dim() != data_b.dim())
    throw std::invalid_argument("coupled datasets differ in size or dimension");
  if (ccfg.mode == CouplingMode::reflection && !(data_a == data_b))
    throw std::invalid_argument("reflection coupling needs a single dataset");
  if (ccfg.force_index && *ccfg.force_index >= data_a.size())
    throw std::out_of_range("forced index out of range");

  CoupledRun run;
  for (std::size_t t = 0; t <= spec.horizon; ++t)
    if (t % spec.record_every == 0 || t == spec.horizon) run.steps.push_back(t);
  const std::size_t records = run.steps.size();
  const Eigen::Index d = data_a.dim();
  const std::size_t substeps = cfg.window_substeps();

  constexpr std::size_t kQuantities = 5;
  std::vector<std::vector<RunningStats>> acc(kQuantities, std::vector<RunningStats>(records));
  if (spec.keep_replica_dist) run.replica_dist.assign(records, std::vector<double>(spec.replicas));

  constexpr std::size_t kBlock = 64;
  std::vector<double> block(kBlock * records * kQuantities);

  for (std::size_t start = 0; start < spec.replicas; start += kBlock) {
    const std::size_t count = std::min(kBlock, spec.replicas - start);
    parallel_for(count, [&](std::size_t local) {
      const std::size_t replica = start + local;
      Rng rng = make_stream(spec.seed, spec.stream_label, replica);
      const Vector xi0 = standard_normal_vector(rng, d);
      CoupledState cs;
      cs.x = spec.initial_a.center(d) + spec.initial_a.sigma * xi0;
      cs.y = spec.initial_b.center(d) + spec.initial_b.sigma * xi0;
      if (ccfg.mode == CouplingMode::reflection && (cs.x - cs.y).norm() < kMeetFloor) {
        cs.met = true;
        cs.meet_step = 0;
        cs.y = cs.x;
      }
      double* slot = block.data() + local * records * kQuantities;
      std::vector<Vector> increments(substeps, Vector(d));
      std::size_t rec = 0;
      for (std::size_t t = 0;; ++t) {
        if (rec < records && run.steps[rec] == t) {
          const double dist = (cs.x - cs.y).norm();
          slot[rec * kQuantities + 0] = dist;
          slot[rec * kQuantities + 1] = dist * dist;
          slot[rec * kQuantities + 2] = rho(cs.x, cs.y, spec.rho_params);
          slot[rec * kQuantities + 3] = rho_g(cs.x, cs.y, spec.rho_params.g);
          slot[rec * kQuantities + 4] = cs.met ? 1.0 : 0.0;
          ++rec;
        }
        if (t == spec.horizon) break;
        if (ccfg.mode == CouplingMode::reflection) {
          cs = reflection_pair_step(cs, model, data_a, cfg, ccfg, rng);
        } else {
          const auto batch = draw_batch(data_a.size(), cfg, ccfg, rng);
          for (auto& inc : increments) fill_standard_normal(rng, inc);
          cs = synchronous_pair_window(cs, model, data_a, data_b, cfg, batch, increments);
        }
      }
    });
    for (std::size_t local = 0; local < count; ++local) {
      const double* slot = block.data() + local * records * kQuantities;
      for (std::size_t rec = 0; rec < records; ++rec) {
        for (std::size_t q = 0; q < kQuantities; ++q) acc[q][rec].add(slot[rec * kQuantities + q]);
        if (spec.keep_replica_dist) run.replica_dist[rec][start + local] = slot[rec * kQuantities];
      }
    }
  }

  auto collect = [&](std::size_t q) {
    std::vector<MeanSem> out(records);
    for (std::size_t rec = 0; rec < records; ++rec) out[rec] = acc[q][rec].result();
    return out;
  };
  run.dist = collect(0);
  run.dist_sq = collect(1);
  run.rho = collect(2);
  run.rho_g = collect(3);
  run.met = collect(4);
  return run;
}

}  // namespace sgldstab
