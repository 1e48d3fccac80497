#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "harness_internal.hpp"
#include "sgldstab/stats.hpp"

namespace sgldstab {

using namespace detail;

namespace {

constexpr double kTwoSidedZ99 = 2.5758293035489004;

Vector point(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

struct MomentRun {
  std::vector<std::size_t> steps;
  std::vector<MeanSem> values;
};

/// Independent chains on one dataset; records f(x) at every stride-th step.
MomentRun chain_functional(const LossModel& model, const DataSet& data, const SgldConfig& cfg,
                           const InitialSpec& init, std::size_t horizon, std::size_t stride,
                           std::size_t replicas, std::uint64_t seed, const std::string& label,
                           const std::function<double(const Vector&)>& f) {
  MomentRun out;
  out.steps = record_grid(horizon, stride);
  const std::size_t records = out.steps.size();
  std::vector<RunningStats> acc(records);
  constexpr std::size_t kBlock = 64;
  std::vector<double> block(kBlock * records);
  for (std::size_t start = 0; start < replicas; start += kBlock) {
    const std::size_t count = std::min(kBlock, replicas - start);
    parallel_for(count, [&](std::size_t local) {
      Rng rng = make_stream(seed, label, start + local);
      ChainState state{init.sample(data.dim(), rng), 0};
      std::size_t rec = 0;
      for (std::size_t t = 0;; ++t) {
        if (rec < records && out.steps[rec] == t) block[local * records + rec++] = f(state.x);
        if (t == horizon) break;
        state = advance(state, model, data, cfg, rng);
      }
    });
    for (std::size_t local = 0; local < count; ++local)
      for (std::size_t rec = 0; rec < records; ++rec) acc[rec].add(block[local * records + rec]);
  }
  for (const auto& a : acc) out.values.push_back(a.result());
  return out;
}

SgldConfig sgld(double eta, double beta, std::size_t k, double lambda, TimeMode mode,
                std::size_t substeps = 64) {
  SgldConfig cfg;
  cfg.eta = eta;
  cfg.beta = beta;
  cfg.k = k;
  cfg.lambda = lambda;
  cfg.mode = mode;
  cfg.substeps_cts = substeps;
  return cfg;
}

InitialSpec point_mass(Vector mean) {
  InitialSpec init;
  init.mean = std::move(mean);
  return init;
}

std::vector<double> to_time(const std::vector<std::size_t>& steps, double eta) {
  std::vector<double> t;
  for (std::size_t s : steps) t.push_back(eta * static_cast<double>(s));
  return t;
}

struct SampleMoments {
  double mean = 0.0, var = 0.0, var_se = 0.0, mean_se = 0.0;
};

SampleMoments sample_moments(const std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  SampleMoments s;
  for (double x : v) s.mean += x;
  s.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double c = (x - s.mean) * (x - s.mean);
    m2 += c;
    m4 += c * c;
  }
  s.var = m2 / (n - 1.0);
  m4 /= n;
  s.mean_se = std::sqrt(s.var / n);
  s.var_se = std::sqrt(std::max(m4 - (m2 / n) * (m2 / n), 0.0) / n);
  return s;
}

}  // namespace

void verify_moment_cts(ExperimentReport& report, std::uint64_t seed, std::size_t replicas) {
  const LossModel model = LossModel::quadratic(1.0);
  const double eta = 0.05, beta = 2.0;
  const std::size_t d = 2, n = 16, horizon = 400;
  Rng data_rng = make_stream(seed, "verify/moment_cts/data", 0);
  const DataSet S = sample_dataset(n, d, model.z_max, data_rng);
  const InitialSpec init = point_mass(point({2.0, 0.0}));
  const auto cfg = sgld(eta, beta, 4, 0.0, TimeMode::continuous, 64);
  const auto run = chain_functional(model, S, cfg, init, horizon, 10, replicas, seed,
                                    "verify/moment_cts",
                                    [](const Vector& x) { return x.squaredNorm(); });
  const auto t = to_time(run.steps, eta);
  std::vector<double> bound;
  for (double s : t)
    bound.push_back(moment_cts(2, init.second_moment(d), *model.constants.m, *model.constants.b,
                               static_cast<double>(d), beta, s));
  Curve curve = make_curve("verify_second_moment_cts", "time", t, run.values, bound);
  report.verdicts.push_back(domination_verdict("moment_cts_p2", curve));
  report.curves.push_back(curve);
}

void verify_first_moment_disc(ExperimentReport& report, std::uint64_t seed, std::size_t replicas,
                              double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("first-moment check needs lambda > 0");
  const LossModel model = LossModel::pseudo_huber(1.0);
  const double eta = std::min(0.05, 0.5 / lambda), beta = 2.0;
  const std::size_t d = 2, n = 16, horizon = 400;
  Rng data_rng = make_stream(seed, "verify/first_moment/data", 0);
  const DataSet S = sample_dataset(n, d, model.z_max, data_rng);
  const InitialSpec init = point_mass(point({2.0, 0.0}));
  const auto cfg = sgld(eta, beta, 4, lambda, TimeMode::discrete);
  const auto run = chain_functional(model, S, cfg, init, horizon, 10, replicas, seed,
                                    "verify/first_moment", [](const Vector& x) { return x.norm(); });
  const double b = first_moment_disc(init.first_moment_bound(d), *model.constants.L, lambda,
                                     static_cast<double>(d), beta, eta);
  Curve curve = make_curve("verify_first_moment_disc", "step", std::vector<double>(run.steps.begin(), run.steps.end()),
                           run.values, std::vector<double>(run.steps.size(), b));
  report.verdicts.push_back(domination_verdict("first_moment_disc", curve));
  report.curves.push_back(curve);
}

void verify_fourth_moment(ExperimentReport& report, std::uint64_t seed, std::size_t replicas) {
  const std::size_t d = 2, n = 16, horizon = 400;
  const LossModel model = LossModel::cosine_dissipative(0.5, point({2.0, 0.0}), 1.0);
  const auto& c = model.constants;
  const double beta = 1.0;
  const double eta = std::min(0.05, 1.0 / (2.0 * *c.m));
  Rng data_rng = make_stream(seed, "verify/fourth_moment/data", 0);
  const DataSet S = sample_dataset(n, d, model.z_max, data_rng);
  const InitialSpec init = point_mass(point({1.0, 1.0}));
  const auto cfg = sgld(eta, beta, 4, 0.0, TimeMode::discrete);
  const auto run = chain_functional(model, S, cfg, init, horizon, 10, replicas, seed,
                                    "verify/fourth_moment", [](const Vector& x) {
                                      const double s = x.squaredNorm();
                                      return s * s;
                                    });
  const double b = init.fourth_moment(d) + ctilde(2, c.M, *c.m, *c.b, static_cast<double>(d), beta);
  Curve curve = make_curve("verify_fourth_moment_disc", "step", std::vector<double>(run.steps.begin(), run.steps.end()),
                           run.values, std::vector<double>(run.steps.size(), b));
  report.verdicts.push_back(domination_verdict("fourth_moment_disc", curve));
  report.curves.push_back(curve);
}

void verify_synchronous_divergence(ExperimentReport& report, std::uint64_t seed,
                                   std::size_t replicas, double lambda) {
  const LossModel model = LossModel::pseudo_huber(1.0);
  const double eta = 0.05, beta = 2.0;
  const std::size_t d = 2, n = 16, horizon = 200;
  Rng data_rng = make_stream(seed, "verify/synch/data", 0);
  const DataSet S = sample_dataset(n, d, model.z_max, data_rng);
  const DataSet S_hat = make_neighbor(S, n - 1, farthest_support_point(S[n - 1], model.z_max));
  CoupledRunSpec spec;
  spec.initial_a = point_mass(point({1.0, -1.0}));
  spec.initial_b = spec.initial_a;
  spec.horizon = horizon;
  spec.replicas = replicas;
  spec.record_every = 5;
  spec.seed = seed;
  spec.stream_label = "verify/synch";
  CouplingConfig ccfg;
  ccfg.force_index = n - 1;
  const auto cfg = sgld(eta, beta, 4, lambda, TimeMode::continuous, 16);
  const CoupledRun run = run_coupled(spec, model, S, S_hat, cfg, ccfg);
  const auto t = to_time(run.steps, eta);
  const double w1_0 = 0.0;  // identical point masses
  std::vector<double> bound;
  for (double s : t) bound.push_back(synch_div_lip(w1_0, *model.constants.L, s));
  Curve curve = make_curve("verify_synchronous_divergence", "time", t, run.dist, bound);
  report.verdicts.push_back(domination_verdict("synch_div_lip", curve));
  report.curves.push_back(curve);
}

void verify_reflection_marginals(ExperimentReport& report, std::uint64_t seed, std::size_t replicas) {
  if (replicas < 2) throw std::invalid_argument("marginal test needs at least 2 replicas");
  const LossModel model = LossModel::quadratic(1.0);
  const std::size_t d = 2, n = 8, horizon = 40;
  Rng data_rng = make_stream(seed, "verify/marginal/data", 0);
  const DataSet S = sample_dataset(n, d, model.z_max, data_rng);
  const auto cfg = sgld(0.05, 2.0, 2, 0.0, TimeMode::discrete);
  const Vector a0 = point({0.0, 0.0});
  const Vector b0 = point({3.0, 0.0});
  CouplingConfig ccfg;
  ccfg.mode = CouplingMode::reflection;

  // coupled[side][replica], plain[side][replica]
  std::vector<std::vector<Vector>> coupled(2, std::vector<Vector>(replicas));
  std::vector<std::vector<Vector>> plain(2, std::vector<Vector>(replicas));
  parallel_for(replicas, [&](std::size_t r) {
    Rng rng = make_stream(seed, "verify/marginal/coupled", r);
    CoupledState cs{a0, b0, false, std::nullopt, 0};
    for (std::size_t t = 0; t < horizon; ++t) cs = reflection_pair_step(cs, model, S, cfg, ccfg, rng);
    coupled[0][r] = cs.x;
    coupled[1][r] = cs.y;
    for (int side = 0; side < 2; ++side) {
      Rng prng = make_stream(seed, side == 0 ? "verify/marginal/plain_a" : "verify/marginal/plain_b", r);
      ChainState st{side == 0 ? a0 : b0, 0};
      for (std::size_t t = 0; t < horizon; ++t) st = advance(st, model, S, cfg, prng);
      plain[side][r] = st.x;
    }
  });

  for (int side = 0; side < 2; ++side) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
      std::vector<double> u(replicas), v(replicas);
      for (std::size_t r = 0; r < replicas; ++r) {
        u[r] = coupled[side][r](j);
        v[r] = plain[side][r](j);
      }
      const auto su = sample_moments(u);
      const auto sv = sample_moments(v);
      const std::string tag = std::string(side == 0 ? "x" : "y") + "_coord" + std::to_string(j);
      const double z_mean = (su.mean - sv.mean) / std::hypot(su.mean_se, sv.mean_se);
      const double z_var = (su.var - sv.var) / std::hypot(su.var_se, sv.var_se);
      report.verdicts.push_back(Verdict{"reflection_marginal_mean_" + tag, std::abs(z_mean) <= kTwoSidedZ99,
                                        z_mean, kTwoSidedZ99, "two-sample z statistic of the mean"});
      report.verdicts.push_back(Verdict{"reflection_marginal_var_" + tag, std::abs(z_var) <= kTwoSidedZ99,
                                        z_var, kTwoSidedZ99, "two-sample z statistic of the variance"});
    }
  }
}

void verify_reflection_meeting(ExperimentReport& report, std::uint64_t seed, std::size_t replicas) {
  const LossModel model = LossModel::quadratic(1.0);
  const DataSet S({point({0.0})});
  CoupledRunSpec spec;
  spec.initial_a = point_mass(point({0.0}));
  spec.initial_b = point_mass(point({4.0}));
  spec.horizon = 2000;
  spec.replicas = replicas;
  spec.record_every = 20;
  spec.seed = seed;
  spec.stream_label = "verify/meeting";
  CouplingConfig ccfg;
  ccfg.mode = CouplingMode::reflection;
  const auto cfg = sgld(0.01, 2.0, 1, 0.0, TimeMode::discrete);
  const CoupledRun run = run_coupled(spec, model, S, S, cfg, ccfg);
  const auto t = to_time(run.steps, cfg.eta);
  report.curves.push_back(make_curve("verify_meeting_fraction", "time", t, run.met));
  const double met = run.met.back().mean;
  report.verdicts.push_back(Verdict{"reflection_meeting", met >= 0.99, met, 0.99,
                                    "fraction of OU pairs from 0 and 4 glued by t = 20"});
}

void verify_wasserstein_convexity(ExperimentReport& report, std::uint64_t seed, std::size_t instances) {
  constexpr std::size_t kComponent = 32;
  constexpr Eigen::Index kDim = 2;
  double worst_w1 = -std::numeric_limits<double>::infinity();
  double worst_w2 = worst_w1;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng = make_stream(seed, "verify/convexity", i);
    auto cloud = [&](double shift) {
      std::vector<Vector> pts(kComponent);
      for (auto& p : pts) p = standard_normal_vector(rng, kDim) + Vector::Constant(kDim, shift);
      return pts;
    };
    const auto mu1 = cloud(0.0), nu1 = cloud(1.0), mu2 = cloud(-2.0), nu2 = cloud(3.0);
    const std::size_t j = 1 + i % 7;  // r = j / 8
    const double r = static_cast<double>(j) / 8.0;
    std::vector<Vector> mu, nu;
    for (std::size_t c = 0; c < 8; ++c) {
      const auto& src_mu = c < j ? mu1 : mu2;
      const auto& src_nu = c < j ? nu1 : nu2;
      mu.insert(mu.end(), src_mu.begin(), src_mu.end());
      nu.insert(nu.end(), src_nu.begin(), src_nu.end());
    }
    const double w1 = exact_wp_assignment(mu, nu, 1).value;
    const double w1_rhs = r * exact_wp_assignment(mu1, nu1, 1).value +
                          (1.0 - r) * exact_wp_assignment(mu2, nu2, 1).value;
    const double w2sq = std::pow(exact_wp_assignment(mu, nu, 2).value, 2);
    const double w2_rhs = r * std::pow(exact_wp_assignment(mu1, nu1, 2).value, 2) +
                          (1.0 - r) * std::pow(exact_wp_assignment(mu2, nu2, 2).value, 2);
    worst_w1 = std::max(worst_w1, w1 - w1_rhs);
    worst_w2 = std::max(worst_w2, w2sq - w2_rhs);
  }
  report.verdicts.push_back(Verdict{"wasserstein_convexity_w1", worst_w1 <= 1e-9, worst_w1, 1e-9,
                                    "max over instances of W1(mixture) - convex combination"});
  report.verdicts.push_back(Verdict{"wasserstein_convexity_w2sq", worst_w2 <= 1e-9, worst_w2, 1e-9,
                                    "max over instances of W2^2(mixture) - convex combination"});
}

void verify_certificates(ExperimentReport& report, const LossModel& model, std::uint64_t seed,
                         std::size_t probes, std::size_t d) {
  const auto dim = static_cast<Eigen::Index>(d);
  Vector w = Vector::Zero(dim);
  w(0) = 2.0;
  const std::vector<std::pair<std::string, LossModel>> models{
      {"config", model},
      {"quadratic", LossModel::quadratic(1.0)},
      {"pseudo_huber", LossModel::pseudo_huber(1.0)},
      {"cosine_dissipative", LossModel::cosine_dissipative(0.5, w, 1.0)},
  };
  for (const auto& [name, m] : models) {
    for (Assumption a : declared_assumptions(m)) {
      Rng rng = make_stream(seed, "verify/certify/" + name + "/" + to_string(a), 0);
      CertificateReport cert = certify(m, a, probes, dim, rng);
      cert.check = name + "/" + cert.check;
      report.verdicts.push_back(Verdict{"certify_" + cert.check, cert.passed, cert.worst_violation,
                                        kCertificationTolerance,
                                        std::to_string(cert.probes) + " probes"});
      report.checks.push_back(cert);
    }
  }
}

void verify_semimetric(ExperimentReport& report, const SemimetricParams& params, std::uint64_t seed,
                       std::size_t probes, std::size_t d) {
  Rng rng = make_stream(seed, "verify/semimetric", d);
  for (auto cert : check_semimetric_lemmas(params, static_cast<Eigen::Index>(d), rng, probes)) {
    cert.check = "d" + std::to_string(d) + "/" + cert.check;
    report.verdicts.push_back(Verdict{"semimetric_" + cert.check, cert.passed, cert.worst_violation,
                                      0.0, std::to_string(cert.probes) + " probes"});
    report.checks.push_back(cert);
  }
}

ExperimentReport run_verify(const ExperimentConfig& config) {
  Stopwatch clock;
  ExperimentReport report;
  report.command = "verify";
  report.config = config_to_json(config);
  const LossModel model = build_loss(config.loss, config.d);
  const std::uint64_t seed = config.seed;

  verify_certificates(report, model, seed, config.probes, config.d);

  // The semimetric suite runs with a moderate (R, phi, eps) and, when the
  // family is dissipative, with the constants the experiments use.
  verify_semimetric(report, SemimetricParams{GFunction{2.0, 0.5}, 0.1}, seed, config.probes, config.d);
  if (model.constants.dissipative()) {
    const auto dc = dissipative_for(config, model, build_initial(config.initial));
    report.constants["dissipative"] = dissipative_constants_json(dc);
    ExperimentReport scratch;
    verify_semimetric(scratch, SemimetricParams{GFunction{dc.R, dc.phi}, dc.eps}, seed + 1,
                      config.probes, config.d);
    for (auto& v : scratch.verdicts) v.name = "model_" + v.name;
    for (auto& c : scratch.checks) c.check = "model/" + c.check;
    report.verdicts.insert(report.verdicts.end(), scratch.verdicts.begin(), scratch.verdicts.end());
    report.checks.insert(report.checks.end(), scratch.checks.begin(), scratch.checks.end());
  }

  const double lambda = config.lambda > 0.0 ? config.lambda : 1.0;
  verify_moment_cts(report, seed, config.replicas);
  verify_first_moment_disc(report, seed, config.replicas, lambda);
  verify_fourth_moment(report, seed, config.replicas);
  verify_synchronous_divergence(report, seed, config.replicas, lambda);
  verify_reflection_marginals(report, seed, config.replicas);
  verify_reflection_meeting(report, seed, config.replicas);
  verify_wasserstein_convexity(report, seed, 14);
  report.wall_time_seconds = clock.seconds();
  return report;
}

}  // namespace sgldstab
