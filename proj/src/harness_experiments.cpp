#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "harness_internal.hpp"
#include "sgldstab/stats.hpp"

namespace sgldstab {

namespace detail {

std::optional<EffectiveDissipative> effective_dissipative(const LossModel& model, double lambda) {
  const auto& c = model.constants;
  if (!c.dissipative()) return std::nullopt;
  return EffectiveDissipative{c.M + lambda, *c.m + lambda, *c.b};
}

DissipativeConstants dissipative_for(const ExperimentConfig& config, const LossModel& model,
                                     const InitialSpec& init) {
  const auto eff = effective_dissipative(model, config.lambda);
  if (!eff) throw std::invalid_argument("loss family declares no dissipativity constants");
  const auto d = static_cast<Eigen::Index>(config.d);
  return dissipative_constants(eff->M, eff->m, eff->b, static_cast<double>(config.d), config.beta,
                               init.second_moment(d), init.fourth_moment(d));
}

LipschitzConstants lipschitz_for(const ExperimentConfig& config, const LossModel& model,
                                 const InitialSpec& init) {
  const double L = model.constants.L ? *model.constants.L : config.reference_L;
  return lipschitz_constants(L, model.constants.M, config.lambda, config.beta,
                             init.first_moment_bound(static_cast<Eigen::Index>(config.d)),
                             config.c2_form);
}

std::vector<std::size_t> record_grid(std::size_t horizon, std::size_t stride) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t <= horizon; ++t)
    if (t % stride == 0 || t == horizon) out.push_back(t);
  return out;
}

Curve make_curve(const std::string& name, const std::string& unit, const std::vector<double>& t,
                 const std::vector<MeanSem>& values, std::vector<double> bound) {
  Curve c;
  c.name = name;
  c.t_unit = unit;
  c.t = t;
  for (const auto& v : values) {
    c.mean.push_back(v.mean);
    c.sem.push_back(v.sem);
  }
  c.bound = std::move(bound);
  return c;
}

double worst_domination_margin(const Curve& curve) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.t.size() && i < curve.bound.size(); ++i) {
    const double margin = std::abs(curve.mean[i]) - curve.bound[i] - 3.0 * curve.sem[i];
    if (std::isnan(margin)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, margin);
  }
  return worst;
}

Verdict domination_verdict(const std::string& name, const Curve& curve) {
  Verdict v;
  v.name = name;
  v.measured = worst_domination_margin(curve);
  v.threshold = 0.0;
  v.passed = v.measured <= 0.0;
  v.detail = "max over t of |mean| - bound - 3 sem on curve " + curve.name;
  return v;
}

Fit to_fit(const std::string& name, const LinearFit& f) {
  Fit out;
  out.name = name;
  out.slope = f.slope;
  out.slope_se = f.slope_se;
  out.intercept = f.intercept;
  out.points = f.points;
  out.ci_low = f.slope - 1.96 * f.slope_se;
  out.ci_high = f.slope + 1.96 * f.slope_se;
  return out;
}

}  // namespace detail

using namespace detail;

PlateauResult detect_plateau(const std::vector<double>& t,
                             const std::vector<std::vector<double>>& replica_values) {
  const std::size_t records = t.size();
  if (records < 4 || replica_values.size() != records)
    throw std::invalid_argument("plateau detection needs at least 4 aligned records");
  std::size_t start = (3 * records) / 4;
  if (records - start < 3) start = records - 3;
  const std::size_t replicas = replica_values.front().size();
  const std::vector<double> wt(t.begin() + static_cast<std::ptrdiff_t>(start), t.end());

  std::vector<double> slopes(replicas), levels(replicas), ys(wt.size());
  for (std::size_t r = 0; r < replicas; ++r) {
    double level = 0.0;
    for (std::size_t i = 0; i < wt.size(); ++i) {
      ys[i] = replica_values[start + i][r];
      level += ys[i];
    }
    slopes[r] = fit_line(wt, ys).slope;
    levels[r] = level / static_cast<double>(wt.size());
  }
  double band = 0.0;
  for (std::size_t i = start; i < records; ++i) band += mean_sem(replica_values[i]).sem;
  band /= static_cast<double>(wt.size());

  const MeanSem slope = mean_sem(slopes);
  const MeanSem level = mean_sem(levels);
  PlateauResult out;
  out.slope = slope.mean;
  out.slope_se = slope.sem;
  out.level = level.mean;
  out.level_sem = level.sem;
  out.band_sem = band;
  out.window = wt.back() - wt.front();
  const bool ci_has_zero = std::abs(slope.mean) <= 1.96 * slope.sem;
  const bool flat = std::abs(slope.mean) * out.window <= 2.0 * band;
  out.plateau = ci_has_zero && flat;
  return out;
}

Fit fit_decay_rate(const std::string& name, const std::vector<double>& time,
                   const std::vector<MeanSem>& curve, const std::vector<MeanSem>& met,
                   std::size_t replicas) {
  const double burn = 0.1 * time.back();
  const double min_unmet =
      std::max(20.0, std::ceil(0.02 * static_cast<double>(replicas)));
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < time.size(); ++i) {
    const double unmet = (1.0 - met[i].mean) * static_cast<double>(replicas);
    if (time[i] < burn || unmet + 1e-9 < min_unmet || !(curve[i].mean > 0.0)) continue;
    xs.push_back(time[i]);
    ys.push_back(std::log(curve[i].mean));
  }
  if (xs.size() < 2) {
    Fit empty;
    empty.name = name;
    empty.points = xs.size();
    return empty;
  }
  return to_fit(name, fit_line(xs, ys));
}

namespace {

std::vector<double> as_doubles(const std::vector<std::size_t>& v) {
  return std::vector<double>(v.begin(), v.end());
}

SemimetricParams semimetric_for(const std::optional<DissipativeConstants>& dc,
                                const std::optional<LipschitzConstants>& lc) {
  SemimetricParams p;
  if (dc) {
    p.g = GFunction{dc->R, dc->phi};
    p.eps = dc->eps;
  } else if (lc) {
    p.g = GFunction{lc->R_kappa, 1.0};
  }
  return p;
}

struct StabilityRun {
  CoupledRun run;
  PlateauResult plateau;
};

StabilityRun stability_run(const ExperimentConfig& config, const LossModel& model,
                           std::size_t n, std::size_t k, const std::string& label,
                           const SemimetricParams& params) {
  ExperimentConfig local = config;
  local.n = n;
  local.k = k;
  SgldConfig cfg = build_sgld(local);
  cfg.validate(n);
  const auto d = static_cast<Eigen::Index>(config.d);
  Rng data_rng = make_stream(config.seed, "stability/data", n);
  const DataSet S = sample_dataset(n, d, model.z_max, data_rng);
  const DataSet S_hat = make_neighbor(S, n - 1, farthest_support_point(S[n - 1], model.z_max));

  CoupledRunSpec spec;
  spec.initial_a = build_initial(config.initial);
  spec.initial_b = spec.initial_a;
  spec.horizon = config.horizon;
  spec.replicas = config.replicas;
  spec.record_every = record_stride(config);
  spec.seed = config.seed;
  spec.stream_label = label;
  spec.rho_params = params;
  spec.keep_replica_dist = true;
  CouplingConfig ccfg;
  ccfg.mode = CouplingMode::synchronous;

  StabilityRun out;
  out.run = run_coupled(spec, model, S, S_hat, cfg, ccfg);
  out.plateau = detect_plateau(as_doubles(out.run.steps), out.run.replica_dist);
  return out;
}

Verdict plateau_verdict(const std::string& name, const PlateauResult& p) {
  Verdict v;
  v.name = name;
  v.passed = p.plateau;
  v.measured = p.slope;
  v.threshold = 0.0;
  v.detail = "final-quarter slope " + format_number(p.slope) + " +- " + format_number(p.slope_se) +
             ", drift over window " + format_number(std::abs(p.slope) * p.window) +
             " vs 2 sem band " + format_number(2.0 * p.band_sem);
  return v;
}

}  // namespace

ExperimentReport run_stability(const ExperimentConfig& config) {
  Stopwatch clock;
  ExperimentReport report;
  report.command = "experiment";
  report.config = config_to_json(config);
  const LossModel model = build_loss(config.loss, config.d);
  const InitialSpec init = build_initial(config.initial);
  const bool continuous = config.time_mode == TimeMode::continuous;

  std::optional<LipschitzConstants> lc;
  std::optional<DissipativeConstants> dc;
  if (model.constants.L && config.lambda > 0.0) {
    lc = lipschitz_for(config, model, init);
    report.constants["lipschitz"] = lipschitz_constants_json(*lc);
  }
  if (model.constants.dissipative()) {
    dc = dissipative_for(config, model, init);
    report.constants["dissipative"] = dissipative_constants_json(*dc);
  }
  const SemimetricParams params = semimetric_for(dc, lc);

  std::vector<std::size_t> ns = config.n_list.empty() ? std::vector<std::size_t>{config.n} : config.n_list;
  std::vector<double> log_n, log_level;
  for (std::size_t n : ns) {
    const std::string tag = "n" + std::to_string(n);
    const auto res = stability_run(config, model, n, config.k, "stability/" + tag, params);
    const auto t = as_doubles(res.run.steps);

    std::vector<double> bound;
    if (lc) {
      for (double s : t)
        bound.push_back(lipschitz_w1_envelope(*lc, n, config.k, config.eta, s, config.d, continuous));
    }
    Curve dist = make_curve("divergence_" + tag, "step", t, res.run.dist, bound);
    if (lc) report.verdicts.push_back(domination_verdict("envelope_" + tag, dist));
    report.curves.push_back(dist);

    if (dc) {
      std::vector<double> rho_bound;
      for (double s : t)
        rho_bound.push_back(dissipative_rho_envelope(*dc, n, config.k, config.eta, s, continuous));
      Curve rho_curve = make_curve("rho_" + tag, "step", t, res.run.rho, rho_bound);
      report.verdicts.push_back(domination_verdict("rho_envelope_" + tag, rho_curve));
      report.curves.push_back(rho_curve);
    }

    if (config.k < n) report.verdicts.push_back(plateau_verdict("plateau_" + tag, res.plateau));
    if (res.plateau.level > 0.0) {
      log_n.push_back(std::log(static_cast<double>(n)));
      log_level.push_back(std::log(res.plateau.level));
    }
  }

  if (ns.size() >= 2) {
    Verdict v;
    v.name = "n_scaling";
    v.threshold = -1.0;
    if (log_n.size() == ns.size()) {
      const Fit fit = to_fit("plateau_level_vs_n", fit_line(log_n, log_level));
      report.fits.push_back(fit);
      v.measured = fit.slope;
      v.passed = fit.slope >= -1.3 && fit.slope <= -0.7;
      v.detail = "log-log slope of final-quarter level against n; accepted range [-1.3, -0.7]";
    } else {
      v.passed = false;
      v.detail = "a plateau level was not positive";
    }
    report.verdicts.push_back(v);
  }

  if (config.full_batch_control) {
    const std::size_t n = ns[ns.size() / 2];
    const std::string tag = "full_batch_n" + std::to_string(n);
    const auto res = stability_run(config, model, n, n, "stability/" + tag, params);
    const auto t = as_doubles(res.run.steps);
    std::vector<double> bound;
    if (lc) {
      for (double s : t) bound.push_back(lipschitz_w1_envelope(*lc, n, n, config.eta, s, config.d, continuous));
    }
    report.curves.push_back(make_curve("divergence_" + tag, "step", t, res.run.dist, bound));
    Verdict v;
    v.name = "full_batch_no_plateau";
    v.measured = res.plateau.slope;
    v.threshold = 0.0;
    v.passed = !res.plateau.plateau && res.plateau.slope > 0.0;
    v.detail = "k = n: expects no plateau and a positive final-quarter slope; slope " +
               format_number(res.plateau.slope) + " +- " + format_number(res.plateau.slope_se) +
               ", level " + format_number(res.plateau.level) + " +- " + format_number(res.plateau.level_sem);
    report.verdicts.push_back(v);
  }
  report.wall_time_seconds = clock.seconds();
  return report;
}

ExperimentReport run_generalization(const ExperimentConfig& config) {
  Stopwatch clock;
  ExperimentReport report;
  report.command = "experiment";
  report.config = config_to_json(config);
  const LossModel model = build_loss(config.loss, config.d);
  const InitialSpec init = build_initial(config.initial);
  const SgldConfig cfg = build_sgld(config);
  cfg.validate(config.n);
  const bool continuous = config.time_mode == TimeMode::continuous;
  const auto d = static_cast<Eigen::Index>(config.d);

  std::optional<LipschitzConstants> lc;
  std::optional<DissipativeConstants> dc;
  if (model.constants.L && config.lambda > 0.0) {
    lc = lipschitz_for(config, model, init);
    report.constants["lipschitz"] = lipschitz_constants_json(*lc);
  } else if (model.constants.dissipative()) {
    dc = dissipative_for(config, model, init);
    report.constants["dissipative"] = dissipative_constants_json(*dc);
  } else {
    throw std::invalid_argument("no generalization theorem applies: need L with lambda > 0, or (m, b)");
  }

  Rng pop_rng = make_stream(config.seed, "generalization/population", 0);
  std::vector<Vector> population;
  population.reserve(config.population_samples);
  for (std::size_t i = 0; i < config.population_samples; ++i)
    population.push_back(uniform_in_ball(pop_rng, d, model.z_max));

  const auto steps = record_grid(config.horizon, record_stride(config));
  const std::size_t records = steps.size();
  std::vector<RunningStats> acc(records);
  constexpr std::size_t kBlock = 64;
  std::vector<double> block(kBlock * records);
  for (std::size_t start = 0; start < config.replicas; start += kBlock) {
    const std::size_t count = std::min(kBlock, config.replicas - start);
    parallel_for(count, [&](std::size_t local) {
      Rng rng = make_stream(config.seed, "generalization", start + local);
      const DataSet S = sample_dataset(config.n, d, model.z_max, rng);
      ChainState state{init.sample(d, rng), 0};
      std::size_t rec = 0;
      for (std::size_t t = 0;; ++t) {
        if (rec < records && steps[rec] == t) {
          double pop = 0.0;
          for (const auto& z : population) pop += eval_loss(model, state.x, z);
          pop /= static_cast<double>(population.size());
          block[local * records + rec] = pop - empirical_risk(model, S, state.x);
          ++rec;
        }
        if (t == config.horizon) break;
        state = advance(state, model, S, cfg, rng);
      }
    });
    for (std::size_t local = 0; local < count; ++local)
      for (std::size_t rec = 0; rec < records; ++rec) acc[rec].add(block[local * records + rec]);
  }
  std::vector<MeanSem> gen(records);
  for (std::size_t rec = 0; rec < records; ++rec) gen[rec] = acc[rec].result();

  std::vector<double> bound;
  for (std::size_t s : steps) {
    const double t = static_cast<double>(s);
    bound.push_back(lc ? lipschitz_gen_bound(*lc, config.n, config.k, config.eta, t, config.d, continuous)
                       : dissipative_gen_bound(*dc, config.n, config.k, config.eta, t, continuous));
  }
  Curve curve = make_curve("generalization", "step", as_doubles(steps), gen, bound);
  report.verdicts.push_back(domination_verdict("bound_domination", curve));
  report.curves.push_back(curve);
  report.wall_time_seconds = clock.seconds();
  return report;
}

ExperimentReport run_contraction(const ExperimentConfig& config) {
  Stopwatch clock;
  ExperimentReport report;
  report.command = "experiment";
  report.config = config_to_json(config);
  if (config.coupling_mode != CouplingMode::reflection)
    throw std::invalid_argument("contraction needs coupling.mode = reflection");
  if (!config.initial_b) throw std::invalid_argument("contraction needs initial_b");
  const LossModel model = build_loss(config.loss, config.d);
  const InitialSpec init_a = build_initial(config.initial);
  const InitialSpec init_b = build_initial(*config.initial_b);
  const SgldConfig cfg = build_sgld(config);
  cfg.validate(config.n);
  const auto d = static_cast<Eigen::Index>(config.d);

  Rng data_rng = make_stream(config.seed, "contraction/data", 0);
  const DataSet S = sample_dataset(config.n, d, model.z_max, data_rng);

  CoupledRunSpec spec;
  spec.initial_a = init_a;
  spec.initial_b = init_b;
  spec.horizon = config.horizon;
  spec.replicas = config.replicas;
  spec.record_every = record_stride(config);
  spec.seed = config.seed;
  spec.stream_label = "contraction";
  CouplingConfig ccfg;
  ccfg.mode = CouplingMode::reflection;
  ccfg.meet_threshold = config.meet_threshold;

  // With weight decay the Lipschitz-regime constants apply (L from the
  // family, or reference_L); otherwise the dissipative ones.
  const bool lipschitz_path = config.lambda > 0.0;
  double reference_rate = 0.0;
  double allowance = 0.0;
  if (lipschitz_path) {
    const auto lc = lipschitz_for(config, model, init_a);
    report.constants["lipschitz"] = lipschitz_constants_json(lc);
    spec.rho_params.g = GFunction{lc.R_kappa, 1.0};
    reference_rate = 1.0 / lc.C1;
    allowance = std::log(2.0 * std::max(lc.c1, 1.0));
  } else {
    const auto dc = dissipative_for(config, model, init_a);
    report.constants["dissipative"] = dissipative_constants_json(dc);
    spec.rho_params.g = GFunction{dc.R, dc.phi};
    spec.rho_params.eps = dc.eps;
    reference_rate = 1.0 / dc.C4;
    allowance = std::log(1.0 / dc.phi);
  }
  report.constants["reference_rate"] = reference_rate;
  report.constants["prefactor_allowance"] = allowance;

  const CoupledRun run = run_coupled(spec, model, S, S, cfg, ccfg);
  std::vector<double> time;
  for (std::size_t s : run.steps) time.push_back(config.eta * static_cast<double>(s));
  const auto& values = lipschitz_path ? run.rho_g : run.rho;
  const std::string name = lipschitz_path ? "rho_g" : "rho";

  Curve curve = make_curve(name, "time", time, values);
  report.curves.push_back(curve);
  report.curves.push_back(make_curve("met_fraction", "time", time, run.met));
  report.curves.push_back(make_curve("distance", "time", time, run.dist));

  Verdict v;
  v.name = "contraction_rate";
  v.threshold = reference_rate;
  const bool identically_zero =
      std::all_of(values.begin(), values.end(), [](const MeanSem& m) { return m.mean == 0.0; });
  if (identically_zero) {
    v.passed = true;
    v.measured = std::numeric_limits<double>::infinity();
    v.detail = "pairs start coupled; the curve is identically zero";
  } else {
    const Fit fit = fit_decay_rate("log_" + name + "_vs_time", time, values, run.met, config.replicas);
    report.fits.push_back(fit);
    v.measured = -fit.slope;
    v.passed = fit.points >= 2 && -fit.slope >= reference_rate;
    v.detail = "fitted decay rate from " + std::to_string(fit.points) +
               " records after burn-in against the reference rate";
  }
  report.verdicts.push_back(v);
  report.wall_time_seconds = clock.seconds();
  return report;
}

ExperimentReport run_discretization(const ExperimentConfig& config) {
  Stopwatch clock;
  ExperimentReport report;
  report.command = "experiment";
  report.config = config_to_json(config);
  if (config.eta_list.size() < 3) throw std::invalid_argument("discretization needs at least 3 eta values");
  const LossModel model = build_loss(config.loss, config.d);
  const InitialSpec init = build_initial(config.initial);
  const auto d = static_cast<Eigen::Index>(config.d);
  Rng data_rng = make_stream(config.seed, "discretization/data", 0);
  const DataSet S = sample_dataset(config.n, d, model.z_max, data_rng);

  // Lipschitz families are measured in W1 against the W1 lemma, dissipative
  // ones in W2 against the square root of the W2^2 lemma.
  const bool lipschitz = model.constants.L && config.lambda > 0.0;
  const auto eff = effective_dissipative(model, config.lambda);
  if (!lipschitz && !eff)
    throw std::invalid_argument("no discretization lemma applies: need L with lambda > 0, or (m, b)");
  const int p = lipschitz ? 1 : 2;
  report.constants["metric"] = lipschitz ? "W1" : "W2";

  std::vector<double> etas = config.eta_list;
  std::vector<MeanSem> plain_gap, multi_gap;
  std::vector<double> bound;
  for (std::size_t e = 0; e < etas.size(); ++e) {
    const double eta = etas[e];
    ExperimentConfig local = config;
    local.eta = eta;
    local.variant = VariantSpec{};
    local.time_mode = TimeMode::discrete;
    SgldConfig cfg = build_sgld(local);
    cfg.validate(config.n);
    const auto T = static_cast<std::size_t>(std::floor(1.0 / eta));
    const std::size_t group = (config.reference_substeps + T - 1) / T;
    const std::size_t T_ref = T * group;

    std::vector<Vector> ref(config.samples), plain(config.samples), multi(config.samples);
    parallel_for(config.samples, [&](std::size_t i) {
      Rng rng = make_stream(config.seed, "discretization/eta" + std::to_string(e), i);
      const ChainState start{init.sample(d, rng), 0};
      const auto batch = sample_minibatch(config.n, config.k, rng);
      std::vector<Vector> fine(T_ref, Vector(d));
      for (auto& inc : fine) fill_standard_normal(rng, inc);

      ref[i] = integrate_window(start, model, S, cfg, batch, fine).x;

      Vector total = Vector::Zero(d);
      for (const auto& inc : fine) total += inc;
      NoiseDraw draw{total / std::sqrt(static_cast<double>(T_ref)), batch};
      plain[i] = sgld_step(start, model, S, cfg, draw).x;

      std::vector<Vector> coarse(T, Vector::Zero(d));
      for (std::size_t j = 0; j < T_ref; ++j) coarse[j / group] += fine[j];
      for (auto& c : coarse) c /= std::sqrt(static_cast<double>(group));
      multi[i] = integrate_window(start, model, S, cfg, batch, coarse).x;
    });
    plain_gap.push_back(MeanSem{exact_wp_assignment(plain, ref, p).value, 0.0});
    multi_gap.push_back(MeanSem{exact_wp_assignment(multi, ref, p).value, 0.0});
    if (lipschitz) {
      bound.push_back(disc_err_lip(eta, config.lambda, model.constants.M, *model.constants.L,
                                   init.first_moment_bound(d), static_cast<double>(config.d), config.beta));
    } else {
      bound.push_back(std::sqrt(disc_err_diss_sq(eta, eff->M, eff->m, eff->b,
                                                 static_cast<double>(config.d), config.beta,
                                                 init.second_moment(d))));
    }
  }

  Curve plain_curve = make_curve("gap_plain", "eta", etas, plain_gap, bound);
  Curve multi_curve = make_curve("gap_multistep", "eta", etas, multi_gap, bound);
  report.curves.push_back(plain_curve);
  report.curves.push_back(multi_curve);

  auto slope_of = [&](const std::string& name, const std::vector<MeanSem>& gaps) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < etas.size(); ++i) {
      lx.push_back(std::log(etas[i]));
      ly.push_back(std::log(std::max(gaps[i].mean, 1e-300)));
    }
    return to_fit(name, fit_line(lx, ly));
  };
  const Fit plain_fit = slope_of("log_gap_plain_vs_log_eta", plain_gap);
  const Fit multi_fit = slope_of("log_gap_multistep_vs_log_eta", multi_gap);
  report.fits.push_back(plain_fit);
  report.fits.push_back(multi_fit);

  report.verdicts.push_back(Verdict{"plain_slope", plain_fit.slope >= 1.25, plain_fit.slope, 1.25,
                                    "log-log slope of the one-window gap of the plain kernel"});
  report.verdicts.push_back(Verdict{"multistep_slope", multi_fit.slope >= 1.7, multi_fit.slope, 1.7,
                                    "log-log slope of the one-window gap of the multistep kernel"});
  auto within = [&](const std::string& name, const std::vector<MeanSem>& gaps) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < gaps.size(); ++i) worst = std::max(worst, gaps[i].mean - bound[i]);
    return Verdict{name, worst <= 0.0, worst, 0.0, "max over eta of gap - lemma bound"};
  };
  report.verdicts.push_back(within("plain_within_bound", plain_gap));
  report.verdicts.push_back(within("multistep_within_bound", multi_gap));
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < etas.size(); ++i) worst = std::max(worst, multi_gap[i].mean - plain_gap[i].mean);
  report.verdicts.push_back(Verdict{"multistep_not_worse", worst <= 0.0, worst, 0.0,
                                    "max over eta of multistep gap - plain gap"});
  report.wall_time_seconds = clock.seconds();
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  switch (config.experiment) {
    case ExperimentKind::stability: return run_stability(config);
    case ExperimentKind::generalization: return run_generalization(config);
    case ExperimentKind::contraction: return run_contraction(config);
    case ExperimentKind::discretization: return run_discretization(config);
    case ExperimentKind::verify: return run_verify(config);
  }
  throw std::logic_error("unreachable");
}

ExperimentReport run_bounds(const ExperimentConfig& config) {
  ExperimentReport report;
  report.command = "bounds";
  report.config = config_to_json(config);
  const LossModel model = build_loss(config.loss, config.d);
  const InitialSpec init = build_initial(config.initial);
  const auto steps = record_grid(config.horizon, record_stride(config));
  const auto t = as_doubles(steps);

  auto bound_curve = [&](const std::string& name, auto&& fn) {
    Curve c;
    c.name = name;
    c.t = t;
    for (double s : t) c.bound.push_back(fn(s));
    return c;
  };
  if (config.lambda > 0.0 && (model.constants.L || config.loss.family == LossFamily::quadratic)) {
    const auto lc = lipschitz_for(config, model, init);
    report.constants["lipschitz"] = lipschitz_constants_json(lc);
    if (config.eta < 1.0) {
      report.curves.push_back(bound_curve("gen_cts_lip", [&](double s) {
        return lipschitz_gen_bound(lc, config.n, config.k, config.eta, s, config.d, true);
      }));
      if (config.eta < 1.0 / config.lambda) {
        report.curves.push_back(bound_curve("gen_disc_lip", [&](double s) {
          return lipschitz_gen_bound(lc, config.n, config.k, config.eta, s, config.d, false);
        }));
      }
    }
  }
  if (model.constants.dissipative()) {
    const auto dc = dissipative_for(config, model, init);
    report.constants["dissipative"] = dissipative_constants_json(dc);
    report.constants["c_tilde_3"] = mixture_rate(dc.C4, config.n, config.k, config.eta);
    if (config.eta < 1.0) {
      report.curves.push_back(bound_curve("gen_cts_diss", [&](double s) {
        return dissipative_gen_bound(dc, config.n, config.k, config.eta, s, true);
      }));
      if (config.eta <= 1.0 / (2.0 * dc.m)) {
        report.curves.push_back(bound_curve("gen_disc_diss", [&](double s) {
          return dissipative_gen_bound(dc, config.n, config.k, config.eta, s, false);
        }));
      }
    }
    const auto eff = *effective_dissipative(model, config.lambda);
    report.constants["gradient_origin"] = gradient_origin(eff.M, eff.m, eff.b);
    report.constants["minima_radius"] = minima_radius(eff.m, eff.b);
    report.curves.push_back(bound_curve("moment_cts_p2", [&](double s) {
      return moment_cts(2, init.second_moment(static_cast<Eigen::Index>(config.d)), eff.m, eff.b,
                        static_cast<double>(config.d), config.beta, config.eta * s);
    }));
  }
  return report;
}

ExperimentReport run_simulate(const ExperimentConfig& config) {
  Stopwatch clock;
  ExperimentReport report;
  report.command = "simulate";
  report.config = config_to_json(config);
  const LossModel model = build_loss(config.loss, config.d);
  const InitialSpec init = build_initial(config.initial);
  const SgldConfig cfg = build_sgld(config);
  cfg.validate(config.n);
  const auto d = static_cast<Eigen::Index>(config.d);
  Rng data_rng = make_stream(config.seed, "simulate/data", 0);
  const DataSet S = sample_dataset(config.n, d, model.z_max, data_rng);

  const auto steps = record_grid(config.horizon, record_stride(config));
  const std::size_t records = steps.size();
  std::vector<std::vector<RunningStats>> acc(3, std::vector<RunningStats>(records));
  constexpr std::size_t kBlock = 64;
  std::vector<double> block(kBlock * records * 3);
  for (std::size_t start = 0; start < config.replicas; start += kBlock) {
    const std::size_t count = std::min(kBlock, config.replicas - start);
    parallel_for(count, [&](std::size_t local) {
      Rng rng = make_stream(config.seed, "simulate", start + local);
      ChainState state{init.sample(d, rng), 0};
      std::size_t rec = 0;
      for (std::size_t t = 0;; ++t) {
        if (rec < records && steps[rec] == t) {
          double* slot = block.data() + (local * records + rec) * 3;
          slot[0] = state.x.norm();
          slot[1] = state.x.squaredNorm();
          slot[2] = empirical_risk(model, S, state.x);
          ++rec;
        }
        if (t == config.horizon) break;
        state = advance(state, model, S, cfg, rng);
      }
    });
    for (std::size_t local = 0; local < count; ++local)
      for (std::size_t rec = 0; rec < records; ++rec)
        for (std::size_t q = 0; q < 3; ++q) acc[q][rec].add(block[(local * records + rec) * 3 + q]);
  }
  auto collect = [&](std::size_t q) {
    std::vector<MeanSem> out(records);
    for (std::size_t rec = 0; rec < records; ++rec) out[rec] = acc[q][rec].result();
    return out;
  };
  const auto t = as_doubles(steps);
  std::vector<double> norm_bound, sq_bound;
  if (model.constants.L && config.lambda > 0.0 && config.time_mode == TimeMode::discrete &&
      config.eta < 1.0 / config.lambda) {
    const double b = first_moment_disc(init.first_moment_bound(d), *model.constants.L, config.lambda,
                                       static_cast<double>(config.d), config.beta, config.eta);
    norm_bound.assign(t.size(), b);
  }
  if (const auto eff = effective_dissipative(model, config.lambda);
      eff && config.time_mode == TimeMode::continuous) {
    for (double s : t)
      sq_bound.push_back(moment_cts(2, init.second_moment(d), eff->m, eff->b,
                                    static_cast<double>(config.d), config.beta, config.eta * s));
  }
  report.curves.push_back(make_curve("norm", "step", t, collect(0), norm_bound));
  report.curves.push_back(make_curve("norm_sq", "step", t, collect(1), sq_bound));
  report.curves.push_back(make_curve("empirical_risk", "step", t, collect(2)));
  if (!norm_bound.empty()) report.verdicts.push_back(domination_verdict("first_moment", report.curves[0]));
  if (!sq_bound.empty()) report.verdicts.push_back(domination_verdict("second_moment", report.curves[1]));
  report.wall_time_seconds = clock.seconds();
  return report;
}

ExperimentReport run_couple(const ExperimentConfig& config) {
  Stopwatch clock;
  ExperimentReport report;
  report.command = "couple";
  report.config = config_to_json(config);
  const LossModel model = build_loss(config.loss, config.d);
  const SgldConfig cfg = build_sgld(config);
  cfg.validate(config.n);
  const auto d = static_cast<Eigen::Index>(config.d);
  Rng data_rng = make_stream(config.seed, "couple/data", 0);
  const DataSet S = sample_dataset(config.n, d, model.z_max, data_rng);
  const bool reflection = config.coupling_mode == CouplingMode::reflection;
  const DataSet S_b =
      reflection ? S : make_neighbor(S, config.n - 1, farthest_support_point(S[config.n - 1], model.z_max));

  CoupledRunSpec spec;
  spec.initial_a = build_initial(config.initial);
  spec.initial_b = config.initial_b ? build_initial(*config.initial_b) : spec.initial_a;
  spec.horizon = config.horizon;
  spec.replicas = config.replicas;
  spec.record_every = record_stride(config);
  spec.seed = config.seed;
  spec.stream_label = "couple";
  if (model.constants.dissipative()) {
    const auto dc = dissipative_for(config, model, spec.initial_a);
    report.constants["dissipative"] = dissipative_constants_json(dc);
    spec.rho_params.g = GFunction{dc.R, dc.phi};
    spec.rho_params.eps = dc.eps;
  } else if (config.lambda > 0.0) {
    const auto lc = lipschitz_for(config, model, spec.initial_a);
    report.constants["lipschitz"] = lipschitz_constants_json(lc);
    spec.rho_params.g = GFunction{lc.R_kappa, 1.0};
  }
  CouplingConfig ccfg;
  ccfg.mode = config.coupling_mode;
  ccfg.meet_threshold = config.meet_threshold;
  const CoupledRun run = run_coupled(spec, model, S, S_b, cfg, ccfg);
  const auto t = as_doubles(run.steps);
  report.curves.push_back(make_curve("distance", "step", t, run.dist));
  report.curves.push_back(make_curve("distance_sq", "step", t, run.dist_sq));
  report.curves.push_back(make_curve("rho", "step", t, run.rho));
  report.curves.push_back(make_curve("rho_g", "step", t, run.rho_g));
  report.curves.push_back(make_curve("met_fraction", "step", t, run.met));
  report.wall_time_seconds = clock.seconds();
  return report;
}

}  // namespace sgldstab
