#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sgldstab/harness.hpp"

namespace sgldstab {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::stability: return "stability";
    case ExperimentKind::generalization: return "generalization";
    case ExperimentKind::contraction: return "contraction";
    case ExperimentKind::discretization: return "discretization";
    case ExperimentKind::verify: return "verify";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto kind : {ExperimentKind::stability, ExperimentKind::generalization,
                    ExperimentKind::contraction, ExperimentKind::discretization,
                    ExperimentKind::verify}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown experiment: " + name);
}

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
  }
}

double get_double(const Json& v, const std::string& key) {
  if (!v.is_number()) throw std::invalid_argument("'" + key + "' must be a number");
  return v.get<double>();
}

std::size_t get_count(const Json& v, const std::string& key) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
    throw std::invalid_argument("'" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

std::string get_string(const Json& v, const std::string& key) {
  if (!v.is_string()) throw std::invalid_argument("'" + key + "' must be a string");
  return v.get<std::string>();
}

bool get_bool(const Json& v, const std::string& key) {
  if (!v.is_boolean()) throw std::invalid_argument("'" + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> get_doubles(const Json& v, const std::string& key) {
  if (!v.is_array()) throw std::invalid_argument("'" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(get_double(e, key));
  return out;
}

std::vector<std::size_t> get_counts(const Json& v, const std::string& key) {
  if (!v.is_array()) throw std::invalid_argument("'" + key + "' must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(get_count(e, key));
  return out;
}

LossSpec parse_loss(const Json& j) {
  reject_unknown(j, {"family", "z_max", "a", "w", "constants"}, "loss");
  LossSpec spec;
  if (!j.contains("family")) throw std::invalid_argument("loss.family is required");
  spec.family = loss_family_from_string(get_string(j.at("family"), "family"));
  if (j.contains("z_max")) spec.z_max = get_double(j.at("z_max"), "z_max");
  if (j.contains("a")) spec.a = get_double(j.at("a"), "a");
  if (j.contains("w")) spec.w = get_doubles(j.at("w"), "w");
  if (j.contains("constants")) {
    const Json& c = j.at("constants");
    reject_unknown(c, {"L", "M", "m", "b"}, "loss.constants");
    if (c.contains("L")) spec.L = get_double(c.at("L"), "L");
    if (c.contains("M")) spec.M = get_double(c.at("M"), "M");
    if (c.contains("m")) spec.m = get_double(c.at("m"), "m");
    if (c.contains("b")) spec.b = get_double(c.at("b"), "b");
  }
  return spec;
}

VariantSpec parse_variant(const Json& j) {
  reject_unknown(j, {"kind", "radius", "sigma", "substeps"}, "variant");
  VariantSpec spec;
  const std::string kind = j.contains("kind") ? get_string(j.at("kind"), "kind") : "plain";
  if (kind == "plain") spec.kind = VariantKind::plain;
  else if (kind == "projected") spec.kind = VariantKind::projected;
  else if (kind == "anisotropic") spec.kind = VariantKind::anisotropic;
  else if (kind == "multistep") spec.kind = VariantKind::multistep;
  else throw std::invalid_argument("unknown variant kind: " + kind);
  if (j.contains("radius")) spec.radius = get_double(j.at("radius"), "radius");
  if (j.contains("substeps")) spec.substeps = get_count(j.at("substeps"), "substeps");
  if (j.contains("sigma")) {
    const Json& s = j.at("sigma");
    if (!s.is_array()) throw std::invalid_argument("'sigma' must be an array of rows");
    for (const auto& row : s) spec.sigma.push_back(get_doubles(row, "sigma"));
  }
  return spec;
}

InitialConfig parse_initial(const Json& j, const std::string& where) {
  reject_unknown(j, {"mean", "sigma"}, where);
  InitialConfig init;
  if (j.contains("mean")) init.mean = get_doubles(j.at("mean"), "mean");
  if (j.contains("sigma")) init.sigma = get_double(j.at("sigma"), "sigma");
  return init;
}

Json initial_json(const InitialConfig& init) {
  return Json{{"mean", init.mean}, {"sigma", init.sigma}};
}

}  // namespace

ExperimentConfig parse_config(const Json& j) {
  reject_unknown(j,
                 {"experiment", "loss", "n", "k", "d", "eta", "beta", "lambda", "horizon", "replicas",
                  "seed", "variant", "substeps_cts", "time_mode", "n_list", "eta_list", "coupling",
                  "initial", "initial_b", "reference_L", "record_every", "population_samples",
                  "reference_substeps", "samples", "probes", "full_batch_control", "c2_form",
                  "format"},
                 "config");
  ExperimentConfig c;
  if (j.contains("experiment")) c.experiment = experiment_kind_from_string(get_string(j.at("experiment"), "experiment"));
  if (j.contains("loss")) c.loss = parse_loss(j.at("loss"));
  if (j.contains("n")) c.n = get_count(j.at("n"), "n");
  if (j.contains("k")) c.k = get_count(j.at("k"), "k");
  if (j.contains("d")) c.d = get_count(j.at("d"), "d");
  if (j.contains("eta")) c.eta = get_double(j.at("eta"), "eta");
  if (j.contains("beta")) c.beta = get_double(j.at("beta"), "beta");
  if (j.contains("lambda")) c.lambda = get_double(j.at("lambda"), "lambda");
  if (j.contains("horizon")) c.horizon = get_count(j.at("horizon"), "horizon");
  if (j.contains("replicas")) c.replicas = get_count(j.at("replicas"), "replicas");
  if (j.contains("seed")) c.seed = get_count(j.at("seed"), "seed");
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant"));
  if (j.contains("substeps_cts")) c.substeps_cts = get_count(j.at("substeps_cts"), "substeps_cts");
  if (j.contains("time_mode")) {
    const std::string mode = get_string(j.at("time_mode"), "time_mode");
    if (mode == "discrete") c.time_mode = TimeMode::discrete;
    else if (mode == "continuous") c.time_mode = TimeMode::continuous;
    else throw std::invalid_argument("unknown time_mode: " + mode);
  }
  if (j.contains("n_list")) c.n_list = get_counts(j.at("n_list"), "n_list");
  if (j.contains("eta_list")) c.eta_list = get_doubles(j.at("eta_list"), "eta_list");
  if (j.contains("coupling")) {
    const Json& cj = j.at("coupling");
    reject_unknown(cj, {"mode", "meet_threshold"}, "coupling");
    if (cj.contains("mode")) c.coupling_mode = coupling_mode_from_string(get_string(cj.at("mode"), "mode"));
    if (cj.contains("meet_threshold")) c.meet_threshold = get_double(cj.at("meet_threshold"), "meet_threshold");
  }
  if (j.contains("initial")) c.initial = parse_initial(j.at("initial"), "initial");
  if (j.contains("initial_b")) c.initial_b = parse_initial(j.at("initial_b"), "initial_b");
  if (j.contains("reference_L")) c.reference_L = get_double(j.at("reference_L"), "reference_L");
  if (j.contains("record_every")) c.record_every = get_count(j.at("record_every"), "record_every");
  if (j.contains("population_samples")) c.population_samples = get_count(j.at("population_samples"), "population_samples");
  if (j.contains("reference_substeps")) c.reference_substeps = get_count(j.at("reference_substeps"), "reference_substeps");
  if (j.contains("samples")) c.samples = get_count(j.at("samples"), "samples");
  if (j.contains("probes")) c.probes = get_count(j.at("probes"), "probes");
  if (j.contains("full_batch_control")) c.full_batch_control = get_bool(j.at("full_batch_control"), "full_batch_control");
  if (j.contains("c2_form")) {
    const std::string form = get_string(j.at("c2_form"), "c2_form");
    if (form == "proof") c.c2_form = C2Form::proof;
    else if (form == "printed") c.c2_form = C2Form::printed;
    else throw std::invalid_argument("unknown c2_form: " + form);
  }
  if (j.contains("format")) c.format = get_string(j.at("format"), "format");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

void ExperimentConfig::validate() const {
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (k < 1 || k > n) throw std::invalid_argument("k must satisfy 1 <= k <= n");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (substeps_cts < 1) throw std::invalid_argument("substeps_cts must be >= 1");
  if (!(reference_L > 0.0)) throw std::invalid_argument("reference_L must be positive");
  if (format != "json" && format != "csv") throw std::invalid_argument("format must be json or csv");
  if (!loss.w.empty() && loss.w.size() != d) throw std::invalid_argument("loss.w must have length d");
  if (!initial.mean.empty() && initial.mean.size() != d)
    throw std::invalid_argument("initial.mean must have length d");
  if (initial_b && !initial_b->mean.empty() && initial_b->mean.size() != d)
    throw std::invalid_argument("initial_b.mean must have length d");
  if (!(initial.sigma >= 0.0)) throw std::invalid_argument("initial.sigma must be >= 0");
  for (std::size_t v : n_list)
    if (v < k) throw std::invalid_argument("every n in n_list must be >= k");
  for (double e : eta_list)
    if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("eta_list values must lie in (0,1)");
  if (experiment == ExperimentKind::discretization && eta_list.size() < 3)
    throw std::invalid_argument("discretization needs at least 3 eta values");
  if (experiment == ExperimentKind::discretization && reference_substeps < 1024)
    throw std::invalid_argument("reference_substeps must be >= 1024");
  if (samples < 2 || samples > kAssignmentCap) throw std::invalid_argument("samples must lie in [2, 256]");
  // Validates the model and variant now so errors surface as config errors.
  build_loss(loss, d);
  build_sgld(*this).validate(n);
}

Json config_to_json(const ExperimentConfig& c) {
  Json loss{{"family", to_string(c.loss.family)}, {"z_max", c.loss.z_max}, {"a", c.loss.a}, {"w", c.loss.w}};
  Json overrides = Json::object();
  if (c.loss.L) overrides["L"] = *c.loss.L;
  if (c.loss.M) overrides["M"] = *c.loss.M;
  if (c.loss.m) overrides["m"] = *c.loss.m;
  if (c.loss.b) overrides["b"] = *c.loss.b;
  loss["constants"] = overrides;
  Json variant{{"kind", to_string(c.variant.kind)},
               {"radius", c.variant.radius},
               {"sigma", c.variant.sigma},
               {"substeps", c.variant.substeps}};
  Json j{{"experiment", to_string(c.experiment)},
         {"loss", loss},
         {"n", c.n},
         {"k", c.k},
         {"d", c.d},
         {"eta", c.eta},
         {"beta", c.beta},
         {"lambda", c.lambda},
         {"horizon", c.horizon},
         {"replicas", c.replicas},
         {"seed", c.seed},
         {"variant", variant},
         {"substeps_cts", c.substeps_cts},
         {"time_mode", c.time_mode == TimeMode::discrete ? "discrete" : "continuous"},
         {"n_list", c.n_list},
         {"eta_list", c.eta_list},
         {"coupling", Json{{"mode", to_string(c.coupling_mode)}, {"meet_threshold", c.meet_threshold}}},
         {"initial", initial_json(c.initial)},
         {"reference_L", c.reference_L},
         {"record_every", c.record_every},
         {"population_samples", c.population_samples},
         {"reference_substeps", c.reference_substeps},
         {"samples", c.samples},
         {"probes", c.probes},
         {"full_batch_control", c.full_batch_control},
         {"c2_form", c.c2_form == C2Form::proof ? "proof" : "printed"},
         {"format", c.format}};
  if (c.initial_b) j["initial_b"] = initial_json(*c.initial_b);
  return j;
}

LossModel build_loss(const LossSpec& spec, std::size_t d) {
  LossModel model;
  switch (spec.family) {
    case LossFamily::quadratic: model = LossModel::quadratic(spec.z_max); break;
    case LossFamily::pseudo_huber: model = LossModel::pseudo_huber(spec.z_max); break;
    case LossFamily::cosine_dissipative: {
      Vector w = Vector::Zero(static_cast<Eigen::Index>(d));
      if (spec.w.empty()) {
        w(0) = 1.0;
      } else {
        if (spec.w.size() != d) throw std::invalid_argument("loss.w must have length d");
        for (std::size_t i = 0; i < d; ++i) w(static_cast<Eigen::Index>(i)) = spec.w[i];
      }
      model = LossModel::cosine_dissipative(spec.a, w, spec.z_max);
      break;
    }
  }
  if (spec.L) model.constants.L = *spec.L;
  if (spec.M) model.constants.M = *spec.M;
  if (spec.m) model.constants.m = *spec.m;
  if (spec.b) model.constants.b = *spec.b;
  model.validate();
  return model;
}

SgldConfig build_sgld(const ExperimentConfig& c) {
  SgldConfig cfg;
  cfg.eta = c.eta;
  cfg.beta = c.beta;
  cfg.k = c.k;
  cfg.lambda = c.lambda;
  cfg.substeps_cts = c.substeps_cts;
  cfg.mode = c.time_mode;
  switch (c.variant.kind) {
    case VariantKind::plain: cfg.variant = Variant::plain(); break;
    case VariantKind::projected: cfg.variant = Variant::projected(c.variant.radius); break;
    case VariantKind::multistep: cfg.variant = Variant::multistep(c.variant.substeps); break;
    case VariantKind::anisotropic: {
      const auto rows = c.variant.sigma.size();
      if (rows != c.d) throw std::invalid_argument("variant.sigma must be d x d");
      Eigen::MatrixXd sigma(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
      for (std::size_t i = 0; i < rows; ++i) {
        if (c.variant.sigma[i].size() != rows) throw std::invalid_argument("variant.sigma must be d x d");
        for (std::size_t j = 0; j < rows; ++j)
          sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.variant.sigma[i][j];
      }
      cfg.variant = Variant::anisotropic(sigma);
      break;
    }
  }
  return cfg;
}

InitialSpec build_initial(const InitialConfig& init) {
  InitialSpec spec;
  spec.sigma = init.sigma;
  if (!init.mean.empty()) {
    spec.mean = Vector(static_cast<Eigen::Index>(init.mean.size()));
    for (std::size_t i = 0; i < init.mean.size(); ++i) spec.mean(static_cast<Eigen::Index>(i)) = init.mean[i];
  }
  return spec;
}

std::size_t record_stride(const ExperimentConfig& config) {
  if (config.record_every > 0) return config.record_every;
  return std::max<std::size_t>(1, config.horizon / 100);
}

}  // namespace sgldstab
