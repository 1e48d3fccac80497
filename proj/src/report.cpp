#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sgldstab/harness.hpp"

namespace sgldstab {

bool ExperimentReport::passed() const {
  for (const auto& v : verdicts)
    if (!v.passed) return false;
  return true;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string curve_csv(const Curve& curve) {
  std::ostringstream out;
  out << "t,empirical_mean,empirical_sem,analytic_bound\n";
  for (std::size_t i = 0; i < curve.t.size(); ++i) {
    out << format_number(curve.t[i]) << ',' << format_number(curve.mean[i]) << ','
        << format_number(curve.sem[i]) << ',';
    if (i < curve.bound.size()) out << format_number(curve.bound[i]);
    out << '\n';
  }
  return out.str();
}

Json lipschitz_constants_json(const LipschitzConstants& c) {
  return Json{{"L", c.L},
              {"M", c.M},
              {"lambda", c.lambda},
              {"beta", c.beta},
              {"sigma1", c.sigma1},
              {"convex", c.convex},
              {"a", c.a},
              {"b_rate", c.b_rate},
              {"R_kappa", c.R_kappa},
              {"R0", c.R0},
              {"R1_tilde", c.R1_tilde},
              {"phi_min", c.phi_min},
              {"c1", c.c1},
              {"c2", c.c2},
              {"c3", c.c3},
              {"C1", c.C1},
              {"C2", c.C2},
              {"C3", c.C3},
              {"c2_form", c.c2_form == C2Form::proof ? "proof" : "printed"}};
}

Json dissipative_constants_json(const DissipativeConstants& c) {
  Json ctp = Json::object();
  for (const auto& [p, v] : c.c_tilde_p) ctp[std::to_string(p)] = v;
  return Json{{"M", c.M},
              {"m", c.m},
              {"b", c.b},
              {"d", c.d},
              {"beta", c.beta},
              {"sigma2", c.sigma2},
              {"sigma4", c.sigma4},
              {"R", c.R},
              {"phi", c.phi},
              {"eps", c.eps},
              {"C4", c.C4},
              {"c_tilde_p", ctp},
              {"c_tilde_2", c.c_tilde_2},
              {"c_tilde_4", c.c_tilde_4},
              {"c_tilde_5", c.c_tilde_5},
              {"C5", c.C5},
              {"C6", c.C6}};
}

Json report_to_json(const ExperimentReport& report, bool include_wall_time) {
  Json curves = Json::array();
  for (const auto& c : report.curves) {
    curves.push_back(Json{{"name", c.name},
                          {"t_unit", c.t_unit},
                          {"t", c.t},
                          {"empirical_mean", c.mean},
                          {"empirical_sem", c.sem},
                          {"analytic_bound", c.bound}});
  }
  Json fits = Json::array();
  for (const auto& f : report.fits) {
    fits.push_back(Json{{"name", f.name},
                        {"slope", f.slope},
                        {"slope_se", f.slope_se},
                        {"ci95", {f.ci_low, f.ci_high}},
                        {"intercept", f.intercept},
                        {"points", f.points}});
  }
  Json verdicts = Json::array();
  for (const auto& v : report.verdicts) {
    verdicts.push_back(Json{{"name", v.name},
                            {"passed", v.passed},
                            {"measured", v.measured},
                            {"threshold", v.threshold},
                            {"detail", v.detail}});
  }
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    checks.push_back(Json{{"check", c.check},
                          {"probes", c.probes},
                          {"worst_violation", c.worst_violation},
                          {"passed", c.passed}});
  }
  Json j{{"command", report.command},
         {"config", report.config},
         {"constants", report.constants},
         {"curves", curves},
         {"fits", fits},
         {"verdicts", verdicts},
         {"checks", checks},
         {"passed", report.passed()}};
  if (include_wall_time) j["wall_time_seconds"] = report.wall_time_seconds;
  return j;
}

std::string report_payload(const ExperimentReport& report) {
  return report_to_json(report, false).dump(2);
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir,
                  const std::string& format) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "report.json").string());
    out << report_to_json(report, true).dump(2) << '\n';
  }
  if (format == "json") return;
  for (const auto& c : report.curves) {
    std::ofstream out(dir / (c.name + ".csv"));
    if (!out) throw std::runtime_error("cannot write curve " + c.name);
    out << curve_csv(c);
  }
}

}  // namespace sgldstab
