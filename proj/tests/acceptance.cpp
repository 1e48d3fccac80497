// acceptance --criterion N
//
// Prints one "criterion N: PASS|FAIL detail" line and exits 0 on PASS, 1 on FAIL.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "generators.hpp"
#include "sgldstab/harness.hpp"

using namespace sgldstab;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [fail: " << what << "]";
    }
  }
};

std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(SGLDSTAB_CONFIG_DIR) / name;
}

std::vector<std::filesystem::path> all_configs(const std::string& prefix = "") {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(SGLDSTAB_CONFIG_DIR))
    if (e.path().extension() == ".json" && e.path().filename().string().rfind(prefix, 0) == 0)
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void absorb(Outcome& o, const ExperimentReport& report, const std::string& tag) {
  for (const auto& v : report.verdicts) {
    o.detail << " " << tag << "/" << v.name << "=" << (v.passed ? "pass" : "FAIL") << "("
             << format_number(v.measured) << " vs " << format_number(v.threshold) << ")";
    o.require(v.passed, tag + "/" + v.name);
  }
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

Outcome golden_constants() {
  Outcome o;
  o.require(lipschitz_constants(1.0, 1.0, 2.0, 2.0).C1 == 8.0, "C1 with lambda >= M");
  const auto c = lipschitz_constants(1.0, 2.0, 1.0, 2.0);
  o.require(rel_close(c.c1, std::exp(4.0), 1e-9), "c1 = e^4");
  o.require(rel_close(c.c2, 24.0, 1e-12), "c2 = 24");
  o.require(rel_close(c.C1, 1310.3556, 1e-7), "C1 = 24 e^4");
  const auto dc = dissipative_constants(1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
  o.require(rel_close(dc.R, 2.0 * std::sqrt(5.0), 1e-12), "R = 2 sqrt 5");
  o.require(rel_close(ctilde(1, 1.0, 1.0, 1.0, 1.0, 1.0), 65.0, 1e-12), "ctilde(1) = 65");
  o.detail << " C1=" << format_number(c.C1) << " R=" << format_number(dc.R);
  return o;
}

Outcome moment_bounds() {
  Outcome o;
  ExperimentReport r;
  verify_moment_cts(r, 1, 2000);
  verify_first_moment_disc(r, 1, 2000, 1.0);
  verify_fourth_moment(r, 1, 2000);
  absorb(o, r, "moments");
  return o;
}

Outcome synchronous_divergence() {
  Outcome o;
  ExperimentReport r;
  verify_synchronous_divergence(r, 1, 2000, 1.0);
  absorb(o, r, "synch_div");
  return o;
}

Outcome run_configs(const std::vector<std::string>& names) {
  Outcome o;
  for (const auto& name : names) {
    const auto report = run_experiment(load_config(config_path(name)));
    absorb(o, report, std::filesystem::path(name).stem().string());
  }
  return o;
}

Outcome semimetric_suite() {
  Outcome o;
  for (Eigen::Index d : {1, 4, 8}) {
    ExperimentReport r;
    verify_semimetric(r, SemimetricParams{GFunction{2.0, 0.5}, 0.1}, 1, 100000,
                      static_cast<std::size_t>(d));
    absorb(o, r, "d" + std::to_string(d));
  }
  return o;
}

Outcome transport_oracles() {
  Outcome o;
  Rng rng = make_stream(1, "acceptance/transport", 0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = testing::gen_size(rng, 1, 7);
    const auto d = static_cast<Eigen::Index>(testing::gen_size(rng, 1, 4));
    const auto a = testing::gen_cloud(rng, n, d), b = testing::gen_cloud(rng, n, d, 0.5);
    for (int p : {1, 2}) {
      const double brute = brute_force_wp(a, b, p);
      const double exact = exact_wp_assignment(a, b, p).value;
      worst = std::max(worst, std::abs(exact - brute) / std::max(brute, 1e-300));
    }
  }
  o.require(worst <= 1e-12, "assignment vs brute force");
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = testing::gen_size(rng, 2, 128);
    const auto a = testing::gen_cloud(rng, n, 1), b = testing::gen_cloud(rng, n, 1, 1.0);
    std::vector<double> fa(n), fb(n);
    for (std::size_t j = 0; j < n; ++j) {
      fa[j] = a[j](0);
      fb[j] = b[j](0);
    }
    const double sorted = exact_w1_sorted_1d(fa, fb).value;
    if (!rel_close(exact_wp_assignment(a, b, 1).value, sorted, 1e-12))
      o.require(false, "assignment vs sorted 1-D");
  }
  std::size_t violations = 0;
  for (int i = 0; i < 50; ++i) {
    const auto d = static_cast<Eigen::Index>(testing::gen_size(rng, 1, 4));
    const auto a = testing::gen_cloud(rng, 64, d);
    auto b = testing::gen_cloud(rng, 64, d, 0.7);
    std::shuffle(b.begin(), b.end(), rng);
    const double w1 = exact_wp_assignment(a, b, 1).value;
    const double w2 = exact_wp_assignment(a, b, 2).value;
    if (estimate_w_upper(a, b, Cost::w1).value < w1 - 1e-12) ++violations;
    if (estimate_w_upper(a, b, Cost::w2sq).value < w2 * w2 - 1e-12) ++violations;
  }
  o.require(violations == 0, "coupling estimate below exact");
  o.detail << " worst_rel_err=" << format_number(worst) << " dominance_violations=" << violations;
  return o;
}

Outcome generalization() {
  std::vector<std::string> names;
  for (const auto& p : all_configs("generalization_")) names.push_back(p.filename().string());
  Outcome o = run_configs(names);
  o.require(!names.empty(), "no generalization configs");
  return o;
}

Outcome reproducibility() {
  Outcome o;
  for (const auto& path : all_configs()) {
    const auto config = load_config(path);
    const auto a = report_payload(run_experiment(config));
    const auto b = report_payload(run_experiment(config));
    o.require(a == b, path.filename().string() + " payload differs");
    o.detail << " " << path.stem().string() << ":" << a.size() << "B";
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int criterion = 0;
  app.add_option("--criterion", criterion, "criterion number")->required()->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> checks = {
      golden_constants,
      moment_bounds,
      synchronous_divergence,
      [] { return run_configs({"contraction_quadratic.json", "contraction_cosine.json"}); },
      [] { return run_configs({"discretization.json"}); },
      [] { return run_configs({"stability.json"}); },
      semimetric_suite,
      transport_oracles,
      generalization,
      reproducibility,
  };

  Outcome outcome;
  try {
    outcome = checks[static_cast<std::size_t>(criterion - 1)]();
  } catch (const std::exception& e) {
    outcome.passed = false;
    outcome.detail << " exception: " << e.what();
  }
  std::cout << "criterion " << criterion << ": " << (outcome.passed ? "PASS" : "FAIL")
            << outcome.detail.str() << '\n';
  return outcome.passed ? EXIT_SUCCESS : EXIT_FAILURE;
}
