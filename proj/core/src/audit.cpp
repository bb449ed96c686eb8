#include "finsler/audit.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "finsler/error.hpp"
#include "finsler/sampling.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

namespace {

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

Report audit_structure(const FinslerStructure& fs, int samples, std::uint64_t seed) {
  if (samples < 1) throw ValidationError("audit needs at least one sample", "samples");
  const int n = fs.dim();
  Report rep("audit", fs.hash_hex());
  rep.params = {{"samples", samples}, {"seed", seed}};

  Rng rng(seed);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  std::vector<double> min_eig, homog, revers;
  min_eig.reserve(static_cast<std::size_t>(samples + 2 * n));
  double worst_eig = INFINITY;
  Vec worst_x, worst_v;
  nlohmann::json counterexample;

  const int axis_samples = 2 * n;
  for (int s = 0; s < samples + axis_samples; ++s) {
    const Vec x = random_point(fs, rng);
    Vec v;
    if (s < axis_samples) {
      v = Vec::Zero(n);
      v(s / 2) = (s % 2 == 0) ? 1.0 : -1.0;
    } else {
      v = random_direction(n, rng);
    }
    const double c = scale(rng);
    const double f = fs.F(x, v);
    const double fm = fs.F(x, Vec(-v));
    revers.push_back(std::abs(f - fm));
    if (!(f > 0.0)) {
      if (counterexample.is_null())
        counterexample = {{"kind", "nonpositive F"}, {"x", vec_json(x)}, {"v", vec_json(v)}, {"F", f}};
      continue;
    }
    homog.push_back(std::abs(fs.F(x, Vec(c * v)) - c * f) / (c * f));
    double lam;
    try {
      const FundamentalTensor t = fundamental_tensor(fs, x, v);
      lam = Eigen::SelfAdjointEigenSolver<Mat>(t.g, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    } catch (const DomainError&) {
      lam = NAN;
    }
    min_eig.push_back(lam);
    if (!(lam > 0.0) && counterexample.is_null())
      counterexample = {{"kind", "fundamental tensor not positive-definite"},
                        {"x", vec_json(x)},
                        {"v", vec_json(v)},
                        {"min_eigenvalue", std::isnan(lam) ? nlohmann::json("nan") : nlohmann::json(lam)}};
    if (lam < worst_eig) {
      worst_eig = lam;
      worst_x = x;
      worst_v = v;
    }
  }

  rep.stats["min_eigenvalue"] = Stats::of(min_eig);
  rep.stats["homogeneity_defect"] = Stats::of(homog);
  rep.stats["reversibility_defect"] = Stats::of(revers);
  rep.metrics["min_eigenvalue"] = min_eig.empty() ? 0.0 : *std::min_element(min_eig.begin(), min_eig.end());
  rep.metrics["homogeneity_defect"] = homog.empty() ? 0.0 : *std::max_element(homog.begin(), homog.end());
  rep.metrics["reversibility_defect"] = *std::max_element(revers.begin(), revers.end());
  if (worst_x.size() > 0) rep.metrics["min_eigenvalue_at"] = {{"x", vec_json(worst_x)}, {"v", vec_json(worst_v)}};
  if (!counterexample.is_null()) {
    rep.failed = true;
    rep.metrics["counterexample"] = counterexample;
    rep.notes.push_back("strong convexity fails: " + counterexample.at("kind").get<std::string>());
  }
  return rep;
}

}  // namespace finsler
