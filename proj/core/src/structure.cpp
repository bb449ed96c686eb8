#include "finsler/structure.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "finsler/error.hpp"

namespace finsler {

double NormModel::norm(std::span<const double> x, std::span<const double> v) const {
  const double s = sq(x, v);
  return s > 0.0 ? std::sqrt(s) : 0.0;
}

namespace {

template <class Derived>
class NormModelBase : public NormModel {
 public:
  double sq(std::span<const double> x, std::span<const double> v) const override {
    return self().template eval<double>(x, v);
  }
  ad::Jet1 sq(std::span<const ad::Jet1> x, std::span<const ad::Jet1> v) const override {
    return self().template eval<ad::Jet1>(x, v);
  }
  ad::Jet2 sq(std::span<const ad::Jet2> x, std::span<const ad::Jet2> v) const override {
    return self().template eval<ad::Jet2>(x, v);
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

template <class S>
bool is_zero_vector(std::span<const S> v) {
  for (const auto& c : v)
    if (ad::scalar_value(c) != 0.0) return false;
  return true;
}

class EuclideanModel final : public NormModelBase<EuclideanModel> {
 public:
  template <class S>
  S eval(std::span<const S>, std::span<const S> v) const {
    S acc(0.0);
    for (const auto& c : v) acc = acc + c * c;
    return acc;
  }
  bool position_independent() const override { return true; }
  bool quadratic() const override { return true; }
};

template <class S>
S quadratic_form(const MetricField& a, std::span<const S> x, std::span<const S> v) {
  const std::size_t n = v.size();
  S acc(0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const auto& f = a[i][j];
      if (f.is_zero()) continue;
      const S aij = f.template eval<S>(x);
      acc = acc + (i == j ? aij * (v[i] * v[i]) : 2.0 * (aij * (v[i] * v[j])));
    }
  return acc;
}

bool metric_is_constant(const MetricField& a) {
  for (const auto& row : a)
    for (const auto& f : row)
      if (!f.is_constant()) return false;
  return true;
}

class RiemannianModel final : public NormModelBase<RiemannianModel> {
 public:
  explicit RiemannianModel(MetricField a) : a_(std::move(a)), constant_(metric_is_constant(a_)) {}
  template <class S>
  S eval(std::span<const S> x, std::span<const S> v) const {
    return quadratic_form(a_, x, v);
  }
  bool position_independent() const override { return constant_; }
  bool quadratic() const override { return true; }

 private:
  MetricField a_;
  bool constant_;
};

class RandersModel final : public NormModelBase<RandersModel> {
 public:
  RandersModel(MetricField a, OneFormField b) : a_(std::move(a)), b_(std::move(b)) {
    constant_ = metric_is_constant(a_);
    for (const auto& f : b_) constant_ = constant_ && f.is_constant();
  }
  template <class S>
  S eval(std::span<const S> x, std::span<const S> v) const {
    const S f = signed_norm(x, v);
    return f * f;
  }
  double norm(std::span<const double> x, std::span<const double> v) const override {
    return signed_norm<double>(x, v);
  }
  bool position_independent() const override { return constant_; }

 private:
  template <class S>
  S signed_norm(std::span<const S> x, std::span<const S> v) const {
    using std::sqrt;
    using ad::sqrt;
    if constexpr (std::is_same_v<S, double>) {
      if (is_zero_vector(v)) return 0.0;
    }
    const S alpha = sqrt(quadratic_form(a_, x, v));
    S beta(0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!b_[i].is_zero()) beta = beta + b_[i].template eval<S>(x) * v[i];
    return alpha + beta;
  }

  MetricField a_;
  OneFormField b_;
  bool constant_ = true;
};

class QuarticModel final : public NormModelBase<QuarticModel> {
 public:
  explicit QuarticModel(double eps) : eps_(eps) {}
  template <class S>
  S eval(std::span<const S>, std::span<const S> v) const {
    if constexpr (std::is_same_v<S, double>) {
      if (is_zero_vector(v)) return 0.0;
    }
    S s(0.0);
    S q(0.0);
    for (const auto& c : v) {
      const S c2 = c * c;
      s = s + c2;
      q = q + c2 * c2;
    }
    return s + eps_ * (q / s);
  }
  bool position_independent() const override { return true; }

 private:
  double eps_;
};

class ReversedModel final : public NormModelBase<ReversedModel> {
 public:
  explicit ReversedModel(std::shared_ptr<const NormModel> inner) : inner_(std::move(inner)) {}
  template <class S>
  S eval(std::span<const S> x, std::span<const S> v) const {
    std::array<S, kMaxDim> neg;
    for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
    return inner_->sq(x, std::span<const S>(neg.data(), v.size()));
  }
  double norm(std::span<const double> x, std::span<const double> v) const override {
    std::array<double, kMaxDim> neg{};
    for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
    return inner_->norm(x, std::span<const double>(neg.data(), v.size()));
  }
  bool position_independent() const override { return inner_->position_independent(); }
  bool quadratic() const override { return inner_->quadratic(); }

 private:
  std::shared_ptr<const NormModel> inner_;
};

nlohmann::json periods_to_json(const Vec& p) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (std::isfinite(p(i)))
      a.push_back(p(i));
    else
      a.push_back("inf");
  }
  return a;
}

Vec periods_from_json(const nlohmann::json& j, int dim) {
  Vec p(dim);
  if (j.is_string() || j.is_number()) {
    const double v = j.is_string() ? std::numeric_limits<double>::infinity() : j.get<double>();
    p.setConstant(v);
  } else {
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
      throw ValidationError("expected " + std::to_string(dim) + " periods", "structure.periods");
    for (int i = 0; i < dim; ++i)
      p(i) = j.at(i).is_string() ? std::numeric_limits<double>::infinity() : j.at(i).get<double>();
  }
  for (int i = 0; i < dim; ++i)
    if (!(p(i) > 0.0)) throw ValidationError("periods must be positive or \"inf\"", "structure.periods");
  return p;
}

nlohmann::json metric_to_json(const MetricField& a) {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& row : a) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& f : row) r.push_back(f.to_json());
    m.push_back(r);
  }
  return m;
}

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim)
    throw ValidationError("dimension must be between 1 and " + std::to_string(kMaxDim), "structure.dim");
}

nlohmann::json base_spec(const char* family, int dim, const Vec& periods, const ScalarField& phi) {
  return nlohmann::json{{"family", family}, {"dim", dim}, {"periods", periods_to_json(periods)}, {"phi", phi.to_json()}};
}

void check_metric_shape(const MetricField& a) {
  const auto n = a.size();
  for (const auto& row : a)
    if (row.size() != n) throw ValidationError("metric field must be square", "structure.metric");
}

}  // namespace

FinslerStructure::FinslerStructure(int dim, Vec periods, std::shared_ptr<const NormModel> model, ScalarField phi,
                                   bool reversible, nlohmann::json spec)
    : dim_(dim),
      periods_(std::move(periods)),
      model_(std::move(model)),
      phi_(std::move(phi)),
      reversible_(reversible),
      spec_(std::move(spec)),
      hash_(fnv1a(spec_.dump())) {
  check_dim(dim_);
  if (periods_.size() != dim_) throw ValidationError("periods length must equal the dimension", "structure.periods");
}

Vec FinslerStructure::reduce(const Vec& x) const {
  Vec r = x;
  for (int i = 0; i < dim_; ++i) {
    const double L = periods_(i);
    if (!std::isfinite(L)) continue;
    double c = std::fmod(x(i), L);
    if (c < 0.0) c += L;
    if (c >= L) c = 0.0;
    r(i) = c;
  }
  return r;
}

std::string FinslerStructure::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_));
  return buf;
}

Vec open_chart(int dim) { return Vec::Constant(dim, std::numeric_limits<double>::infinity()); }

MetricField identity_metric(int dim) {
  MetricField a(static_cast<std::size_t>(dim), std::vector<ScalarField>(static_cast<std::size_t>(dim)));
  for (int i = 0; i < dim; ++i) a[i][i] = ScalarField::constant(1.0);
  return a;
}

OneFormField constant_one_form(const Vec& b) {
  OneFormField out;
  for (Eigen::Index i = 0; i < b.size(); ++i) out.push_back(ScalarField::constant(b(i)));
  return out;
}

FinslerStructure euclidean(int dim, Vec periods, ScalarField phi) {
  check_dim(dim);
  auto spec = base_spec("euclidean", dim, periods, phi);
  return FinslerStructure(dim, std::move(periods), std::make_shared<EuclideanModel>(), std::move(phi), true,
                          std::move(spec));
}

FinslerStructure riemannian(MetricField metric, Vec periods, ScalarField phi) {
  check_metric_shape(metric);
  const int dim = static_cast<int>(metric.size());
  check_dim(dim);
  auto spec = base_spec("riemannian", dim, periods, phi);
  spec["metric"] = metric_to_json(metric);
  return FinslerStructure(dim, std::move(periods), std::make_shared<RiemannianModel>(std::move(metric)),
                          std::move(phi), true, std::move(spec));
}

FinslerStructure randers(MetricField metric, OneFormField b, Vec periods, ScalarField phi) {
  check_metric_shape(metric);
  const int dim = static_cast<int>(metric.size());
  check_dim(dim);
  if (static_cast<int>(b.size()) != dim) throw ValidationError("one-form must have dim components", "structure.b");
  auto spec = base_spec("randers", dim, periods, phi);
  spec["metric"] = metric_to_json(metric);
  nlohmann::json bj = nlohmann::json::array();
  bool reversible = true;
  for (const auto& f : b) {
    bj.push_back(f.to_json());
    reversible = reversible && f.is_zero();
  }
  spec["b"] = bj;
  return FinslerStructure(dim, std::move(periods), std::make_shared<RandersModel>(std::move(metric), std::move(b)),
                          std::move(phi), reversible, std::move(spec));
}

FinslerStructure quartic_minkowski(int dim, double epsilon, Vec periods, ScalarField phi) {
  check_dim(dim);
  auto spec = base_spec("quartic", dim, periods, phi);
  spec["epsilon"] = epsilon;
  return FinslerStructure(dim, std::move(periods), std::make_shared<QuarticModel>(epsilon), std::move(phi), true,
                          std::move(spec));
}

FinslerStructure reverse_structure(const FinslerStructure& fs) {
  nlohmann::json spec = fs.spec();
  spec["reverse"] = !spec.value("reverse", false);
  if (fs.reversible()) return FinslerStructure(fs.dim(), fs.periods(), fs.model(), fs.phi_field(), true, spec);
  // Reversing twice restores the original model object.
  if (auto inner = std::dynamic_pointer_cast<const ReversedModel>(fs.model()); inner && !spec["reverse"].get<bool>()) {
    return structure_from_json(spec);
  }
  return FinslerStructure(fs.dim(), fs.periods(), std::make_shared<ReversedModel>(fs.model()), fs.phi_field(),
                          false, spec);
}

FinslerStructure structure_from_json(const nlohmann::json& spec) {
  if (!spec.is_object()) throw ValidationError("structure must be an object", "structure");
  const std::string family = spec.value("family", "");
  const int dim = spec.value("dim", 2);
  check_dim(dim);
  const Vec periods = periods_from_json(spec.value("periods", nlohmann::json("inf")), dim);
  const ScalarField phi =
      spec.contains("phi") ? ScalarField::from_json(spec.at("phi"), periods, dim) : ScalarField::constant(0.0);

  auto read_metric = [&]() {
    if (!spec.contains("metric")) return identity_metric(dim);
    const auto& m = spec.at("metric");
    if (!m.is_array() || static_cast<int>(m.size()) != dim)
      throw ValidationError("metric must be a dim×dim array of fields", "structure.metric");
    MetricField a(static_cast<std::size_t>(dim), std::vector<ScalarField>(static_cast<std::size_t>(dim)));
    for (int i = 0; i < dim; ++i) {
      if (!m.at(i).is_array() || static_cast<int>(m.at(i).size()) != dim)
        throw ValidationError("metric must be a dim×dim array of fields", "structure.metric");
      for (int j = 0; j < dim; ++j) a[i][j] = ScalarField::from_json(m.at(i).at(j), periods, dim);
    }
    // Only the upper triangle is read by the models; mirror it for clarity.
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < i; ++j) a[i][j] = a[j][i];
    return a;
  };

  FinslerStructure fs = [&]() {
    if (family == "euclidean") return euclidean(dim, periods, phi);
    if (family == "riemannian") return riemannian(read_metric(), periods, phi);
    if (family == "randers") {
      if (!spec.contains("b")) throw ValidationError("randers structure needs a one-form 'b'", "structure.b");
      const auto& bj = spec.at("b");
      if (!bj.is_array() || static_cast<int>(bj.size()) != dim)
        throw ValidationError("b must have dim components", "structure.b");
      OneFormField b;
      for (int i = 0; i < dim; ++i) b.push_back(ScalarField::from_json(bj.at(i), periods, dim));
      return randers(read_metric(), std::move(b), periods, phi);
    }
    if (family == "quartic") {
      const double eps = spec.value("epsilon", 0.1);
      return quartic_minkowski(dim, eps, periods, phi);
    }
    throw ValidationError("unknown family '" + family + "' (euclidean|riemannian|randers|quartic)",
                          "structure.family");
  }();
  if (spec.value("reverse", false)) return reverse_structure(fs);
  return fs;
}

}  // namespace finsler
