#include "finsler/field.hpp"

#include <string>

#include "finsler/error.hpp"

namespace finsler {

namespace {

Vec vec_from_json(const nlohmann::json& j, int dim, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ValidationError("expected an array of " + std::to_string(dim) + " numbers", path);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = j.at(i).get<double>();
  return v;
}

nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

nlohmann::json ScalarField::to_json() const {
  using nlohmann::json;
  return std::visit(
      [](const auto& f) -> json {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantField>) {
          return json{{"constant", f.value}};
        } else if constexpr (std::is_same_v<F, TrigField>) {
          json modes = json::array();
          for (const auto& m : f.modes) {
            json k = json::array();
            for (Eigen::Index i = 0; i < f.periods.size(); ++i) k.push_back(m.k[static_cast<std::size_t>(i)]);
            modes.push_back(json{{"k", k}, {"cos", m.cos_coeff}, {"sin", m.sin_coeff}});
          }
          return json{{"trig", json{{"constant", f.constant}, {"modes", modes}}}};
        } else if constexpr (std::is_same_v<F, QuadraticField>) {
          json h = json::array();
          for (Eigen::Index i = 0; i < f.hessian.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index k = 0; k < f.hessian.cols(); ++k) row.push_back(f.hessian(i, k));
            h.push_back(row);
          }
          return json{{"quadratic", json{{"c0", f.c0}, {"linear", vec_to_json(f.linear)}, {"hessian", h}}}};
        } else if constexpr (std::is_same_v<F, ConformalSphereField>) {
          return json{{"sphere", json{{"curvature", f.curvature}}}};
        } else {
          return json{{"sphere_log", json{{"curvature", f.curvature}, {"power", f.power}}}};
        }
      },
      f_);
}

ScalarField ScalarField::from_json(const nlohmann::json& j, const Vec& periods, int dim) {
  if (j.is_number()) return ScalarField::constant(j.get<double>());
  if (!j.is_object() || j.size() != 1)
    throw ValidationError("field must be a number or an object with one of constant|trig|quadratic|sphere|sphere_log");
  if (j.contains("constant")) return ScalarField::constant(j.at("constant").get<double>());
  if (j.contains("trig")) {
    const auto& t = j.at("trig");
    TrigField f;
    f.periods = periods;
    for (Eigen::Index i = 0; i < periods.size(); ++i)
      if (!std::isfinite(periods(i)))
        throw ValidationError("trigonometric fields need finite periods on every axis", "trig");
    f.constant = t.value("constant", 0.0);
    for (const auto& m : t.value("modes", nlohmann::json::array())) {
      TrigMode mode;
      const auto& k = m.at("k");
      if (!k.is_array() || static_cast<int>(k.size()) != dim)
        throw ValidationError("mode wave vector must have " + std::to_string(dim) + " integers", "trig.modes.k");
      for (int i = 0; i < dim; ++i) mode.k[static_cast<std::size_t>(i)] = k.at(i).get<int>();
      mode.cos_coeff = m.value("cos", 0.0);
      mode.sin_coeff = m.value("sin", 0.0);
      f.modes.push_back(mode);
    }
    return ScalarField(f);
  }
  if (j.contains("quadratic")) {
    const auto& q = j.at("quadratic");
    QuadraticField f;
    f.c0 = q.value("c0", 0.0);
    f.linear = q.contains("linear") ? vec_from_json(q.at("linear"), dim, "quadratic.linear") : Vec::Zero(dim);
    f.hessian = Mat::Zero(dim, dim);
    if (q.contains("hessian")) {
      const auto& h = q.at("hessian");
      if (!h.is_array() || static_cast<int>(h.size()) != dim)
        throw ValidationError("hessian must be a square matrix", "quadratic.hessian");
      for (int r = 0; r < dim; ++r) f.hessian.row(r) = vec_from_json(h.at(r), dim, "quadratic.hessian").transpose();
    }
    return ScalarField(f);
  }
  if (j.contains("sphere")) return ScalarField(ConformalSphereField{j.at("sphere").value("curvature", 1.0)});
  if (j.contains("sphere_log")) {
    const auto& q = j.at("sphere_log");
    return ScalarField(SphereLogField{q.value("curvature", 1.0), q.value("power", 1.0)});
  }
  throw ValidationError("unknown field kind '" + j.begin().key() + "'");
}

}  // namespace finsler
