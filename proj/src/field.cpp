#include "issf/field.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "issf/error.hpp"

namespace issf {

namespace {

// Gathers the barrier's variables out of an f-ordered point without a heap
// allocation for the common small case.
class LocalBuffer {
 public:
  LocalBuffer(const std::vector<std::size_t>& map, std::span<const double> values) : n_(map.size()) {
    double* out = small_.data();
    if (n_ > small_.size()) {
      large_.resize(n_);
      out = large_.data();
    }
    for (std::size_t i = 0; i < n_; ++i) out[i] = values[map[i]];
  }
  std::span<const double> span() const {
    return {n_ > small_.size() ? large_.data() : small_.data(), n_};
  }

 private:
  std::size_t n_;
  std::array<double, 16> small_{};
  std::vector<double> large_;
};

}  // namespace

ScalarField::ScalarField(ScalarExpr expr) : expr_(std::move(expr)) {
  gradient_.reserve(expr_.variables().size());
  for (const auto& v : expr_.variables()) gradient_.push_back(differentiate(expr_, v));
}

ScalarField ScalarField::parse(std::string_view source, std::vector<std::string> vars) {
  return ScalarField(issf::parse(source, std::move(vars)));
}

std::vector<std::string> VariablePartition::all() const {
  std::vector<std::string> out = x1;
  out.insert(out.end(), x2.begin(), x2.end());
  out.insert(out.end(), u.begin(), u.end());
  return out;
}

VectorField::VectorField(std::vector<ScalarExpr> components, VariablePartition partition)
    : components_(std::move(components)), partition_(std::move(partition)), variables_(partition_.all()) {
  std::set<std::string> seen;
  for (const auto& v : variables_) {
    if (!seen.insert(v).second) throw DimensionError("variable '" + v + "' appears in two blocks");
  }
  if (components_.size() != partition_.state_dim()) {
    throw DimensionError("vector field has " + std::to_string(components_.size()) + " components for " +
                         std::to_string(partition_.state_dim()) + " state variables");
  }
  for (const auto& c : components_) {
    if (c.variables() != variables_) {
      throw DimensionError("component '" + c.to_string() + "' is not declared over the field's variables");
    }
  }
}

VectorField VectorField::parse(const std::vector<std::string>& sources, VariablePartition partition) {
  const auto vars = partition.all();
  std::vector<ScalarExpr> comps;
  comps.reserve(sources.size());
  for (const auto& s : sources) comps.push_back(issf::parse(s, vars));
  return VectorField(std::move(comps), std::move(partition));
}

void VectorField::eval(std::span<const double> values, std::span<double> out) const {
  for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].eval(values);
}

LieDerivative::LieDerivative(const ScalarField& h, const VectorField& f) : h_(&h), f_(&f) {
  const auto& hv = h.variables();
  const auto& fv = f.variables();
  const std::size_t n_state = f.state_dim();
  h_to_f_.resize(hv.size());
  for (std::size_t i = 0; i < hv.size(); ++i) {
    const auto it = std::find(fv.begin(), fv.end(), hv[i]);
    if (it == fv.end()) {
      throw DimensionError("barrier variable '" + hv[i] + "' is not a variable of the vector field");
    }
    const auto j = static_cast<std::size_t>(it - fv.begin());
    h_to_f_[i] = j;
    if (!h.expr().references(i)) continue;
    if (j >= n_state) throw DimensionError("barrier references input variable '" + hv[i] + "'");
    if (!h.gradient()[i].is_zero()) terms_.push_back({&h.gradient()[i], j});
  }
  identity_map_ = hv == fv;
}

double LieDerivative::operator()(std::span<const double> values, EvalFlags* flags) const {
  if (values.size() != f_->variables().size()) {
    throw DimensionError("point has " + std::to_string(values.size()) + " values, vector field expects " +
                         std::to_string(f_->variables().size()));
  }
  double acc = 0.0;
  if (identity_map_) {
    for (const auto& t : terms_) acc += t.partial->eval(values, flags) * f_->component(t.state, values);
    return acc;
  }
  LocalBuffer buf(h_to_f_, values);
  for (const auto& t : terms_) acc += t.partial->eval(buf.span(), flags) * f_->component(t.state, values);
  return acc;
}

double LieDerivative::field(std::span<const double> values, EvalFlags* flags) const {
  if (identity_map_) return h_->value(values, flags);
  LocalBuffer buf(h_to_f_, values);
  return h_->value(buf.span(), flags);
}

double lie_derivative(const ScalarField& h, const VectorField& f, std::span<const double> values) {
  return LieDerivative(h, f)(values);
}

double lie_derivative(const ScalarField& h, const VectorField& f, const std::map<std::string, double>& point) {
  std::vector<double> values(f.variables().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto it = point.find(f.variables()[i]);
    if (it == point.end()) throw DimensionError("point does not assign variable '" + f.variables()[i] + "'");
    values[i] = it->second;
  }
  return lie_derivative(h, f, std::span<const double>(values));
}

}  // namespace issf
