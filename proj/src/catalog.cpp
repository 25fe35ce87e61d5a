#include "layerpot/catalog.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace layerpot {

std::vector<std::string> catalog_f_ids() { return {"decay1", "decay2", "gauss", "dipole"}; }

CatalogF catalog_f(const std::string& id, int dim) {
  auto q = [dim](const Point& x) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) s += x[k] * x[k];
    return s;
  };
  CatalogF f;
  f.id = id;
  f.grad.resize(dim);
  if (id == "decay1") {
    f.value = [q](const Point& x) { return 1.0 / std::sqrt(1.0 + q(x)); };
    for (int k = 0; k < dim; ++k)
      f.grad[k] = [q, k](const Point& x) { return -x[k] * std::pow(1.0 + q(x), -1.5); };
  } else if (id == "decay2") {
    f.value = [q](const Point& x) { return 1.0 / (1.0 + q(x)); };
    for (int k = 0; k < dim; ++k)
      f.grad[k] = [q, k](const Point& x) {
        const double d = 1.0 + q(x);
        return -2.0 * x[k] / (d * d);
      };
  } else if (id == "gauss") {
    f.value = [q](const Point& x) { return std::exp(-q(x)); };
    for (int k = 0; k < dim; ++k) f.grad[k] = [q, k](const Point& x) { return -2.0 * x[k] * std::exp(-q(x)); };
  } else if (id == "dipole") {
    f.value = [q](const Point& x) { return x[0] / (1.0 + q(x)); };
    for (int k = 0; k < dim; ++k)
      f.grad[k] = [q, k](const Point& x) {
        const double d = 1.0 + q(x);
        return (k == 0 ? 1.0 / d : 0.0) - 2.0 * x[0] * x[k] / (d * d);
      };
  } else if (id == "zero") {
    f.value = [](const Point&) { return 0.0; };
    for (int k = 0; k < dim; ++k) f.grad[k] = [](const Point&) { return 0.0; };
  } else {
    throw std::invalid_argument("unknown f id: " + id);
  }
  return f;
}

ScalarField sample_f(const GridPtr& grid, const CatalogF& f) { return ScalarField::sample(grid, f.value); }

VectorField sample_grad(const GridPtr& grid, const CatalogF& f) {
  VectorField g;
  for (const auto& fn : f.grad) g.push_back(ScalarField::sample(grid, fn));
  return g;
}

std::vector<std::string> catalog_surface_ids(double eps) {
  std::ostringstream s;
  s << eps;
  return {"tilt:" + s.str(), "cone:" + s.str(), "wave:" + s.str()};
}

}  // namespace layerpot
