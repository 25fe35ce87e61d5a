#pragma once

#include <string>
#include <vector>

#include "layerpot/grid.hpp"

namespace layerpot {

/// Right-hand sides with analytic gradients.
///   decay1  (1+|x|^2)^{-1/2}
///   decay2  (1+|x|^2)^{-1}
///   gauss   exp(-|x|^2)
///   dipole  x_1 / (1+|x|^2)
///   zero    0
struct CatalogF {
  std::string id;
  ScalarField::Fn value;
  std::vector<ScalarField::Fn> grad;  // one per coordinate
};

/// The non-trivial entries, in a fixed order.
std::vector<std::string> catalog_f_ids();
CatalogF catalog_f(const std::string& id, int dim = 2);

ScalarField sample_f(const GridPtr& grid, const CatalogF& f);
VectorField sample_grad(const GridPtr& grid, const CatalogF& f);

/// Curved catalog surfaces at amplitude eps: tilt, cone, wave.
std::vector<std::string> catalog_surface_ids(double eps);

}  // namespace layerpot
