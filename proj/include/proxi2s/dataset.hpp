#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "proxi2s/types.hpp"

namespace proxi2s {

// Variables a regression term can reference. Z and X are column blocks; a
// term naming a block expands to one design column per block column.
enum class Var { A, Y, W, U, Z, X };

inline const char* to_string(Var v) {
  switch (v) {
    case Var::A: return "a";
    case Var::Y: return "y";
    case Var::W: return "w";
    case Var::U: return "u";
    case Var::Z: return "z";
    case Var::X: return "x";
  }
  return "?";
}

// One regression term: a product of variables, e.g. {A}, {Z}, {A,Z,Y}.
// At most one block variable (Z or X) may appear per term.
struct Term {
  std::vector<Var> factors;

  std::string name() const;
  // Products are order-free: az and za are the same term.
  bool operator==(const Term& other) const;
};

// Ordered term list; the intercept is implicit and always present.
struct TermSpec {
  std::vector<Term> terms;

  // Parses compact products of the letters a, y, w, u, z, x
  // (case-insensitive), e.g. {"a", "z", "az"}.
  static TermSpec parse(const std::vector<std::string>& names);

  void push(std::initializer_list<Var> factors) {
    terms.push_back(Term{std::vector<Var>(factors)});
  }
  bool contains(const Term& t) const;
};

struct Dataset {
  Vector y;  // outcome; real or category codes 0..T
  Vector a;  // treatment
  Vector w;  // outcome confounding proxy; real or category codes 0..K
  Matrix z;  // treatment confounding proxies, n x p_z
  Matrix x;  // measured covariates, n x p_x (p_x may be 0)
  std::optional<Vector> u;  // latent confounder, simulation only

  Eigen::Index n() const { return y.size(); }

  // Checks column lengths and rejects non-finite values.
  void validate() const;

  Dataset subset(const std::vector<int>& rows) const;
};

// Fixes a variable at a constant before products are formed; used to
// evaluate designs in a stratum such as Y=1 or Y=0.
using Overrides = std::map<Var, double>;

// Builds the n x p design matrix [1 | terms...]. Product terms multiply the
// named columns elementwise; block variables expand in column order.
Matrix build_design(const Dataset& data, const TermSpec& spec,
                    const Overrides& overrides = {});

// Column labels matching build_design's output, starting at "(Intercept)".
std::vector<std::string> design_names(const Dataset& data,
                                      const TermSpec& spec);

}  // namespace proxi2s
