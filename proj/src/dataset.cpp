#include "proxi2s/dataset.hpp"

#include <algorithm>
#include <cctype>

#include "proxi2s/error.hpp"

namespace proxi2s {

std::string Term::name() const {
  std::string out;
  for (Var v : factors) out += to_string(v);
  return out;
}

bool Term::operator==(const Term& other) const {
  std::vector<Var> lhs = factors, rhs = other.factors;
  std::sort(lhs.begin(), lhs.end());
  std::sort(rhs.begin(), rhs.end());
  return lhs == rhs;
}

TermSpec TermSpec::parse(const std::vector<std::string>& names) {
  TermSpec spec;
  for (const std::string& name : names) {
    Term term;
    for (char c : name) {
      switch (std::tolower(static_cast<unsigned char>(c))) {
        case 'a': term.factors.push_back(Var::A); break;
        case 'y': term.factors.push_back(Var::Y); break;
        case 'w': term.factors.push_back(Var::W); break;
        case 'u': term.factors.push_back(Var::U); break;
        case 'z': term.factors.push_back(Var::Z); break;
        case 'x': term.factors.push_back(Var::X); break;
        default:
          throw DataError("unknown variable '" + std::string(1, c) +
                          "' in term '" + name + "'");
      }
    }
    if (term.factors.empty())
      throw DataError("empty term in term list");
    spec.terms.push_back(std::move(term));
  }
  return spec;
}

bool TermSpec::contains(const Term& t) const {
  return std::find(terms.begin(), terms.end(), t) != terms.end();
}

void Dataset::validate() const {
  const Eigen::Index rows = n();
  if (rows < 1) throw DataError("dataset has no rows");
  auto check_len = [rows](Eigen::Index len, const char* what) {
    if (len != rows)
      throw DataError(std::string("column '") + what +
                      "' length does not match the outcome column");
  };
  check_len(a.size(), "a");
  check_len(w.size(), "w");
  if (z.size() > 0) check_len(z.rows(), "z");
  if (x.size() > 0) check_len(x.rows(), "x");
  if (u) check_len(u->size(), "u");

  auto check_finite = [](const auto& m, const char* what) {
    if (!m.allFinite())
      throw DataError(std::string("column '") + what +
                      "' contains a non-finite value");
  };
  check_finite(y, "y");
  check_finite(a, "a");
  check_finite(w, "w");
  if (z.size() > 0) check_finite(z, "z");
  if (x.size() > 0) check_finite(x, "x");
  if (u) check_finite(*u, "u");
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  out.y.resize(m);
  out.a.resize(m);
  out.w.resize(m);
  out.z.resize(m, z.cols());
  out.x.resize(m, x.cols());
  if (u) out.u = Vector(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    out.y[i] = y[r];
    out.a[i] = a[r];
    out.w[i] = w[r];
    if (z.cols() > 0) out.z.row(i) = z.row(r);
    if (x.cols() > 0) out.x.row(i) = x.row(r);
    if (u) (*out.u)[i] = (*u)[r];
  }
  return out;
}

namespace {

// A term's factors split into scalar columns and at most one block.
struct TermLayout {
  std::vector<Var> scalars;
  Var block = Var::A;  // valid only if has_block
  bool has_block = false;
};

TermLayout analyze(const Term& term, const Dataset& data) {
  TermLayout layout;
  for (Var v : term.factors) {
    if (v == Var::Z || v == Var::X) {
      if (layout.has_block)
        throw DataError("term '" + term.name() +
                        "' multiplies two block variables");
      layout.has_block = true;
      layout.block = v;
    } else {
      layout.scalars.push_back(v);
    }
  }
  if (std::count(term.factors.begin(), term.factors.end(), Var::U) > 0 &&
      !data.u)
    throw DataError("term '" + term.name() +
                    "' references u but the dataset has no latent column");
  return layout;
}

Eigen::Index block_cols(const Dataset& data, Var block) {
  return block == Var::Z ? data.z.cols() : data.x.cols();
}

const Vector& scalar_column(const Dataset& data, Var v) {
  switch (v) {
    case Var::A: return data.a;
    case Var::Y: return data.y;
    case Var::W: return data.w;
    case Var::U: return *data.u;
    default: throw DataError("not a scalar column");
  }
}

}  // namespace

Matrix build_design(const Dataset& data, const TermSpec& spec,
                    const Overrides& overrides) {
  const Eigen::Index n = data.n();

  for (std::size_t i = 0; i < spec.terms.size(); ++i)
    for (std::size_t j = i + 1; j < spec.terms.size(); ++j)
      if (spec.terms[i] == spec.terms[j])
        throw DataError("duplicate term '" + spec.terms[i].name() + "'");

  Eigen::Index p = 1;
  std::vector<TermLayout> layouts;
  layouts.reserve(spec.terms.size());
  for (const Term& term : spec.terms) {
    TermLayout layout = analyze(term, data);
    p += layout.has_block ? block_cols(data, layout.block) : 1;
    layouts.push_back(std::move(layout));
  }

  Matrix design(n, p);
  design.col(0).setOnes();
  Eigen::Index col = 1;
  Vector scalar_part(n);
  for (std::size_t t = 0; t < spec.terms.size(); ++t) {
    const TermLayout& layout = layouts[t];
    scalar_part.setOnes();
    for (Var v : layout.scalars) {
      auto it = overrides.find(v);
      if (it != overrides.end())
        scalar_part *= it->second;
      else
        scalar_part.array() *= scalar_column(data, v).array();
    }
    if (!layout.has_block) {
      design.col(col++) = scalar_part;
    } else {
      const Matrix& block = layout.block == Var::Z ? data.z : data.x;
      for (Eigen::Index j = 0; j < block.cols(); ++j)
        design.col(col++) = scalar_part.array() * block.col(j).array();
    }
  }
  return design;
}

std::vector<std::string> design_names(const Dataset& data,
                                      const TermSpec& spec) {
  std::vector<std::string> names;
  names.emplace_back("(Intercept)");
  for (const Term& term : spec.terms) {
    TermLayout layout = analyze(term, data);
    std::string prefix;
    for (Var v : layout.scalars) prefix += to_string(v);
    if (!layout.has_block) {
      names.push_back(prefix);
    } else {
      const Eigen::Index k = block_cols(data, layout.block);
      for (Eigen::Index j = 0; j < k; ++j) {
        std::string label = std::string(to_string(layout.block));
        if (k > 1) label += std::to_string(j + 1);
        names.push_back(prefix.empty() ? label : prefix + ":" + label);
      }
    }
  }
  return names;
}

}  // namespace proxi2s
