#include "gmom/poly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gmom {

namespace {

bool graded_lex_less(const std::vector<int>& a, const std::vector<int>& b) {
  int da = 0, db = 0;
  for (int e : a) da += e;
  for (int e : b) db += e;
  if (da != db) return da < db;
  return a < b;
}

}  // namespace

Poly Poly::constant(int nvars, double c) {
  Poly p(nvars);
  if (c != 0.0) p.terms_.push_back({c, std::vector<int>(nvars, 0)});
  return p;
}

Poly Poly::variable(int nvars, int idx) {
  Poly p(nvars);
  std::vector<int> e(nvars, 0);
  e[idx] = 1;
  p.terms_.push_back({1.0, std::move(e)});
  return p;
}

Poly Poly::monomial(int nvars, double coeff, std::vector<int> exps) {
  if (static_cast<int>(exps.size()) != nvars)
    throw std::invalid_argument("monomial exponent vector has wrong length");
  Poly p(nvars);
  if (coeff != 0.0) p.terms_.push_back({coeff, std::move(exps)});
  return p;
}

int Poly::total_degree() const {
  int d = 0;
  for (const Term& t : terms_) {
    int dt = 0;
    for (int e : t.exps) dt += e;
    d = std::max(d, dt);
  }
  return d;
}

void Poly::canonicalize() {
  std::map<std::vector<int>, double> acc;
  for (Term& t : terms_) acc[t.exps] += t.coeff;
  terms_.clear();
  for (auto& [e, c] : acc)
    if (c != 0.0) terms_.push_back({c, e});
  std::sort(terms_.begin(), terms_.end(),
            [](const Term& a, const Term& b) { return graded_lex_less(a.exps, b.exps); });
}

Poly Poly::operator+(const Poly& o) const {
  if (nvars_ != o.nvars_) throw std::invalid_argument("polynomial variable count mismatch");
  Poly r(nvars_);
  r.terms_ = terms_;
  r.terms_.insert(r.terms_.end(), o.terms_.begin(), o.terms_.end());
  r.canonicalize();
  return r;
}

Poly Poly::operator-(const Poly& o) const { return *this + o * -1.0; }

Poly Poly::operator*(double c) const {
  Poly r(nvars_);
  if (c == 0.0) return r;
  r.terms_ = terms_;
  for (Term& t : r.terms_) t.coeff *= c;
  return r;
}

Poly Poly::operator*(const Poly& o) const {
  if (nvars_ != o.nvars_) throw std::invalid_argument("polynomial variable count mismatch");
  Poly r(nvars_);
  for (const Term& a : terms_) {
    for (const Term& b : o.terms_) {
      Term t;
      t.coeff = a.coeff * b.coeff;
      t.exps.resize(nvars_);
      for (int j = 0; j < nvars_; ++j) t.exps[j] = a.exps[j] + b.exps[j];
      r.terms_.push_back(std::move(t));
    }
  }
  r.canonicalize();
  return r;
}

Poly Poly::derivative(int var) const {
  Poly r(nvars_);
  for (const Term& t : terms_) {
    if (t.exps[var] == 0) continue;
    Term dt = t;
    dt.coeff *= dt.exps[var];
    dt.exps[var] -= 1;
    r.terms_.push_back(std::move(dt));
  }
  r.canonicalize();
  return r;
}

Poly Poly::substitute(int var, const Poly& replacement) const {
  Poly r(nvars_);
  for (const Term& t : terms_) {
    Poly piece = Poly::monomial(nvars_, t.coeff, [&] {
      std::vector<int> e = t.exps;
      e[var] = 0;
      return e;
    }());
    for (int p = 0; p < t.exps[var]; ++p) piece = piece * replacement;
    r += piece;
  }
  return r;
}

Poly Poly::partial_evaluate(const std::vector<int>& keep, int new_nvars,
                            const std::vector<double>& fixed_values) const {
  Poly r(new_nvars);
  for (const Term& t : terms_) {
    double c = t.coeff;
    std::vector<int> e(new_nvars, 0);
    for (int j = 0; j < nvars_; ++j) {
      if (t.exps[j] == 0) continue;
      if (keep[j] >= 0) {
        e[keep[j]] = t.exps[j];
      } else {
        c *= std::pow(fixed_values[j], t.exps[j]);
      }
    }
    r.terms_.push_back({c, std::move(e)});
  }
  r.canonicalize();
  return r;
}

template <typename Scalar>
static Scalar eval_impl(const std::vector<Term>& terms, std::span<const Scalar> x) {
  Scalar sum{};
  for (const Term& t : terms) {
    Scalar v{t.coeff};
    for (size_t j = 0; j < t.exps.size(); ++j)
      for (int p = 0; p < t.exps[j]; ++p) v *= x[j];
    sum += v;
  }
  return sum;
}

double Poly::eval(std::span<const double> x) const { return eval_impl<double>(terms_, x); }
Complex Poly::eval(std::span<const Complex> x) const { return eval_impl<Complex>(terms_, x); }

std::string Poly::to_string(const std::vector<std::string>& names) const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const Term& t : terms_) {
    if (!first) os << (t.coeff >= 0 ? " + " : " - ");
    else if (t.coeff < 0) os << "-";
    first = false;
    os << std::abs(t.coeff);
    for (size_t j = 0; j < t.exps.size(); ++j) {
      if (t.exps[j] == 0) continue;
      os << "*" << names[j];
      if (t.exps[j] > 1) os << "^" << t.exps[j];
    }
  }
  return os.str();
}

double PolySystem::total_degree_product() const {
  double p = 1.0;
  for (const Poly& q : polys) p *= std::max(1, q.total_degree());
  return p;
}

// ---------------------------------------------------------------------------
// CompiledSystem

CompiledSystem::CompiledSystem(const PolySystem& sys) {
  if (!sys.square()) throw std::invalid_argument("CompiledSystem requires a square system");
  n_ = sys.num_unknowns();
  max_exp_.assign(n_, 1);
  degrees_.resize(n_);

  polys_.resize(n_);
  jac_.resize(static_cast<size_t>(n_) * n_);
  for (int i = 0; i < n_; ++i) {
    degrees_[i] = sys.polys[i].total_degree();
    pack(sys.polys[i], polys_[i]);
    for (int j = 0; j < n_; ++j) pack(sys.polys[i].derivative(j), jac_[i * n_ + j]);
  }
  stride_ = 1 + *std::max_element(max_exp_.begin(), max_exp_.end());
}

void CompiledSystem::pack(const Poly& p, Entry& e) {
  e.term_begin = static_cast<int>(terms_.size());
  for (const Term& t : p.terms()) {
    PackedTerm pt;
    pt.coeff = t.coeff;
    pt.factor_begin = static_cast<int>(factors_.size());
    for (int j = 0; j < p.nvars(); ++j) {
      if (t.exps[j] > 0) {
        factors_.emplace_back(j, t.exps[j]);
        max_exp_[j] = std::max(max_exp_[j], t.exps[j]);
      }
    }
    pt.factor_end = static_cast<int>(factors_.size());
    terms_.push_back(pt);
  }
  e.term_end = static_cast<int>(terms_.size());
}

void CompiledSystem::fill_powers(const Complex* z, Complex* powers) const {
  for (int j = 0; j < n_; ++j) {
    Complex* row = powers + static_cast<size_t>(j) * stride_;
    row[0] = Complex(1.0, 0.0);
    for (int e = 1; e <= max_exp_[j]; ++e) row[e] = row[e - 1] * z[j];
  }
}

Complex CompiledSystem::eval_entry(const Entry& e, const Complex* powers) const {
  Complex sum(0.0, 0.0);
  for (int t = e.term_begin; t != e.term_end; ++t) {
    const PackedTerm& pt = terms_[t];
    Complex v(pt.coeff, 0.0);
    for (int f = pt.factor_begin; f != pt.factor_end; ++f) {
      const auto& [var, exp] = factors_[f];
      v *= powers[static_cast<size_t>(var) * stride_ + exp];
    }
    sum += v;
  }
  return sum;
}

void CompiledSystem::eval(const Complex* z, Complex* f, Complex* scratch) const {
  fill_powers(z, scratch);
  for (int i = 0; i < n_; ++i) f[i] = eval_entry(polys_[i], scratch);
}

double CompiledSystem::magnitude_bound(const Complex* z) const {
  std::vector<double> powers(static_cast<size_t>(n_) * stride_);
  for (int j = 0; j < n_; ++j) {
    double* row = powers.data() + static_cast<size_t>(j) * stride_;
    row[0] = 1.0;
    double zj = std::abs(z[j]);
    for (int e = 1; e <= max_exp_[j]; ++e) row[e] = row[e - 1] * zj;
  }
  double bound = 0.0;
  for (int i = 0; i < n_; ++i) {
    double sum = 0.0;
    for (int t = polys_[i].term_begin; t != polys_[i].term_end; ++t) {
      const PackedTerm& pt = terms_[t];
      double v = std::abs(pt.coeff);
      for (int f = pt.factor_begin; f != pt.factor_end; ++f) {
        const auto& [var, exp] = factors_[f];
        v *= powers[static_cast<size_t>(var) * stride_ + exp];
      }
      sum += v;
    }
    bound = std::max(bound, sum);
  }
  return bound;
}

void CompiledSystem::eval_with_jacobian(const Complex* z, Complex* f, Complex* jac,
                                        Complex* scratch) const {
  fill_powers(z, scratch);
  if (f) {
    for (int i = 0; i < n_; ++i) f[i] = eval_entry(polys_[i], scratch);
  }
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) jac[i * n_ + j] = eval_entry(jac_[i * n_ + j], scratch);
}

}  // namespace gmom
