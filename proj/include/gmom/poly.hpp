#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace gmom {

using Complex = std::complex<double>;

// A single monomial term: coeff * prod_j x_j^{exps[j]}.
struct Term {
  double coeff = 0.0;
  std::vector<int> exps;
};

// Multivariate polynomial with real coefficients over a fixed variable count,
// stored as a canonicalized term list (graded-lex order, merged exponents,
// zero coefficients dropped).
class Poly {
 public:
  Poly() = default;
  explicit Poly(int nvars) : nvars_(nvars) {}

  static Poly constant(int nvars, double c);
  static Poly variable(int nvars, int idx);
  static Poly monomial(int nvars, double coeff, std::vector<int> exps);

  int nvars() const { return nvars_; }
  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int total_degree() const;

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly operator*(double c) const;
  Poly operator+(double c) const { return *this + constant(nvars_, c); }
  Poly operator-(double c) const { return *this + constant(nvars_, -c); }
  Poly& operator+=(const Poly& o) { return *this = *this + o; }

  Poly derivative(int var) const;
  // Replace variable `var` by the given polynomial (used to eliminate the
  // last mixing weight via the simplex constraint).
  Poly substitute(int var, const Poly& replacement) const;
  // Fix a subset of variables to numeric values, producing a polynomial in
  // the remaining ones. keep[j] maps old index -> new index or -1 if fixed.
  Poly partial_evaluate(const std::vector<int>& keep, int new_nvars,
                        const std::vector<double>& fixed_values) const;

  double eval(std::span<const double> x) const;
  Complex eval(std::span<const Complex> x) const;

  std::string to_string(const std::vector<std::string>& names) const;

 private:
  void canonicalize();

  int nvars_ = 0;
  std::vector<Term> terms_;
};

// Square system of multivariate polynomials in named unknowns.
struct PolySystem {
  std::vector<std::string> unknowns;
  std::vector<Poly> polys;

  int num_unknowns() const { return static_cast<int>(unknowns.size()); }
  bool square() const { return unknowns.size() == polys.size(); }
  // Product of total degrees (Bezout number of the total-degree start system).
  double total_degree_product() const;
};

// Flattened evaluator for a PolySystem: shared power tables, precomputed
// derivative term lists. This is the hot path of the homotopy tracker.
// Evaluation takes a caller-owned scratch buffer so one compiled system can
// be evaluated from many threads at once.
class CompiledSystem {
 public:
  explicit CompiledSystem(const PolySystem& sys);

  int size() const { return n_; }
  int degree(int i) const { return degrees_[i]; }
  // Required length of the scratch buffer passed to the eval calls.
  int scratch_size() const { return n_ * stride_; }

  void eval(const Complex* z, Complex* f, Complex* scratch) const;
  // f may be null if only the Jacobian is needed; jac is row-major n x n.
  void eval_with_jacobian(const Complex* z, Complex* f, Complex* jac, Complex* scratch) const;
  // Largest sum_terms |coeff| prod |z_v|^e over the polynomials: the scale
  // against which an evaluated residual is floating-point noise.
  double magnitude_bound(const Complex* z) const;

 private:
  struct Entry {  // one packed term list
    int term_begin = 0, term_end = 0;
  };
  struct PackedTerm {
    double coeff;
    int factor_begin, factor_end;  // into factors_ (var, exp) pairs
  };

  void pack(const Poly& p, Entry& e);
  void fill_powers(const Complex* z, Complex* powers) const;
  Complex eval_entry(const Entry& e, const Complex* powers) const;

  int n_ = 0;
  std::vector<int> degrees_;
  std::vector<Entry> polys_;              // n entries
  std::vector<Entry> jac_;                // n*n entries, row-major
  std::vector<PackedTerm> terms_;
  std::vector<std::pair<int, int>> factors_;
  std::vector<int> max_exp_;              // per variable
  int stride_ = 0;
};

}  // namespace gmom
