#include "prlc/galois.hpp"

#include <stdexcept>
#include <string>

namespace prlc::gf {

namespace {

bool is_prime(uint32_t n) {
  if (n < 2) return false;
  for (uint32_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

// Prime power factorization q = p^m; returns false when q is not a prime
// power.
bool prime_power(uint32_t q, uint32_t& p, uint32_t& m) {
  if (q < 2) return false;
  uint32_t base = q;
  for (uint32_t d = 2; d * d <= q; ++d) {
    if (q % d == 0) {
      base = d;
      break;
    }
  }
  uint32_t x = q;
  m = 0;
  while (x % base == 0) {
    x /= base;
    ++m;
  }
  if (x != 1) return false;
  p = base;
  return true;
}

// Primitive polynomials for GF(2^m), coefficient masks including the x^m
// term.  These are the common ones from coding practice (0x11D for m=8).
uint32_t binary_modulus(uint32_t m) {
  static const uint32_t polys[17] = {
      0,      0x3,    0x7,    0xB,   0x13,   0x25,   0x43,   0x89,  0x11D,
      0x211,  0x409,  0x805,  0x1053, 0x201B, 0x4443, 0x8003, 0x1100B};
  return m <= 16 ? polys[m] : 0;
}

// Irreducible monic polynomials for the supported odd prime powers,
// encoded like elements: base-p digits of the non-leading coefficients.
// 9: x^2 + 1; 25: x^2 + 2; 27: x^3 + 2x + 1; 49: x^2 + 1.
uint32_t odd_modulus(uint32_t q) {
  switch (q) {
    case 9: return 1;           // x^2 + 0*x + 1
    case 25: return 2;          // x^2 + 0*x + 2
    case 27: return 2 * 3 + 1;  // x^3 + 0*x^2 + 2x + 1
    case 49: return 1;          // x^2 + 0*x + 1
    default: return 0;
  }
}

}  // namespace

Field::Field(uint32_t order) : q_(order) {
  if (!prime_power(order, p_, m_))
    throw std::domain_error("field order " + std::to_string(order) + " is not a prime power");
  if (order > 65536) throw std::domain_error("field order above 2^16 unsupported");

  uint32_t modulus = 0;
  if (m_ > 1) {
    if (p_ == 2) {
      modulus = binary_modulus(m_);
    } else {
      modulus = odd_modulus(q_);
      if (modulus == 0)
        throw std::domain_error("no modulus table entry for field order " + std::to_string(order));
      // Digit-wise addition table for the non-binary extension fields,
      // which are all tiny.
      add_table_.assign(size_t(q_) * q_, 0);
      for (uint32_t a = 0; a < q_; ++a)
        for (uint32_t b = 0; b < q_; ++b)
          add_table_[size_t(a) * q_ + b] = poly_add(uint16_t(a), uint16_t(b));
    }
  } else if (!is_prime(p_)) {
    throw std::domain_error("internal factorization failure");
  }
  build_tables(modulus);
}

uint16_t Field::poly_add(uint16_t a, uint16_t b) const {
  uint32_t out = 0;
  uint32_t mult = 1;
  for (uint32_t i = 0; i < m_; ++i) {
    uint32_t da = (a / mult) % p_;
    uint32_t db = (b / mult) % p_;
    out += ((da + db) % p_) * mult;
    mult *= p_;
  }
  return static_cast<uint16_t>(out);
}

// Schoolbook polynomial product reduced by the field modulus; only used
// while building the exp/log tables.
uint16_t Field::poly_mul_mod(uint16_t a, uint16_t b, uint32_t modulus) const {
  if (m_ == 1) return static_cast<uint16_t>((uint64_t(a) * b) % p_);
  if (p_ == 2) {
    uint32_t acc = 0;
    uint32_t x = a;
    uint32_t y = b;
    while (y) {
      if (y & 1) acc ^= x;
      y >>= 1;
      x <<= 1;
      if (x & (1u << m_)) x ^= modulus | (1u << m_);
    }
    return static_cast<uint16_t>(acc);
  }
  // General base-p digit convolution with reduction x^m = -modulus.
  std::vector<uint32_t> da(m_), db(m_), prod(2 * m_ - 1, 0);
  uint32_t ta = a, tb = b;
  for (uint32_t i = 0; i < m_; ++i) {
    da[i] = ta % p_;
    ta /= p_;
    db[i] = tb % p_;
    tb /= p_;
  }
  for (uint32_t i = 0; i < m_; ++i)
    for (uint32_t j = 0; j < m_; ++j) prod[i + j] = (prod[i + j] + da[i] * db[j]) % p_;
  std::vector<uint32_t> mod_digits(m_);
  uint32_t tm = modulus;
  for (uint32_t i = 0; i < m_; ++i) {
    mod_digits[i] = tm % p_;
    tm /= p_;
  }
  for (int d = int(2 * m_ - 2); d >= int(m_); --d) {
    uint32_t c = prod[d];
    if (c == 0) continue;
    prod[d] = 0;
    for (uint32_t i = 0; i < m_; ++i) {
      uint32_t& slot = prod[d - m_ + i];
      slot = (slot + c * (p_ - mod_digits[i])) % p_;
    }
  }
  uint32_t out = 0;
  for (int i = int(m_) - 1; i >= 0; --i) out = out * p_ + prod[i];
  return static_cast<uint16_t>(out);
}

void Field::build_tables(uint32_t modulus) {
  const uint32_t n = q_ - 1;
  exp_.assign(2 * n, 0);
  log_.assign(q_, 0);
  // Find a generator of the multiplicative group by direct order check.
  for (uint32_t cand = 1; cand < q_; ++cand) {
    uint16_t x = 1;
    uint32_t steps = 0;
    bool ok = true;
    std::vector<bool> seen(q_, false);
    do {
      if (seen[x]) {
        ok = false;
        break;
      }
      seen[x] = true;
      exp_[steps] = x;
      x = poly_mul_mod(x, static_cast<uint16_t>(cand), modulus);
      ++steps;
    } while (x != 1 && steps <= n);
    if (ok && steps == n && x == 1) {
      for (uint32_t i = 0; i < n; ++i) {
        exp_[n + i] = exp_[i];
        log_[exp_[i]] = i;
      }
      return;
    }
  }
  throw std::domain_error("no generator found; modulus not primitive/irreducible");
}

uint16_t Field::neg(uint16_t a) const {
  if (p_ == 2 || a == 0) return a;
  if (m_ == 1) return static_cast<uint16_t>(q_ - a);
  // Digit-wise negation.
  uint32_t out = 0;
  uint32_t mult = 1;
  for (uint32_t i = 0; i < m_; ++i) {
    uint32_t d = (a / mult) % p_;
    out += (d ? p_ - d : 0) * mult;
    mult *= p_;
  }
  return static_cast<uint16_t>(out);
}

uint16_t Field::inv(uint16_t a) const {
  if (a == 0) throw std::domain_error("inverse of zero");
  return exp_[(q_ - 1) - log_[a]];
}

Matrix matmul(const Field& f, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::domain_error("matmul dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      uint16_t aik = a.at(i, k);
      if (aik == 0) continue;
      for (int j = 0; j < b.cols(); ++j)
        out.at(i, j) = f.add(out.at(i, j), f.mul(aik, b.at(k, j)));
    }
  return out;
}

RrefBuilder::RrefBuilder(const Field& f, int cols, int aug) : f_(f), cols_(cols), aug_(aug) {
  if (cols <= 0 || aug < 0) throw std::domain_error("bad rref dimensions");
}

bool RrefBuilder::insert(std::span<const uint16_t> row) {
  if (static_cast<int>(row.size()) != cols_ + aug_)
    throw std::domain_error("rref row length mismatch");
  std::vector<uint16_t> w(row.begin(), row.end());

  // Reduce by existing pivot rows.
  for (size_t i = 0; i < rows_.size(); ++i) {
    uint16_t c = w[pivots_[i]];
    if (c == 0) continue;
    const auto& r = rows_[i];
    for (int j = 0; j < cols_ + aug_; ++j) w[j] = f_.sub(w[j], f_.mul(c, r[j]));
  }

  int p = -1;
  for (int j = 0; j < cols_; ++j)
    if (w[j] != 0) {
      p = j;
      break;
    }
  if (p < 0) return false;

  // Normalize to a unit pivot, then clear that column above.
  uint16_t inv = f_.inv(w[p]);
  for (int j = 0; j < cols_ + aug_; ++j) w[j] = f_.mul(w[j], inv);
  for (size_t i = 0; i < rows_.size(); ++i) {
    uint16_t c = rows_[i][p];
    if (c == 0) continue;
    for (int j = 0; j < cols_ + aug_; ++j) rows_[i][j] = f_.sub(rows_[i][j], f_.mul(c, w[j]));
  }

  // Keep rows sorted by pivot column.
  size_t pos = 0;
  while (pos < pivots_.size() && pivots_[pos] < p) ++pos;
  rows_.insert(rows_.begin() + pos, std::move(w));
  pivots_.insert(pivots_.begin() + pos, p);
  return true;
}

int matrix_rank(const Field& f, const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  RrefBuilder b(f, m.cols());
  for (int r = 0; r < m.rows(); ++r) b.insert(m.row(r));
  return b.rank();
}

Matrix solve_full_rank(const Field& f, const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols()) throw std::domain_error("solve requires a square system");
  if (a.rows() != b.rows()) throw std::domain_error("solve rhs row mismatch");
  const int n = a.rows();
  RrefBuilder builder(f, n, b.cols());
  std::vector<uint16_t> row(size_t(n) + b.cols());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) row[j] = a.at(i, j);
    for (int j = 0; j < b.cols(); ++j) row[n + j] = b.at(i, j);
    builder.insert(row);
  }
  if (builder.rank() < n) throw std::domain_error("rank-deficient system");
  // Reduced form of a full-rank square system is the identity with the
  // solution in the augmented block, rows already pivot-ordered.
  Matrix x(n, b.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < b.cols(); ++j) x.at(i, j) = builder.row(i)[n + j];
  return x;
}

}  // namespace prlc::gf
