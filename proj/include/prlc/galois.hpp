#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace prlc::gf {

// Finite field of order q, where q is a prime or a supported prime power
// (2^m for m <= 16, plus 9, 25, 27, 49).  Elements are dense indices
// 0..q-1: for prime q the index is the residue, for q = p^m it packs the
// polynomial coefficients in base p.  Multiplication, inversion and
// division run on exp/log tables built over a generator found at
// construction; addition is xor for characteristic 2, modular for primes
// and a precomputed digit-wise table otherwise.
class Field {
 public:
  explicit Field(uint32_t order);

  uint32_t order() const { return q_; }
  uint32_t characteristic() const { return p_; }
  uint32_t extension_degree() const { return m_; }

  uint16_t add(uint16_t a, uint16_t b) const {
    if (p_ == 2) return a ^ b;
    if (m_ == 1) {
      uint32_t s = uint32_t(a) + b;
      if (s >= q_) s -= q_;
      return static_cast<uint16_t>(s);
    }
    return add_table_[size_t(a) * q_ + b];
  }

  uint16_t neg(uint16_t a) const;
  uint16_t sub(uint16_t a, uint16_t b) const { return add(a, neg(b)); }

  uint16_t mul(uint16_t a, uint16_t b) const {
    if (a == 0 || b == 0) return 0;
    return exp_[log_[a] + log_[b]];
  }

  // Multiplicative inverse; zero has none.
  uint16_t inv(uint16_t a) const;
  uint16_t div(uint16_t a, uint16_t b) const { return mul(a, inv(b)); }

 private:
  uint32_t q_ = 0;
  uint32_t p_ = 0;
  uint32_t m_ = 0;
  // exp_ has length 2(q-1) so mul can skip the modular reduction of the
  // summed logs.
  std::vector<uint16_t> exp_;
  std::vector<uint32_t> log_;
  std::vector<uint16_t> add_table_;

  uint16_t poly_add(uint16_t a, uint16_t b) const;
  uint16_t poly_mul_mod(uint16_t a, uint16_t b, uint32_t modulus) const;
  void build_tables(uint32_t modulus);
};

// Dense matrix over a field.  Dimensions in this project stay tiny (at
// most the top-layer cumulative rank), so storage is a flat vector.
class Matrix {
 public:
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), v_(size_t(rows) * cols, 0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  uint16_t& at(int r, int c) { return v_[size_t(r) * cols_ + c]; }
  uint16_t at(int r, int c) const { return v_[size_t(r) * cols_ + c]; }
  std::span<const uint16_t> row(int r) const { return {v_.data() + size_t(r) * cols_, size_t(cols_)}; }
  std::span<uint16_t> row(int r) { return {v_.data() + size_t(r) * cols_, size_t(cols_)}; }

 private:
  int rows_;
  int cols_;
  std::vector<uint16_t> v_;
};

Matrix matmul(const Field& f, const Matrix& a, const Matrix& b);

// Incrementally maintained reduced row echelon form.  Rows are kept
// pivot-normalized and mutually reduced, ordered by pivot column.  An
// optional augmented block of `aug` extra columns is carried through every
// row operation, which is how decoding keeps payloads in sync with
// coefficient headers.
class RrefBuilder {
 public:
  RrefBuilder(const Field& f, int cols, int aug = 0);

  // Inserts a row of length cols()+aug_cols().  Returns true when the row
  // lies outside the current row space (the rank grew), false when it was
  // reduced to zero and discarded.
  bool insert(std::span<const uint16_t> row);

  int rank() const { return static_cast<int>(rows_.size()); }
  int cols() const { return cols_; }
  int aug_cols() const { return aug_; }

  // Row i of the reduced form, pivot order ascending.
  std::span<const uint16_t> row(int i) const { return {rows_[i].data(), rows_[i].size()}; }
  int pivot(int i) const { return pivots_[i]; }

 private:
  const Field& f_;
  int cols_;
  int aug_;
  std::vector<std::vector<uint16_t>> rows_;
  std::vector<int> pivots_;
};

// Rank of an arbitrary matrix via row reduction.
int matrix_rank(const Field& f, const Matrix& m);

// Solves A X = B for square full-rank A (throws std::domain_error
// otherwise).  B supplies one column per unknown payload symbol.
Matrix solve_full_rank(const Field& f, const Matrix& a, const Matrix& b);

}  // namespace prlc::gf
