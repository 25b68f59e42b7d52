#pragma once

#include <boost/multiprecision/cpp_int.hpp>

// Arbitrary-precision integers/rationals used for all probability math.
// Alternating q-power sums cancel catastrophically in floating point for
// large field orders, so doubles appear only at API boundaries.
namespace prlc {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline BigInt big_pow(const BigInt& base, unsigned exp) {
  BigInt out = 1;
  BigInt b = base;
  while (exp) {
    if (exp & 1) out *= b;
    b *= b;
    exp >>= 1;
  }
  return out;
}

}  // namespace prlc
