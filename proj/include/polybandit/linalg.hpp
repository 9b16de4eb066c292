#pragma once

#include "polybandit/common.hpp"
#include "polybandit/rng.hpp"

namespace polybandit {

// tan of the unsigned angle between a and the line through v.
double tan_theta(const Vec& a, const Vec& v);
// tan of the angle between a and the column span of an orthonormal V.
double tan_theta_subspace(const Vec& a, const Mat& V);
// ||(I - Q Q^T) V||_2 for orthonormal Q and V.
double subspace_distance(const Mat& Q, const Mat& V);

// Flip so the first coordinate with |x| > 1e-12 is positive.
void fix_sign(Vec& v);

struct QR {
  Mat Q;  // d x k, orthonormal
  Mat R;  // k x k, Y = Q R
};

// Householder thin QR.  Each Q column gets the fix_sign convention and the
// matching row of R is flipped, so Y = Q R still holds.
QR householder_qr(const Mat& Y);

Mat random_orthonormal(int d, int k, Stream& rng);

// Eigen-pairs of a symmetric matrix sorted by decreasing value.
struct SymEig {
  Vec values;
  Mat vectors;
};
SymEig sym_eig(const Mat& S);
Vec top_eigvec(const Mat& S);

double spectral_norm(const Mat& A);
double orthonormality_error(const Mat& V);
double binomial(int n, int k);

}  // namespace polybandit
