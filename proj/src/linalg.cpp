#include "polybandit/linalg.hpp"

#include <cmath>
#include <limits>

namespace polybandit {

double tan_theta(const Vec& a, const Vec& v) {
  const double vn = v.norm();
  const double an = a.norm();
  if (vn == 0.0 || an == 0.0) return std::numeric_limits<double>::infinity();
  const double c = std::abs(a.dot(v)) / (vn * an);
  if (c >= 1.0) return 0.0;
  if (c == 0.0) return std::numeric_limits<double>::infinity();
  const Vec perp = a / an - (a.dot(v) / (an * vn * vn)) * v;
  return perp.norm() / c;
}

double tan_theta_subspace(const Vec& a, const Mat& V) {
  const Vec in = V.transpose() * a;
  const double inn = in.norm();
  if (inn == 0.0) return std::numeric_limits<double>::infinity();
  const Vec out = a - V * in;
  return out.norm() / inn;
}

double subspace_distance(const Mat& Q, const Mat& V) {
  const Mat P = V - Q * (Q.transpose() * V);
  return spectral_norm(P);
}

void fix_sign(Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

QR householder_qr(const Mat& Y) {
  const Eigen::Index d = Y.rows();
  const Eigen::Index k = Y.cols();
  Eigen::HouseholderQR<Mat> qr(Y);
  QR out;
  out.Q = qr.householderQ() * Mat::Identity(d, k);
  out.R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    Vec q = out.Q.col(j);
    fix_sign(q);
    if (q.dot(out.Q.col(j)) < 0) {
      out.Q.col(j) = -out.Q.col(j);
      out.R.row(j) = -out.R.row(j);
    }
  }
  return out;
}

Mat random_orthonormal(int d, int k, Stream& rng) {
  Mat G(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) G(i, j) = rng.normal();
  return householder_qr(G).Q;
}

SymEig sym_eig(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
  const Eigen::Index n = S.rows();
  SymEig out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = es.eigenvalues()[n - 1 - i];
    Vec v = es.eigenvectors().col(n - 1 - i);
    fix_sign(v);
    out.vectors.col(i) = v;
  }
  return out;
}

Vec top_eigvec(const Mat& S) { return sym_eig(S).vectors.col(0); }

double spectral_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()[0];
}

double orthonormality_error(const Mat& V) {
  const Mat G = V.transpose() * V - Mat::Identity(V.cols(), V.cols());
  return G.cwiseAbs().maxCoeff();
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

}  // namespace polybandit
