#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mmdopt/errors.hpp"
#include "mmdopt/harness.hpp"
#include "mmdopt/rng.hpp"

namespace mmdopt {

Eigen::MatrixXd vca_init(const Sample& x, int r, std::uint64_t seed) {
  const Eigen::Index n = x.count();
  const Eigen::Index d = x.dim();
  if (r < 1) throw std::invalid_argument("vca_init: rank must be >= 1");
  if (n < r) throw std::invalid_argument("vca_init: fewer points than rank");
  if (d < r) throw std::invalid_argument("vca_init: dimension below rank");

  // Principal subspace of the raw (uncentered) second moment: simplex data
  // without noise has full rank r here even though its centered rank is r-1.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x.points, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(r - 1) <= 1e-10 * sv(0))
    throw InitError("vca_init: data rank is below the requested rank");

  const Eigen::MatrixXd basis = svd.matrixV().leftCols(r);  // d x r
  const Eigen::MatrixXd z = x.points * basis;               // n x r

  Rng rng(derive_stream(seed, {0xcab0u}));
  std::vector<Eigen::Index> chosen;
  std::vector<Eigen::VectorXd> span;  // orthonormal basis of chosen vertices

  for (int k = 0; k < r; ++k) {
    // Random direction orthogonal to the vertices already selected.
    Eigen::VectorXd f(r);
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      for (int i = 0; i < r; ++i) f(i) = rng.gaussian();
      for (const auto& b : span) f -= b.dot(f) * b;
      const double nrm = f.norm();
      if (nrm > 1e-10) {
        f /= nrm;
        ok = true;
      }
    }
    if (!ok)
      throw InitError("vca_init: selected vertices span the whole subspace");

    Eigen::Index best = -1;
    double best_score = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      const double score = std::abs(f.dot(z.row(i)));
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    chosen.push_back(best);

    Eigen::VectorXd v = z.row(best).transpose();
    for (const auto& b : span) v -= b.dot(v) * b;
    const double nrm = v.norm();
    if (nrm > 1e-12) span.push_back(v / nrm);
  }

  Eigen::MatrixXd out(d, r);
  for (int k = 0; k < r; ++k) out.col(k) = x.points.row(chosen[k]).transpose();
  return out;
}

double permutation_distance(const Eigen::MatrixXd& a_hat,
                            const Eigen::MatrixXd& a_star) {
  if (a_hat.rows() != a_star.rows() || a_hat.cols() != a_star.cols())
    throw std::invalid_argument("permutation_distance: shape mismatch");
  const int r = static_cast<int>(a_hat.cols());
  if (r > 8)
    throw UnsupportedError(
        "permutation_distance: exhaustive matching is limited to 8 columns");

  Eigen::MatrixXd cost(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      cost(i, j) = (a_hat.col(i) - a_star.col(j)).squaredNorm();

  std::vector<int> perm(r);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < r; ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace mmdopt
