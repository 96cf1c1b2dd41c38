#include "mfpi/quantile_regression.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mfpi/cdf_models.hpp"
#include "mfpi/errors.hpp"
#include "mfpi/stat_kernels.hpp"

namespace mfpi {
namespace {

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Design build_design(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(data.dim() + 1);
  Design out{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = data.row(static_cast<std::size_t>(i));
    out.x(i, 0) = 1.0;
    for (Eigen::Index s = 1; s < p; ++s) out.x(i, s) = row[static_cast<std::size_t>(s - 1)];
    out.y(i) = data.response(static_cast<std::size_t>(i));
  }
  return out;
}

double objective_of(const Eigen::VectorXd& r, double tau) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += check_loss(r(i), tau);
  return total;
}

Eigen::VectorXd irls_start(const Design& d, double tau, double scale) {
  const Eigen::Index p = d.x.cols();
  Eigen::VectorXd beta = d.x.colPivHouseholderQr().solve(d.y);
  const Eigen::VectorXd ones_term = (tau - 0.5) * d.x.transpose() * Eigen::VectorXd::Ones(d.y.size());
  for (double eps = 1e-2; eps >= 1e-6 * 0.999; eps *= 0.1) {
    for (int it = 0; it < 8; ++it) {
      const Eigen::VectorXd r = d.y - d.x * beta;
      const Eigen::VectorXd w =
          (r.array().abs().max(eps * scale) * 2.0).inverse().matrix();
      Eigen::MatrixXd lhs = d.x.transpose() * w.asDiagonal() * d.x;
      lhs.diagonal().array() += 1e-12 * std::max(1.0, lhs.trace() / static_cast<double>(p));
      const Eigen::VectorXd rhs = d.x.transpose() * w.asDiagonal() * d.y + ones_term;
      const Eigen::VectorXd next = lhs.ldlt().solve(rhs);
      const double step = (next - beta).lpNorm<Eigen::Infinity>();
      beta = next;
      if (step <= 1e-10 * (1.0 + beta.lpNorm<Eigen::Infinity>())) break;
    }
  }
  return beta;
}

// p rows with the smallest residuals that span the design.
std::vector<Eigen::Index> initial_basis(const Design& d, const Eigen::VectorXd& beta) {
  const Eigen::Index n = d.x.rows();
  const Eigen::Index p = d.x.cols();
  const Eigen::VectorXd r = d.y - d.x * beta;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(r(a)) < std::abs(r(b)); });
  std::vector<Eigen::Index> basis;
  Eigen::MatrixXd rows(0, p);
  for (Eigen::Index i : order) {
    Eigen::MatrixXd trial(rows.rows() + 1, p);
    trial << rows, d.x.row(i);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
    lu.setThreshold(1e-10);
    if (lu.rank() == trial.rows()) {
      rows = trial;
      basis.push_back(i);
      if (static_cast<Eigen::Index>(basis.size()) == p) return basis;
    }
  }
  throw FitError("quantile regression: design matrix is rank deficient");
}

}  // namespace

double quantile_objective(const Dataset& data, double tau, std::span<const double> beta) {
  if (beta.size() != data.dim() + 1) {
    throw std::domain_error("quantile_objective: coefficient vector has wrong length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.row(i);
    double fit = beta[0];
    for (std::size_t s = 0; s < row.size(); ++s) fit += beta[s + 1] * row[s];
    total += check_loss(data.response(i) - fit, tau);
  }
  return total;
}

QrFit solve_quantile_regression(const Dataset& data, double tau, std::span<const double> start) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("quantile regression: tau must be in (0,1)");
  const Design d = build_design(data);
  const Eigen::Index n = d.x.rows();
  const Eigen::Index p = d.x.cols();
  if (n < p) throw std::domain_error("quantile regression: need at least d+1 observations");

  const double scale = std::max(1.0, d.y.lpNorm<Eigen::Infinity>());
  Eigen::VectorXd beta;
  if (start.empty()) {
    beta = irls_start(d, tau, scale);
  } else {
    if (static_cast<Eigen::Index>(start.size()) != p) {
      throw std::domain_error("quantile regression: start vector has wrong length");
    }
    beta = Eigen::Map<const Eigen::VectorXd>(start.data(), p);
  }

  std::vector<Eigen::Index> basis = initial_basis(d, beta);
  std::vector<int> basis_pos(static_cast<std::size_t>(n), -1);
  for (Eigen::Index k = 0; k < p; ++k) basis_pos[static_cast<std::size_t>(basis[k])] = static_cast<int>(k);

  const double zero_tol = 1e-12 * scale;
  const int max_iterations = static_cast<int>(20 * n + 100);
  struct Crossing {
    double t;
    double weight;
    Eigen::Index row;
  };
  std::vector<Crossing> crossings;
  Eigen::MatrixXd xb(p, p);
  Eigen::VectorXd yb(p);

  for (int iter = 0;; ++iter) {
    if (iter > max_iterations) {
      throw FitError("quantile regression did not converge at tau=" + std::to_string(tau) +
                     " after " + std::to_string(max_iterations) + " basis exchanges (n=" +
                     std::to_string(n) + ", objective " +
                     std::to_string(objective_of(d.y - d.x * beta, tau)) + ")");
    }
    for (Eigen::Index k = 0; k < p; ++k) {
      xb.row(k) = d.x.row(basis[k]);
      yb(k) = d.y(basis[k]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(xb);
    beta = lu.solve(yb);
    Eigen::VectorXd r = d.y - d.x * beta;
    for (Eigen::Index k = 0; k < p; ++k) r(basis[k]) = 0.0;
    // Column k moves along the edge that frees basis row k and keeps the rest tight.
    const Eigen::MatrixXd a = d.x * lu.inverse();

    double best_slope = -1e-12 * scale;
    Eigen::Index best_k = -1;
    double best_sign = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) {
      for (double sign : {1.0, -1.0}) {
        double slope = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const int pos = basis_pos[static_cast<std::size_t>(i)];
          if (pos >= 0 && pos != k) continue;
          const double ai = pos == k ? sign : sign * a(i, k);
          const double ri = r(i);
          if (ri > zero_tol || (ri >= -zero_tol && ai < 0.0)) {
            slope -= ai * tau;
          } else {
            slope += ai * (1.0 - tau);
          }
        }
        if (slope < best_slope) {
          best_slope = slope;
          best_k = k;
          best_sign = sign;
        }
      }
    }
    if (best_k < 0) {
      QrFit fit;
      fit.beta.assign(beta.data(), beta.data() + p);
      fit.objective = objective_of(r, tau);
      fit.iterations = iter;
      return fit;
    }

    crossings.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (basis_pos[static_cast<std::size_t>(i)] >= 0) continue;
      const double ai = best_sign * a(i, best_k);
      const double ri = r(i);
      if (std::abs(ri) <= zero_tol || ai == 0.0) continue;
      const double t = ri / ai;
      if (t > 0.0) crossings.push_back({t, std::abs(ai), i});
    }
    std::sort(crossings.begin(), crossings.end(), [](const Crossing& l, const Crossing& rr) {
      return l.t < rr.t || (l.t == rr.t && l.row < rr.row);
    });
    double slope = best_slope;
    Eigen::Index entering = -1;
    for (const auto& c : crossings) {
      slope += c.weight;
      if (slope >= 0.0) {
        entering = c.row;
        break;
      }
    }
    if (entering < 0) {
      throw FitError("quantile regression: objective unbounded along an edge at tau=" +
                     std::to_string(tau) + " (collinear design?)");
    }
    basis_pos[static_cast<std::size_t>(basis[best_k])] = -1;
    basis[best_k] = entering;
    basis_pos[static_cast<std::size_t>(entering)] = static_cast<int>(best_k);
  }
}

QrCdfModel fit_qr_cdf(const Dataset& data, std::vector<double> tau_grid, const QrCdfModel* warm_start) {
  if (data.size() <= data.dim() + 1) {
    throw std::domain_error("qr cdf: need n > d + 1 observations");
  }
  if (tau_grid.empty()) tau_grid = default_tau_grid();
  if (warm_start && warm_start->tau_grid() != tau_grid) warm_start = nullptr;
  std::vector<std::vector<double>> coefficients;
  coefficients.reserve(tau_grid.size());
  for (std::size_t j = 0; j < tau_grid.size(); ++j) {
    std::span<const double> start;
    if (warm_start) {
      start = warm_start->coefficients()[j];
    } else if (j > 0) {
      start = coefficients.back();
    }
    coefficients.push_back(solve_quantile_regression(data, tau_grid[j], start).beta);
  }
  return QrCdfModel(std::move(tau_grid), std::move(coefficients));
}

}  // namespace mfpi
