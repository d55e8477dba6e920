#include "pgdrecon/linops.hpp"

#include <string>

namespace pgdrecon {

Vector LinearOperator::forward(std::span<const double> x) const {
  Vector out(range_size());
  apply(x, out);
  return out;
}

Vector LinearOperator::adjoint(std::span<const double> u) const {
  Vector out(domain_size());
  apply_adjoint(u, out);
  return out;
}

Vector LinearOperator::normal(std::span<const double> x) const { return adjoint(forward(x)); }

void LinearOperator::check_domain(std::span<const double> x) const {
  if (x.size() != domain_size()) {
    throw ConfigError("operator: input has " + std::to_string(x.size()) +
                      " entries, domain has " + std::to_string(domain_size()));
  }
}

void LinearOperator::check_range(std::span<const double> u) const {
  if (u.size() != range_size()) {
    throw ConfigError("operator: input has " + std::to_string(u.size()) +
                      " entries, range has " + std::to_string(range_size()));
  }
}

void IdentityOperator::apply(std::span<const double> x, std::span<double> out) const {
  check_domain(x);
  check_range(out);
  std::copy(x.begin(), x.end(), out.begin());
}

void IdentityOperator::apply_adjoint(std::span<const double> u, std::span<double> out) const {
  apply(u, out);
}

void DiagonalOperator::apply(std::span<const double> x, std::span<double> out) const {
  check_domain(x);
  check_range(out);
  for (std::size_t i = 0; i < diag_.size(); ++i) out[i] = diag_[i] * x[i];
}

void DiagonalOperator::apply_adjoint(std::span<const double> u, std::span<double> out) const {
  apply(u, out);
}

DenseOperator::DenseOperator(std::size_t rows, std::size_t cols, Vector row_major)
    : rows_(rows), cols_(cols), a_(std::move(row_major)) {
  if (a_.size() != rows * cols) throw ConfigError("dense operator: entry count mismatch");
}

void DenseOperator::apply(std::span<const double> x, std::span<double> out) const {
  check_domain(x);
  check_range(out);
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    const double* row = &a_[r * cols_];
    for (std::size_t c = 0; c < cols_; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

void DenseOperator::apply_adjoint(std::span<const double> u, std::span<double> out) const {
  check_range(u);
  check_domain(out);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* row = &a_[r * cols_];
    for (std::size_t c = 0; c < cols_; ++c) out[c] += row[c] * u[r];
  }
}

}  // namespace pgdrecon
