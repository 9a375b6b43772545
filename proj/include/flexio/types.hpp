#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace flexio {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BinaryVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

/// Raised when inputs violate an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Hourly periods per day (T) and number of training days (S).
struct Horizon {
  int periods = 24;
  int days = 1;

  void validate() const;
};

/// Retail price and the three flexibility incentive prices, one entry per hour.
struct PriceSignal {
  Vector p;
  Vector sf_plus;
  Vector sf_minus;
  Vector sd;

  Eigen::Index size() const { return p.size(); }
  void validate(Eigen::Index periods) const;
};

/// Quadratic comfort cost coefficients (currency/kWh^2).
struct ComfortCosts {
  Vector sf_plus;
  Vector sf_minus;
  Vector sd;

  Eigen::Index size() const { return sf_plus.size(); }
  void validate(Eigen::Index periods) const;
};

/// Baseload profile and the three flexibility envelopes of a single day.
struct DemandAttributes {
  Vector d_bl;
  Vector env_sf_plus;
  Vector env_sf_minus;
  Vector env_sd;

  Eigen::Index size() const { return d_bl.size(); }
  void validate(Eigen::Index periods) const;
};

/// Physical upper bounds K on the flexibility envelopes.
struct FlexBounds {
  Vector sf_plus;
  Vector sf_minus;
  Vector sd;

  Eigen::Index size() const { return sf_plus.size(); }
  void validate(Eigen::Index periods) const;
};

/// A consumer decision for one day: shift up/down, shed, and the direction binaries.
struct FlexDecision {
  Vector d_sf_plus;
  Vector d_sf_minus;
  Vector d_sd_minus;
  BinaryVector delta_plus;
  BinaryVector delta_minus;

  static FlexDecision zeros(Eigen::Index periods);
  Eigen::Index size() const { return d_sf_plus.size(); }
};

/// One observed day. `features` is T x F.
struct DaySample {
  Vector demand;
  Vector gen;
  Matrix features;
  int day_index = 0;
  std::string date;

  Eigen::Index periods() const { return demand.size(); }
  void validate() const;
};

struct Hyperparams {
  int t_max = 24;
  double alpha = 0.0;
  double gamma_sf_plus = 1.0;
  double gamma_sf_minus = 1.0;
  double gamma_sd = 1.0;
  // Exponent of the reconstruction norm. Only 2 is supported.
  int p_norm = 2;

  void validate(int periods) const;
};

void check_length(const Vector& v, Eigen::Index n, const char* what);
void check_finite(const Vector& v, const char* what);
void check_nonnegative(const Vector& v, const char* what);

}  // namespace flexio
