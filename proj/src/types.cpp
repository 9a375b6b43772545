#include "flexio/types.hpp"

#include <cmath>
#include <sstream>

namespace flexio {

void check_length(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << ": expected length " << n << ", got " << v.size();
    throw InvalidInput(os.str());
  }
}

void check_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

void check_nonnegative(const Vector& v, const char* what) {
  check_finite(v, what);
  if (v.size() > 0 && v.minCoeff() < 0.0) {
    throw InvalidInput(std::string(what) + ": negative entry");
  }
}

void Horizon::validate() const {
  if (periods < 1) throw InvalidInput("horizon: T must be >= 1");
  if (days < 1) throw InvalidInput("horizon: S must be >= 1");
}

void PriceSignal::validate(Eigen::Index periods) const {
  check_length(p, periods, "price p");
  check_length(sf_plus, periods, "price p_sf_plus");
  check_length(sf_minus, periods, "price p_sf_minus");
  check_length(sd, periods, "price p_sd");
  check_nonnegative(p, "price p");
  check_nonnegative(sf_plus, "price p_sf_plus");
  check_nonnegative(sf_minus, "price p_sf_minus");
  check_nonnegative(sd, "price p_sd");
}

void ComfortCosts::validate(Eigen::Index periods) const {
  check_length(sf_plus, periods, "cost c_sf_plus");
  check_length(sf_minus, periods, "cost c_sf_minus");
  check_length(sd, periods, "cost c_sd");
  check_nonnegative(sf_plus, "cost c_sf_plus");
  check_nonnegative(sf_minus, "cost c_sf_minus");
  check_nonnegative(sd, "cost c_sd");
}

void DemandAttributes::validate(Eigen::Index periods) const {
  check_length(d_bl, periods, "baseload");
  check_length(env_sf_plus, periods, "envelope sf_plus");
  check_length(env_sf_minus, periods, "envelope sf_minus");
  check_length(env_sd, periods, "envelope sd");
  check_nonnegative(d_bl, "baseload");
  check_nonnegative(env_sf_plus, "envelope sf_plus");
  check_nonnegative(env_sf_minus, "envelope sf_minus");
  check_nonnegative(env_sd, "envelope sd");
}

void FlexBounds::validate(Eigen::Index periods) const {
  check_length(sf_plus, periods, "bound K_sf_plus");
  check_length(sf_minus, periods, "bound K_sf_minus");
  check_length(sd, periods, "bound K_sd");
  check_nonnegative(sf_plus, "bound K_sf_plus");
  check_nonnegative(sf_minus, "bound K_sf_minus");
  check_nonnegative(sd, "bound K_sd");
}

FlexDecision FlexDecision::zeros(Eigen::Index periods) {
  FlexDecision d;
  d.d_sf_plus = Vector::Zero(periods);
  d.d_sf_minus = Vector::Zero(periods);
  d.d_sd_minus = Vector::Zero(periods);
  d.delta_plus = BinaryVector::Zero(periods);
  d.delta_minus = BinaryVector::Zero(periods);
  return d;
}

void DaySample::validate() const {
  const auto n = demand.size();
  if (n < 1) throw InvalidInput("day sample: empty demand");
  check_length(gen, n, "generation");
  check_finite(demand, "demand");
  check_nonnegative(gen, "generation");
  if (features.rows() != n) throw InvalidInput("day sample: feature rows != T");
  if (!features.allFinite()) throw InvalidInput("day sample: non-finite feature");
}

void Hyperparams::validate(int periods) const {
  if (t_max < 0 || t_max > periods) throw InvalidInput("hyperparams: t_max outside [0, T]");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("hyperparams: alpha < 0");
  if (!(gamma_sf_plus > 0.0) || !(gamma_sf_minus > 0.0) || !(gamma_sd > 0.0)) {
    throw InvalidInput("hyperparams: kernel bandwidths must be > 0");
  }
  if (p_norm != 2) throw InvalidInput("hyperparams: only p = 2 is supported");
}

}  // namespace flexio
