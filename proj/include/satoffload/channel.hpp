// Copyright 2026 The satoffload Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SATOFFLOAD_CHANNEL_HPP_
#define SATOFFLOAD_CHANNEL_HPP_

// Time and price of moving a sub-task to a server and computing it there.
//
// Units: memory in MB (8e6 bits per MB), bandwidth in Hz, compute demand in
// Gigacycles, compute rates in Gigacycles/s, powers in mW. Transmission
// price is chi^tran * y * zeta with zeta expressed in MHz.

#include <cmath>
#include <string>

#include "satoffload/errors.hpp"
#include "satoffload/model.hpp"

namespace satoffload {

inline constexpr double kBitsPerMegabyte = 8e6;
inline constexpr double kHzPerMegahertz = 1e6;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct LinkParams {
  double bandwidth_hz = 0.0;
  double tx_power_mw = 0.0;
  double gain_linear = 0.0;
  double noise_mw = 0.0;

  /// log2(1 + p g / N0), bits/s/Hz.
  double spectral_efficiency() const {
    return std::log2(1.0 + tx_power_mw * gain_linear / noise_mw);
  }

  double rate_bps() const { return bandwidth_hz * spectral_efficiency(); }
};

inline LinkParams make_link(const Satellite& server, const Cte& cte, double noise_mw) {
  LinkParams link{server.bandwidth_hz, cte.transmit_power_mw, db_to_linear(cte.channel_gain_db),
                  noise_mw};
  if (!(link.bandwidth_hz > 0.0 && link.tx_power_mw > 0.0 && link.gain_linear > 0.0 &&
        link.noise_mw > 0.0)) {
    throw DomainError("make_link: link parameters must be strictly positive");
  }
  return link;
}

struct ServiceOutcome {
  double t_tran_s = 0.0;
  double t_comp_s = 0.0;
  double p_tran = 0.0;
  double p_comp = 0.0;
  double t_ser_s = 0.0;
  double p_ser = 0.0;

  static ServiceOutcome compose(double t_tran, double t_comp, double p_tran, double p_comp) {
    return {t_tran, t_comp, p_tran, p_comp, t_tran + t_comp, p_tran + p_comp};
  }

  /// Weighted cost alpha1 * T + alpha2 * P.
  double cost(double time_weight, double price_weight) const {
    return time_weight * t_ser_s + price_weight * p_ser;
  }
};

/// Deadline check against the covering window's T^max.
inline bool meets_deadline(const ServiceOutcome& outcome, double t_max_s) {
  return outcome.t_ser_s <= t_max_s;
}

inline double transmission_time(const SubTask& subtask, const LinkParams& link, double y_fraction) {
  if (!(y_fraction > 0.0 && y_fraction <= 1.0)) {
    throw DomainError("transmission_time: bandwidth fraction must lie in (0, 1], got " +
                      std::to_string(y_fraction));
  }
  const double se = link.spectral_efficiency();
  if (!(se > 0.0)) throw DomainError("transmission_time: spectral efficiency must be positive");
  return subtask.memory_mb * kBitsPerMegabyte / (y_fraction * link.bandwidth_hz * se);
}

inline double transmission_price(const Satellite& server, double y_fraction) {
  return server.comm_unit_price * y_fraction * server.bandwidth_hz / kHzPerMegahertz;
}

/// LMS/CubeSat compute time for a share `beta_share` of one processor.
inline double computation_time(const SubTask& subtask, const Satellite& server, double beta_share) {
  if (!(beta_share > 0.0)) {
    throw DomainError("computation_time: compute share must be positive, got " +
                      std::to_string(beta_share));
  }
  return subtask.compute_gigacycles / (beta_share * server.compute_per_processor);
}

inline double computation_price(const Satellite& server, double beta_share) {
  return server.compute_unit_price * beta_share * server.compute_per_processor;
}

/// CNS compute time with a dedicated rate `omega` (Gigacycles/s).
inline double cns_computation_time(const SubTask& subtask, double omega) {
  if (!(omega > 0.0)) {
    throw DomainError("cns_computation_time: omega must be positive, got " + std::to_string(omega));
  }
  return subtask.compute_gigacycles / omega;
}

inline double cns_computation_price(const Satellite& server, double omega) {
  return server.compute_unit_price * omega;
}

/// Full service outcome of one sub-task. For the CNS, `beta_or_omega` is the
/// dedicated compute rate; otherwise it is the processor share.
/// Zero-demand sub-tasks cost nothing regardless of the allocation.
inline ServiceOutcome service_outcome(const SubTask& subtask, const Satellite& server,
                                      const LinkParams& link, double y, double beta_or_omega) {
  if (subtask.memory_mb == 0.0 && subtask.compute_gigacycles == 0.0) return {};
  const double t_tran = transmission_time(subtask, link, y);
  const double p_tran = transmission_price(server, y);
  double t_comp = 0.0;
  double p_comp = 0.0;
  if (server.layer == Layer::kCns) {
    t_comp = cns_computation_time(subtask, beta_or_omega);
    p_comp = cns_computation_price(server, beta_or_omega);
  } else {
    t_comp = computation_time(subtask, server, beta_or_omega);
    p_comp = computation_price(server, beta_or_omega);
  }
  return ServiceOutcome::compose(t_tran, t_comp, p_tran, p_comp);
}

}  // namespace satoffload

#endif  // SATOFFLOAD_CHANNEL_HPP_
