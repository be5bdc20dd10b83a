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

#include <gtest/gtest.h>

#include "satoffload/channel.hpp"

namespace satoffload {
namespace {

Satellite make_server(Layer layer, double bandwidth, double omega, double chi_tran, double chi_comp) {
  Satellite s;
  s.layer = layer;
  s.bandwidth_hz = bandwidth;
  s.compute_per_processor = omega;
  s.comm_unit_price = chi_tran;
  s.compute_unit_price = chi_comp;
  return s;
}

SubTask make_subtask(double memory, double compute) {
  SubTask st;
  st.memory_mb = memory;
  st.compute_gigacycles = compute;
  return st;
}

LinkParams default_link(double bandwidth) { return {bandwidth, 150.0, db_to_linear(5.0), 1e-5}; }

TEST(TransmissionTime, ReferenceLmsLink) {
  // 8e7 bits / (200e6 Hz * log2(1 + 150 * 10^0.5 / 1e-5)), evaluated independently.
  const double t = transmission_time(make_subtask(10, 1), default_link(200e6), 1.0);
  EXPECT_NEAR(t, 0.0156866293, 0.0156866293 * 1e-3);
}

TEST(TransmissionTime, InverseInShare) {
  const auto st = make_subtask(37, 1);
  const auto link = default_link(40e6);
  EXPECT_DOUBLE_EQ(transmission_time(st, link, 0.25), 2.0 * transmission_time(st, link, 0.5));
  EXPECT_LT(transmission_time(st, link, 0.6), transmission_time(st, link, 0.5));
}

TEST(TransmissionTime, ZeroMemoryIsFree) {
  EXPECT_EQ(transmission_time(make_subtask(0, 1), default_link(40e6), 1.0), 0.0);
}

TEST(TransmissionTime, RejectsShareOutsideUnitInterval) {
  const auto st = make_subtask(10, 1);
  EXPECT_THROW(transmission_time(st, default_link(40e6), 0.0), DomainError);
  EXPECT_THROW(transmission_time(st, default_link(40e6), -0.1), DomainError);
  EXPECT_THROW(transmission_time(st, default_link(40e6), 1.5), DomainError);
}

TEST(TransmissionPrice, ZeroLinearAndLayerOrdered) {
  const auto cns = make_server(Layer::kCns, 40e6, 1, 0.30e-4, 10);
  const auto cube = make_server(Layer::kCubeSat, 40e6, 10, 0.08e-4, 0.08);
  EXPECT_EQ(transmission_price(cube, 0.0), 0.0);
  EXPECT_GT(transmission_price(cns, 0.5), transmission_price(cube, 0.5));
  EXPECT_DOUBLE_EQ(transmission_price(cube, 0.6), 2.0 * transmission_price(cube, 0.3));
  EXPECT_DOUBLE_EQ(transmission_price(cube, 1.0), 0.08e-4 * 40.0);
}

TEST(ComputationTime, ReferenceValues) {
  const auto lms = make_server(Layer::kLms, 200e6, 80, 0.12e-4, 0.3);
  EXPECT_DOUBLE_EQ(computation_time(make_subtask(1, 40), lms, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(computation_time(make_subtask(1, 80), lms, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(computation_time(make_subtask(1, 40), lms, 0.25),
                   2.0 * computation_time(make_subtask(1, 40), lms, 0.5));
  EXPECT_THROW(computation_time(make_subtask(1, 40), lms, 0.0), DomainError);
}

TEST(ComputationPrice, ReferenceValues) {
  const auto cube = make_server(Layer::kCubeSat, 40e6, 10, 0.08e-4, 0.08);
  const auto lms = make_server(Layer::kLms, 200e6, 10, 0.12e-4, 0.3);
  EXPECT_EQ(computation_price(cube, 0.0), 0.0);
  EXPECT_NEAR(computation_price(cube, 0.5), 0.4, 1e-15);
  EXPECT_GE(computation_price(lms, 0.5), computation_price(cube, 0.5));
}

TEST(ServiceOutcome, ZeroSubtaskCostsNothing) {
  const auto cube = make_server(Layer::kCubeSat, 40e6, 10, 0.08e-4, 0.08);
  const auto o = service_outcome(make_subtask(0, 0), cube, default_link(40e6), 0.5, 0.5);
  EXPECT_EQ(o.t_ser_s, 0.0);
  EXPECT_EQ(o.p_ser, 0.0);
  EXPECT_EQ(o.t_tran_s, 0.0);
  EXPECT_EQ(o.p_comp, 0.0);
}

TEST(ServiceOutcome, ComposesComponentsExactly) {
  const auto cube = make_server(Layer::kCubeSat, 40e6, 10, 0.08e-4, 0.08);
  const auto st = make_subtask(30, 40);
  const auto link = default_link(40e6);
  const auto o = service_outcome(st, cube, link, 0.4, 0.7);
  EXPECT_EQ(o.t_tran_s, transmission_time(st, link, 0.4));
  EXPECT_EQ(o.t_comp_s, computation_time(st, cube, 0.7));
  EXPECT_EQ(o.p_tran, transmission_price(cube, 0.4));
  EXPECT_EQ(o.p_comp, computation_price(cube, 0.7));
  EXPECT_EQ(o.t_ser_s, o.t_tran_s + o.t_comp_s);
  EXPECT_EQ(o.p_ser, o.p_tran + o.p_comp);
}

TEST(ServiceOutcome, CnsUsesDedicatedRate) {
  const auto cns = make_server(Layer::kCns, 1e9, 500, 0.30e-4, 10);
  const auto st = make_subtask(10, 40);
  const auto o = service_outcome(st, cns, default_link(1e9), 1.0, 2.0);
  EXPECT_DOUBLE_EQ(o.t_comp_s, 20.0);
  EXPECT_DOUBLE_EQ(o.p_comp, 20.0);
}

TEST(ServiceOutcome, DeadlineCheck) {
  const auto o = ServiceOutcome::compose(1.0, 2.0, 0.0, 0.0);
  EXPECT_TRUE(meets_deadline(o, 3.0));
  EXPECT_TRUE(meets_deadline(o, 4.0));
  EXPECT_FALSE(meets_deadline(o, 2.99));
}

TEST(Units, MegabyteConversionRoundTrips) {
  for (double mb : {0.5, 10.0, 37.25, 90.0}) {
    EXPECT_NEAR(mb * kBitsPerMegabyte / kBitsPerMegabyte / mb, 1.0, 1e-12);
  }
  EXPECT_NEAR(db_to_linear(10.0), 10.0, 1e-12);
  EXPECT_NEAR(db_to_linear(0.0), 1.0, 1e-15);
}

TEST(MakeLink, RejectsNonPositiveParameters) {
  Satellite s = make_server(Layer::kLms, 0.0, 80, 1, 1);
  Cte c;
  EXPECT_THROW(make_link(s, c, 1e-5), DomainError);
  s.bandwidth_hz = 1e6;
  EXPECT_NO_THROW(make_link(s, c, 1e-5));
  EXPECT_THROW(make_link(s, c, 0.0), DomainError);
}

}  // namespace
}  // namespace satoffload
