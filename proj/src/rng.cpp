// SPDX-License-Identifier: Apache-2.0
#include "genre/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "genre/error.hpp"

namespace genre {

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (in.fail()) throw FormatError("invalid random generator state");
}

}  // namespace genre
