#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

namespace gpdtsm {

// One mt19937_64 per particle, each seeded from (master seed, stream id).
// Particle-local draws only ever touch their own stream, so the schedule of a
// parallel loop cannot change any random number.
class RngStream {
 public:
  RngStream() : eng_(0) {}
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id & 0xffffffffu),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    eng_.seed(seq);
  }

  // Distribution objects are constructed fresh per draw: normal_distribution
  // caches a spare deviate in libstdc++, which would be hidden state lost by
  // checkpoint serialization of the engine alone.
  double uniform() {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(eng_);
  }
  double normal() {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(eng_);
  }
  double gamma(double shape, double scale) {
    std::gamma_distribution<double> d(shape, scale);
    return d(eng_);
  }
  double chisq(double dof) { return gamma(0.5 * dof, 2.0); }

  std::mt19937_64& engine() { return eng_; }

  friend std::ostream& operator<<(std::ostream& os, const RngStream& s) {
    return os << s.eng_;
  }
  friend std::istream& operator>>(std::istream& is, RngStream& s) {
    return is >> s.eng_;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gpdtsm
