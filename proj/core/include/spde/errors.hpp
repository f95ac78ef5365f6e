#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spde {

// Trajectory left the admissible region: |AX| exceeded the configured guard.
class blow_up_error : public std::runtime_error {
 public:
  blow_up_error(std::size_t step, double time, double graph_norm)
      : std::runtime_error("blow-up guard tripped at t=" + std::to_string(time) +
                           " (step " + std::to_string(step) +
                           ", |AX|=" + std::to_string(graph_norm) + ")"),
        step(step),
        time(time),
        graph_norm(graph_norm) {}

  std::size_t step;
  double time;
  double graph_norm;
};

// The covariance operator is numerically singular on the Galerkin space,
// i.e. the nondegeneracy assumption does not hold for this state.
class degenerate_noise_error : public std::runtime_error {
 public:
  explicit degenerate_noise_error(const std::string& what)
      : std::runtime_error(what) {}
};

// An operation was asked for more work than its configured budget allows.
class resource_limit_error : public std::runtime_error {
 public:
  explicit resource_limit_error(const std::string& what)
      : std::runtime_error(what) {}
};

// The deterministic control construction could not complete (e.g. the local
// solution blows up before any acceptable switch time).
class construction_failed_error : public std::runtime_error {
 public:
  explicit construction_failed_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace spde
