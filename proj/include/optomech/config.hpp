#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "optomech/sweep.hpp"

namespace optomech {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reads a declarative TOML sweep description:
///
///   preset = "fig2-cond"          # optional starting point
///   name = "my-sweep"
///   objective = "unconditional_phonon"
///   optimize = ["theta"]
///   [params]                      # omega_m q_m kappa g eta theta temperature model g0
///   cyclic_hz = ["omega_m", "kappa"]
///   [cost]                        # kind p q nu  (or p_over_q)
///   [[grid]]                      # axis + values | log = [a, b, n] | linear = [a, b, n] | models
///   [output]                      # path format
SweepConfig parse_config(std::string_view text, const std::string& source = "<config>");
SweepConfig load_config(const std::string& path);

/// Rate-valued fields that accept a cyclic (Hz) value.
bool is_rate_field(std::string_view field);

/// Multiplies the named rate fields (and matching grid axes) by 2 pi.
void apply_cyclic_hz(SweepConfig& cfg, const std::vector<std::string>& fields);

}  // namespace optomech
