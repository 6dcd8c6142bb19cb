// Resolved runtime configuration. Every field is addressable by a
// "section.key" name, both from the INI-style config file and from
// command-line overrides.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flighttutor/bc.hpp"
#include "flighttutor/expert.hpp"
#include "flighttutor/flightdyn.hpp"
#include "flighttutor/session.hpp"
#include "flighttutor/tutor.hpp"

namespace ftutor {

struct EvalSettings {
  int trials = kDefaultEvalTrials;
  double duration = 30.0;
  double heading_gate = kDeploymentHeadingGate;
  double action_gate = kDeploymentActionGate;
};

struct Config {
  SimParams sim;
  ExpertGains expert;
  TrainConfig train;
  EvalSettings eval;
  TutorThresholds tutor;
  SessionSettings session;

  /// Sets one key from its text form. Throws Error(InvalidArgument) for an
  /// unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Reads `[section]` headers and `key = value` lines; `#` and `;` start
  /// comments.
  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");

  /// Fully-resolved configuration in the same INI format.
  std::string dump() const;

  /// Checks cross-field invariants of every section.
  void validate() const;
};

}  // namespace ftutor
