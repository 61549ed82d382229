#pragma once

// Scenario files: sectioned key = value text.
//
//   # comment            (also after a value)
//   [section]
//   key = 1.5e-3         number
//   key = gaussian       bare word, or "quoted string"
//   key = true           boolean
//   key = [0.4, 0.2]     list of numbers or words
//
// Every key belongs to a known section; unknown sections or keys are
// validation errors. All validation errors are collected before throwing.

#include "deficient/sampler.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace deficient {

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& origin, int line, const std::string& message)
      : std::runtime_error(origin + ":" + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

private:
  std::vector<std::string> issues_;
};

struct KernelSpec {
  std::string family = "none";  // none | bump
  double a = 1;
  double amplitude = 1;
};

struct PotentialSpec {
  std::string family = "zero";  // zero | power | anisotropic_harmonic
  double k2 = 0;
  double k4 = 0;
  double gamma = 4;
  std::vector<double> stiffness;
};

struct BoundingSpec {
  std::string family = "none";  // none | polynomial | sine_linear | matched
  std::vector<double> coefficients;
  std::vector<double> powers;
  double amplitude = 1;
  double frequency = 1;
  double slope = 0.5;
};

struct FlowSpec {
  double epsilon = 0;
  std::vector<double> epsilons;
  double T = 1;
  long n = 1;
  std::vector<long> ns;
  double ode_tol = 1e-9;
  double x_max = 1e6;
  double h_min = 0;  // 0: 1e-12 T
};

struct ProbeSpec {
  std::vector<double> times;
  std::vector<double> alphas;
  long battery_count = 0;
  double battery_radius = 0.5;
  double battery_spread = 1;
  long ring_count = 0;
  double ring_step = 0.5;
  double ring_horizon = 100;
  double ell_fraction = 0.5;  // inner ring ell(L) = ell_fraction * L
  std::vector<double> tau_rings;
  double eta = 0;  // cylinder slack; 0 selects 0.05 a*
};

struct OutputSpec {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
};

struct ScenarioConfig {
  std::string name = "scenario";
  long d = 1;
  KernelSpec kernel;
  PotentialSpec potential;
  BoundingSpec bounding;
  SamplerSpec sampler;
  FlowSpec flow;
  ProbeSpec probes;
  OutputSpec outputs;
};

ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<config>");

/// Throws ParseError, ValidationError or std::runtime_error if the file cannot be read.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Semantic checks; returns every issue as "section.key: message".
std::vector<std::string> validate(const ScenarioConfig& cfg);

} // namespace deficient
