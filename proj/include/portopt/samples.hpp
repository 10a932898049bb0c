#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/qubo.hpp"
#include "portopt/types.hpp"

namespace portopt {

enum class Method { Random, SteepestDescent, SimulatedAnnealing, Tabu, Greedy, QaoaGrid, QaoaLr, QaoaOpt, Qp };

inline const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::Random: return "random";
    case Method::SteepestDescent: return "sd";
    case Method::SimulatedAnnealing: return "sa";
    case Method::Tabu: return "tabu";
    case Method::Greedy: return "greedy";
    case Method::QaoaGrid: return "qaoa-grid";
    case Method::QaoaLr: return "qaoa-lr";
    case Method::QaoaOpt: return "qaoa-opt";
    case Method::Qp: return "qp";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::Random, Method::SteepestDescent, Method::SimulatedAnnealing, Method::Tabu,
                   Method::Greedy, Method::QaoaGrid, Method::QaoaLr, Method::QaoaOpt, Method::Qp}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorCode::ParseError, "unknown method '" + std::string(s) + "'");
}

inline bool is_qubo_method(Method m) { return m != Method::Greedy && m != Method::Qp; }

struct Sample {
  std::variant<Bitstring, Vector> payload;
  double energy = 0.0;  // QUBO energy for bitstrings, objective for weights
  double t = 0.0;       // seconds since run start
  std::uint64_t iteration = 0;
  Method source = Method::Random;

  bool is_bitstring() const { return std::holds_alternative<Bitstring>(payload); }
  const Bitstring& bits() const { return std::get<Bitstring>(payload); }
  const Vector& weights() const { return std::get<Vector>(payload); }
};

struct SampleSet {
  Method method = Method::Random;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  const Sample* best() const {
    const Sample* b = nullptr;
    for (const auto& s : samples) {
      if (!b || s.energy < b->energy) b = &s;
    }
    return b;
  }
  double best_energy() const {
    const Sample* b = best();
    return b ? b->energy : std::numeric_limits<double>::infinity();
  }
};

/// Sink that stores every sample.
struct CollectSink {
  SampleSet* set;
  void operator()(const Sample& s) const { set->samples.push_back(s); }
};

inline nlohmann::json to_json(const SampleSet& set) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : set.samples) {
    nlohmann::json js;
    js["t"] = s.t;
    js["energy_or_objective"] = s.energy;
    if (s.is_bitstring()) {
      js["payload"] = to_string(s.bits());
    } else {
      const Vector& w = s.weights();
      js["payload"] = std::vector<double>(w.data(), w.data() + w.size());
    }
    js["iteration"] = s.iteration;
    samples.push_back(std::move(js));
  }
  nlohmann::json config = set.config;
  config["seed"] = set.seed;
  return {{"method", to_string(set.method)}, {"config", config}, {"samples", samples}};
}

inline SampleSet sampleset_from_json(const nlohmann::json& j) {
  try {
    SampleSet set;
    set.method = parse_method(j.at("method").get<std::string>());
    set.config = j.at("config");
    set.seed = set.config.value("seed", std::uint64_t{0});
    for (const auto& js : j.at("samples")) {
      Sample s;
      s.t = js.at("t").get<double>();
      s.energy = js.at("energy_or_objective").get<double>();
      s.iteration = js.value("iteration", std::uint64_t{0});
      s.source = set.method;
      const auto& p = js.at("payload");
      if (p.is_string()) {
        s.payload = parse_bitstring(p.get<std::string>());
      } else {
        auto w = p.get<std::vector<double>>();
        s.payload = Vector(Eigen::Map<Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
      }
      set.samples.push_back(std::move(s));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("SampleSet JSON: ") + e.what());
  }
}

}  // namespace portopt
