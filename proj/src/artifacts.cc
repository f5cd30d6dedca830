// Copyright 2026 The Karma DPG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "karma/artifacts.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace karma {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  for (std::string_view line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const std::string& where) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw std::invalid_argument(where + ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

// Calls row(tau, u, k, fields) for each data row after checking the header.
template <typename RowFn>
void for_each_row(std::string_view text, const std::string& name,
                  const std::vector<std::string>& header, RowFn row) {
  const std::vector<std::string_view> rows = lines(text);
  if (rows.empty()) throw std::invalid_argument(name + ": empty file");
  const std::vector<std::string_view> head = split(rows[0], ',');
  if (head.size() != header.size() ||
      !std::equal(head.begin(), head.end(), header.begin())) {
    throw std::invalid_argument(name + ": unexpected header");
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = name + " line " + std::to_string(i + 1);
    const std::vector<std::string_view> fields = split(rows[i], ',');
    if (fields.size() != header.size()) throw std::invalid_argument(where + ": wrong column count");
    row(parse_number<int>(fields[0], where), parse_number<int>(fields[1], where),
        parse_number<int>(fields[2], where), fields, where);
  }
}

std::vector<std::string> state_header(const std::vector<std::string>& tail) {
  std::vector<std::string> out{"type", "urgency", "karma"};
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

std::string header_line(const std::vector<std::string>& header) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  return out + "\n";
}

std::vector<std::string> bid_columns(int levels) {
  std::vector<std::string> out;
  for (int b = 0; b < levels; ++b) out.push_back("b" + std::to_string(b));
  return out;
}

json summary_json(const MetricSummary& m) {
  json out = {{"mean", m.mean}};
  out["ci_halfwidth"] = m.ci_halfwidth ? json(*m.ci_halfwidth) : json(nullptr);
  return out;
}

std::string summary_fields(const MetricSummary& m) {
  return format_double(m.mean) + "," + (m.ci_halfwidth ? format_double(*m.ci_halfwidth) : "");
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void atomic_write(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string policy_csv(const SocialState& state) {
  const int levels = state.karma_levels();
  std::string out = header_line(state_header(bid_columns(levels)));
  for (int tau = 0; tau < state.num_types(); ++tau) {
    const std::span<const double> storage = state.policy_storage(tau);
    for (int u = 0; u < state.num_urgency(tau); ++u) {
      for (int k = 0; k < levels; ++k) {
        out += std::to_string(tau) + "," + std::to_string(u) + "," + std::to_string(k);
        const std::size_t offset = (static_cast<std::size_t>(u) * levels + k) * levels;
        for (int b = 0; b < levels; ++b) out += "," + format_double(storage[offset + b]);
        out += "\n";
      }
    }
  }
  return out;
}

std::string distribution_csv(const SocialState& state) {
  std::string out = header_line(state_header({"d"}));
  for (int tau = 0; tau < state.num_types(); ++tau) {
    for (int u = 0; u < state.num_urgency(tau); ++u) {
      for (int k = 0; k < state.karma_levels(); ++k) {
        out += std::to_string(tau) + "," + std::to_string(u) + "," + std::to_string(k) + "," +
               format_double(state.d(tau, u, k)) + "\n";
      }
    }
  }
  return out;
}

std::string value_csv(const SocialState& state, const ValueTable& value) {
  std::string out = header_line(state_header({"value"}));
  const int levels = state.karma_levels();
  for (int tau = 0; tau < state.num_types(); ++tau) {
    for (int u = 0; u < state.num_urgency(tau); ++u) {
      for (int k = 0; k < levels; ++k) {
        out += std::to_string(tau) + "," + std::to_string(u) + "," + std::to_string(k) + "," +
               format_double(value.types[tau].values[u * levels + k]) + "\n";
      }
    }
  }
  return out;
}

SocialState social_state_from_csv(const Game& game, std::string_view policy,
                                  std::string_view distribution) {
  SocialState state(game);
  const int levels = game.karma_levels();
  auto check = [&](int tau, int u, int k, const std::string& where) {
    if (tau < 0 || tau >= game.num_types() || u < 0 || u >= game.num_urgency(tau) ||
        k < 0 || k >= levels) {
      throw std::invalid_argument(where + ": (type, urgency, karma) out of range");
    }
  };
  std::size_t expected = 0;
  for (int tau = 0; tau < game.num_types(); ++tau) expected += game.num_urgency(tau) * levels;
  std::size_t seen = 0;
  for_each_row(policy, "policy.csv", state_header(bid_columns(levels)),
               [&](int tau, int u, int k, const auto& fields, const std::string& where) {
                 check(tau, u, k, where);
                 std::span<double> storage = state.policy_storage(tau);
                 const std::size_t offset = (static_cast<std::size_t>(u) * levels + k) * levels;
                 for (int b = 0; b < levels; ++b) {
                   storage[offset + b] = parse_number<double>(fields[3 + b], where);
                 }
                 ++seen;
               });
  if (seen != expected) throw std::invalid_argument("policy.csv: wrong number of rows");
  seen = 0;
  for_each_row(distribution, "distribution.csv", state_header({"d"}),
               [&](int tau, int u, int k, const auto& fields, const std::string& where) {
                 check(tau, u, k, where);
                 state.d(tau, u, k) = parse_number<double>(fields[3], where);
                 ++seen;
               });
  if (seen != expected) throw std::invalid_argument("distribution.csv: wrong number of rows");
  state.validate(game, 1e-6 * game.mechanism().k_bar());
  return state;
}

json diagnostics_json(const SolverDiagnostics& diag) {
  return {{"converged", diag.converged},
          {"iterations", diag.iterations},
          {"stationarity_residual", diag.stationarity_residual},
          {"br_gap", diag.br_gap},
          {"kp_residual", diag.kp_residual},
          {"exploitability", diag.exploitability},
          {"top_mass", diag.top_mass},
          {"null_conditioning", diag.null_conditioning},
          {"warnings", diag.warnings}};
}

json iteration_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},
          {"stationarity_residual", r.stationarity_residual},
          {"br_gap", r.br_gap},
          {"mean_karma", r.mean_karma},
          {"kp_residual", r.kp_residual}};
}

json equilibrium_json(const Game& game, const EquilibriumResult& result) {
  const SocialState& s = result.social_state;
  json types = json::array();
  const std::vector<TypeWelfare> ex_ante = ex_ante_metrics(game, s);
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const TypeValue& v = result.value.types[tau];
    json t = {{"discount", game.type(tau).discount},
              {"share", game.type(tau).share},
              {"mean_karma", s.mean_karma(tau)},
              {"ex_ante_access", ex_ante[tau].access},
              {"ex_ante_reward", ex_ante[tau].reward},
              {"value_criterion", v.average_reward ? "average_reward" : "discounted"},
              {"bellman_residual", v.bellman_residual},
              {"value_converged", v.converged}};
    if (v.average_reward) t["sigma"] = v.sigma;
    types.push_back(std::move(t));
  }
  return {{"diagnostics", diagnostics_json(result.diagnostics)},
          {"efficiency", efficiency_at_equilibrium(game, s)},
          {"mean_karma", s.mean_karma()},
          {"karma_levels", game.karma_levels()},
          {"types", types}};
}

void write_equilibrium(const fs::path& dir, const Game& game, const EquilibriumResult& result,
                       const json& scenario) {
  atomic_write(dir / "policy.csv", policy_csv(result.social_state));
  atomic_write(dir / "distribution.csv", distribution_csv(result.social_state));
  atomic_write(dir / "value.csv", value_csv(result.social_state, result.value));
  json meta = equilibrium_json(game, result);
  meta["scenario"] = scenario;
  atomic_write(dir / "equilibrium.json", meta.dump(2) + "\n");
}

SocialState read_equilibrium(const fs::path& dir, const Game& game) {
  return social_state_from_csv(game, read_file(dir / "policy.csv"),
                               read_file(dir / "distribution.csv"));
}

json welfare_json(const WelfareReport& report) {
  json per_type = json::array();
  for (const TypeReport& t : report.per_type) {
    per_type.push_back({{"access", summary_json(t.access)}, {"reward", summary_json(t.reward)}});
  }
  return {{"scheme", report.scheme},
          {"n_repeats", report.n_repeats},
          {"efficiency", summary_json(report.efficiency)},
          {"access_fairness", summary_json(report.access_fairness)},
          {"reward_fairness", summary_json(report.reward_fairness)},
          {"per_type", per_type}};
}

std::string welfare_csv_header() {
  return "scheme,n_repeats,eff,eff_ci,af,af_ci,rf,rf_ci\n";
}

std::string welfare_csv_row(const WelfareReport& r) {
  return r.scheme + "," + std::to_string(r.n_repeats) + "," + summary_fields(r.efficiency) +
         "," + summary_fields(r.access_fairness) + "," + summary_fields(r.reward_fairness) + "\n";
}

std::string trace_csv(std::span<const SimTrace> traces) {
  std::string out = "repeat,round,agent,type,urgency,bid,outcome,reward,karma\n";
  for (const SimTrace& t : traces) {
    for (const SimEvent& e : t.events) {
      out += std::to_string(t.repeat) + "," + std::to_string(e.round) + "," +
             std::to_string(e.agent) + "," + std::to_string(e.type) + "," +
             format_double(e.urgency) + "," + std::to_string(e.bid) + "," +
             std::to_string(e.outcome) + "," + format_double(e.reward) + "," +
             std::to_string(e.karma) + "\n";
    }
  }
  return out;
}

json trace_summary_json(const SimTrace& t) {
  return {{"scheme", std::string(to_string(t.scheme))},
          {"repeat", t.repeat},
          {"seed", t.seed},
          {"n_agents", t.agent_type.size()},
          {"rounds", t.rounds},
          {"total_karma", t.total_karma},
          {"efficiency", empirical_efficiency(t)},
          {"access_fairness", access_fairness(t)},
          {"reward_fairness", reward_fairness(t)},
          {"warnings", t.warnings}};
}

}  // namespace karma
