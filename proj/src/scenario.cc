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

#include "karma/scenario.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace karma {
namespace {

using nlohmann::json;

std::string join_items(const std::vector<std::string>& items) {
  std::string out = "invalid scenario:";
  for (const std::string& item : items) out += "\n  " + item;
  return out;
}

// Collects every problem instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& problem) {
    errors.push_back(path + ": " + problem);
  }

  bool object(const json& j, const std::string& path,
              std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [key, value] : j.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        fail(path.empty() ? key : path + "." + key, "unknown key");
      }
    }
    return true;
  }

  const json* field(const json& obj, const std::string& key, const std::string& path,
                    bool required) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(join(path, key), "missing required field");
      return nullptr;
    }
    return &*it;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  template <typename T>
  void read(const json& obj, const std::string& key, const std::string& path, T& out,
            bool required = false) {
    const json* j = field(obj, key, path, required);
    if (j == nullptr) return;
    const std::string where = join(path, key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!j->is_boolean()) return fail(where, "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j->is_string()) return fail(where, "expected a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j->is_number_integer()) return fail(where, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (j->is_number_integer() && !j->is_number_unsigned()) {
          return fail(where, "expected a non-negative integer");
        }
      }
    } else {
      if (!j->is_number()) return fail(where, "expected a number");
    }
    out = j->get<T>();
  }

  std::optional<std::vector<double>> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) {
      fail(path, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) {
        fail(path + "[" + std::to_string(i) + "]", "expected a number");
        return std::nullopt;
      }
      out.push_back(j[i].get<double>());
    }
    return out;
  }
};

std::optional<AgentType> read_type(Reader& r, const json& j, const std::string& path) {
  if (!r.object(j, path, {"urgency", "discount", "share"})) return std::nullopt;
  AgentType type{UrgencyChain({0.0}, {{1.0}}), 0.0, 1.0};
  r.read(j, "discount", path, type.discount, true);
  r.read(j, "share", path, type.share, true);
  const json* u = r.field(j, "urgency", path, true);
  if (u == nullptr) return std::nullopt;
  const std::string upath = path + ".urgency";
  if (!r.object(*u, upath, {"values", "transition"})) return std::nullopt;
  const json* values = r.field(*u, "values", upath, true);
  const json* transition = r.field(*u, "transition", upath, true);
  if (values == nullptr || transition == nullptr) return std::nullopt;
  std::optional<std::vector<double>> v = r.numbers(*values, upath + ".values");
  if (!transition->is_array()) {
    r.fail(upath + ".transition", "expected an array of rows");
    return std::nullopt;
  }
  std::vector<std::vector<double>> rows;
  bool ok = v.has_value();
  for (std::size_t i = 0; i < transition->size(); ++i) {
    auto row = r.numbers((*transition)[i], upath + ".transition[" + std::to_string(i) + "]");
    if (!row) {
      ok = false;
      continue;
    }
    rows.push_back(std::move(*row));
  }
  if (!ok) return std::nullopt;
  try {
    type.urgency = UrgencyChain(std::move(*v), std::move(rows));
  } catch (const std::invalid_argument& e) {
    r.fail(upath, e.what());
    return std::nullopt;
  }
  return type;
}

std::optional<MechanismConfig> read_mechanism(Reader& r, const json& j) {
  const std::string path = "mechanism";
  if (!r.object(j, path, {"payment_rule", "k_bar", "k_max", "tax"})) return std::nullopt;
  std::string rule_name;
  int k_bar = 0;
  int k_max = 0;
  r.read(j, "payment_rule", path, rule_name, true);
  r.read(j, "k_bar", path, k_bar, true);
  r.read(j, "k_max", path, k_max);
  std::optional<KarmaTax> tax;
  if (const json* t = r.field(j, "tax", path, false); t != nullptr && !t->is_null()) {
    if (r.object(*t, "mechanism.tax", {"coefficient", "exponent"})) {
      KarmaTax value;
      r.read(*t, "coefficient", "mechanism.tax", value.coefficient, true);
      r.read(*t, "exponent", "mechanism.tax", value.exponent, true);
      tax = value;
    }
  }
  PaymentRule rule = PaymentRule::kPayBidToSociety;
  try {
    if (!rule_name.empty()) rule = parse_payment_rule(rule_name);
  } catch (const std::invalid_argument& e) {
    r.fail("mechanism.payment_rule", e.what());
    return std::nullopt;
  }
  try {
    return MechanismConfig(rule, k_bar, k_max, tax);
  } catch (const std::invalid_argument& e) {
    r.fail(path, e.what());
    return std::nullopt;
  }
}

void read_solver(Reader& r, const json& j, SolverParams& p) {
  const std::string path = "solver";
  if (!r.object(j, path,
                {"dt", "eta", "lambda", "v_tol", "fp_tol", "max_iters",
                 "max_value_sweeps", "q_tie_tol", "log_every"})) {
    return;
  }
  r.read(j, "dt", path, p.dt);
  r.read(j, "eta", path, p.eta);
  r.read(j, "lambda", path, p.lambda);
  r.read(j, "v_tol", path, p.v_tol);
  r.read(j, "fp_tol", path, p.fp_tol);
  r.read(j, "max_iters", path, p.max_iters);
  r.read(j, "max_value_sweeps", path, p.max_value_sweeps);
  r.read(j, "q_tie_tol", path, p.q_tie_tol);
  r.read(j, "log_every", path, p.log_every);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(path, e.what());
  }
}

void read_simulation(Reader& r, const json& j, SimConfig& c) {
  const std::string path = "simulation";
  if (!r.object(j, path,
                {"n_agents", "interactions", "repeats", "seed", "init_karma",
                 "remainder", "record_events", "histogram_burn_in", "workers"})) {
    return;
  }
  r.read(j, "n_agents", path, c.n_agents);
  r.read(j, "interactions", path, c.interactions);
  r.read(j, "repeats", path, c.repeats);
  r.read(j, "seed", path, c.seed);
  r.read(j, "record_events", path, c.record_events);
  r.read(j, "histogram_burn_in", path, c.histogram_burn_in);
  r.read(j, "workers", path, c.workers);
  std::string init, remainder;
  r.read(j, "init_karma", path, init);
  r.read(j, "remainder", path, remainder);
  try {
    if (!init.empty()) c.init_karma = parse_init_karma(init);
  } catch (const std::invalid_argument& e) {
    r.fail(path + ".init_karma", e.what());
  }
  try {
    if (!remainder.empty()) c.remainder = parse_remainder_mode(remainder);
  } catch (const std::invalid_argument& e) {
    r.fail(path + ".remainder", e.what());
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(path, e.what());
  }
}

std::optional<SocialState> read_warm_start(Reader& r, const json& j, const Game& game) {
  const std::string path = "warm_start";
  if (!r.object(j, path, {"distribution", "policy"})) return std::nullopt;
  const json* dj = r.field(j, "distribution", path, true);
  const json* pj = r.field(j, "policy", path, true);
  if (dj == nullptr || pj == nullptr) return std::nullopt;
  SocialState state(game);
  const int levels = game.karma_levels();
  const std::size_t before = r.errors.size();
  auto shape = [&](const json& a, std::size_t n, const std::string& where) {
    if (!a.is_array() || a.size() != n) {
      r.fail(where, "expected an array of length " + std::to_string(n));
      return false;
    }
    return true;
  };
  if (shape(*dj, game.num_types(), path + ".distribution") &&
      shape(*pj, game.num_types(), path + ".policy")) {
    for (int tau = 0; tau < game.num_types(); ++tau) {
      const std::string dt = path + ".distribution[" + std::to_string(tau) + "]";
      const std::string pt = path + ".policy[" + std::to_string(tau) + "]";
      if (!shape((*dj)[tau], game.num_urgency(tau), dt) ||
          !shape((*pj)[tau], game.num_urgency(tau), pt)) {
        continue;
      }
      for (int u = 0; u < game.num_urgency(tau); ++u) {
        const std::string du = dt + "[" + std::to_string(u) + "]";
        const std::string pu = pt + "[" + std::to_string(u) + "]";
        if (shape((*dj)[tau][u], levels, du)) {
          if (auto v = r.numbers((*dj)[tau][u], du)) {
            for (int k = 0; k < levels; ++k) state.d(tau, u, k) = (*v)[k];
          }
        }
        if (!shape((*pj)[tau][u], levels, pu)) continue;
        for (int k = 0; k < levels; ++k) {
          const std::string pk = pu + "[" + std::to_string(k) + "]";
          if (!shape((*pj)[tau][u][k], static_cast<std::size_t>(k) + 1, pk)) continue;
          if (auto v = r.numbers((*pj)[tau][u][k], pk)) {
            std::copy(v->begin(), v->end(), state.policy(tau, u, k).begin());
          }
        }
      }
    }
  }
  if (r.errors.size() != before) return std::nullopt;
  for (const std::string& v : state.violations(game, 1e-6 * game.mechanism().k_bar())) {
    r.errors.push_back(path + "." + v);
  }
  if (r.errors.size() != before) return std::nullopt;
  return state;
}

json chain_json(const UrgencyChain& chain) {
  return {{"values", chain.values()}, {"transition", chain.transition_matrix()}};
}

json game_types_json(const Game& game) {
  json types = json::array();
  for (const AgentType& t : game.types()) {
    types.push_back({{"urgency", chain_json(t.urgency)},
                     {"discount", t.discount},
                     {"share", t.share}});
  }
  return types;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> items)
    : std::invalid_argument(join_items(items)), items_(std::move(items)) {}

Scenario scenario_from_json(const json& doc) {
  Reader r;
  if (!r.object(doc, "",
                {"name", "types", "mechanism", "solver", "simulation", "schemes",
                 "warm_start"})) {
    throw ScenarioError(r.errors);
  }
  std::string name;
  r.read(doc, "name", "", name);

  std::vector<AgentType> types;
  bool types_ok = true;
  if (const json* tj = r.field(doc, "types", "", true)) {
    if (!tj->is_array() || tj->empty()) {
      r.fail("types", "expected a non-empty array");
      types_ok = false;
    } else {
      for (std::size_t i = 0; i < tj->size(); ++i) {
        auto t = read_type(r, (*tj)[i], "types[" + std::to_string(i) + "]");
        if (t) {
          types.push_back(std::move(*t));
        } else {
          types_ok = false;
        }
      }
    }
  } else {
    types_ok = false;
  }
  std::optional<MechanismConfig> mechanism;
  if (const json* mj = r.field(doc, "mechanism", "", true)) mechanism = read_mechanism(r, *mj);

  SolverParams solver;
  if (const json* sj = r.field(doc, "solver", "", false)) read_solver(r, *sj, solver);
  SimConfig simulation;
  if (const json* sj = r.field(doc, "simulation", "", false)) read_simulation(r, *sj, simulation);

  std::vector<Scheme> schemes{Scheme::kKarma, Scheme::kCoin, Scheme::kDict, Scheme::kTurn};
  if (const json* sj = r.field(doc, "schemes", "", false)) {
    if (!sj->is_array()) {
      r.fail("schemes", "expected an array of scheme names");
    } else {
      schemes.clear();
      for (std::size_t i = 0; i < sj->size(); ++i) {
        const std::string where = "schemes[" + std::to_string(i) + "]";
        if (!(*sj)[i].is_string()) {
          r.fail(where, "expected a string");
          continue;
        }
        try {
          const Scheme s = parse_scheme((*sj)[i].get<std::string>());
          if (std::find(schemes.begin(), schemes.end(), s) != schemes.end()) {
            r.fail(where, "duplicate scheme");
          } else {
            schemes.push_back(s);
          }
        } catch (const std::invalid_argument& e) {
          r.fail(where, e.what());
        }
      }
    }
  }

  std::optional<Game> game;
  if (types_ok && mechanism) {
    try {
      game.emplace(std::move(types), *mechanism);
    } catch (const std::invalid_argument& e) {
      r.fail("types", e.what());
    }
  }
  std::optional<SocialState> warm;
  if (const json* wj = r.field(doc, "warm_start", "", false); wj && game) {
    warm = read_warm_start(r, *wj, *game);
  }
  if (!r.errors.empty()) throw ScenarioError(r.errors);
  return Scenario{name, std::move(*game), solver, simulation, schemes, std::move(warm)};
}

json scenario_to_json(const Scenario& s) {
  const MechanismConfig& m = s.game.mechanism();
  json mechanism = {{"payment_rule", std::string(to_string(m.payment_rule()))},
                    {"k_bar", m.k_bar()},
                    {"k_max", m.k_max()}};
  if (m.tax()) {
    mechanism["tax"] = {{"coefficient", m.tax()->coefficient}, {"exponent", m.tax()->exponent}};
  }
  const SolverParams& p = s.solver;
  const SimConfig& c = s.simulation;
  json schemes = json::array();
  for (Scheme scheme : s.schemes) schemes.push_back(std::string(to_string(scheme)));
  json doc = {
      {"name", s.name},
      {"types", game_types_json(s.game)},
      {"mechanism", mechanism},
      {"solver",
       {{"dt", p.dt}, {"eta", p.eta}, {"lambda", p.lambda}, {"v_tol", p.v_tol},
        {"fp_tol", p.fp_tol}, {"max_iters", p.max_iters},
        {"max_value_sweeps", p.max_value_sweeps}, {"q_tie_tol", p.q_tie_tol},
        {"log_every", p.log_every}}},
      {"simulation",
       {{"n_agents", c.n_agents}, {"interactions", c.interactions}, {"repeats", c.repeats},
        {"seed", c.seed}, {"init_karma", std::string(to_string(c.init_karma))},
        {"remainder", std::string(to_string(c.remainder))},
        {"record_events", c.record_events}, {"histogram_burn_in", c.histogram_burn_in},
        {"workers", c.workers}}},
      {"schemes", schemes},
  };
  if (s.warm_start) {
    const SocialState& w = *s.warm_start;
    json d = json::array();
    json pi = json::array();
    for (int tau = 0; tau < w.num_types(); ++tau) {
      json dt = json::array();
      json pt = json::array();
      for (int u = 0; u < w.num_urgency(tau); ++u) {
        json du = json::array();
        json pu = json::array();
        for (int k = 0; k < w.karma_levels(); ++k) {
          du.push_back(w.d(tau, u, k));
          const std::span<const double> row = w.policy(tau, u, k);
          pu.push_back(std::vector<double>(row.begin(), row.end()));
        }
        dt.push_back(std::move(du));
        pt.push_back(std::move(pu));
      }
      d.push_back(std::move(dt));
      pi.push_back(std::move(pt));
    }
    doc["warm_start"] = {{"distribution", d}, {"policy", pi}};
  }
  return doc;
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({path.string() + ": cannot open file"});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError({path.string() + ": malformed JSON: " + e.what()});
  }
  return scenario_from_json(doc);
}

UrgencyChain three_state_chain(double escalation) {
  return UrgencyChain({1.0, 1.0, 10.0}, {{1.0 - escalation, escalation, 0.0},
                                        {0.0, 0.5, 0.5},
                                        {0.95, 0.05, 0.0}});
}

std::vector<std::string> preset_names() {
  return {"case_study_5_2", "hetero_alpha", "hetero_alpha_tax", "invaders_10pct"};
}

Scenario preset_scenario(const std::string& name) {
  const UrgencyChain base = three_state_chain(0.05);
  const std::vector<Scheme> all{Scheme::kKarma, Scheme::kCoin, Scheme::kDict, Scheme::kTurn};
  const MechanismConfig pbs(PaymentRule::kPayBidToSociety, 10);
  if (name == "case_study_5_2") {
    return Scenario{name, Game({AgentType{base, 0.98, 1.0}}, pbs), {}, {}, all, std::nullopt};
  }
  if (name == "hetero_alpha" || name == "hetero_alpha_tax") {
    std::optional<KarmaTax> tax;
    if (name == "hetero_alpha_tax") tax = KarmaTax{0.005, 2.0};
    const MechanismConfig mechanism(PaymentRule::kPayBidToSociety, 10, 0, tax);
    return Scenario{name,
                    Game({AgentType{base, 0.7, 0.5}, AgentType{base, 0.99, 0.5}}, mechanism),
                    {}, {}, all, std::nullopt};
  }
  if (name == "invaders_10pct") {
    // 10% and 20% of the time at u = 10.
    const UrgencyChain nominal = three_state_chain(0.95 / 7.0);
    const UrgencyChain invader = three_state_chain(0.475);
    return Scenario{name,
                    Game({AgentType{nominal, 0.98, 0.9}, AgentType{invader, 0.98, 0.1}}, pbs),
                    {}, {}, all, std::nullopt};
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

Scenario load_scenario(const std::string& name_or_path) {
  const std::vector<std::string> presets = preset_names();
  if (std::find(presets.begin(), presets.end(), name_or_path) != presets.end()) {
    return preset_scenario(name_or_path);
  }
  return parse_scenario(name_or_path);
}

Game with_discount(const Game& game, double discount) {
  std::vector<AgentType> types = game.types();
  for (AgentType& t : types) t.discount = discount;
  return Game(std::move(types), game.mechanism());
}

Game with_payment_rule(const Game& game, PaymentRule rule) {
  const MechanismConfig& m = game.mechanism();
  return Game(game.types(), MechanismConfig(rule, m.k_bar(), m.k_max(), m.tax()));
}

Game with_tax_coefficient(const Game& game, double coefficient) {
  const MechanismConfig& m = game.mechanism();
  std::optional<KarmaTax> tax;
  if (coefficient != 0.0) {
    tax = KarmaTax{coefficient, m.tax() ? m.tax()->exponent : 2.0};
  }
  return Game(game.types(), MechanismConfig(m.payment_rule(), m.k_bar(), m.k_max(), tax));
}

Game with_k_bar(const Game& game, int k_bar) {
  const MechanismConfig& m = game.mechanism();
  return Game(game.types(), MechanismConfig(m.payment_rule(), k_bar, 0, m.tax()));
}

}  // namespace karma
