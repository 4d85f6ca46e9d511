#include "fluidq/config.hpp"

#include <set>
#include <sstream>

#include "fluidq/csv.hpp"

namespace fluidq {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ConfigError(where + ": " + what); }

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(where, "unknown field '" + key + "'");
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(where, std::string("missing field '") + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<int>();
}

/// 1-based id in the file, 0-based in memory.
int id(const json& j, const std::string& where, int count) {
  const int v = integer(j, where);
  if (v < 1 || v > count) {
    std::ostringstream os;
    os << "id " << v << " out of range 1.." << count;
    fail(where, os.str());
  }
  return v - 1;
}

Eigen::VectorXd number_vector(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where);
  return v;
}

std::vector<double> doubles(const json& j, const std::string& where) {
  const auto v = number_vector(j, where);
  return {v.data(), v.data() + v.size()};
}

Rational weight(const json& j, const std::string& where) {
  try {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return {j.get<std::int64_t>(), 1};
  } catch (const std::exception& e) {
    fail(where, e.what());
  }
  fail(where, "weight must be an integer or a string such as \"3/2\"");
}

NetworkDescription parse_network(const json& j) {
  const std::string where = "network";
  allow_keys(j, where, {"stations", "threshold", "hysteresis_gap", "flows", "idle_queues"});
  NetworkDescription d;
  d.num_stations = integer(need(j, "stations", where), where + ".stations");
  if (d.num_stations < 1) fail(where + ".stations", "need at least one station");
  d.threshold_base = number(need(j, "threshold", where), where + ".threshold");
  if (j.contains("hysteresis_gap")) {
    const auto& g = j.at("hysteresis_gap");
    const std::string gw = where + ".hysteresis_gap";
    allow_keys(g, gw, {"constant", "coefficient", "exponent"});
    if (g.contains("constant")) d.hysteresis_gap.constant = number(g.at("constant"), gw + ".constant");
    if (g.contains("coefficient")) d.hysteresis_gap.coefficient = number(g.at("coefficient"), gw + ".coefficient");
    if (g.contains("exponent")) d.hysteresis_gap.exponent = number(g.at("exponent"), gw + ".exponent");
  }
  const auto& flows = need(j, "flows", where);
  if (!flows.is_array() || flows.empty()) fail(where + ".flows", "expected a nonempty array");
  for (std::size_t f = 0; f < flows.size(); ++f) {
    const std::string fw = where + ".flows[" + std::to_string(f + 1) + "]";
    const auto& fj = flows[f];
    allow_keys(fj, fw, {"weight", "arrival", "hops"});
    FlowSpec fs;
    fs.weight = fj.contains("weight") ? weight(fj.at("weight"), fw + ".weight") : Rational{1, 1};
    fs.arrival = parse_distribution(need(fj, "arrival", fw), fw + ".arrival");
    const auto& hops = need(fj, "hops", fw);
    if (!hops.is_array() || hops.empty()) fail(fw + ".hops", "expected a nonempty array");
    for (std::size_t h = 0; h < hops.size(); ++h) {
      const std::string hw = fw + ".hops[" + std::to_string(h + 1) + "]";
      allow_keys(hops[h], hw, {"station", "service", "class"});
      HopSpec hs;
      hs.station = id(need(hops[h], "station", hw), hw + ".station", d.num_stations);
      hs.service = parse_distribution(need(hops[h], "service", hw), hw + ".service");
      if (hops[h].contains("class")) {
        const int c = integer(hops[h].at("class"), hw + ".class");
        if (c < 1) fail(hw + ".class", "class ids start at 1");
        hs.cls = c - 1;
      }
      fs.hops.push_back(hs);
    }
    d.flows.push_back(fs);
  }
  if (j.contains("idle_queues")) {
    const auto& iq = j.at("idle_queues");
    if (!iq.is_array()) fail(where + ".idle_queues", "expected an array");
    for (std::size_t i = 0; i < iq.size(); ++i) {
      const std::string iw = where + ".idle_queues[" + std::to_string(i + 1) + "]";
      allow_keys(iq[i], iw, {"class", "station"});
      const int c = integer(need(iq[i], "class", iw), iw + ".class");
      if (c < 1) fail(iw + ".class", "class ids start at 1");
      d.idle_queues.push_back({c - 1, id(need(iq[i], "station", iw), iw + ".station", d.num_stations)});
    }
  }
  return d;
}

ExperimentPlan parse_experiment(const json& j, const NetworkSpec& spec) {
  const std::string where = "experiment";
  allow_keys(j, where,
             {"scales", "horizon", "replications", "base_seed", "seeds", "warmup_fraction", "target_rates",
              "sample_interval", "max_events"});
  ExperimentPlan p;
  p.scales = doubles(need(j, "scales", where), where + ".scales");
  if (j.contains("horizon")) p.horizon = number(j.at("horizon"), where + ".horizon");
  if (j.contains("warmup_fraction")) p.warmup_fraction = number(j.at("warmup_fraction"), where + ".warmup_fraction");
  if (j.contains("sample_interval")) p.sample_interval = number(j.at("sample_interval"), where + ".sample_interval");
  if (j.contains("max_events")) {
    if (!j.at("max_events").is_number_unsigned()) fail(where + ".max_events", "expected a positive integer");
    p.max_events = j.at("max_events").get<std::uint64_t>();
  }
  if (j.contains("seeds")) {
    if (j.contains("base_seed") || j.contains("replications"))
      fail(where, "give either 'seeds' or 'base_seed'/'replications', not both");
    for (const auto& s : j.at("seeds")) {
      if (!s.is_number_unsigned()) fail(where + ".seeds", "seeds are nonnegative integers");
      p.seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    const int reps = j.contains("replications") ? integer(j.at("replications"), where + ".replications") : 10;
    std::uint64_t base = 1;
    if (j.contains("base_seed")) {
      if (!j.at("base_seed").is_number_unsigned()) fail(where + ".base_seed", "expected a nonnegative integer");
      base = j.at("base_seed").get<std::uint64_t>();
    }
    if (reps < 1) fail(where + ".replications", "need at least one replication");
    p.seeds = ExperimentPlan::seed_range(base, reps);
  }
  if (j.contains("target_rates")) p.target_rates = number_vector(j.at("target_rates"), where + ".target_rates");
  const auto report = validate(p, spec);
  if (!report.ok()) fail(where, report.errors.front());
  return p;
}

FluidConfig parse_fluid(const json& j, const NetworkSpec& spec) {
  const std::string where = "fluid";
  allow_keys(j, where,
             {"threshold", "horizon", "initial_queue", "initial_arrival_residual", "initial_service_residual"});
  FluidConfig c;
  c.threshold = spec.threshold_base;
  if (j.contains("threshold")) c.threshold = number(j.at("threshold"), where + ".threshold");
  if (j.contains("horizon")) c.horizon = number(j.at("horizon"), where + ".horizon");
  if (!(c.threshold > 0.0)) fail(where + ".threshold", "must be positive");
  if (!(c.horizon >= 0.0)) fail(where + ".horizon", "must be nonnegative");
  auto sized = [&](const char* key, int n) -> std::optional<Eigen::VectorXd> {
    if (!j.contains(key)) return std::nullopt;
    Eigen::VectorXd v = number_vector(j.at(key), where + "." + key);
    if (v.size() != n) fail(where + "." + key, "wrong length, expected " + std::to_string(n));
    if ((v.array() < 0.0).any()) fail(where + "." + key, "entries must be nonnegative");
    return v;
  };
  c.initial_queue = sized("initial_queue", spec.num_classes());
  c.initial_arrival_residual = sized("initial_arrival_residual", spec.num_flows());
  c.initial_service_residual = sized("initial_service_residual", spec.num_classes());
  return c;
}

EquilibriumSet parse_pieces(const json& j, int K) {
  const std::string where = "absorption.set";
  allow_keys(j, where, {"pieces"});
  EquilibriumSet set{"explicit", K, {}};
  const auto& pieces = need(j, "pieces", where);
  if (!pieces.is_array() || pieces.empty()) fail(where + ".pieces", "expected a nonempty array");
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    const std::string pw = where + ".pieces[" + std::to_string(p + 1) + "]";
    allow_keys(pieces[p], pw, {"box", "triangle"});
    SetPiece piece;
    const auto& box = need(pieces[p], "box", pw);
    if (!box.is_array() || static_cast<int>(box.size()) != K) fail(pw + ".box", "need one interval per queue");
    for (const auto& iv : box) {
      const auto v = number_vector(iv, pw + ".box");
      if (v.size() != 2 || v(0) > v(1)) fail(pw + ".box", "intervals are [lo, hi] with lo <= hi");
      piece.box.push_back({v(0), v(1)});
    }
    if (pieces[p].contains("triangle")) {
      const auto& t = pieces[p].at("triangle");
      const std::string tw = pw + ".triangle";
      allow_keys(t, tw, {"x", "y", "vertices"});
      Triangle tri;
      tri.x = id(need(t, "x", tw), tw + ".x", K);
      tri.y = id(need(t, "y", tw), tw + ".y", K);
      if (tri.x == tri.y) fail(tw, "x and y must differ");
      const auto& vs = need(t, "vertices", tw);
      if (!vs.is_array() || vs.size() != 3) fail(tw + ".vertices", "need three vertices");
      for (int c = 0; c < 3; ++c) {
        const auto v = number_vector(vs[c], tw + ".vertices");
        if (v.size() != 2) fail(tw + ".vertices", "vertices are [x, y]");
        tri.vertices.col(c) = v;
      }
      piece.triangle = tri;
    }
    set.pieces.push_back(piece);
  }
  return set;
}

SamplePlan parse_plan(const json& j, const NetworkSpec& spec, double hbar, double a) {
  const std::string where = "absorption.plan";
  if (!j.is_array()) fail(where, "expected an array of sample groups");
  const int K = spec.num_classes();
  SamplePlan plan;
  for (std::size_t g = 0; g < j.size(); ++g) {
    const std::string gw = where + "[" + std::to_string(g + 1) + "]";
    const auto& gj = j[g];
    if (!gj.is_object() || !gj.contains("kind") || !gj.at("kind").is_string()) fail(gw, "missing string 'kind'");
    const std::string kind = gj.at("kind");
    auto base_state = [&](const json& src) {
      FluidState<double> s = FluidState<double>::zero(spec, hbar);
      if (src.contains("base_queue")) {
        const auto q = number_vector(src.at("base_queue"), gw + ".base_queue");
        if (q.size() != K) fail(gw + ".base_queue", "wrong length");
        s.queue = hbar * q;
      }
      return s;
    };
    if (kind == "switch_regions") {
      allow_keys(gj, gw, {"kind", "grid"});
      const int grid = gj.contains("grid") ? integer(gj.at("grid"), gw + ".grid") : 6;
      try {
        for (auto& grp : switch_region_plan(spec, hbar, a, grid).groups) plan.groups.push_back(std::move(grp));
      } catch (const std::invalid_argument& e) {
        fail(gw, e.what());
      }
    } else if (kind == "grid") {
      allow_keys(gj, gw, {"kind", "name", "base_queue", "coords", "lo", "hi", "points", "faces", "offsets"});
      std::vector<int> coords;
      for (const auto& c : need(gj, "coords", gw)) coords.push_back(id(c, gw + ".coords", K));
      const double lo = number(need(gj, "lo", gw), gw + ".lo");
      const double hi = number(need(gj, "hi", gw), gw + ".hi");
      const int points = gj.contains("points") ? integer(gj.at("points"), gw + ".points") : 10;
      if (points < 1 || !(hi >= lo)) fail(gw, "need points >= 1 and hi >= lo");
      std::vector<double> faces, offsets;
      if (gj.contains("faces")) faces = doubles(gj.at("faces"), gw + ".faces");
      if (gj.contains("offsets")) offsets = doubles(gj.at("offsets"), gw + ".offsets");
      for (auto& f : faces) f *= hbar;
      for (auto& o : offsets) o *= hbar;
      const auto vals = boundary_biased_values(lo * hbar, hi * hbar, points, faces, offsets);
      const std::string name = gj.contains("name") ? gj.at("name").get<std::string>() : "grid";
      plan.groups.push_back(
          product_group(name, base_state(gj), coords, std::vector<std::vector<double>>(coords.size(), vals)));
    } else if (kind == "ladder") {
      allow_keys(gj, gw, {"kind", "name", "base_queue", "coord", "eps"});
      const int coord = id(need(gj, "coord", gw), gw + ".coord", K);
      auto eps = doubles(need(gj, "eps", gw), gw + ".eps");
      for (auto& e : eps) e *= hbar;
      const std::string name = gj.contains("name") ? gj.at("name").get<std::string>() : "ladder";
      plan.groups.push_back(epsilon_ladder(name, base_state(gj), coord, eps));
    } else {
      fail(gw, "unknown sample group kind '" + kind + "'");
    }
  }
  return plan;
}

AbsorptionConfig parse_absorption(const json& j, const NetworkSpec& spec) {
  const std::string where = "absorption";
  allow_keys(j, where,
             {"set", "a", "threshold", "projection", "plan", "horizon", "tolerance", "ratio_bound", "target_rates",
              "member_grid", "blowup_min_shrink"});
  AbsorptionConfig c;
  const int K = spec.num_classes();
  if (j.contains("a")) c.a = number(j.at("a"), where + ".a");
  c.threshold = spec.threshold_base;
  if (j.contains("threshold")) c.threshold = number(j.at("threshold"), where + ".threshold");
  if (!(c.threshold > 0.0)) fail(where + ".threshold", "must be positive");
  const auto& sj = need(j, "set", where);
  try {
    if (sj.is_string()) {
      c.set_name = sj.get<std::string>();
      c.set = builtin_set(c.set_name, c.a);
      if (c.set.dimension != K) fail(where + ".set", "builtin set '" + c.set_name + "' does not fit this network");
    } else {
      c.set = parse_pieces(sj, K);
    }
  } catch (const std::invalid_argument& e) {
    fail(where + ".set", e.what());
  }
  if (j.contains("projection")) {
    for (const auto& p : j.at("projection")) c.projection.push_back(id(p, where + ".projection", K));
    try {
      c.set = c.set.projected(c.projection);
    } catch (const std::invalid_argument& e) {
      fail(where + ".projection", e.what());
    }
  }
  if (j.contains("plan")) c.plan = parse_plan(j.at("plan"), spec, c.threshold, c.a);
  if (j.contains("horizon")) c.c1.horizon = number(j.at("horizon"), where + ".horizon");
  if (j.contains("tolerance")) c.c1.tolerance = number(j.at("tolerance"), where + ".tolerance");
  if (j.contains("ratio_bound")) c.c1.ratio_bound = number(j.at("ratio_bound"), where + ".ratio_bound");
  if (j.contains("blowup_min_shrink"))
    c.c1.blowup_min_shrink = number(j.at("blowup_min_shrink"), where + ".blowup_min_shrink");
  if (j.contains("member_grid")) c.member_grid = integer(j.at("member_grid"), where + ".member_grid");
  if (c.member_grid < 2) fail(where + ".member_grid", "must be at least 2");
  if (j.contains("target_rates")) {
    c.target_rates = number_vector(j.at("target_rates"), where + ".target_rates");
    if (c.target_rates->size() != spec.num_flows()) fail(where + ".target_rates", "need one entry per flow");
  }
  return c;
}

}  // namespace

FluidState<double> FluidConfig::initial_state(const NetworkSpec& spec) const {
  FluidState<double> s = FluidState<double>::zero(spec, threshold);
  if (initial_queue) s.queue = threshold * *initial_queue;
  if (initial_arrival_residual) s.arrival = *initial_arrival_residual;
  if (initial_service_residual) s.service = *initial_service_residual;
  return s;
}

DistributionSpec parse_distribution(const json& j, const std::string& where) {
  if (!j.is_object() || j.size() != 1)
    fail(where, "expected exactly one of {\"exponential\": rate}, {\"pareto2\": rate}, {\"deterministic\": value}");
  const auto it = j.begin();
  const std::string key = it.key();
  const double v = number(it.value(), where + "." + key);
  if (!(v > 0.0)) fail(where + "." + key, "must be positive");
  if (key == "exponential") return DistributionSpec::exponential(v);
  if (key == "pareto2") return DistributionSpec::pareto2(v);
  if (key == "deterministic") return DistributionSpec::deterministic(v);
  fail(where, "unknown distribution '" + key + "'");
}

json to_json(const DistributionSpec& d) {
  switch (d.kind) {
    case DistributionKind::exponential: return {{"exponential", d.parameter}};
    case DistributionKind::pareto2: return {{"pareto2", d.parameter}};
    case DistributionKind::deterministic: return {{"deterministic", d.parameter}};
  }
  return nullptr;
}

json to_json(const NetworkDescription& desc) {
  json flows = json::array();
  for (const auto& f : desc.flows) {
    json hops = json::array();
    for (const auto& h : f.hops) {
      json hj{{"station", h.station + 1}, {"service", to_json(h.service)}};
      if (h.cls) hj["class"] = *h.cls + 1;
      hops.push_back(hj);
    }
    flows.push_back({{"weight", to_string(f.weight)}, {"arrival", to_json(f.arrival)}, {"hops", hops}});
  }
  json j{{"stations", desc.num_stations},
         {"threshold", desc.threshold_base},
         {"hysteresis_gap",
          {{"constant", desc.hysteresis_gap.constant},
           {"coefficient", desc.hysteresis_gap.coefficient},
           {"exponent", desc.hysteresis_gap.exponent}}},
         {"flows", flows}};
  if (!desc.idle_queues.empty()) {
    json iq = json::array();
    for (const auto& q : desc.idle_queues) iq.push_back({{"class", q.cls + 1}, {"station", q.station + 1}});
    j["idle_queues"] = iq;
  }
  return j;
}

Config parse_config(const json& doc) {
  allow_keys(doc, "config", {"schema_version", "network", "experiment", "fluid", "absorption"});
  const auto& ver = need(doc, "schema_version", "config");
  if (!ver.is_number_integer() || ver.get<int>() != kSchemaVersion)
    fail("config.schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  Config c;
  c.source = doc;
  c.description = parse_network(need(doc, "network", "config"));
  try {
    c.network = build_network(c.description);
  } catch (const std::invalid_argument& e) {
    fail("network", e.what());
  }
  c.fluid.threshold = c.network.threshold_base;
  if (doc.contains("experiment")) {
    c.experiment = parse_experiment(doc.at("experiment"), c.network);
  } else {
    c.experiment.scales = {1.0};
    c.experiment.seeds = {1};
  }
  if (doc.contains("fluid")) c.fluid = parse_fluid(doc.at("fluid"), c.network);
  if (doc.contains("absorption")) c.absorption = parse_absorption(doc.at("absorption"), c.network);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return parse_config(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fluidq
