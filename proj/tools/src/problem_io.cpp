#include "sweepcli/problem_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sweep/errors.hpp"

namespace sweepcli {

using nlohmann::json;

namespace {

std::vector<std::string> strings(const json& j, const char* key) {
  if (!j.is_array()) throw SchemaError(std::string(key) + " must be an array of expressions");
  std::vector<std::string> out;
  for (const json& e : j) {
    if (!e.is_string()) throw SchemaError(std::string(key) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::vector<double> numbers(const json& j, const char* key) {
  if (!j.is_array()) throw SchemaError(std::string(key) + " must be an array of numbers");
  std::vector<double> out;
  for (const json& e : j) {
    if (!e.is_number()) throw SchemaError(std::string(key) + " entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void expect_size(std::size_t got, int want, const char* what) {
  if (static_cast<int>(got) != want) {
    throw SchemaError(std::string(what) + ": expected " + std::to_string(want) + " entries, got " +
                      std::to_string(got));
  }
}

sweep::Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const sweep::Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<sweep::ScalarField> parse_all(const std::vector<std::string>& src, int n, int m,
                                          sweep::Smoothness s = sweep::Smoothness::C11) {
  std::vector<sweep::ScalarField> out;
  for (const std::string& e : src) out.push_back(sweep::ScalarField::parse(e, n, m, s));
  return out;
}

}  // namespace

ProblemFile problem_from_json(const json& j) {
  try {
    if (!j.is_object()) throw SchemaError("problem must be a JSON object");
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion) {
      throw SchemaError("unsupported schema_version");
    }
    ProblemFile p;
    p.name = j.value("name", std::string());
    p.n = j.at("n").get<int>();
    p.m = j.at("m").get<int>();
    p.T = j.at("T").get<double>();
    if (p.n < 1 || p.m < 0) throw SchemaError("n must be >= 1 and m >= 0");
    if (!(p.T >= 0.0)) throw SchemaError("T must be >= 0");
    p.psi = strings(j.at("psi"), "psi");
    if (p.psi.empty()) throw SchemaError("psi must list at least one constraint");
    p.f = strings(j.at("f"), "f");
    expect_size(p.f.size(), p.n, "f");
    p.phi = j.value("phi", std::string("0"));
    p.g = j.value("g", std::string("0"));

    const json& c0 = j.at("C0");
    p.C0_kind = c0.at("kind").get<std::string>();
    if (p.C0_kind == "point") {
      p.C0_point = numbers(c0.at("point"), "C0.point");
      expect_size(p.C0_point.size(), p.n, "C0.point");
    } else if (p.C0_kind == "sublevel") {
      p.C0_psi = strings(c0.at("psi"), "C0.psi");
      if (c0.contains("point")) p.C0_point = numbers(c0.at("point"), "C0.point");
    } else {
      throw SchemaError("C0.kind must be point or sublevel");
    }

    const json& ct = j.contains("CT") ? j.at("CT") : json{{"kind", "all"}};
    p.CT_kind = ct.at("kind").get<std::string>();
    if (p.CT_kind == "affine") {
      p.CT_a = numbers(ct.at("a"), "CT.a");
      expect_size(p.CT_a.size(), p.n, "CT.a");
      p.CT_b = ct.at("b").get<double>();
      double norm = 0.0;
      for (double v : p.CT_a) norm += v * v;
      if (norm == 0.0) throw SchemaError("CT.a must be nonzero");
    } else if (p.CT_kind == "sublevel") {
      p.CT_psi = strings(ct.at("psi"), "CT.psi");
    } else if (p.CT_kind != "all") {
      throw SchemaError("CT.kind must be all, affine or sublevel");
    }

    const json& U = j.at("U");
    p.U_lo = numbers(U.at("lo"), "U.lo");
    p.U_hi = numbers(U.at("hi"), "U.hi");
    expect_size(p.U_lo.size(), p.m, "U.lo");
    expect_size(p.U_hi.size(), p.m, "U.hi");
    for (int i = 0; i < p.m; ++i) {
      if (!(p.U_lo[i] <= p.U_hi[i])) throw SchemaError("U.lo must not exceed U.hi");
    }
    p.delta = j.value("delta", 1.0);
    if (!(p.delta > 0.0)) throw SchemaError("delta must be positive");

    if (j.contains("ball")) {
      const json& b = j.at("ball");
      auto y0 = numbers(b.at("y0"), "ball.y0");
      expect_size(y0.size(), p.n, "ball.y0");
      p.ball = {y0, b.at("R0").get<double>()};
    }
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      if (s.contains("gammas")) {
        p.schedule.gammas = numbers(s.at("gammas"), "schedule.gammas");
        if (p.schedule.gammas.empty()) throw SchemaError("schedule.gammas is empty");
      } else if (s.contains("auto")) {
        const json& a = s.at("auto");
        p.schedule.gamma_min = a.value("gamma_min", 0.0);
        p.schedule.gamma_max = a.value("gamma_max", 1e3);
        p.schedule.steps = a.value("steps", 8);
        if (p.schedule.steps < 1) throw SchemaError("schedule.auto.steps must be >= 1");
      } else {
        throw SchemaError("schedule needs gammas or auto");
      }
    }
    p.N = j.value("N", 200);
    if (p.N < 1 && p.T > 0.0) throw SchemaError("N must be >= 1");
    p.substeps = j.value("substeps", 1);
    if (p.substeps < 1) throw SchemaError("substeps must be >= 1");
    p.K_tilde = j.value("K_tilde", 100.0);
    if (j.contains("region")) {
      const json& r = j.at("region");
      auto c = numbers(r.at("center"), "region.center");
      expect_size(c.size(), p.n, "region.center");
      p.region = sweep::Region{to_vec(c), r.at("radius").get<double>()};
    }
    if (j.contains("constants")) {
      const json& c = j.at("constants");
      p.eta = c.value("eta", 0.0);
      p.Mbar_psi = c.value("Mbar_psi", 0.0);
      p.Mbar = c.value("Mbar", 0.0);
    }
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("problem schema: ") + e.what());
  }
}

json problem_to_json(const ProblemFile& p) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = p.name;
  j["n"] = p.n;
  j["m"] = p.m;
  j["T"] = p.T;
  j["psi"] = p.psi;
  j["f"] = p.f;
  j["phi"] = p.phi;
  j["g"] = p.g;
  if (p.C0_kind == "point") {
    j["C0"] = {{"kind", "point"}, {"point", p.C0_point}};
  } else {
    j["C0"] = {{"kind", "sublevel"}, {"psi", p.C0_psi}};
    if (!p.C0_point.empty()) j["C0"]["point"] = p.C0_point;
  }
  if (p.CT_kind == "affine") {
    j["CT"] = {{"kind", "affine"}, {"a", p.CT_a}, {"b", p.CT_b}};
  } else if (p.CT_kind == "sublevel") {
    j["CT"] = {{"kind", "sublevel"}, {"psi", p.CT_psi}};
  } else {
    j["CT"] = {{"kind", "all"}};
  }
  j["U"] = {{"lo", p.U_lo}, {"hi", p.U_hi}};
  j["delta"] = p.delta;
  if (p.ball) j["ball"] = {{"y0", p.ball->first}, {"R0", p.ball->second}};
  if (!p.schedule.gammas.empty()) {
    j["schedule"] = {{"gammas", p.schedule.gammas}};
  } else {
    j["schedule"] = {{"auto",
                      {{"gamma_min", p.schedule.gamma_min},
                       {"gamma_max", p.schedule.gamma_max},
                       {"steps", p.schedule.steps}}}};
  }
  j["N"] = p.N;
  j["substeps"] = p.substeps;
  j["K_tilde"] = p.K_tilde;
  if (p.region) {
    std::vector<double> c(p.region->center.data(),
                          p.region->center.data() + p.region->center.size());
    j["region"] = {{"center", c}, {"radius", p.region->radius}};
  }
  if (p.eta > 0.0 || p.Mbar_psi > 0.0 || p.Mbar > 0.0) {
    j["constants"] = {{"eta", p.eta}, {"Mbar_psi", p.Mbar_psi}, {"Mbar", p.Mbar}};
  }
  return j;
}

ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return problem_from_json(j);
}

BuiltProblem build_problem(const ProblemFile& p, std::uint64_t seed, int samples) {
  using namespace sweep;
  const int n = p.n, m = p.m;

  SweepingSet S(parse_all(p.psi, n, 0));
  if (p.ball) S = augment_with_ball(S, to_vec(p.ball->first), p.ball->second);

  BuiltProblem b{
      SweepingProblem{p.name,
                      DynamicsSpec(parse_all(p.f, n, m), ScalarField::parse(p.phi, n, 0), S, p.T),
                      ScalarField::parse(p.g, 2 * n, 0, Smoothness::Lipschitz),
                      InitialSet{},
                      TerminalSet{},
                      ControlBox{to_vec(p.U_lo), to_vec(p.U_hi)},
                      p.delta},
      {},
      0.0,
      false,
      {},
      p.N,
      p.substeps,
      p.K_tilde,
      {}};
  SweepingProblem& prob = b.problem;

  if (p.C0_kind == "point") {
    prob.C0.kind = InitialSet::Kind::Point;
    prob.C0.point = to_vec(p.C0_point);
  } else {
    prob.C0.kind = InitialSet::Kind::Sublevel;
    prob.C0.psi = parse_all(p.C0_psi, n, 0);
    if (!p.C0_point.empty()) prob.C0.point = to_vec(p.C0_point);
  }
  if (p.CT_kind == "affine") {
    prob.CT.kind = TerminalSet::Kind::Affine;
    prob.CT.a = to_vec(p.CT_a);
    prob.CT.b = p.CT_b;
  } else if (p.CT_kind == "sublevel") {
    prob.CT.kind = TerminalSet::Kind::Sublevel;
    prob.CT.psi = parse_all(p.CT_psi, n, 0);
  }

  if (p.region) {
    b.region = *p.region;
  } else {
    b.region.center = prob.C0.point.size() == n ? prob.C0.point : Vec::Zero(n);
    b.region.radius = 1.0;
  }

  SetConstants c;
  if (p.eta > 0.0 && p.Mbar_psi > 0.0) {
    c.eta = p.eta;
    c.Mbar_psi = p.Mbar_psi;
    b.estimate.constants = c;
  } else {
    b.estimate = estimate_set_constants(S, b.region, samples, seed);
    c = b.estimate.constants;
    if (p.eta > 0.0) c.eta = p.eta;
    if (p.Mbar_psi > 0.0) c.Mbar_psi = std::max(p.Mbar_psi, 2.0 * c.eta);
    b.estimate.constants = c;
    b.estimated = true;
  }
  if (c.eta > 0.0) {
    S = S.with_constants(c);
    prob.spec = prob.spec.with_set(S);
  }

  b.Mbar = p.Mbar;
  if (!(b.Mbar > 0.0)) {
    const DynamicsSpec& spec = prob.spec;
    b.Mbar = estimate_drift_bound(
        S, b.region, p.T, prob.U.lo, prob.U.hi, samples, seed,
        [&spec](double t, const Vec& x, const Vec& u) { return spec.drift(t, x, u); });
    b.estimated = true;
  }
  prob.spec = prob.spec.with_Mbar(b.Mbar);

  if (!p.schedule.gammas.empty()) {
    b.gammas = p.schedule.gammas;
  } else {
    double lo = p.schedule.gamma_min;
    if (!(lo > 0.0)) lo = c.eta > 0.0 ? std::max(10.0, 4.0 * b.Mbar / c.eta) : 10.0;
    const double hi = std::max(lo, p.schedule.gamma_max);
    b.gammas = p.schedule.steps == 1 ? std::vector<double>{hi}
                                     : PenaltySchedule::log_uniform(lo, hi, p.schedule.steps);
  }
  return b;
}

sweep::SolveConfig make_config(const BuiltProblem& b) {
  sweep::SolveConfig cfg(sweep::PenaltySchedule(b.gammas, b.Mbar, b.problem.spec.set()));
  cfg.N = b.N;
  cfg.substeps = b.substeps;
  cfg.K_tilde = b.K_tilde;
  return cfg;
}

}  // namespace sweepcli
