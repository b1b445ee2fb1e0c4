#include "sweepcli/artifacts.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <unistd.h>

#include "sweepcli/problem_io.hpp"

namespace sweepcli {

using nlohmann::json;
using sweep::Mat;
using sweep::Vec;

namespace {

json rows(const Mat& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    out.push_back(r);
  }
  return out;
}

json vec(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec to_vec(const json& j, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string(what) + " must be an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw SchemaError(std::string(what) + " entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Mat to_mat(const json& j, int cols, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string(what) + " must be an array of rows");
  Mat m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vec r = to_vec(j[i], what);
    if (r.size() != cols) {
      throw SchemaError(std::string(what) + ": rows need " + std::to_string(cols) + " entries");
    }
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

}  // namespace

json certificate_to_json(const sweep::PmpCertificate& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["grid"] = {{"T", c.grid.T}, {"N", c.grid.N}};
  j["x"] = rows(c.x);
  j["u"] = rows(c.u);
  j["p"] = rows(c.p);
  j["p_jumps"] = json::array();
  for (const sweep::Jump& jp : c.p_jumps) j["p_jumps"].push_back({{"t", jp.t}, {"dp", vec(jp.dp)}});
  j["nu"] = json::array();
  for (const sweep::AdjointMeasure& mu : c.nu) {
    json atoms = json::array();
    for (const sweep::Atom& a : mu.atoms) atoms.push_back({{"t", a.t}, {"w", a.weight}});
    j["nu"].push_back({{"density", vec(mu.density)}, {"atoms", atoms}});
  }
  j["xi"] = rows(c.xi);
  j["lambda"] = c.lambda;
  return j;
}

sweep::PmpCertificate certificate_from_json(const json& j) {
  try {
    if (!j.is_object() || j.empty()) throw SchemaError("certificate must be a non-empty object");
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion) {
      throw SchemaError("unsupported schema_version");
    }
    sweep::PmpCertificate c;
    c.grid.T = j.at("grid").at("T").get<double>();
    c.grid.N = j.at("grid").at("N").get<int>();
    if (c.grid.N < 0 || (c.grid.N == 0 && c.grid.T != 0.0)) throw SchemaError("bad grid");
    const int nodes = c.grid.nodes();
    c.x = to_mat(j.at("x"), nodes, "x");
    c.u = to_mat(j.at("u"), nodes, "u");
    c.p = to_mat(j.at("p"), nodes, "p");
    c.xi = to_mat(j.at("xi"), nodes, "xi");
    for (const json& jp : j.at("p_jumps")) {
      c.p_jumps.push_back({jp.at("t").get<double>(), to_vec(jp.at("dp"), "p_jumps.dp")});
    }
    for (const json& m : j.at("nu")) {
      sweep::AdjointMeasure mu;
      mu.grid = c.grid;
      mu.density = to_vec(m.at("density"), "nu.density");
      if (mu.density.size() != nodes) throw SchemaError("nu.density has the wrong length");
      for (const json& a : m.at("atoms")) {
        mu.atoms.push_back({a.at("t").get<double>(), a.at("w").get<double>()});
      }
      c.nu.push_back(std::move(mu));
    }
    c.lambda = j.at("lambda").get<double>();
    for (const sweep::Jump& jp : c.p_jumps) {
      if (jp.dp.size() != c.p.rows()) throw SchemaError("p_jumps.dp has the wrong length");
    }
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("certificate schema: ") + e.what());
  }
}

json report_to_json(const sweep::ResidualReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["pass"] = r.pass;
  j["residuals"] = json::array();
  for (const sweep::Residual& it : r.items) {
    j["residuals"].push_back(
        {{"name", it.name}, {"value", it.value}, {"tol", it.tol}, {"pass", it.pass}});
  }
  return j;
}

std::string trajectory_csv(const sweep::Trajectory& tr, const sweep::ControlSignal* u) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t";
  for (Eigen::Index i = 0; i < tr.x.rows(); ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < tr.xi.rows(); ++i) os << ",xi" << i + 1;
  const int m = u ? u->dim() : 0;
  for (int i = 0; i < m; ++i) os << ",u" << i + 1;
  os << "\n";
  const int N = tr.grid.N;
  for (int j = 0; j <= N; ++j) {
    os << tr.grid.t(j);
    for (Eigen::Index i = 0; i < tr.x.rows(); ++i) os << "," << tr.x(i, j);
    for (Eigen::Index i = 0; i < tr.xi.rows(); ++i) os << "," << (j < tr.xi.cols() ? tr.xi(i, j) : 0.0);
    if (m > 0) {
      for (int i = 0; i < m; ++i) os << "," << (N > 0 ? u->cell(std::min(j, N - 1))[i] : 0.0);
    }
    os << "\n";
  }
  return os.str();
}

void write_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot rename into " + path + ": " + ec.message());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

}  // namespace sweepcli
