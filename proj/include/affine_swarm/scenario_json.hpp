#pragma once

// JSON scenario files: schema-checked loading with exhaustive diagnostics,
// defaults for every omitted field, dotted-path overrides, and serialization
// of a resolved config.

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affine_swarm/frameworks.hpp"
#include "affine_swarm/sim.hpp"

namespace affine_swarm {

using Json = nlohmann::ordered_json;

namespace detail {

// Records schema problems with their JSON path and keeps going.
class JsonReader {
 public:
  std::vector<std::string> issues;

  void fail(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

  /// Flags keys of `obj` outside `allowed`.
  void keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      fail(path, "expected an object");
      return;
    }
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) fail(join(path, it.key()), "unknown key");
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  bool number(const Json& obj, const std::string& path, const char* key, double& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj[key];
    if (!v.is_number()) {
      fail(join(path, key), "expected a number");
      return false;
    }
    out = v.get<double>();
    return true;
  }

  bool integer(const Json& obj, const std::string& path, const char* key, long long& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj[key];
    if (!v.is_number_integer()) {
      fail(join(path, key), "expected an integer");
      return false;
    }
    out = v.get<long long>();
    return true;
  }

  bool integer(const Json& obj, const std::string& path, const char* key, int& out) {
    long long v = 0;
    if (!integer(obj, path, key, v)) return false;
    out = static_cast<int>(v);
    return true;
  }

  bool boolean(const Json& obj, const std::string& path, const char* key, bool& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj[key];
    if (!v.is_boolean()) {
      fail(join(path, key), "expected true or false");
      return false;
    }
    out = v.get<bool>();
    return true;
  }

  bool string(const Json& obj, const std::string& path, const char* key, std::string& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj[key];
    if (!v.is_string()) {
      fail(join(path, key), "expected a string");
      return false;
    }
    out = v.get<std::string>();
    return true;
  }

  bool vector(const Json& v, const std::string& path, VectorXd& out) {
    if (!v.is_array()) {
      fail(path, "expected an array of numbers");
      return false;
    }
    out.resize(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        fail(path + "[" + std::to_string(i) + "]", "expected a number");
        return false;
      }
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return true;
  }

  /// Nested rows; all rows must have equal length.
  bool matrix(const Json& v, const std::string& path, MatrixXd& out) {
    if (!v.is_array() || v.empty()) {
      fail(path, "expected a non-empty array of rows");
      return false;
    }
    std::vector<VectorXd> rows;
    for (std::size_t r = 0; r < v.size(); ++r) {
      VectorXd row;
      if (!vector(v[r], path + "[" + std::to_string(r) + "]", row)) return false;
      if (!rows.empty() && row.size() != rows.front().size()) {
        fail(path, "rows have different lengths");
        return false;
      }
      rows.push_back(std::move(row));
    }
    out.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    return true;
  }

  /// [[i, j], ...] with 1-based ids, returned 0-based.
  bool pairs(const Json& v, const std::string& path, std::vector<std::pair<int, int>>& out) {
    if (!v.is_array()) {
      fail(path, "expected an array of [i, j] pairs");
      return false;
    }
    out.clear();
    bool ok = true;
    for (std::size_t n = 0; n < v.size(); ++n) {
      const Json& p = v[n];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
        fail(path + "[" + std::to_string(n) + "]", "expected [i, j] with integer node ids");
        ok = false;
        continue;
      }
      out.emplace_back(p[0].get<int>() - 1, p[1].get<int>() - 1);
    }
    return ok;
  }

  bool ids(const Json& v, const std::string& path, std::vector<int>& out) {
    if (!v.is_array()) {
      fail(path, "expected an array of node ids");
      return false;
    }
    out.clear();
    for (std::size_t n = 0; n < v.size(); ++n) {
      if (!v[n].is_number_integer()) {
        fail(path + "[" + std::to_string(n) + "]", "expected an integer node id");
        return false;
      }
      out.push_back(v[n].get<int>() - 1);
    }
    return true;
  }
};

inline std::vector<DirectedEdge> to_directed(const std::vector<std::pair<int, int>>& p) {
  std::vector<DirectedEdge> out;
  for (const auto& [a, b] : p) out.push_back({a, b});
  return out;
}

inline bool read_transform(JsonReader& rd, const Json& v, const std::string& path, int dim,
                           AffineTransform& out) {
  rd.keys(v, path, {"theta", "translation"});
  if (!v.is_object()) return false;
  if (v.contains("theta")) {
    MatrixXd t;
    if (!rd.matrix(v["theta"], path + ".theta", t)) return false;
    if (t.rows() != dim || t.cols() != dim) {
      rd.fail(path + ".theta", "must be " + std::to_string(dim) + " x " + std::to_string(dim));
      return false;
    }
    out.theta = t;
  }
  if (v.contains("translation")) {
    VectorXd t;
    if (!rd.vector(v["translation"], path + ".translation", t)) return false;
    if (t.size() != dim) {
      rd.fail(path + ".translation", "must have " + std::to_string(dim) + " entries");
      return false;
    }
    out.translation = t;
  }
  return true;
}

inline bool read_bernoulli(JsonReader& rd, const Json& v, const std::string& path, BernoulliLosses& out,
                           bool with_type) {
  if (with_type) rd.keys(v, path, {"type", "lambda", "symmetric_losses"});
  else rd.keys(v, path, {"lambda", "symmetric_losses"});
  if (!v.is_object()) return false;
  if (!rd.number(v, path, "lambda", out.lambda) && !v.contains("lambda")) rd.fail(JsonReader::join(path, "lambda"), "required");
  rd.boolean(v, path, "symmetric_losses", out.symmetric);
  return true;
}

inline Json matrix_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_json(const VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Json edges_json(const std::vector<DirectedEdge>& edges) {
  Json out = Json::array();
  for (const auto& e : edges) out.push_back({e.from + 1, e.to + 1});
  return out;
}

inline Json ids_json(const std::vector<int>& ids) {
  Json out = Json::array();
  for (int i : ids) out.push_back(i + 1);
  return out;
}

inline Json transform_json(const AffineTransform& a) {
  return {{"theta", matrix_json(a.theta)}, {"translation", vector_json(a.translation)}};
}

inline Json bernoulli_json(const BernoulliLosses& b) {
  return {{"lambda", b.lambda}, {"symmetric_losses", b.symmetric}};
}

}  // namespace detail

/// Builds a ScenarioConfig from a parsed document. Throws ConfigError listing
/// every schema and semantic issue found.
inline ScenarioConfig scenario_from_json(const Json& doc) {
  using detail::JsonReader;
  JsonReader rd;
  ScenarioConfig c;
  rd.keys(doc, "", {"name", "graph", "nominal_configuration", "stress", "trajectory", "control", "estimator",
                    "loss_model", "noise", "sim"});
  if (!doc.is_object()) throw ConfigError("invalid scenario", rd.issues);
  rd.string(doc, "", "name", c.name);

  // graph + nominal_configuration
  bool graph_ok = false;
  std::optional<NominalFramework> framework;
  if (!doc.contains("graph")) {
    rd.fail("graph", "required");
  } else {
    const Json& gj = doc["graph"];
    rd.keys(gj, "graph", {"framework", "n_nodes", "edges"});
    if (gj.is_object()) {
      std::string fw;
      if (rd.string(gj, "graph", "framework", fw)) {
        if (gj.contains("n_nodes") || gj.contains("edges"))
          rd.fail("graph", "give either framework or n_nodes + edges, not both");
        try {
          framework = framework_by_name(fw);
          c.graph = framework->graph;
          graph_ok = true;
        } catch (const ConfigError& e) {
          rd.fail("graph.framework", e.what());
        }
      } else {
        int n = 0;
        std::vector<std::pair<int, int>> edges;
        const bool has_n = rd.integer(gj, "graph", "n_nodes", n);
        if (!gj.contains("n_nodes")) rd.fail("graph.n_nodes", "required unless graph.framework is given");
        const bool has_e = gj.contains("edges") && rd.pairs(gj["edges"], "graph.edges", edges);
        if (!gj.contains("edges")) rd.fail("graph.edges", "required unless graph.framework is given");
        if (has_n && has_e) {
          try {
            c.graph = NominalGraph(n, edges);
            graph_ok = true;
          } catch (const ConfigError& e) {
            rd.fail("graph", e.what());
          }
        }
      }
    }
  }
  if (doc.contains("nominal_configuration")) {
    // one row per node
    MatrixXd p;
    if (rd.matrix(doc["nominal_configuration"], "nominal_configuration", p)) c.nominal = Configuration(p.transpose());
  } else if (framework) {
    c.nominal = framework->nominal;
  } else {
    rd.fail("nominal_configuration", "required unless graph.framework is given");
  }
  const int dim = c.nominal.size() > 0 ? c.nominal.dim() : 2;
  const int n = c.graph.n_nodes();

  if (doc.contains("stress") && !doc["stress"].is_null()) {
    MatrixXd l;
    if (rd.matrix(doc["stress"], "stress", l)) c.stress = l;
  }

  // trajectory
  if (!doc.contains("trajectory")) {
    rd.fail("trajectory", "required");
  } else {
    const Json& tj = doc["trajectory"];
    rd.keys(tj, "trajectory", {"initial", "segments"});
    if (tj.is_object()) {
      AffineTransform initial = AffineTransform::identity(dim);
      bool ok = true;
      if (tj.contains("initial")) ok = detail::read_transform(rd, tj["initial"], "trajectory.initial", dim, initial);
      std::vector<TrajectorySegment> segs;
      if (!tj.contains("segments") || !tj["segments"].is_array() || tj["segments"].empty()) {
        rd.fail("trajectory.segments", "required non-empty array");
        ok = false;
      } else {
        AffineTransform prev = initial;
        const Json& sj = tj["segments"];
        for (std::size_t s = 0; s < sj.size(); ++s) {
          const std::string path = "trajectory.segments[" + std::to_string(s) + "]";
          rd.keys(sj[s], path, {"duration", "theta", "translation", "interpolation"});
          if (!sj[s].is_object()) {
            ok = false;
            continue;
          }
          TrajectorySegment seg;
          seg.target = prev;
          if (!rd.number(sj[s], path, "duration", seg.duration)) {
            if (!sj[s].contains("duration")) rd.fail(path + ".duration", "required");
            ok = false;
          } else if (!(seg.duration > 0.0)) {
            rd.fail(path + ".duration", "must be positive");
            ok = false;
          }
          Json tr = Json::object();
          if (sj[s].contains("theta")) tr["theta"] = sj[s]["theta"];
          if (sj[s].contains("translation")) tr["translation"] = sj[s]["translation"];
          ok = detail::read_transform(rd, tr, path, dim, seg.target) && ok;
          std::string mode = "linear";
          rd.string(sj[s], path, "interpolation", mode);
          if (mode == "geodesic") seg.mode = Interpolation::kRotationGeodesic;
          else if (mode != "linear") {
            rd.fail(path + ".interpolation", "'" + mode + "' is not one of linear, geodesic");
            ok = false;
          }
          prev = seg.target;
          segs.push_back(std::move(seg));
        }
      }
      if (ok) c.trajectory = TrajectorySpec(initial, segs);
    }
  }

  // control
  if (framework) c.leaders = framework->leaders;
  else
    for (int l = 0; l <= dim && l < n; ++l) c.leaders.push_back(l);
  if (doc.contains("control")) {
    const Json& cj = doc["control"];
    rd.keys(cj, "control", {"law", "leaders", "alpha", "eta", "gamma"});
    if (cj.is_object()) {
      if (cj.contains("leaders")) rd.ids(cj["leaders"], "control.leaders", c.leaders);
      std::string law = "static-leaders";
      rd.string(cj, "control", "law", law);
      const bool cv = law == "constant-velocity";
      const bool vv = law == "varying-velocity";
      if (law == "static-leaders") {
        c.law = StaticLeadersLaw{};
      } else if (cv) {
        ConstantVelocityLaw l;
        rd.number(cj, "control", "alpha", l.alpha);
        rd.number(cj, "control", "eta", l.eta);
        c.law = l;
      } else if (vv) {
        VaryingVelocityLaw l;
        if (cj.contains("gamma")) {
          VectorXd g;
          if (rd.vector(cj["gamma"], "control.gamma", g)) l.gamma.assign(g.data(), g.data() + g.size());
        }
        c.law = l;
      } else {
        rd.fail("control.law", "'" + law + "' is not one of static-leaders, constant-velocity, varying-velocity");
      }
      if (!cv && (cj.contains("alpha") || cj.contains("eta")))
        rd.fail("control", "alpha and eta apply only to constant-velocity");
      if (!vv && cj.contains("gamma")) rd.fail("control.gamma", "applies only to varying-velocity");
    }
  }

  // estimator
  if (doc.contains("estimator")) {
    const Json& ej = doc["estimator"];
    const std::string p = "estimator";
    rd.keys(ej, p, {"type", "sigma_w", "kappa", "epsilon", "psi_max", "constraint", "initial_covariance"});
    if (ej.is_object()) {
      std::string type = "none";
      if (rd.string(ej, p, "type", type)) {
        if (auto t = parse_estimator(type)) c.estimator.type = *t;
        else rd.fail("estimator.type", "'" + type + "' is not one of none, rkf, ral, conral, ga-rkf");
      }
      rd.number(ej, p, "sigma_w", c.estimator.sigma_w);
      rd.number(ej, p, "kappa", c.estimator.kappa);
      rd.number(ej, p, "epsilon", c.estimator.epsilon);
      rd.number(ej, p, "psi_max", c.estimator.psi_max);
      std::string con = "affine";
      if (rd.string(ej, p, "constraint", con)) {
        if (con == "affine") c.estimator.constraint = RalConstraint::kAffine;
        else if (con == "scaling") c.estimator.constraint = RalConstraint::kScaling;
        else if (con == "rotation") c.estimator.constraint = RalConstraint::kRotation;
        else if (con == "similarity") c.estimator.constraint = RalConstraint::kSimilarity;
        else rd.fail("estimator.constraint", "'" + con + "' is not one of affine, scaling, rotation, similarity");
      }
      if (ej.contains("initial_covariance")) {
        VectorXd v;
        if (rd.vector(ej["initial_covariance"], "estimator.initial_covariance", v)) {
          if (v.size() == 3) c.estimator.initial_variance = v;
          else rd.fail("estimator.initial_covariance", "expected [position, velocity, acceleration] variances");
        }
      }
    }
  }

  // loss_model
  if (doc.contains("loss_model")) {
    const Json& lj = doc["loss_model"];
    const std::string p = "loss_model";
    std::string type;
    if (!lj.is_object()) {
      rd.fail(p, "expected an object");
    } else if (!rd.string(lj, p, "type", type)) {
      if (!lj.contains("type")) rd.fail("loss_model.type", "required");
    } else if (type == "none") {
      rd.keys(lj, p, {"type"});
      c.loss = NoLosses{};
    } else if (type == "bernoulli") {
      BernoulliLosses b;
      detail::read_bernoulli(rd, lj, p, b, true);
      c.loss = b;
    } else if (type == "schedule") {
      rd.keys(lj, p, {"type", "intervals", "base"});
      ScheduledLosses s;
      if (lj.contains("base")) {
        BernoulliLosses b;
        if (detail::read_bernoulli(rd, lj["base"], "loss_model.base", b, false)) s.base = b;
      }
      if (!lj.contains("intervals") || !lj["intervals"].is_array()) {
        rd.fail("loss_model.intervals", "required array");
      } else {
        const Json& ij = lj["intervals"];
        for (std::size_t k = 0; k < ij.size(); ++k) {
          const std::string ip = "loss_model.intervals[" + std::to_string(k) + "]";
          rd.keys(ij[k], ip, {"start_step", "end_step", "lost_edges", "active_edges", "inactive_nodes"});
          if (!ij[k].is_object()) continue;
          ScheduleInterval iv;
          if (!rd.integer(ij[k], ip, "start_step", iv.start_step) && !ij[k].contains("start_step"))
            rd.fail(ip + ".start_step", "required");
          if (!rd.integer(ij[k], ip, "end_step", iv.end_step) && !ij[k].contains("end_step"))
            rd.fail(ip + ".end_step", "required");
          std::vector<std::pair<int, int>> e;
          if (ij[k].contains("lost_edges") && rd.pairs(ij[k]["lost_edges"], ip + ".lost_edges", e))
            iv.lost_edges = detail::to_directed(e);
          if (ij[k].contains("active_edges") && rd.pairs(ij[k]["active_edges"], ip + ".active_edges", e))
            iv.active_edges = detail::to_directed(e);
          if (ij[k].contains("lost_edges") && ij[k].contains("active_edges"))
            rd.fail(ip, "give lost_edges or active_edges, not both");
          if (ij[k].contains("inactive_nodes")) rd.ids(ij[k]["inactive_nodes"], ip + ".inactive_nodes", iv.inactive_nodes);
          s.intervals.push_back(std::move(iv));
        }
      }
      c.loss = s;
    } else if (type == "departure") {
      rd.keys(lj, p, {"type", "node", "departure_step", "return_step", "base"});
      NodeDeparture d;
      if (rd.integer(lj, p, "node", d.node)) --d.node;
      else if (!lj.contains("node")) rd.fail("loss_model.node", "required");
      if (!rd.integer(lj, p, "departure_step", d.departure_step) && !lj.contains("departure_step"))
        rd.fail("loss_model.departure_step", "required");
      int ret = 0;
      if (rd.integer(lj, p, "return_step", ret)) d.return_step = ret;
      if (lj.contains("base")) {
        BernoulliLosses b;
        if (detail::read_bernoulli(rd, lj["base"], "loss_model.base", b, false)) d.base = b;
      }
      c.loss = d;
    } else {
      rd.fail("loss_model.type", "'" + type + "' is not one of none, bernoulli, schedule, departure");
    }
  }

  // noise
  if (doc.contains("noise")) {
    const Json& nj = doc["noise"];
    rd.keys(nj, "noise", {"sigma_v", "covariance"});
    if (nj.is_object()) {
      rd.number(nj, "noise", "sigma_v", c.noise.sigma_v);
      if (nj.contains("covariance") && !nj["covariance"].is_null()) {
        MatrixXd r;
        if (rd.matrix(nj["covariance"], "noise.covariance", r)) c.noise.covariance = r;
      }
    }
  }

  // sim
  bool horizon_given = false;
  if (doc.contains("sim")) {
    const Json& sj = doc["sim"];
    const std::string p = "sim";
    rd.keys(sj, p, {"dt", "horizon", "monte_carlo_runs", "seed", "log_stride", "initial_perturbation",
                    "divergence_threshold", "initial_positions", "rng_node_keys", "departed_motion",
                    "exit_velocity"});
    if (sj.is_object()) {
      rd.number(sj, p, "dt", c.sim.dt);
      horizon_given = rd.number(sj, p, "horizon", c.sim.horizon);
      rd.integer(sj, p, "monte_carlo_runs", c.sim.monte_carlo_runs);
      if (sj.contains("seed")) {
        if (sj["seed"].is_number_unsigned() || (sj["seed"].is_number_integer() && sj["seed"].get<long long>() >= 0))
          c.sim.seed = sj["seed"].get<std::uint64_t>();
        else rd.fail("sim.seed", "expected a non-negative integer");
      }
      rd.integer(sj, p, "log_stride", c.sim.log_stride);
      rd.number(sj, p, "initial_perturbation", c.sim.initial_perturbation);
      rd.number(sj, p, "divergence_threshold", c.sim.divergence_threshold);
      if (sj.contains("initial_positions") && !sj["initial_positions"].is_null()) {
        MatrixXd z;
        if (rd.matrix(sj["initial_positions"], "sim.initial_positions", z)) c.sim.initial_positions = MatrixXd(z.transpose());
      }
      if (sj.contains("rng_node_keys")) {
        const Json& kj = sj["rng_node_keys"];
        if (!kj.is_array()) rd.fail("sim.rng_node_keys", "expected an array of non-negative integers");
        else
          for (std::size_t k = 0; k < kj.size(); ++k) {
            if (!kj[k].is_number_integer() || kj[k].get<long long>() < 0) {
              rd.fail("sim.rng_node_keys[" + std::to_string(k) + "]", "expected a non-negative integer");
              continue;
            }
            c.sim.rng_node_keys.push_back(kj[k].get<std::uint64_t>());
          }
      }
      std::string motion = "frozen";
      if (rd.string(sj, p, "departed_motion", motion)) {
        if (motion == "frozen") c.sim.departed_motion = DepartedMotion::kFrozen;
        else if (motion == "drift") c.sim.departed_motion = DepartedMotion::kDrift;
        else rd.fail("sim.departed_motion", "'" + motion + "' is not one of frozen, drift");
      }
      if (sj.contains("exit_velocity") && !sj["exit_velocity"].is_null()) {
        VectorXd v;
        if (rd.vector(sj["exit_velocity"], "sim.exit_velocity", v)) c.sim.exit_velocity = v;
      }
    }
  }
  if (!horizon_given && c.trajectory.dim() > 0) c.sim.horizon = c.trajectory.horizon();

  std::vector<std::string> issues = std::move(rd.issues);
  if (graph_ok && c.nominal.size() > 0 && c.trajectory.dim() > 0) {
    for (auto& s : validate_scenario(c)) issues.push_back(std::move(s));
  }
  if (!issues.empty()) throw ConfigError("invalid scenario '" + c.name + "'", issues);
  return c;
}

/// Parses text; syntax errors carry line and column.
inline Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline ScenarioConfig load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

/// Sets `key.path=value` in `doc`. The value is read as JSON when it parses,
/// otherwise as a string. Intermediate objects are created as needed.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must have the form key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty path component");
    if (node->is_null()) *node = Json::object();
    if (!node->is_object()) throw ConfigError("override '" + assignment + "': '" + key + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

/// Fully expanded document; scenario_from_json(scenario_to_json(c)) reproduces c.
/// `stress`, when given, is written in place of an unset explicit stress.
inline Json scenario_to_json(const ScenarioConfig& c, const StressMatrix* stress = nullptr) {
  using namespace detail;
  Json doc;
  doc["name"] = c.name;
  Json edges = Json::array();
  for (int e = 0; e < c.graph.n_edges(); ++e)
    if (c.graph.edge(e).from < c.graph.edge(e).to) edges.push_back({c.graph.edge(e).from + 1, c.graph.edge(e).to + 1});
  doc["graph"] = {{"n_nodes", c.graph.n_nodes()}, {"edges", edges}};
  doc["nominal_configuration"] = matrix_json(c.nominal.points.transpose());
  if (c.stress) doc["stress"] = matrix_json(*c.stress);
  else if (stress) doc["stress"] = matrix_json(stress->matrix);
  else doc["stress"] = nullptr;

  Json segs = Json::array();
  for (const auto& s : c.trajectory.segments()) {
    Json sj = transform_json(s.target);
    sj = {{"duration", s.duration}, {"theta", sj["theta"]}, {"translation", sj["translation"]},
          {"interpolation", s.mode == Interpolation::kLinear ? "linear" : "geodesic"}};
    segs.push_back(std::move(sj));
  }
  doc["trajectory"] = {{"initial", transform_json(c.trajectory.initial())}, {"segments", segs}};

  Json control = {{"law", law_name(c.law)}, {"leaders", ids_json(c.leaders)}};
  if (const auto* cv = std::get_if<ConstantVelocityLaw>(&c.law)) {
    control["alpha"] = cv->alpha;
    control["eta"] = cv->eta;
  } else if (const auto* vv = std::get_if<VaryingVelocityLaw>(&c.law)) {
    if (!vv->gamma.empty()) control["gamma"] = vv->gamma;
  }
  doc["control"] = control;

  const EstimatorConfig& e = c.estimator;
  doc["estimator"] = {{"type", estimator_name(e.type)},
                      {"sigma_w", e.sigma_w},
                      {"kappa", e.kappa},
                      {"epsilon", e.epsilon},
                      {"psi_max", e.psi_max},
                      {"constraint", constraint_name(e.constraint)},
                      {"initial_covariance", vector_json(e.initial_variance)}};

  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        Json lj;
        if constexpr (std::is_same_v<M, NoLosses>) {
          lj = {{"type", "none"}};
        } else if constexpr (std::is_same_v<M, BernoulliLosses>) {
          lj = {{"type", "bernoulli"}, {"lambda", m.lambda}, {"symmetric_losses", m.symmetric}};
        } else if constexpr (std::is_same_v<M, ScheduledLosses>) {
          Json ivs = Json::array();
          for (const auto& iv : m.intervals) {
            Json ij = {{"start_step", iv.start_step}, {"end_step", iv.end_step}};
            if (iv.active_edges) ij["active_edges"] = edges_json(*iv.active_edges);
            else ij["lost_edges"] = edges_json(iv.lost_edges);
            ij["inactive_nodes"] = ids_json(iv.inactive_nodes);
            ivs.push_back(std::move(ij));
          }
          lj = {{"type", "schedule"}, {"intervals", ivs}};
          if (m.base) lj["base"] = bernoulli_json(*m.base);
        } else {
          lj = {{"type", "departure"}, {"node", m.node + 1}, {"departure_step", m.departure_step}};
          if (m.return_step) lj["return_step"] = *m.return_step;
          if (m.base) lj["base"] = bernoulli_json(*m.base);
        }
        doc["loss_model"] = lj;
      },
      c.loss);

  doc["noise"] = {{"sigma_v", c.noise.sigma_v}};
  if (c.noise.covariance) doc["noise"]["covariance"] = matrix_json(*c.noise.covariance);

  Json sim = {{"dt", c.sim.dt},
              {"horizon", c.sim.horizon},
              {"monte_carlo_runs", c.sim.monte_carlo_runs},
              {"seed", c.sim.seed},
              {"log_stride", c.sim.log_stride},
              {"initial_perturbation", c.sim.initial_perturbation},
              {"divergence_threshold", c.sim.divergence_threshold},
              {"departed_motion", c.sim.departed_motion == DepartedMotion::kFrozen ? "frozen" : "drift"}};
  if (c.sim.initial_positions) sim["initial_positions"] = matrix_json(c.sim.initial_positions->transpose());
  if (!c.sim.rng_node_keys.empty()) sim["rng_node_keys"] = c.sim.rng_node_keys;
  if (c.sim.exit_velocity) sim["exit_velocity"] = vector_json(*c.sim.exit_velocity);
  doc["sim"] = sim;
  return doc;
}

}  // namespace affine_swarm
