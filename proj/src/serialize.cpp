#include "gapscore/serialize.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gapscore/errors.hpp"

namespace gapscore {
namespace {

using nlohmann::json;

json to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(r.size()) != d) throw FormatError("ragged matrix in model file");
    for (Eigen::Index k = 0; k < d; ++k) m(i, k) = r[static_cast<std::size_t>(k)];
  }
  return m;
}

json header(const char* algorithm) {
  return {{"format", "gapscore-model"},
          {"version", kModelFormatVersion},
          {"algorithm", algorithm}};
}

json encode(const IsolationForest& f) {
  json j = header("iforest");
  j["n_features"] = f.n_features;
  j["subsample_size"] = f.subsample_size;
  j["normalizer"] = f.normalizer;
  j["reduced"] = f.reduced;
  json trees = json::array();
  for (const auto& t : f.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold},
                       {"lo", n.lo}, {"hi", n.hi}, {"p_left", n.p_left},
                       {"left", n.left}, {"right", n.right},
                       {"size", n.size}, {"depth", n.depth}});
    }
    trees.push_back({{"features", t.features}, {"nodes", nodes}});
  }
  j["trees"] = trees;
  return j;
}

json encode(const LodaModel& m) {
  json j = header("loda");
  j["n_features"] = m.n_features;
  j["fallback_score"] = m.fallback_score;
  json pairs = json::array();
  for (std::size_t t = 0; t < m.projections.size(); ++t) {
    const auto& p = m.projections[t];
    const auto& h = m.histograms[t];
    pairs.push_back({{"weights", p.weights}, {"nonzero", p.nonzero},
                     {"origin", h.origin}, {"width", h.width}, {"upper", h.upper},
                     {"densities", h.densities}, {"n_train", h.n_train}});
  }
  j["projections"] = pairs;
  return j;
}

json encode(const EgmmModel& m) {
  json j = header("egmm");
  j["n_features"] = m.n_features;
  j["fallback_score"] = m.fallback_score;
  j["kept_ks"] = m.kept_ks;
  json sel = json::array();
  for (const auto& s : m.selection) {
    // NaN has no JSON spelling; null stands for it.
    json ll = std::isnan(s.mean_oob_loglik) ? json(nullptr) : json(s.mean_oob_loglik);
    sel.push_back({{"k", s.k}, {"mean_oob_loglik", ll}, {"models", s.models},
                   {"kept", s.kept}});
  }
  j["selection"] = sel;
  json models = json::array();
  for (const auto& g : m.models) {
    json comps = json::array();
    for (const auto& c : g.components())
      comps.push_back({{"weight", c.weight}, {"mean", to_json(c.mean)},
                       {"cov", to_json(c.cov)}});
    models.push_back({{"components", comps}});
  }
  j["models"] = models;
  return j;
}

IsolationForest decode_iforest(const json& j) {
  IsolationForest f;
  f.n_features = j.at("n_features").get<std::size_t>();
  f.subsample_size = j.at("subsample_size").get<std::size_t>();
  f.normalizer = j.at("normalizer").get<double>();
  f.reduced = j.at("reduced").get<bool>();
  for (const auto& jt : j.at("trees")) {
    IsolationTree t;
    t.features = jt.at("features").get<std::vector<std::size_t>>();
    for (const auto& jn : jt.at("nodes")) {
      TreeNode n;
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.lo = jn.at("lo").get<double>();
      n.hi = jn.at("hi").get<double>();
      n.p_left = jn.at("p_left").get<double>();
      n.left = jn.at("left").get<std::int32_t>();
      n.right = jn.at("right").get<std::int32_t>();
      n.size = jn.at("size").get<std::uint32_t>();
      n.depth = jn.at("depth").get<std::uint32_t>();
      t.nodes.push_back(n);
    }
    const auto n_nodes = static_cast<std::int32_t>(t.nodes.size());
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) continue;
      if (n.left <= 0 || n.left >= n_nodes || n.right <= 0 || n.right >= n_nodes ||
          n.feature >= static_cast<int>(f.n_features))
        throw FormatError("isolation tree node refers outside the model");
    }
    if (t.nodes.empty()) throw FormatError("isolation tree without nodes");
    f.trees.push_back(std::move(t));
  }
  return f;
}

LodaModel decode_loda(const json& j) {
  LodaModel m;
  m.n_features = j.at("n_features").get<std::size_t>();
  m.fallback_score = j.at("fallback_score").get<double>();
  for (const auto& jp : j.at("projections")) {
    Projection p;
    p.weights = jp.at("weights").get<std::vector<double>>();
    p.nonzero = jp.at("nonzero").get<std::vector<std::size_t>>();
    if (p.weights.size() != m.n_features) throw FormatError("projection length mismatch");
    for (std::size_t c : p.nonzero)
      if (c >= m.n_features) throw FormatError("projection column out of range");
    Histogram h;
    h.origin = jp.at("origin").get<double>();
    h.width = jp.at("width").get<double>();
    h.upper = jp.at("upper").get<double>();
    h.densities = jp.at("densities").get<std::vector<double>>();
    h.n_train = jp.at("n_train").get<std::size_t>();
    if (h.densities.empty()) throw FormatError("histogram without bins");
    m.projections.push_back(std::move(p));
    m.histograms.push_back(std::move(h));
  }
  return m;
}

EgmmModel decode_egmm(const json& j) {
  EgmmModel m;
  m.n_features = j.at("n_features").get<std::size_t>();
  m.fallback_score = j.at("fallback_score").get<double>();
  m.kept_ks = j.at("kept_ks").get<std::vector<std::size_t>>();
  for (const auto& js : j.at("selection")) {
    KSelection s;
    s.k = js.at("k").get<std::size_t>();
    const auto& ll = js.at("mean_oob_loglik");
    s.mean_oob_loglik = ll.is_null() ? std::nan("") : ll.get<double>();
    s.models = js.at("models").get<std::size_t>();
    s.kept = js.at("kept").get<bool>();
    m.selection.push_back(s);
  }
  for (const auto& jm : j.at("models")) {
    std::vector<GaussianComponent> comps;
    for (const auto& jc : jm.at("components")) {
      GaussianComponent c;
      c.weight = jc.at("weight").get<double>();
      c.mean = vector_from(jc.at("mean"));
      c.cov = matrix_from(jc.at("cov"));
      comps.push_back(std::move(c));
    }
    if (comps.empty()) throw FormatError("mixture without components");
    Gmm g(std::move(comps));
    if (g.dim() != m.n_features) throw FormatError("mixture dimension mismatch");
    m.models.push_back(std::move(g));
  }
  return m;
}

}  // namespace

void save_model(const AnyModel& model, std::ostream& out) {
  const json j = std::visit([](const auto& m) { return encode(m); }, model);
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed writing model");
}

void save_model(const AnyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  save_model(model, out);
}

AnyModel load_model(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
    if (j.value("format", "") != "gapscore-model")
      throw FormatError("not a gapscore model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw FormatError("unsupported model version " + std::to_string(version));
    const std::string algo = j.at("algorithm").get<std::string>();
    if (algo == "iforest") return decode_iforest(j);
    if (algo == "loda") return decode_loda(j);
    if (algo == "egmm") return decode_egmm(j);
    throw FormatError("unknown model algorithm '" + algo + "'");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid model parameters: ") + e.what());
  }
}

AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return load_model(in);
}

}  // namespace gapscore
