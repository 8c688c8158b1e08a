// Serialization and file plumbing: JSON schemas for tasks, datasets and
// attention models (flat textual format with shape headers), the CSV result
// table, and the flat key=value config format with command-line overrides.
//
// CSV schema: experiment,d,s,n,q,sigma,estimator_or_layer_head,metric,value,seed,trial
// Values print with 12 significant digits; divergent cells print "diverged".
// Rows are sorted before writing so parallel execution never changes bytes.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "preopt/attention.hpp"
#include "preopt/linalg.hpp"
#include "preopt/task.hpp"

namespace preopt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

// ---------------------------------------------------------------- JSON

inline Json matrix_to_json(const DenseMatrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", m.entries()}};
}

inline DenseMatrix matrix_from_json(const Json& j) {
  return DenseMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                     j.at("entries").get<std::vector<double>>());
}

inline Json vector_to_json(const DenseVector& v) {
  return Json{{"dim", v.dim()}, {"entries", v.entries()}};
}

inline DenseVector vector_from_json(const Json& j) {
  DenseVector v(j.at("entries").get<std::vector<double>>());
  if (v.dim() != j.at("dim").get<std::size_t>()) {
    throw IoError("vector_from_json: dim header does not match entry count");
  }
  return v;
}

inline Json task_to_json(const SparseLinearTask& task) {
  return Json{{"d", task.dim},
              {"s", task.sparsity},
              {"support", task.support},
              {"weights", vector_to_json(task.weights)},
              {"covariance_diagonal", task.covariance.diagonal().entries()},
              {"noise_std", task.noise_std}};
}

inline SparseLinearTask task_from_json(const Json& j) {
  SparseLinearTask task;
  task.dim = j.at("d").get<std::size_t>();
  task.sparsity = j.at("s").get<std::size_t>();
  task.support = j.at("support").get<std::vector<std::size_t>>();
  task.weights = vector_from_json(j.at("weights"));
  task.covariance = DiagonalMatrix(
      DenseVector(j.at("covariance_diagonal").get<std::vector<double>>()));
  task.noise_std = j.at("noise_std").get<double>();
  return task;
}

inline Json dataset_to_json(const InContextDataset& data) {
  Json examples = Json::array();
  for (const Example& e : data.examples) {
    examples.push_back(Json{{"x", e.x.entries()}, {"y", e.y}});
  }
  Json queries = Json::array();
  for (const Query& q : data.queries) {
    queries.push_back(Json{{"x", q.x.entries()}, {"y_true", q.y_true}});
  }
  return Json{{"examples", examples}, {"queries", queries}};
}

inline InContextDataset dataset_from_json(const Json& j) {
  InContextDataset data;
  for (const Json& e : j.at("examples")) {
    data.examples.push_back(
        {DenseVector(e.at("x").get<std::vector<double>>()), e.at("y").get<double>()});
  }
  for (const Json& q : j.at("queries")) {
    data.queries.push_back(
        {DenseVector(q.at("x").get<std::vector<double>>()), q.at("y_true").get<double>()});
  }
  return data;
}

inline Json model_to_json(const AttentionModel& model) {
  Json layers = Json::array();
  for (const AttentionLayer& layer : model.layers) {
    Json heads = Json::array();
    for (const AttentionHead& head : layer.heads) {
      heads.push_back(Json{{"w_v", matrix_to_json(head.w_v)},
                           {"w_k", matrix_to_json(head.w_k)},
                           {"w_q", matrix_to_json(head.w_q)}});
    }
    layers.push_back(Json{{"heads", heads},
                          {"w_proj", matrix_to_json(layer.w_proj)},
                          {"head_mask", layer.head_mask}});
  }
  return Json{{"d", model.d},
              {"d_hid", model.d_hid},
              {"mask_width", model.mask_width},
              {"w_embed", matrix_to_json(model.w_embed)},
              {"layers", layers},
              {"w_out", matrix_to_json(model.w_out)}};
}

inline AttentionModel model_from_json(const Json& j) {
  AttentionModel model;
  model.d = j.at("d").get<std::size_t>();
  model.d_hid = j.at("d_hid").get<std::size_t>();
  model.mask_width = j.at("mask_width").get<std::size_t>();
  model.w_embed = matrix_from_json(j.at("w_embed"));
  for (const Json& lj : j.at("layers")) {
    AttentionLayer layer;
    for (const Json& hj : lj.at("heads")) {
      layer.heads.push_back({matrix_from_json(hj.at("w_v")), matrix_from_json(hj.at("w_k")),
                             matrix_from_json(hj.at("w_q"))});
    }
    layer.w_proj = matrix_from_json(lj.at("w_proj"));
    layer.head_mask = lj.at("head_mask").get<std::vector<std::uint8_t>>();
    model.layers.push_back(std::move(layer));
  }
  model.w_out = matrix_from_json(j.at("w_out"));
  return model;
}

// ---------------------------------------------------------------- CSV

struct ResultRow {
  std::string experiment;
  std::size_t d = 0;
  std::size_t s = 0;
  std::size_t n = 0;
  std::size_t q = 0;
  double sigma = 0.0;
  std::string key;  // estimator or layer/head identifier
  std::string metric;
  double value = 0.0;
  bool diverged = false;
  std::uint64_t seed = 0;
  std::size_t trial = 0;
};

inline std::string format_significant(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline const char* csv_header() {
  return "experiment,d,s,n,q,sigma,estimator_or_layer_head,metric,value,seed,trial";
}

inline void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.experiment, a.d, a.s, a.n, a.q, a.sigma, a.key, a.metric, a.seed, a.trial) <
           std::tie(b.experiment, b.d, b.s, b.n, b.q, b.sigma, b.key, b.metric, b.seed, b.trial);
  });
}

inline void write_csv(std::vector<ResultRow> rows, const std::string& path) {
  sort_rows(rows);
  std::ofstream out(path);
  if (!out) throw IoError("write_csv: cannot open " + path);
  out << csv_header() << '\n';
  for (const ResultRow& r : rows) {
    out << r.experiment << ',' << r.d << ',' << r.s << ',' << r.n << ',' << r.q << ','
        << format_significant(r.sigma) << ',' << r.key << ',' << r.metric << ','
        << (r.diverged ? std::string("diverged") : format_significant(r.value)) << ',' << r.seed
        << ',' << r.trial << '\n';
  }
  if (!out) throw IoError("write_csv: write failed for " + path);
}

inline std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw IoError("read_csv: bad header in " + path);
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 11) throw IoError("read_csv: bad row in " + path + ": " + line);
    ResultRow r;
    r.experiment = fields[0];
    r.d = std::stoul(fields[1]);
    r.s = std::stoul(fields[2]);
    r.n = std::stoul(fields[3]);
    r.q = std::stoul(fields[4]);
    r.sigma = std::stod(fields[5]);
    r.key = fields[6];
    r.metric = fields[7];
    if (fields[8] == "diverged") {
      r.diverged = true;
    } else {
      r.value = std::stod(fields[8]);
    }
    r.seed = std::stoull(fields[9]);
    r.trial = std::stoul(fields[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------- config

// Flat "key = value" lines; '#' starts a comment; blank lines ignored.
inline std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) + " of " + path +
                        " is not key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: empty key at line " + std::to_string(line_no) + " of " + path);
    }
    out[key] = value;
  }
  return out;
}

inline void apply_override(std::map<std::string, std::string>& kv,
                           const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value, got: " + assignment);
  }
  kv[assignment.substr(0, eq)] = assignment.substr(eq + 1);
}

}  // namespace preopt
