#include "qrgmm/serialize.hpp"

#include <fstream>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qrgmm/errors.hpp"

namespace qrgmm {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorruptFile("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw CorruptFile(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("format_version"))
    throw CorruptFile(path + ": missing format_version");
  const auto& v = j["format_version"];
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion)
    throw FormatVersionMismatch(path + ": format_version " + v.dump() +
                                ", this build reads " +
                                std::to_string(kFormatVersion));
  return j;
}

void write_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorruptFile("cannot open " + path + " for writing");
  out << j.dump(1, '\t') << '\n';
  if (!out) throw CorruptFile("write to " + path + " failed");
}

json basis_to_json(const BasisSpec& basis) {
  return json{{"kind", to_string(basis.kind)},
              {"degree", basis.degree},
              {"input_dim", basis.input_dim}};
}

template <typename T>
const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key))
    throw CorruptFile(path + ": missing field '" + key + "'");
  const json& v = j[key];
  bool ok;
  if constexpr (std::is_same_v<T, bool>) ok = v.is_boolean();
  else if constexpr (std::is_same_v<T, int>) ok = v.is_number_integer();
  else if constexpr (std::is_same_v<T, double>) ok = v.is_number();
  else if constexpr (std::is_same_v<T, std::string>) ok = v.is_string();
  else ok = v.is_array() || v.is_object();
  if (!ok) throw CorruptFile(path + ": field '" + key + "' has wrong type");
  return v;
}

BasisSpec basis_from_json(const json& j, const std::string& path) {
  BasisSpec basis;
  try {
    basis.kind = basis_kind_from_string(
        field<std::string>(j, "kind", path).get<std::string>());
  } catch (const InvalidArgument& e) {
    throw CorruptFile(path + ": " + e.what());
  }
  basis.degree = field<int>(j, "degree", path).get<int>();
  basis.input_dim = field<int>(j, "input_dim", path).get<int>();
  return basis;
}

Eigen::MatrixXd matrix_from_json(const json& rows, Eigen::Index cols_hint,
                                 const std::string& path) {
  if (!rows.is_array() || rows.empty())
    throw CorruptFile(path + ": coefficient rows missing");
  const Eigen::Index nrows = static_cast<Eigen::Index>(rows.size());
  Eigen::Index ncols = cols_hint;
  if (ncols < 0) {
    if (!rows[0].is_array()) throw CorruptFile(path + ": row is not an array");
    ncols = static_cast<Eigen::Index>(rows[0].size());
  }
  Eigen::MatrixXd out(nrows, ncols);
  for (Eigen::Index r = 0; r < nrows; ++r) {
    const json& row = rows[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != ncols)
      throw CorruptFile(path + ": ragged coefficient rows");
    for (Eigen::Index c = 0; c < ncols; ++c) {
      const json& cell = row[static_cast<size_t>(c)];
      if (!cell.is_number()) throw CorruptFile(path + ": non-numeric entry");
      out(r, c) = cell.get<double>();
    }
  }
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw CorruptFile(path + ": expected an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(arr.size()));
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw CorruptFile(path + ": non-numeric entry");
    out[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return out;
}

void check_rng_algorithm(const json& j, const std::string& path) {
  const std::string algo =
      field<std::string>(j, "rng_algorithm", path).get<std::string>();
  if (algo != SeededRng::kAlgorithm)
    throw FormatVersionMismatch(path + ": model expects rng '" + algo +
                                "', this build provides '" +
                                SeededRng::kAlgorithm + "'");
}

json single_to_json(const GenerativeMetamodel& model) {
  return json{{"format_version", kFormatVersion},
              {"basis", basis_to_json(model.basis)},
              {"m", model.table.grid.m},
              {"coefficients", matrix_to_json(model.table.coefficients)},
              {"rearranged", model.rearranged},
              {"rng_algorithm", SeededRng::kAlgorithm}};
}

GenerativeMetamodel single_from_json(const json& j, const std::string& path) {
  check_rng_algorithm(j, path);
  GenerativeMetamodel model;
  model.basis = basis_from_json(
      field<json>(j, "basis", path), path);
  const int m = field<int>(j, "m", path).get<int>();
  if (m < 2) throw CorruptFile(path + ": m < 2");
  model.table.grid = make_grid(m);
  model.table.coefficients = matrix_from_json(
      field<json>(j, "coefficients", path), model.basis.output_dim(), path);
  model.rearranged = field<bool>(j, "rearranged", path).get<bool>();
  try {
    validate_model(model);
  } catch (const Error& e) {
    throw CorruptFile(path + ": " + e.what());
  }
  return model;
}

}  // namespace

ModelKind peek_model_kind(const std::string& path) {
  const json j = parse_file(path);
  if (j.contains("stages")) return ModelKind::multi;
  if (j.contains("networks")) return ModelKind::nn;
  if (j.contains("coefficients")) return ModelKind::single;
  throw CorruptFile(path + ": unrecognized model envelope");
}

void save_model(const GenerativeMetamodel& model, const std::string& path) {
  validate_model(model);
  write_file(single_to_json(model), path);
}

GenerativeMetamodel load_model(const std::string& path) {
  return single_from_json(parse_file(path), path);
}

void save_model(const SequentialModel& model, const std::string& path) {
  validate_sequential(model);
  json stages = json::array();
  for (const auto& stage : model.stages) stages.push_back(single_to_json(stage));
  write_file(json{{"format_version", kFormatVersion},
                  {"d", model.d},
                  {"stages", std::move(stages)}},
             path);
}

SequentialModel load_multi_model(const std::string& path) {
  const json j = parse_file(path);
  SequentialModel model;
  model.d = field<int>(j, "d", path).get<int>();
  const json& stages = field<json>(j, "stages", path);
  for (const auto& stage : stages)
    model.stages.push_back(single_from_json(stage, path));
  try {
    validate_sequential(model);
  } catch (const Error& e) {
    throw CorruptFile(path + ": " + e.what());
  }
  return model;
}

void save_model(const NnQuantileModel& model, const std::string& path) {
  json widths = json::array();
  for (int w : model.spec.widths) widths.push_back(w);
  json networks = json::array();
  for (const auto& net : model.networks) {
    json weights = json::array();
    json biases = json::array();
    for (const auto& w : net.weights) weights.push_back(matrix_to_json(w));
    for (const auto& b : net.biases) biases.push_back(vector_to_json(b));
    networks.push_back(
        json{{"weights", std::move(weights)}, {"biases", std::move(biases)}});
  }
  write_file(
      json{{"format_version", kFormatVersion},
           {"m", model.grid.m},
           {"widths", std::move(widths)},
           {"activation",
            model.spec.activation == Activation::tanh ? "tanh" : "rectifier"},
           {"networks", std::move(networks)},
           {"rng_algorithm", SeededRng::kAlgorithm}},
      path);
}

NnQuantileModel load_nn_model(const std::string& path) {
  const json j = parse_file(path);
  check_rng_algorithm(j, path);
  NnQuantileModel model;
  const int m = field<int>(j, "m", path).get<int>();
  if (m < 2) throw CorruptFile(path + ": m < 2");
  model.grid = make_grid(m);

  const json& widths = field<json>(j, "widths", path);
  model.spec.widths.clear();
  for (const auto& w : widths) {
    if (!w.is_number_integer()) throw CorruptFile(path + ": bad width");
    model.spec.widths.push_back(w.get<int>());
  }
  if (model.spec.widths.size() < 2 || model.spec.widths.back() != 1)
    throw CorruptFile(path + ": network widths must end in 1");
  for (int w : model.spec.widths)
    if (w < 1) throw CorruptFile(path + ": network widths must be positive");
  const std::string act =
      field<std::string>(j, "activation", path).get<std::string>();
  if (act == "tanh") model.spec.activation = Activation::tanh;
  else if (act == "rectifier") model.spec.activation = Activation::rectifier;
  else throw CorruptFile(path + ": unknown activation '" + act + "'");

  const json& networks = field<json>(j, "networks", path);
  if (static_cast<int>(networks.size()) != m - 1)
    throw CorruptFile(path + ": expected " + std::to_string(m - 1) +
                      " networks, found " + std::to_string(networks.size()));
  for (const auto& net_json : networks) {
    Mlp net;
    net.activation = model.spec.activation;
    const json& weights = field<json>(net_json, "weights", path);
    const json& biases = field<json>(net_json, "biases", path);
    if (weights.size() != biases.size() ||
        weights.size() + 1 != model.spec.widths.size())
      throw CorruptFile(path + ": network layer count mismatch");
    for (size_t l = 0; l < weights.size(); ++l) {
      Eigen::MatrixXd w = matrix_from_json(weights[l], -1, path);
      Eigen::VectorXd b = vector_from_json(biases[l], path);
      if (w.rows() != model.spec.widths[l + 1] ||
          w.cols() != model.spec.widths[l] || b.size() != w.rows())
        throw CorruptFile(path + ": network layer shape mismatch");
      if (!w.allFinite() || !b.allFinite())
        throw CorruptFile(path + ": non-finite network parameters");
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    model.networks.push_back(std::move(net));
  }
  model.final_losses.assign(model.networks.size(), 0.0);
  return model;
}

}  // namespace qrgmm
