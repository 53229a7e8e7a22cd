#include "cindes/io.hpp"

#include <fstream>
#include <string>

#include "cindes/errors.hpp"

namespace cindes {
namespace {

constexpr const char* kNetFormat = "cindes-net-v1";
constexpr const char* kModelFormat = "cindes-model-v1";

void expect_format(const Json& j, const char* format) {
  if (!j.is_object() || !j.contains("format") || j.at("format") != format)
    throw DataError(std::string("expected a ") + format + " document");
}

}  // namespace

Json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw DataError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError("matrix rows must have equal length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw DataError("vector must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

Json network_to_json(const NetworkParamsd& params) {
  Json layers = Json::array();
  for (std::size_t i = 0; i < params.weights.size(); ++i)
    layers.push_back(Json{{"weight", matrix_to_json(params.weights[i])}, {"bias", vector_to_json(params.biases[i])}});
  return Json{{"format", kNetFormat},
              {"input_dim", params.shape.input_dim},
              {"depth", params.shape.depth},
              {"width", params.shape.width},
              {"truncation", params.shape.truncation},
              {"layers", std::move(layers)}};
}

NetworkParamsd network_from_json(const Json& j) {
  expect_format(j, kNetFormat);
  try {
    NetworkParamsd p;
    p.shape = NetworkShape{j.at("input_dim").get<int>(), j.at("depth").get<int>(), j.at("width").get<int>(),
                           j.at("truncation").get<double>()};
    for (const Json& layer : j.at("layers")) {
      p.weights.push_back(matrix_from_json(layer.at("weight")));
      p.biases.push_back(vector_from_json(layer.at("bias")));
    }
    p.check_layout();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network document: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("malformed network document: ") + e.what());
  }
}

Json reference_to_json(const ReferenceDistribution& reference) {
  if (reference.is_box())
    return Json{{"kind", "uniform_box"},
                {"lo", vector_to_json(reference.box().lo)},
                {"hi", vector_to_json(reference.box().hi)}};
  const auto& g = reference.gaussian_params();
  return Json{{"kind", "gaussian"}, {"mean", vector_to_json(g.mu)}, {"covariance", matrix_to_json(g.sigma)}};
}

ReferenceDistribution reference_from_json(const Json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "uniform_box")
      return ReferenceDistribution::uniform_box(vector_from_json(j.at("lo")), vector_from_json(j.at("hi")));
    if (kind == "gaussian")
      return ReferenceDistribution::gaussian(vector_from_json(j.at("mean")), matrix_from_json(j.at("covariance")));
    throw DataError("unknown reference kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed reference: ") + e.what());
  }
}

Json model_to_json(const DensityModel& model) {
  return Json{{"format", kModelFormat},
              {"dx", model.dx()},
              {"dy", model.dy()},
              {"norm_samples", model.norm_samples()},
              {"reference", reference_to_json(model.reference())},
              {"net", network_to_json(model.params())}};
}

DensityModel model_from_json(const Json& j) {
  expect_format(j, kModelFormat);
  try {
    return DensityModel(network_from_json(j.at("net")), reference_from_json(j.at("reference")),
                        j.at("dx").get<int>(), j.at("dy").get<int>(), j.at("norm_samples").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(std::string("inconsistent model document: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const DensityModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << model_to_json(model).dump(2) << '\n';
}

DensityModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

Json dgp_to_json(const DgpSpec& spec) {
  Json j{{"name", spec.name()},        {"label", spec.label()},           {"structure_seed", spec.structure_seed},
         {"dx", spec.dx},              {"dy", spec.dy},                   {"x_lo", vector_to_json(spec.x_lo)},
         {"x_hi", vector_to_json(spec.x_hi)}, {"y_lo", vector_to_json(spec.y_lo)}, {"y_hi", vector_to_json(spec.y_hi)}};
  if (spec.kind == DgpKind::Additive) {
    Json terms = Json::array();
    for (auto t : spec.additive_terms) terms.push_back(std::string(additive_term_name(t)));
    j["additive_terms"] = std::move(terms);
  }
  if (spec.kind == DgpKind::MultivariateLinear) j["linear_weights"] = matrix_to_json(spec.linear_weights);
  return j;
}

Json report_to_json(const EvalReport& report) {
  Json j{{"tv", report.tv},
         {"nll", report.nll},
         {"nll_orientation", "lower is better"},
         {"n_test", report.n_test},
         {"nll_outside_support", report.nll_outside_support},
         {"seed", report.seed}};
  if (report.moments)
    j["moment_errors"] = Json{{"mean_error", vector_to_json(report.moments->mean_error)},
                              {"cov_frobenius", report.moments->cov_frobenius}};
  return j;
}

Json traces_to_json(const FitResult& fit) {
  Json traces = Json::array();
  for (const auto& t : fit.traces) {
    Json epochs = Json::array();
    for (const auto& e : t.epochs)
      epochs.push_back(Json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid_nll", e.valid_nll}});
    traces.push_back(Json{{"l2", t.l2},
                          {"baseline_valid_nll", t.baseline_valid_nll},
                          {"best_valid_nll", t.best_valid_nll},
                          {"best_epoch", t.best_epoch},
                          {"epochs", std::move(epochs)}});
  }
  return Json{{"selected_l2", fit.selected_l2}, {"selected_index", fit.selected_index}, {"traces", std::move(traces)}};
}

}  // namespace cindes
