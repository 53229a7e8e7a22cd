#pragma once

// JSON documents for networks ("cindes-net-v1"), fitted models
// ("cindes-model-v1"), DGP descriptions and evaluation reports.

#include <filesystem>

#include <json.hpp>

#include "cindes/dgp.hpp"
#include "cindes/eval.hpp"
#include "cindes/explicit.hpp"
#include "cindes/nn.hpp"
#include "cindes/reference.hpp"

namespace cindes {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v);
Eigen::VectorXd vector_from_json(const Json& j);

Json network_to_json(const NetworkParamsd& params);
NetworkParamsd network_from_json(const Json& j);

Json reference_to_json(const ReferenceDistribution& reference);
ReferenceDistribution reference_from_json(const Json& j);

Json model_to_json(const DensityModel& model);
/// Throws DataError for a malformed or foreign document.
DensityModel model_from_json(const Json& j);

void save_model(const std::filesystem::path& path, const DensityModel& model);
DensityModel load_model(const std::filesystem::path& path);

Json dgp_to_json(const DgpSpec& spec);
Json report_to_json(const EvalReport& report);
Json traces_to_json(const FitResult& fit);

}  // namespace cindes
