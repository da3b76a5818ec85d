#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "dpls/baselines.hpp"
#include "dpls/data.hpp"
#include "dpls/deepnet.hpp"
#include "dpls/dpls_model.hpp"
#include "dpls/pls.hpp"

namespace dpls {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1.0.0";

json matrix_to_json(const Matrix& m); // row-major nested arrays
Matrix matrix_from_json(const json& j);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

json to_json(const Standardizer& s);
Standardizer standardizer_from_json(const json& j);

json to_json(const PlsModel& m);
PlsModel pls_from_json(const json& j);

json to_json(const Network& n);
Network network_from_json(const json& j);

json to_json(const DplsModel& m);
DplsModel dpls_from_json(const json& j);

json to_json(const OlsModel& m);
OlsModel ols_from_json(const json& j);

json to_json(const LassoModel& m);
LassoModel lasso_from_json(const json& j);

json to_json(const SensitivityReport& r);
json to_json(const AttributionSummary& s);
json to_json(const ConsistencyReport& r);

void write_json_file(const json& j, const std::string& path);
json read_json_file(const std::string& path);

} // namespace dpls
