#include "dpls/serialize.hpp"

#include <fstream>

#include "dpls/errors.hpp"

namespace dpls {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::move(rows);
    return j;
}

Matrix matrix_from_json(const json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    Matrix m(rows, cols);
    const json& data = j.at("data");
    for (Index i = 0; i < rows; ++i) {
        for (Index c = 0; c < cols; ++c) {
            m(i, c) = data.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c))
                          .get<double>();
        }
    }
    return m;
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vector vector_from_json(const json& j) {
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

json to_json(const Standardizer& s) {
    json j;
    j["means"] = vector_to_json(s.means);
    j["sds"] = vector_to_json(s.sds);
    j["target_mean"] = s.target_mean;
    j["target_sd"] = s.target_sd;
    return j;
}

Standardizer standardizer_from_json(const json& j) {
    Standardizer s;
    s.means = vector_from_json(j.at("means"));
    s.sds = vector_from_json(j.at("sds"));
    s.target_mean = j.at("target_mean").get<double>();
    s.target_sd = j.at("target_sd").get<double>();
    return s;
}

json to_json(const PlsModel& m) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["model_type"] = "pls";
    j["K"] = m.K;
    j["P"] = matrix_to_json(m.P);
    j["Q"] = matrix_to_json(m.Q);
    j["B_diag"] = vector_to_json(m.beta);
    j["W"] = matrix_to_json(m.W);
    j["standardizer"] = to_json(m.x_std);
    j["y_center"] = vector_to_json(m.y_center);
    j["rank_deficient"] = m.rank_deficient;
    return j;
}

PlsModel pls_from_json(const json& j) {
    PlsModel m;
    m.K = j.at("K").get<int>();
    m.P = matrix_from_json(j.at("P"));
    m.Q = matrix_from_json(j.at("Q"));
    m.beta = vector_from_json(j.at("B_diag"));
    m.W = matrix_from_json(j.at("W"));
    m.x_std = standardizer_from_json(j.at("standardizer"));
    m.y_center = vector_from_json(j.at("y_center"));
    m.rank_deficient = j.at("rank_deficient").get<bool>();
    return m;
}

json to_json(const Network& n) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["model_type"] = "network";
    json dims = json::array();
    if (!n.layers.empty()) {
        dims.push_back(n.input_dim());
        for (const auto& layer : n.layers) dims.push_back(layer.weight.rows());
    }
    j["dims"] = std::move(dims);
    json activations = json::array();
    json weights = json::array();
    json biases = json::array();
    for (const auto& layer : n.layers) {
        activations.push_back(activation_name(layer.activation));
        json w = json::array();
        for (Index i = 0; i < layer.weight.rows(); ++i) {
            for (Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(i, c));
        }
        weights.push_back(std::move(w));
        biases.push_back(vector_to_json(layer.bias));
    }
    j["activations"] = std::move(activations);
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    return j;
}

Network network_from_json(const json& j) {
    Network n;
    const auto& dims = j.at("dims");
    const auto& activations = j.at("activations");
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        const Index in = dims[l].get<Index>();
        const Index out = dims[l + 1].get<Index>();
        layer.activation = parse_activation(activations.at(l).get<std::string>());
        layer.weight.resize(out, in);
        const auto& w = weights.at(l);
        for (Index i = 0; i < out; ++i) {
            for (Index c = 0; c < in; ++c) {
                layer.weight(i, c) = w.at(static_cast<std::size_t>(i * in + c)).get<double>();
            }
        }
        layer.bias = vector_from_json(biases.at(l));
        n.layers.push_back(std::move(layer));
    }
    return n;
}

json to_json(const DplsModel& m) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["model_type"] = "dpls";
    j["pls"] = to_json(m.pls);
    j["net"] = to_json(m.net);
    return j;
}

DplsModel dpls_from_json(const json& j) {
    DplsModel m;
    m.pls = pls_from_json(j.at("pls"));
    m.net = network_from_json(j.at("net"));
    return m;
}

json to_json(const OlsModel& m) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["model_type"] = "ols";
    j["coefficients"] = matrix_to_json(m.coefficients);
    j["intercept"] = vector_to_json(m.intercept);
    j["used_pseudo_inverse"] = m.used_pseudo_inverse;
    return j;
}

OlsModel ols_from_json(const json& j) {
    OlsModel m;
    m.coefficients = matrix_from_json(j.at("coefficients"));
    m.intercept = vector_from_json(j.at("intercept"));
    m.used_pseudo_inverse = j.at("used_pseudo_inverse").get<bool>();
    return m;
}

json to_json(const LassoModel& m) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["model_type"] = "lasso";
    j["coefficients"] = vector_to_json(m.coefficients);
    j["intercept"] = m.intercept;
    j["lambda"] = m.lambda;
    j["lambda_path"] = m.lambda_path;
    j["cv_mse"] = m.cv_mse;
    return j;
}

LassoModel lasso_from_json(const json& j) {
    LassoModel m;
    m.coefficients = vector_from_json(j.at("coefficients"));
    m.intercept = j.at("intercept").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.lambda_path = j.at("lambda_path").get<std::vector<double>>();
    m.cv_mse = j.at("cv_mse").get<std::vector<double>>();
    return m;
}

json to_json(const SensitivityReport& r) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["jacobian_at_zero"] = matrix_to_json(r.jacobian_at_zero);
    j["jacobian_mean"] = matrix_to_json(r.jacobian_mean);
    json hessians = json::array();
    for (const auto& h : r.hessian_at_zero) hessians.push_back(matrix_to_json(h));
    j["hessian_at_zero"] = std::move(hessians);
    if (r.bootstrap_quantiles) {
        json qj;
        qj["q05"] = matrix_to_json(r.bootstrap_quantiles->q05);
        qj["q50"] = matrix_to_json(r.bootstrap_quantiles->q50);
        qj["q95"] = matrix_to_json(r.bootstrap_quantiles->q95);
        j["bootstrap_quantiles"] = std::move(qj);
        j["resamples_requested"] = r.resamples_requested;
        j["resamples_failed"] = r.resamples_failed;
    }
    return j;
}

json to_json(const AttributionSummary& s) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["alpha"] = vector_to_json(s.alpha);
    j["linear"] = vector_to_json(s.linear);
    j["quadratic"] = vector_to_json(s.quadratic);
    j["hot"] = vector_to_json(s.hot);
    j["total"] = vector_to_json(s.total);
    j["factor_linear"] = matrix_to_json(s.factor_linear);
    j["top_factors"] = s.top_factors;
    return j;
}

json to_json(const ConsistencyReport& r) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["link"] = link_name(r.link);
    json entries = json::array();
    for (const auto& e : r.entries) {
        json ej;
        ej["n"] = e.n;
        ej["cosines"] = vector_to_json(e.cosines);
        ej["kappas"] = vector_to_json(e.kappas);
        entries.push_back(std::move(ej));
    }
    j["entries"] = std::move(entries);
    return j;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    json j;
    in >> j;
    return j;
}

} // namespace dpls
