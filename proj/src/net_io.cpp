#include "nnwave/net_io.hpp"

#include <fstream>
#include <json.hpp>

#include "nnwave/csv.hpp"

namespace nnwave {

using nlohmann::json;

namespace {

json mat_to_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(a)}};
}

Eigen::MatrixXd mat_from_json(const json& j, const std::string& what) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw LoadError("model document: " + what + " has inconsistent dimensions");
    Eigen::MatrixXd m(rows, cols);
    size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++].get<double>();
    if (!m.allFinite()) throw LoadError("model document: " + what + " contains non-finite values");
    return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vec_from_json(const json& j, const std::string& what) {
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    if (!v.allFinite()) throw LoadError("model document: " + what + " contains non-finite values");
    return v;
}

json param_to_json(const net::ParamTensor<double>& p) {
    if (p.empty()) return nullptr;
    return json{{"value", mat_to_json(p.value)}, {"m", mat_to_json(p.m)}, {"v", mat_to_json(p.v)}};
}

net::ParamTensor<double> param_from_json(const json& j, const std::string& what) {
    net::ParamTensor<double> p;
    if (j.is_null()) return p;
    p.value = mat_from_json(j.at("value"), what);
    p.m = mat_from_json(j.at("m"), what + ".m");
    p.v = mat_from_json(j.at("v"), what + ".v");
    if (p.m.rows() != p.value.rows() || p.m.cols() != p.value.cols() ||
        p.v.rows() != p.value.rows() || p.v.cols() != p.value.cols())
        throw LoadError("model document: " + what + " moment shapes differ from value");
    return p;
}

const char* kind_token(net::LayerKind k) { return net::kind_name(k); }

net::LayerKind kind_from_token(const std::string& t) {
    using K = net::LayerKind;
    for (K k : {K::dense, K::conv1d, K::batch_norm, K::dropout, K::relu, K::flatten, K::output})
        if (t == net::kind_name(k)) return k;
    throw LoadError("model document: unknown layer kind '" + t + "'");
}

json spec_to_json(const net::NetworkSpec& s) {
    json layers = json::array();
    for (const auto& l : s.layers)
        layers.push_back({{"kind", kind_token(l.kind)},
                          {"in", l.in},
                          {"out", l.out},
                          {"kernel", l.kernel},
                          {"rate", l.rate}});
    json skips = json::array();
    for (const auto& k : s.skips)
        skips.push_back({{"from", k.from},
                         {"to", k.to},
                         {"mode", k.mode == net::SkipMode::add ? "add" : "concat"},
                         {"projected", k.projected}});
    return json{{"profile", s.profile},
                {"input_dim", s.input_dim},
                {"output_dim", s.output_dim},
                {"input_channels", s.input_channels},
                {"layers", std::move(layers)},
                {"skips", std::move(skips)}};
}

net::NetworkSpec spec_from_json(const json& j) {
    net::NetworkSpec s;
    s.profile = j.at("profile").get<std::string>();
    s.input_dim = j.at("input_dim").get<int>();
    s.output_dim = j.at("output_dim").get<int>();
    s.input_channels = j.at("input_channels").get<int>();
    for (const auto& l : j.at("layers")) {
        net::LayerSpec ls;
        ls.kind = kind_from_token(l.at("kind").get<std::string>());
        ls.in = l.at("in").get<int>();
        ls.out = l.at("out").get<int>();
        ls.kernel = l.at("kernel").get<int>();
        ls.rate = l.at("rate").get<double>();
        s.layers.push_back(ls);
    }
    for (const auto& k : j.at("skips")) {
        net::SkipSpec ks;
        ks.from = k.at("from").get<int>();
        ks.to = k.at("to").get<int>();
        const std::string mode = k.at("mode").get<std::string>();
        if (mode != "add" && mode != "concat")
            throw LoadError("model document: unknown skip mode '" + mode + "'");
        ks.mode = mode == "add" ? net::SkipMode::add : net::SkipMode::concat;
        ks.projected = k.at("projected").get<bool>();
        s.skips.push_back(ks);
    }
    return s;
}

json doc_to_json(const ModelDocument& doc) {
    json params;
    params["step"] = doc.weights.step;
    json layers = json::array();
    for (const auto& st : doc.weights.layers) {
        json l;
        l["weight"] = param_to_json(st.weight);
        l["bias"] = param_to_json(st.bias);
        l["gamma"] = param_to_json(st.gamma);
        l["beta"] = param_to_json(st.beta);
        l["running_mean"] = st.running_mean.size() ? vec_to_json(st.running_mean) : json(nullptr);
        l["running_var"] = st.running_var.size() ? vec_to_json(st.running_var) : json(nullptr);
        layers.push_back(std::move(l));
    }
    params["layers"] = std::move(layers);
    json projs = json::array();
    for (const auto& p : doc.weights.skip_proj) projs.push_back(param_to_json(p));
    params["skip_proj"] = std::move(projs);

    json history = json::array();
    for (const auto& e : doc.training_history)
        history.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_loss", e.val_loss},
                           {"lr", e.lr}});

    json j;
    j["format_version"] = ModelDocument::kFormatVersion;
    j["spec"] = spec_to_json(doc.spec);
    j["schema"] = {{"variant", variant_name(doc.schema.variant)},
                   {"feature_names", doc.schema.feature_names},
                   {"input_dim", doc.schema.input_dim},
                   {"output_dim", doc.schema.output_dim}};
    j["scaler"] = {{"fitted", doc.scaler.fitted},
                   {"input_mean", vec_to_json(doc.scaler.input_mean)},
                   {"input_std", vec_to_json(doc.scaler.input_std)},
                   {"target_mean", vec_to_json(doc.scaler.target_mean)},
                   {"target_std", vec_to_json(doc.scaler.target_std)}};
    j["parameters"] = std::move(params);
    j["rng_seed"] = doc.rng_seed;
    j["training_history"] = std::move(history);
    j["surge_model"] = doc.surge_model ? doc_to_json(*doc.surge_model) : json(nullptr);
    return j;
}

ModelDocument doc_from_json(const json& j) {
    ModelDocument doc;
    const int version = j.at("format_version").get<int>();
    if (version != ModelDocument::kFormatVersion)
        throw LoadError("model document: unsupported format_version " + std::to_string(version));
    doc.spec = spec_from_json(j.at("spec"));

    std::vector<std::pair<int, int>> proj_shapes;
    std::vector<net::Shape> shapes;
    try {
        shapes = net::infer_shapes(doc.spec, &proj_shapes);
    } catch (const ValidationError& e) {
        throw LoadError(std::string("model document: invalid network spec: ") + e.what());
    }

    const auto& js = j.at("schema");
    doc.schema.variant = variant_from_name(js.at("variant").get<std::string>());
    doc.schema.feature_names = js.at("feature_names").get<std::vector<std::string>>();
    doc.schema.input_dim = js.at("input_dim").get<int>();
    doc.schema.output_dim = js.at("output_dim").get<int>();
    if (doc.schema.input_dim != doc.spec.input_dim ||
        doc.schema.output_dim != doc.spec.output_dim ||
        static_cast<int>(doc.schema.feature_names.size()) != doc.schema.input_dim)
        throw LoadError("model document: schema does not match the network spec");

    const auto& jsc = j.at("scaler");
    doc.scaler.fitted = jsc.at("fitted").get<bool>();
    doc.scaler.input_mean = vec_from_json(jsc.at("input_mean"), "scaler.input_mean");
    doc.scaler.input_std = vec_from_json(jsc.at("input_std"), "scaler.input_std");
    doc.scaler.target_mean = vec_from_json(jsc.at("target_mean"), "scaler.target_mean");
    doc.scaler.target_std = vec_from_json(jsc.at("target_std"), "scaler.target_std");
    if (doc.scaler.fitted && (doc.scaler.input_mean.size() != doc.spec.input_dim ||
                              doc.scaler.target_mean.size() != doc.spec.output_dim))
        throw LoadError("model document: scaler widths do not match the network spec");

    const auto& jp = j.at("parameters");
    doc.weights.step = jp.at("step").get<std::int64_t>();
    const auto& jl = jp.at("layers");
    if (jl.size() != doc.spec.layers.size())
        throw LoadError("model document: layer parameter count does not match the spec");
    doc.weights.layers.resize(jl.size());
    for (size_t i = 0; i < jl.size(); ++i) {
        auto& st = doc.weights.layers[i];
        const std::string where = "layer " + std::to_string(i + 1);
        st.weight = param_from_json(jl[i].at("weight"), where + ".weight");
        st.bias = param_from_json(jl[i].at("bias"), where + ".bias");
        st.gamma = param_from_json(jl[i].at("gamma"), where + ".gamma");
        st.beta = param_from_json(jl[i].at("beta"), where + ".beta");
        if (!jl[i].at("running_mean").is_null())
            st.running_mean = vec_from_json(jl[i].at("running_mean"), where + ".running_mean");
        if (!jl[i].at("running_var").is_null())
            st.running_var = vec_from_json(jl[i].at("running_var"), where + ".running_var");

        const auto& L = doc.spec.layers[i];
        switch (L.kind) {
            case net::LayerKind::dense:
            case net::LayerKind::output:
                if (st.weight.value.rows() != L.out || st.weight.value.cols() != L.in ||
                    st.bias.value.rows() != L.out)
                    throw LoadError("model document: " + where + " parameter shape mismatch");
                break;
            case net::LayerKind::conv1d:
                if (st.weight.value.rows() != L.out ||
                    st.weight.value.cols() != static_cast<Eigen::Index>(L.in) * L.kernel ||
                    st.bias.value.rows() != L.out)
                    throw LoadError("model document: " + where + " parameter shape mismatch");
                break;
            case net::LayerKind::batch_norm:
                if (st.gamma.value.rows() != L.in || st.beta.value.rows() != L.in ||
                    st.running_mean.size() != L.in || st.running_var.size() != L.in)
                    throw LoadError("model document: " + where + " parameter shape mismatch");
                break;
            default:
                if (!st.weight.empty() || !st.gamma.empty())
                    throw LoadError("model document: " + where + " should carry no parameters");
                break;
        }
    }
    const auto& jproj = jp.at("skip_proj");
    if (jproj.size() != doc.spec.skips.size())
        throw LoadError("model document: projection count does not match the spec");
    doc.weights.skip_proj.resize(jproj.size());
    for (size_t k = 0; k < jproj.size(); ++k) {
        doc.weights.skip_proj[k] = param_from_json(jproj[k], "skip projection");
        const auto want = proj_shapes[k];
        const auto& have = doc.weights.skip_proj[k];
        if (want.first == 0 && !have.empty())
            throw LoadError("model document: unexpected projection on an unprojected skip");
        if (want.first > 0 && (have.value.rows() != want.first || have.value.cols() != want.second))
            throw LoadError("model document: projection shape mismatch");
    }

    doc.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& e : j.at("training_history")) {
        EpochRecord r;
        r.epoch = e.at("epoch").get<int>();
        r.train_loss = e.at("train_loss").get<double>();
        r.val_loss = e.at("val_loss").get<double>();
        r.lr = e.at("lr").get<double>();
        doc.training_history.push_back(r);
    }
    if (!j.at("surge_model").is_null())
        doc.surge_model = std::make_shared<ModelDocument>(doc_from_json(j.at("surge_model")));
    return doc;
}

}  // namespace

std::string ModelDocument::model_id() const {
    return variant_name(schema.variant) + "-seed" + std::to_string(rng_seed);
}

std::string save_model(const ModelDocument& doc) { return doc_to_json(doc).dump(); }

ModelDocument load_model(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw LoadError(std::string("model document is not valid JSON: ") + e.what());
    }
    try {
        return doc_from_json(j);
    } catch (const json::exception& e) {
        throw LoadError(std::string("model document is incomplete: ") + e.what());
    }
}

void save_model_file(const ModelDocument& doc, const std::string& path) {
    csv::write_file_atomic(path, save_model(doc));
}

ModelDocument load_model_file(const std::string& path) {
    return load_model(csv::read_file(path));
}

}  // namespace nnwave
