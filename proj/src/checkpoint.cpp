#include "curvebind/checkpoint.hpp"

#include <sstream>

#include "curvebind/errors.hpp"
#include "curvebind/jsonio.hpp"

namespace curvebind {

namespace {
constexpr const char* kFormatTag = "curvebind-checkpoint/1";
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
    nlohmann::json doc;
    doc["format"] = kFormatTag;
    doc["config"] = ckpt.config.to_json();
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, t] : ckpt.params.tensors) {
        nlohmann::json p;
        p["shape"] = {t.rows(), t.cols()};
        nlohmann::json data = nlohmann::json::array();
        for (std::size_t k = 0; k < t.size(); ++k) data.push_back(t[k]);
        p["data"] = std::move(data);
        params[name] = std::move(p);
    }
    doc["params"] = std::move(params);
    return json_g17(doc, 1);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    write_text_file(path, checkpoint_to_string(ckpt));
}

Checkpoint checkpoint_from_string(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    if (doc.value("format", "") != kFormatTag)
        throw ValidationError("checkpoint: missing or mismatched format tag (want '" +
                              std::string(kFormatTag) + "')");
    Checkpoint ckpt;
    ckpt.config = ModelConfig::from_json(doc.at("config"));

    const auto expected = param_shapes(ckpt.config);
    const nlohmann::json& params = doc.at("params");
    for (const ParamShape& ps : expected) {
        if (!params.contains(ps.name))
            throw ValidationError("checkpoint: missing parameter '" + ps.name + "'");
        const nlohmann::json& p = params.at(ps.name);
        const auto shape = p.at("shape");
        const std::size_t r = shape.at(0).get<std::size_t>();
        const std::size_t c = shape.at(1).get<std::size_t>();
        if (r != ps.rows || c != ps.cols)
            throw ShapeError("checkpoint: parameter '" + ps.name + "' has shape [" +
                             std::to_string(r) + " x " + std::to_string(c) + "], config needs [" +
                             std::to_string(ps.rows) + " x " + std::to_string(ps.cols) + "]");
        const nlohmann::json& data = p.at("data");
        if (data.size() != r * c)
            throw ValidationError("checkpoint: parameter '" + ps.name + "' data length");
        Tensor t(r, c);
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = data.at(k).get<double>();
        ckpt.params.tensors[ps.name] = std::move(t);
    }
    if (params.size() != expected.size())
        throw ValidationError("checkpoint: unexpected extra parameters");
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_string(read_text_file(path));
}

} // namespace curvebind
