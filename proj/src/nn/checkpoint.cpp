#include "forchestra/nn/checkpoint.hpp"

#include <fstream>
#include <map>

#include "forchestra/error.hpp"

namespace forchestra::nn {

using nlohmann::json;

json parameters_to_json(const std::vector<const Parameter*>& params) {
    json out = json::array();
    for (const Parameter* p : params) {
        out.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"values", p->value.values()}});
    }
    return out;
}

void parameters_from_json(const json& doc, const std::vector<Parameter*>& params) {
    const json& list = doc.is_object() ? doc.at("parameters") : doc;
    std::map<std::string, const json*> by_name;
    for (const json& entry : list) by_name[entry.at("name").get<std::string>()] = &entry;
    for (Parameter* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw ParseError("checkpoint is missing parameter '" + p->name + "'");
        const json& entry = *it->second;
        auto shape = entry.at("shape").get<Shape>();
        if (shape != p->value.shape()) {
            throw ParseError("checkpoint parameter '" + p->name + "' has shape " + to_string(shape) +
                             ", model expects " + to_string(p->value.shape()));
        }
        p->value = Tensor(std::move(shape), entry.at("values").get<std::vector<double>>());
        p->zero_grad();
    }
}

json make_checkpoint(const std::string& kind, json config, const std::vector<const Parameter*>& params) {
    json doc;
    doc["format"] = kCheckpointFormat;
    doc["version"] = kCheckpointVersion;
    doc["kind"] = kind;
    doc["config"] = std::move(config);
    doc["parameters"] = parameters_to_json(params);
    return doc;
}

const json& check_checkpoint(const json& doc, const std::string& kind) {
    if (!doc.is_object() || doc.value("format", std::string{}) != kCheckpointFormat) {
        throw ParseError("not a forchestra checkpoint");
    }
    const int version = doc.value("version", 0);
    if (version != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::string found = doc.value("kind", std::string{});
    if (found != kind) throw ParseError("checkpoint kind is '" + found + "', expected '" + kind + "'");
    return doc;
}

void write_json(const std::filesystem::path& path, const json& doc) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace forchestra::nn
