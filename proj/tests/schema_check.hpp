#pragma once

// Minimal JSON-schema validator covering the keyword subset the shipped
// schemas use: type (string or list), properties, required, items, enum,
// additionalProperties:false, minItems.

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace schemacheck {

using nlohmann::json;

inline bool type_matches(const json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
    if (type == "number") return value.is_number();
    return false;
}

inline void validate(const json& value, const json& schema, const std::string& path,
                     std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        const json& t = schema["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(value, t.get<std::string>());
        } else {
            for (const auto& alt : t)
                if (type_matches(value, alt.get<std::string>())) ok = true;
        }
        if (!ok) {
            errors.push_back(path + ": type mismatch (got " + std::string(value.type_name()) + ")");
            return;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& alt : schema["enum"])
            if (alt == value) ok = true;
        if (!ok) errors.push_back(path + ": value not in enum");
    }
    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!value.contains(key.get<std::string>()))
                    errors.push_back(path + ": missing required key '" + key.get<std::string>() + "'");
        const json props = schema.value("properties", json::object());
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (props.contains(it.key())) {
                validate(it.value(), props[it.key()], path + "/" + it.key(), errors);
            } else if (schema.contains("additionalProperties") &&
                       schema["additionalProperties"].is_boolean() &&
                       !schema["additionalProperties"].get<bool>()) {
                errors.push_back(path + ": unexpected key '" + it.key() + "'");
            }
        }
    }
    if (value.is_array()) {
        if (schema.contains("minItems") && value.size() < schema["minItems"].get<size_t>())
            errors.push_back(path + ": fewer than minItems entries");
        if (schema.contains("items")) {
            size_t i = 0;
            for (const auto& entry : value)
                validate(entry, schema["items"], path + "[" + std::to_string(i++) + "]", errors);
        }
    }
}

inline std::vector<std::string> validate_file(const std::string& artifact_path,
                                              const std::string& schema_path) {
    std::vector<std::string> errors;
    std::ifstream af(artifact_path), sf(schema_path);
    if (!af) return {"cannot open artifact " + artifact_path};
    if (!sf) return {"cannot open schema " + schema_path};
    json artifact = json::parse(af, nullptr, false);
    json schema = json::parse(sf, nullptr, false);
    if (artifact.is_discarded()) return {"artifact is not valid JSON: " + artifact_path};
    if (schema.is_discarded()) return {"schema is not valid JSON: " + schema_path};
    validate(artifact, schema, "#", errors);
    return errors;
}

}  // namespace schemacheck
