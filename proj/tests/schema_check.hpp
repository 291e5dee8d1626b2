#pragma once

// Minimal JSON Schema checker for the subset used by the published schemas: type, enum,
// const, required, properties, additionalProperties (false), items, allOf, oneOf, if/then,
// minimum, exclusiveMinimum and file-relative $ref.

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace schema {

using nlohmann::json;

inline json load(const std::string& path) {
    std::ifstream f(path);
    return json::parse(f);
}

inline bool has_type(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    return false;
}

// Appends one message per violation to `errors`.
inline void check(const json& v, const json& s, const std::string& dir, const std::string& at,
                  std::vector<std::string>& errors) {
    if (s.contains("$ref")) {
        check(v, load(dir + "/" + s["$ref"].get<std::string>()), dir, at, errors);
        return;
    }
    if (s.contains("type")) {
        bool ok = false;
        if (s["type"].is_array())
            for (const auto& t : s["type"]) ok = ok || has_type(v, t.get<std::string>());
        else
            ok = has_type(v, s["type"].get<std::string>());
        if (!ok) errors.push_back(at + ": wrong type");
    }
    if (s.contains("enum")) {
        bool ok = false;
        for (const auto& e : s["enum"]) ok = ok || e == v;
        if (!ok) errors.push_back(at + ": not in enum");
    }
    if (s.contains("const") && s["const"] != v) errors.push_back(at + ": const mismatch");
    if (v.is_number()) {
        if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>()) errors.push_back(at + ": below minimum");
        if (s.contains("exclusiveMinimum") && v.get<double>() <= s["exclusiveMinimum"].get<double>())
            errors.push_back(at + ": not above exclusiveMinimum");
    }
    if (v.is_object()) {
        if (s.contains("required"))
            for (const auto& k : s["required"])
                if (!v.contains(k.get<std::string>())) errors.push_back(at + ": missing " + k.get<std::string>());
        if (s.contains("properties"))
            for (auto it = s["properties"].begin(); it != s["properties"].end(); ++it)
                if (v.contains(it.key())) check(v[it.key()], it.value(), dir, at + "." + it.key(), errors);
        if (s.value("additionalProperties", true) == false)
            for (auto it = v.begin(); it != v.end(); ++it)
                if (!s["properties"].contains(it.key())) errors.push_back(at + ": unexpected " + it.key());
    }
    if (v.is_array() && s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i) check(v[i], s["items"], dir, at + "[" + std::to_string(i) + "]", errors);
    if (s.contains("allOf"))
        for (const auto& sub : s["allOf"]) check(v, sub, dir, at, errors);
    if (s.contains("oneOf")) {
        int matches = 0;
        for (const auto& sub : s["oneOf"]) {
            std::vector<std::string> e;
            check(v, sub, dir, at, e);
            matches += e.empty();
        }
        if (matches != 1) errors.push_back(at + ": oneOf matched " + std::to_string(matches));
    }
    if (s.contains("if")) {
        std::vector<std::string> e;
        check(v, s["if"], dir, at, e);
        if (e.empty() && s.contains("then")) check(v, s["then"], dir, at, errors);
    }
}

inline std::vector<std::string> validate(const json& v, const std::string& dir, const std::string& file) {
    std::vector<std::string> errors;
    check(v, load(dir + "/" + file), dir, "$", errors);
    return errors;
}

}  // namespace schema
