// Copyright 2026 The topoprobe authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal JSON-Schema checker for the subset the report schema uses:
// type, enum, required, properties, additionalProperties (boolean), items,
// minimum/maximum, oneOf, and local $ref. Test-only.

#include <string>
#include <vector>

#include "json.hpp"

namespace schema_validator {

using Json = nlohmann::json;

class Validator {
 public:
  explicit Validator(Json schema) : root_(std::move(schema)) {}

  bool validate(const Json& value, std::string* error = nullptr) const {
    std::string err;
    const bool ok = check(root_, value, "$", &err);
    if (!ok && error) *error = err;
    return ok;
  }

 private:
  const Json& resolve(const Json& schema) const {
    if (schema.contains("$ref")) {
      const std::string ref = schema["$ref"].get<std::string>();
      if (ref.rfind("#/", 0) != 0) throw std::runtime_error("unsupported $ref " + ref);
      const Json* node = &root_;
      std::string rest = ref.substr(2);
      while (!rest.empty()) {
        const auto slash = rest.find('/');
        const std::string key = rest.substr(0, slash);
        node = &node->at(key);
        rest = slash == std::string::npos ? "" : rest.substr(slash + 1);
      }
      return *node;
    }
    return schema;
  }

  static bool type_matches(const std::string& type, const Json& v) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "number") return v.is_number();
    if (type == "integer") return v.is_number_integer() || v.is_number_unsigned();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
  }

  bool check(const Json& raw_schema, const Json& value, const std::string& path,
             std::string* err) const {
    const Json& schema = resolve(raw_schema);

    if (schema.contains("oneOf")) {
      int matches = 0;
      for (const auto& alternative : schema["oneOf"]) {
        std::string ignored;
        if (check(alternative, value, path, &ignored)) ++matches;
      }
      if (matches != 1) {
        *err = path + ": matched " + std::to_string(matches) + " oneOf alternatives";
        return false;
      }
      return true;
    }

    if (schema.contains("type")) {
      const std::string type = schema["type"].get<std::string>();
      if (!type_matches(type, value)) {
        *err = path + ": expected type " + type;
        return false;
      }
    }

    if (schema.contains("enum")) {
      bool found = false;
      for (const auto& e : schema["enum"])
        if (e == value) found = true;
      if (!found) {
        *err = path + ": value not in enum";
        return false;
      }
    }

    if (value.is_number()) {
      const double v = value.get<double>();
      if (schema.contains("minimum") && v < schema["minimum"].get<double>()) {
        *err = path + ": below minimum";
        return false;
      }
      if (schema.contains("maximum") && v > schema["maximum"].get<double>()) {
        *err = path + ": above maximum";
        return false;
      }
    }

    if (value.is_object()) {
      if (schema.contains("required")) {
        for (const auto& key : schema["required"]) {
          if (!value.contains(key.get<std::string>())) {
            *err = path + ": missing required key '" + key.get<std::string>() + "'";
            return false;
          }
        }
      }
      const Json props =
          schema.contains("properties") ? schema["properties"] : Json::object();
      const bool closed = schema.contains("additionalProperties") &&
                          schema["additionalProperties"].is_boolean() &&
                          !schema["additionalProperties"].get<bool>();
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (props.contains(it.key())) {
          if (!check(props[it.key()], it.value(), path + "." + it.key(), err)) return false;
        } else if (closed) {
          *err = path + ": unexpected key '" + it.key() + "'";
          return false;
        }
      }
    }

    if (value.is_array() && schema.contains("items")) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (!check(schema["items"], value[i], path + "[" + std::to_string(i) + "]", err))
          return false;
      }
    }

    return true;
  }

  Json root_;
};

}  // namespace schema_validator
