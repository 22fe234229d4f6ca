#ifndef V2B_JSON_UTIL_HPP
#define V2B_JSON_UTIL_HPP

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "v2b/error.hpp"

namespace v2b {

using Json = nlohmann::json;

/** \brief Throws ConfigError when `j` is not an object or has a key outside `allowed`. */
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

/** \brief Reads an optional field, leaving `out` untouched when absent. */
template <class T>
void read_opt(const Json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace v2b

#endif
