#pragma once

// JSON output with every floating-point value printed to 17 significant
// digits (round-trip exact). Non-finite numbers become null.

#include "catnet/common.hpp"

#include <json.hpp>

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <string>

namespace catnet {

using json = nlohmann::ordered_json;

inline std::string format_double(double v) {
  if (!std::isfinite(v))
    return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void dump_json(const json &j, std::string &out, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent >= 0) {
      out += '\n';
      out.append(static_cast<std::size_t>(indent * d), ' ');
    }
  };
  switch (j.type()) {
  case json::value_t::object: {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += '{';
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first)
        out += ',';
      first = false;
      newline(depth + 1);
      out += json(it.key()).dump();
      out += indent >= 0 ? ": " : ":";
      dump_json(it.value(), out, indent, depth + 1);
    }
    newline(depth);
    out += '}';
    return;
  }
  case json::value_t::array: {
    if (j.empty()) {
      out += "[]";
      return;
    }
    // Arrays of scalars stay on one line.
    const bool flat = std::none_of(j.begin(), j.end(),
                                   [](const json &e) { return e.is_structured(); });
    out += '[';
    bool first = true;
    for (const auto &e : j) {
      if (!first)
        out += flat && indent >= 0 ? ", " : ",";
      first = false;
      if (!flat)
        newline(depth + 1);
      dump_json(e, out, indent, depth + 1);
    }
    if (!flat)
      newline(depth);
    out += ']';
    return;
  }
  case json::value_t::number_float:
    out += format_double(j.get<double>());
    return;
  default:
    out += j.dump();
  }
}

} // namespace detail

inline std::string dump_json(const json &j, int indent = 2) {
  std::string out;
  detail::dump_json(j, out, indent, 0);
  if (indent >= 0)
    out += '\n';
  return out;
}

inline json to_json(const Vector &v) {
  json a = json::array();
  for (Eigen::Index q = 0; q < v.size(); ++q)
    a.push_back(v[q]);
  return a;
}

inline json to_json(const Matrix &m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

} // namespace catnet
