#pragma once

#include <algorithm>
#include <string>
#include <vector>

namespace causalid {

/// Sorted, duplicate-free vector of variable names. All set-valued fields in
/// the library use this representation so that equality is structural.
using NameSet = std::vector<std::string>;

inline NameSet make_set(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

inline bool contains(const NameSet& s, const std::string& v) {
  return std::binary_search(s.begin(), s.end(), v);
}

inline NameSet set_union(const NameSet& a, const NameSet& b) {
  NameSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline NameSet set_minus(const NameSet& a, const NameSet& b) {
  NameSet out;
  out.reserve(a.size());
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline NameSet set_intersect(const NameSet& a, const NameSet& b) {
  NameSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool is_subset(const NameSet& a, const NameSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline bool disjoint(const NameSet& a, const NameSet& b) {
  return set_intersect(a, b).empty();
}

/// "A,B,C" — used by renderers and error messages.
inline std::string join(const NameSet& s, const std::string& sep = ",") {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += sep;
    out += s[i];
  }
  return out;
}

}  // namespace causalid
