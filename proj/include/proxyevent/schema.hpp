#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "proxyevent/errors.hpp"

namespace proxyevent {

inline constexpr std::size_t kNullIndex = 0;
inline constexpr const char* kNullLabel = "null";

/// Event types and argument roles, both with index 0 reserved for null.
/// Each non-null type carries the set of roles it may legally fill.
class Schema {
 public:
  Schema() : types_{kNullLabel}, roles_{kNullLabel}, legal_(1) { rebuild(); }

  /// Adds a role to the global list if new; returns its index.
  std::size_t add_role(const std::string& role) {
    if (role == kNullLabel) throw ValidationError("role name 'null' is reserved");
    if (auto it = role_index_.find(role); it != role_index_.end()) return it->second;
    roles_.push_back(role);
    rebuild();
    return roles_.size() - 1;
  }

  std::size_t add_type(const std::string& type, const std::vector<std::string>& roles) {
    if (type == kNullLabel) throw ValidationError("event type name 'null' is reserved");
    if (type_index_.count(type)) throw ValidationError("duplicate event type '" + type + "'");
    std::vector<std::size_t> legal;
    for (const auto& r : roles) {
      const std::size_t idx = add_role(r);
      if (std::find(legal.begin(), legal.end(), idx) != legal.end())
        throw ValidationError("role '" + r + "' listed twice for type '" + type + "'");
      legal.push_back(idx);
    }
    types_.push_back(type);
    legal_.push_back(std::move(legal));
    rebuild();
    return types_.size() - 1;
  }

  /// Number of classes including null (|C| + 1).
  std::size_t num_types() const { return types_.size(); }
  /// Number of roles including null (|A| + 1).
  std::size_t num_roles() const { return roles_.size(); }

  const std::string& type_name(std::size_t t) const { return types_.at(t); }
  const std::string& role_name(std::size_t r) const { return roles_.at(r); }
  const std::vector<std::string>& type_names() const { return types_; }
  const std::vector<std::string>& role_names() const { return roles_; }
  const std::vector<std::size_t>& legal_roles(std::size_t t) const { return legal_.at(t); }

  std::size_t type_index(const std::string& name) const {
    auto it = type_index_.find(name);
    if (it == type_index_.end()) throw ValidationError("unknown event type '" + name + "'");
    return it->second;
  }
  std::size_t role_index(const std::string& name) const {
    auto it = role_index_.find(name);
    if (it == role_index_.end()) throw ValidationError("unknown role '" + name + "'");
    return it->second;
  }
  bool has_type(const std::string& name) const { return type_index_.count(name) != 0; }

  bool is_legal(std::size_t type, std::size_t role) const {
    if (type >= legal_.size()) return false;
    const auto& l = legal_[type];
    return std::find(l.begin(), l.end(), role) != l.end();
  }

  bool operator==(const Schema& other) const {
    return types_ == other.types_ && roles_ == other.roles_ && legal_ == other.legal_;
  }

 private:
  void rebuild() {
    type_index_.clear();
    role_index_.clear();
    for (std::size_t i = 0; i < types_.size(); ++i) type_index_[types_[i]] = i;
    for (std::size_t i = 0; i < roles_.size(); ++i) role_index_[roles_[i]] = i;
  }

  std::vector<std::string> types_;
  std::vector<std::string> roles_;
  std::vector<std::vector<std::size_t>> legal_;
  std::map<std::string, std::size_t> type_index_;
  std::map<std::string, std::size_t> role_index_;
};

}  // namespace proxyevent
