#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qleak/errors.hpp"

namespace qleak {

struct Subsystem {
  std::string label;
  std::size_t dim = 0;
  bool classical = false;

  bool operator==(const Subsystem&) const = default;
};

// Ordered composite-system layout. Labels are unique, dims >= 2, total
// dimension <= 256.
class SystemLayout {
 public:
  static constexpr std::size_t kMaxTotalDim = 256;

  SystemLayout() = default;
  explicit SystemLayout(std::vector<Subsystem> subs);

  std::size_t size() const { return subs_.size(); }
  const Subsystem& operator[](std::size_t i) const { return subs_[i]; }
  const std::vector<Subsystem>& subsystems() const { return subs_; }
  std::size_t total_dim() const;
  std::vector<std::size_t> dims() const;

  bool has(const std::string& label) const;
  std::size_t index_of(const std::string& label) const;  // throws UnknownLabel

  // Sublayout of the given labels, in this layout's order.
  SystemLayout keep(const std::vector<std::string>& labels) const;
  // Sublayout of everything except the given labels.
  SystemLayout drop(const std::vector<std::string>& labels) const;

  SystemLayout appended(Subsystem s) const;

  bool operator==(const SystemLayout&) const = default;

 private:
  std::vector<Subsystem> subs_;
};

}  // namespace qleak
