#include "clinqa/warnings.hpp"

#include <algorithm>

namespace clinqa {

void Warnings::add(std::string category, std::string message) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(category) + ": " + std::move(message));
}

std::vector<std::string> Warnings::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t Warnings::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::size_t Warnings::count(std::string_view category) const {
  std::lock_guard lock(mu_);
  const std::string prefix = std::string(category) + ": ";
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [&](const std::string& e) {
    return e.compare(0, prefix.size(), prefix) == 0;
  }));
}

}  // namespace clinqa
