#pragma once

#include <mutex>
#include <string>
#include <vector>

namespace clinqa {

// Append-only, thread-safe collector for non-fatal problems. Entries are
// plain "category: message" lines and end up in a run's warnings.log.
class Warnings {
 public:
  void add(std::string category, std::string message);
  std::vector<std::string> entries() const;
  std::size_t size() const;
  std::size_t count(std::string_view category) const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> entries_;
};

// Convenience for optional sinks.
inline void warn(Warnings* sink, std::string category, std::string message) {
  if (sink != nullptr) sink->add(std::move(category), std::move(message));
}

}  // namespace clinqa
