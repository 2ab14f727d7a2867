#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace dropmark {

// Flat "key = value" text with [section] headers. Lookup keys are
// "section.key". '#' starts a comment. Unknown keys are preserved (callers
// decide what they need); missing keys either fall back or throw.
class Config {
  public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const;

    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_real(const std::string& key) const;
    double get_real(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace dropmark
