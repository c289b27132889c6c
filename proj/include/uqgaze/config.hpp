#ifndef UQGAZE_CONFIG_HPP
#define UQGAZE_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace uqgaze {

/// `section.key = value` overrides, one per line. Values are a number or a
/// bracketed list `[a, b, c]`; `#` starts a comment.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>")
    {
        KeyValueConfig cfg;
        std::string line;
        for (int lineno = 1; std::getline(in, line); ++lineno) {
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            const std::string where = origin + ":" + std::to_string(lineno);
            if (eq == std::string::npos) fail(ErrorCode::BadConfig, where + ": expected `section.key = value`");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.find('.') == std::string::npos || key.front() == '.' || key.back() == '.')
                fail(ErrorCode::BadConfig, where + ": key `" + key + "` must be section.key");
            if (value.empty()) fail(ErrorCode::BadConfig, where + ": empty value for `" + key + "`");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static KeyValueConfig load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in) fail(ErrorCode::IoFailure, "cannot open config " + path.string());
        return parse(in, path.string());
    }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

    [[nodiscard]] double number(const std::string& key) const
    {
        used_.insert(key);
        return to_number(key, values_.at(key));
    }

    [[nodiscard]] std::vector<double> list(const std::string& key) const
    {
        used_.insert(key);
        std::string v = values_.at(key);
        if (v.size() < 2 || v.front() != '[' || v.back() != ']')
            fail(ErrorCode::BadConfig, "`" + key + "` must be a bracketed list");
        std::vector<double> out;
        std::stringstream ss(v.substr(1, v.size() - 2));
        for (std::string item; std::getline(ss, item, ',');) out.push_back(to_number(key, trim(item)));
        return out;
    }

    /// Keys that no consumer has read yet; callers treat them as typos.
    [[nodiscard]] std::vector<std::string> unused_keys() const
    {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static double to_number(const std::string& key, const std::string& text)
    {
        try {
            std::size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument(text);
            return v;
        } catch (const std::exception&) {
            fail(ErrorCode::BadConfig, "`" + key + "`: not a number: `" + text + "`");
        }
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

} // namespace uqgaze

#endif
