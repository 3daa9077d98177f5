#include "proxi2s/study_io.hpp"

#include <charconv>
#include <map>
#include <sstream>

#include "proxi2s/csv.hpp"
#include "proxi2s/error.hpp"

namespace proxi2s {

VarianceMethod variance_from_string(const std::string& name) {
  if (name == "bootstrap") return VarianceMethod::bootstrap;
  if (name == "sandwich") return VarianceMethod::sandwich;
  if (name == "both") return VarianceMethod::both;
  throw DataError("unknown variance method '" + name +
                  "' (expected bootstrap, sandwich, or both)");
}

std::string to_string(VarianceMethod method) {
  switch (method) {
    case VarianceMethod::bootstrap: return "bootstrap";
    case VarianceMethod::sandwich: return "sandwich";
    case VarianceMethod::both: return "both";
  }
  return "?";
}

namespace {

struct TomlValue {
  std::string raw;        // scalar token or quoted string content
  bool quoted = false;
  std::vector<TomlValue> array;
  bool is_array = false;

  double number(const std::string& key) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc() || ptr != raw.data() + raw.size())
      throw DataError("config key '" + key + "': expected a number, got '" +
                      raw + "'");
    return v;
  }
  bool boolean(const std::string& key) const {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw DataError("config key '" + key + "': expected true/false");
  }
};

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

TomlValue parse_value(const std::string& text, const std::string& key);

std::vector<TomlValue> parse_array(const std::string& body,
                                   const std::string& key) {
  std::vector<TomlValue> out;
  std::string item;
  bool in_quote = false;
  for (char c : body) {
    if (c == '"') in_quote = !in_quote;
    if (c == ',' && !in_quote) {
      if (!trimmed(item).empty()) out.push_back(parse_value(trimmed(item), key));
      item.clear();
    } else {
      item += c;
    }
  }
  if (!trimmed(item).empty()) out.push_back(parse_value(trimmed(item), key));
  return out;
}

TomlValue parse_value(const std::string& text, const std::string& key) {
  TomlValue value;
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    value.is_array = true;
    value.array = parse_array(text.substr(1, text.size() - 2), key);
    return value;
  }
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    value.quoted = true;
    value.raw = text.substr(1, text.size() - 2);
    return value;
  }
  value.raw = text;
  if (value.raw.empty())
    throw DataError("config key '" + key + "' has no value");
  return value;
}

std::string strip_comment(const std::string& line) {
  std::string out;
  bool in_quote = false;
  for (char c : line) {
    if (c == '"') in_quote = !in_quote;
    if (c == '#' && !in_quote) break;
    out += c;
  }
  return out;
}

using TomlMap = std::map<std::string, TomlValue>;

TomlMap parse_toml(const std::string& text) {
  TomlMap values;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trimmed(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw DataError("config line " + std::to_string(line_no) +
                        ": malformed section header");
      section = trimmed(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) +
                      ": expected key = value");
    const std::string key =
        (section.empty() ? "" : section + ".") + trimmed(line.substr(0, eq));
    values[key] = parse_value(trimmed(line.substr(eq + 1)), key);
  }
  return values;
}

}  // namespace

StudyConfig parse_study_toml(const std::string& text) {
  TomlMap values = parse_toml(text);
  StudyConfig config = StudyConfig::ss_default();

  auto number = [&](const std::string& key, double& slot) {
    auto it = values.find(key);
    if (it != values.end()) slot = it->second.number(key);
  };
  auto integer = [&](const std::string& key, int& slot) {
    auto it = values.find(key);
    if (it != values.end())
      slot = static_cast<int>(it->second.number(key));
  };

  number("dgp.beta0", config.dgp.beta0);
  number("dgp.beta_a", config.dgp.beta_a);
  number("dgp.beta_u", config.dgp.beta_u);
  number("dgp.beta_w", config.dgp.beta_w);
  number("dgp.alpha0", config.dgp.alpha0);
  number("dgp.alpha_u", config.dgp.alpha_u);
  number("dgp.sd_a", config.dgp.az.sd_a);
  number("dgp.sd_z", config.dgp.az.sd_z);
  number("dgp.eps_mu", config.dgp.eps.mu);
  number("dgp.eps_scale", config.dgp.eps.scale);
  if (auto it = values.find("dgp.eps"); it != values.end()) {
    if (it->second.raw == "logistic")
      config.dgp.eps.kind = EpsDist::Kind::logistic;
    else if (it->second.raw == "normal")
      config.dgp.eps.kind = EpsDist::Kind::normal;
    else
      throw DataError("dgp.eps must be \"logistic\" or \"normal\"");
  }
  if (auto it = values.find("dgp.m"); it != values.end()) {
    const auto& arr = it->second.array;
    if (!it->second.is_array || arr.size() != 4)
      throw DataError("dgp.m must be an array [c0, ca, cz, caz]");
    config.dgp.m = MCoefs{arr[0].number("dgp.m"), arr[1].number("dgp.m"),
                          arr[2].number("dgp.m"), arr[3].number("dgp.m")};
  }

  if (auto it = values.find("study.sizes"); it != values.end()) {
    if (!it->second.is_array) throw DataError("study.sizes must be an array");
    config.sample_sizes.clear();
    for (const TomlValue& v : it->second.array)
      config.sample_sizes.push_back(
          static_cast<int>(v.number("study.sizes")));
  }
  integer("study.replications", config.replications);
  integer("study.bootstrap_b", config.bootstrap_b);
  number("study.ci_level", config.ci_level);
  if (auto it = values.find("study.seed"); it != values.end())
    config.master_seed =
        static_cast<std::uint64_t>(it->second.number("study.seed"));
  if (auto it = values.find("study.variance"); it != values.end())
    config.variance = variance_from_string(it->second.raw);
  if (auto it = values.find("study.naive_linear"); it != values.end())
    config.include_naive_linear = it->second.boolean("study.naive_linear");

  if (auto it = values.find("model.first_stage_terms"); it != values.end()) {
    if (!it->second.is_array)
      throw DataError("model.first_stage_terms must be an array of strings");
    std::vector<std::string> names;
    for (const TomlValue& v : it->second.array) names.push_back(v.raw);
    config.first_stage_terms = TermSpec::parse(names);
  }

  config.validate();
  return config;
}

StudyConfig load_study_config(const std::string& path) {
  return parse_study_toml(read_text_file(path));
}

}  // namespace proxi2s
