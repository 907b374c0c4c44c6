#include "garmentsynth/config.hpp"

#include <fstream>
#include <sstream>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidConfig, "'" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto d = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidConfig, "'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

}  // namespace

void Config::validate() const {
  if (steps < 2) throw Error(ErrorCode::kInvalidConfig, "steps must be at least 2");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "guidance scales must be >= 0");
  if (!(percentile > 0.0 && percentile < 1.0)) {
    throw Error(ErrorCode::kInvalidPercentile, "percentile must lie in (0, 1)");
  }
  if (!(window_lo >= 0.0 && window_lo <= window_hi && window_hi <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "guidance window must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidConfig, "temperature must be positive");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "lambda must be >= 0");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "noise schedule needs 0 < beta_start <= beta_end < 1");
  }
  if (bank_cap == 0) throw Error(ErrorCode::kInvalidConfig, "bank_cap must be positive");
}

bool Config::in_window(int t) const {
  const double lo = window_lo * steps;
  const double hi = window_hi * steps;
  return t >= lo && t <= hi;
}

void Config::set(const std::string& key, const std::string& value) {
  if (key == "steps" || key == "T") steps = static_cast<int>(to_uint(key, value));
  else if (key == "alpha") alpha = to_double(key, value);
  else if (key == "beta") beta = to_double(key, value);
  else if (key == "window_lo") window_lo = to_double(key, value);
  else if (key == "window_hi") window_hi = to_double(key, value);
  else if (key == "percentile") percentile = to_double(key, value);
  else if (key == "temperature") temperature = to_double(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "beta_start") beta_start = to_double(key, value);
  else if (key == "beta_end") beta_end = to_double(key, value);
  else if (key == "bank_cap") bank_cap = to_uint(key, value);
  else if (key == "bank_seed") bank_seed = to_uint(key, value);
  else if (key == "seed") seed = to_uint(key, value);
  else if (key == "lexicon") lexicon_path = value;
  else if (key == "templates") templates_path = value;
  else throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
}

void Config::apply_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
    }
    set(trim(std::string_view(stripped).substr(0, eq)), trim(std::string_view(stripped).substr(eq + 1)));
  }
}

void Config::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_text(buf.str());
}

nlohmann::json Config::to_json() const {
  return {{"steps", steps},
          {"alpha", alpha},
          {"beta", beta},
          {"window_lo", window_lo},
          {"window_hi", window_hi},
          {"percentile", percentile},
          {"temperature", temperature},
          {"lambda", lambda},
          {"beta_start", beta_start},
          {"beta_end", beta_end},
          {"bank_cap", bank_cap},
          {"bank_seed", bank_seed},
          {"seed", seed},
          {"lexicon", lexicon_path},
          {"templates", templates_path}};
}

Config Config::from_json(const nlohmann::json& j) {
  Config c;
  try {
    c.steps = j.value("steps", c.steps);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.window_lo = j.value("window_lo", c.window_lo);
    c.window_hi = j.value("window_hi", c.window_hi);
    c.percentile = j.value("percentile", c.percentile);
    c.temperature = j.value("temperature", c.temperature);
    c.lambda = j.value("lambda", c.lambda);
    c.beta_start = j.value("beta_start", c.beta_start);
    c.beta_end = j.value("beta_end", c.beta_end);
    c.bank_cap = j.value("bank_cap", c.bank_cap);
    c.bank_seed = j.value("bank_seed", c.bank_seed);
    c.seed = j.value("seed", c.seed);
    c.lexicon_path = j.value("lexicon", c.lexicon_path);
    c.templates_path = j.value("templates", c.templates_path);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  c.validate();
  return c;
}

}  // namespace garmentsynth
