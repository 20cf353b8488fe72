// SPDX-License-Identifier: Apache-2.0
#include "qgrad/config.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace qgrad {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw std::invalid_argument("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

}  // namespace

std::string format_double(double v) {
  for (int precision : {15, 16, 17}) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    if (precision == 17 || std::stod(os.str()) == v) return os.str();
  }
  return {};
}

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ParseError(source, lineno, "empty key");
    kv[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_key_values(f, path);
}

const std::vector<std::string>& sim_config_keys() {
  static const std::vector<std::string> keys = {
      "workers", "steps", "lr", "lr_decay_epochs", "lr_decay_factor", "warmup_epochs",
      "scheme", "s", "d", "clip", "refine_iters", "refine_tol", "momentum", "seed",
      "model", "samples", "features", "data_seed", "noise", "separation", "batch",
      "server_requantize"};
  return keys;
}

void apply_key_values(SimConfig& cfg, const KeyValues& kv) {
  std::vector<std::string> unknown;
  const auto& keys = sim_config_keys();
  for (const auto& [k, v] : kv) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  for (const auto& [k, v] : kv) {
    if (k == "workers") cfg.workers = to_u64(k, v);
    else if (k == "steps") cfg.steps = to_u64(k, v);
    else if (k == "lr") cfg.lr.base = to_double(k, v);
    else if (k == "lr_decay_epochs") cfg.lr.decay_epochs = to_list(k, v);
    else if (k == "lr_decay_factor") cfg.lr.decay_factor = to_double(k, v);
    else if (k == "warmup_epochs") cfg.lr.warmup_epochs = to_double(k, v);
    else if (k == "scheme") cfg.scheme.scheme = parse_scheme(v);
    else if (k == "s") cfg.scheme.s = static_cast<int>(to_u64(k, v));
    else if (k == "d") cfg.scheme.bucket_size = to_u64(k, v);
    else if (k == "clip") {
      if (v == "none" || v.empty()) cfg.scheme.clip.reset();
      else cfg.scheme.clip = to_double(k, v);
    }
    else if (k == "refine_iters") cfg.scheme.refine.max_iter = static_cast<int>(to_u64(k, v));
    else if (k == "refine_tol") cfg.scheme.refine.tol = to_double(k, v);
    else if (k == "momentum") cfg.momentum = to_double(k, v);
    else if (k == "seed") cfg.seed = to_u64(k, v);
    else if (k == "model") cfg.model.kind = parse_model(v);
    else if (k == "samples") cfg.model.samples = to_u64(k, v);
    else if (k == "features") cfg.model.features = to_u64(k, v);
    else if (k == "data_seed") cfg.model.data_seed = to_u64(k, v);
    else if (k == "noise") cfg.model.noise = to_double(k, v);
    else if (k == "separation") cfg.model.separation = to_double(k, v);
    else if (k == "batch") cfg.batch = to_u64(k, v);
    else if (k == "server_requantize") cfg.server_requantize = to_bool(k, v);
  }
}

std::string to_key_values(const SimConfig& cfg) {
  std::ostringstream os;
  auto line = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  line("workers", std::to_string(cfg.workers));
  line("steps", std::to_string(cfg.steps));
  line("lr", format_double(cfg.lr.base));
  std::string epochs;
  for (std::size_t i = 0; i < cfg.lr.decay_epochs.size(); ++i) {
    if (i) epochs += ",";
    epochs += format_double(cfg.lr.decay_epochs[i]);
  }
  line("lr_decay_epochs", epochs.empty() ? "none" : epochs);
  line("lr_decay_factor", format_double(cfg.lr.decay_factor));
  line("warmup_epochs", format_double(cfg.lr.warmup_epochs));
  line("scheme", std::string(scheme_name(cfg.scheme.scheme)));
  line("s", std::to_string(cfg.scheme.s));
  line("d", std::to_string(cfg.scheme.bucket_size));
  line("clip", cfg.scheme.clip ? format_double(*cfg.scheme.clip) : "none");
  line("refine_iters", std::to_string(cfg.scheme.refine.max_iter));
  line("refine_tol", format_double(cfg.scheme.refine.tol));
  line("momentum", format_double(cfg.momentum));
  line("seed", std::to_string(cfg.seed));
  line("model", std::string(model_name(cfg.model.kind)));
  line("samples", std::to_string(cfg.model.samples));
  line("features", std::to_string(cfg.model.features));
  line("data_seed", std::to_string(cfg.model.data_seed));
  line("noise", format_double(cfg.model.noise));
  line("separation", format_double(cfg.model.separation));
  line("batch", std::to_string(cfg.batch));
  line("server_requantize", cfg.server_requantize ? "true" : "false");
  return os.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_manifest(std::ostream& out, const RunManifest& m) {
  out << "# qgrad run manifest\n";
  out << "# command = " << m.command << '\n';
  out << "# version = " << kVersion << '\n';
  out << "# timestamp = " << m.timestamp << '\n';
  out << "# seed = " << m.seed << '\n';
  for (const auto& [k, v] : m.notes) out << "# " << k << " = " << v << '\n';
  for (const auto& [k, v] : m.config) out << k << " = " << v << '\n';
}

}  // namespace qgrad
