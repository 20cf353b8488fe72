// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "qgrad/codec.hpp"
#include "qgrad/config.hpp"
#include "qgrad/errors.hpp"
#include "qgrad/levels.hpp"
#include "qgrad/oracle.hpp"
#include "qgrad/quantize.hpp"
#include "qgrad/sim.hpp"
#include "qgrad/synthetic.hpp"

namespace qgrad::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kOutDirEnv = "QGRAD_OUT_DIR";

struct CommandDef {
  std::string name;
  std::string help;
  std::vector<std::pair<std::string, std::string>> defaults;
  std::vector<std::string> bool_keys;
  std::map<std::string, std::string> key_help;
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t parse_u64(const KeyValues& kv, const std::string& key) {
  const auto& v = kv.at(key);
  try {
    std::size_t used = 0;
    const auto r = std::stoull(v, &used);
    if (used == v.size() && v.find('-') == std::string::npos) return r;
  } catch (const std::logic_error&) {
  }
  throw std::invalid_argument("'" + key + "': expected an unsigned integer, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double r = std::stod(v, &used);
    if (used == v.size()) return r;
  } catch (const std::logic_error&) {
  }
  throw std::invalid_argument("'" + key + "': expected a number, got '" + v + "'");
}

bool parse_bool(const std::string& v) { return v == "true" || v == "1" || v == "yes"; }

fs::path output_dir(const KeyValues& kv_out) {
  auto it = kv_out.find("out");
  if (it != kv_out.end() && !it->second.empty()) return it->second;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env) return env;
  return "qgrad-out";
}

void write_manifest_file(const fs::path& path, const std::string& command, const KeyValues& kv,
                         std::uint64_t seed, std::vector<std::pair<std::string, std::string>> notes = {}) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
  write_manifest(f, RunManifest{command, kv, seed, utc_timestamp(), std::move(notes)});
}

std::vector<float> load_values(const KeyValues& kv, std::string* source) {
  const auto& file = kv.at("file");
  if (!file.empty()) {
    *source = file;
    return read_values_file(file);
  }
  const auto dist = parse_distribution(kv.at("dist"));
  const auto n = parse_u64(kv, "n");
  const auto seed = parse_u64(kv, "seed");
  if (n == 0) throw std::invalid_argument("'n' must be >= 1");
  std::ostringstream os;
  os << distribution_name(dist) << "(seed=" << seed << ")";
  *source = os.str();
  return synthetic_gradient(dist, n, seed);
}

// ---------------------------------------------------------------- levels

int cmd_levels(const KeyValues& kv, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  std::string source;
  auto values = load_values(kv, &source);
  if (values.empty()) throw std::invalid_argument("input has no values");
  SchemeConfig cfg;
  cfg.scheme = parse_scheme(kv.at("scheme"));
  cfg.s = static_cast<int>(parse_u64(kv, "s"));
  cfg.bucket_size = values.size();
  cfg.refine.max_iter = static_cast<int>(parse_u64(kv, "refine_iters"));
  if (kv.at("clip") != "none") cfg.clip = parse_double("clip", kv.at("clip"));
  if (cfg.scheme == Scheme::kFullPrecision) throw std::invalid_argument("levels: 'fp' has no levels");
  validate(cfg);

  const auto st = stats(values);
  if (cfg.clip) {
    if (st.std == 0.0) err << "warning: clipping a constant input zeroes every element\n";
    values = clip(values, *cfg.clip);
  }
  std::vector<float> sorted(values);
  std::sort(sorted.begin(), sorted.end());

  out << std::setprecision(9);
  out << "levels: scheme=" << scheme_name(cfg.scheme) << " s=" << nominal_levels(cfg)
      << " n=" << values.size() << " source=" << source << '\n';
  out << "min=" << st.min << " max=" << st.max << " mean=" << st.mean << " std=" << st.std << '\n';

  auto print_levels = [&](const LevelSet& ls) {
    out << "levels (" << ls.size() << "):";
    for (float l : ls.levels) out << ' ' << l;
    out << '\n';
  };
  const double norm = std::max(std::abs(st.min), std::abs(st.max));
  auto evenly_baseline = [&](int s) {
    const auto base = evenly_spaced_levels(norm, s);
    out << "baseline evenly-spaced-" << s << " expected_mse=" << expected_rounding_mse(values, base) << '\n';
  };

  switch (cfg.scheme) {
    case Scheme::kOrq: {
      std::vector<MidLevelSolve> trace;
      const auto ls = orq_levels(values, orq_depth(cfg.s), &trace);
      print_levels(ls);
      out << "solve  lo  hi  level  residual\n";
      for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& t = trace[i];
        const double r = t.lo < t.hi ? mid_level_residual(t.lo, t.hi, sorted, t.level).residual : 0.0;
        out << i << "  " << t.lo << "  " << t.hi << "  " << t.level << "  " << r << '\n';
      }
      out << "expected_mse=" << expected_rounding_mse(values, ls) << '\n';
      evenly_baseline(cfg.s);
      break;
    }
    case Scheme::kQsgd:
    case Scheme::kTernGrad: {
      const int s = nominal_levels(cfg);
      const auto ls = evenly_spaced_levels(norm, s, cfg.scheme);
      print_levels(ls);
      out << "norm=max-abs " << norm << '\n';
      out << "expected_mse=" << expected_rounding_mse(values, ls) << '\n';
      break;
    }
    case Scheme::kLinear: {
      const auto ls = linear_cdf_levels(values, cfg.s);
      print_levels(ls);
      out << "expected_mse=" << expected_rounding_mse(values, ls) << '\n';
      if (cfg.s % 2 == 1) evenly_baseline(cfg.s);
      break;
    }
    case Scheme::kBinGradB: {
      const auto bl = bingrad_b_levels(values, cfg.refine);
      out << "b_neg=" << bl.b_neg << " b_mid=" << bl.b_mid << " b_pos=" << bl.b_pos << '\n';
      double lo_sum = 0.0, hi_sum = 0.0;
      std::size_t lo_n = 0, hi_n = 0;
      for (float v : values) {
        if (v < bl.b_mid) {
          lo_sum += v;
          ++lo_n;
        } else {
          hi_sum += v;
          ++hi_n;
        }
      }
      const double lo_mean = lo_n ? lo_sum / static_cast<double>(lo_n) : bl.b_mid;
      const double hi_mean = hi_n ? hi_sum / static_cast<double>(hi_n) : bl.b_mid;
      out << "conditional means: below=" << lo_mean << " (n=" << lo_n << ") above=" << hi_mean
          << " (n=" << hi_n << ")\n";
      const auto q = quantize_bingrad_b(values, bl);
      out << "mse=" << quantization_mse(values, q) << '\n';
      const auto best = oracle::brute_force_binary_det(values);
      out << "optimal two-cluster mse=" << best.best_mse << '\n';
      out << "baseline signsgd mse=" << quantization_mse(values, scaled_signsgd(values)) << '\n';
      break;
    }
    case Scheme::kBinGradPb: {
      const auto bl = bingrad_pb_level(values);
      out << "b_1=" << bl.b_pos << " objective=" << bingrad_pb_objective(values, bl.b_pos) << '\n';
      const double raw[2] = {bl.b_neg, bl.b_pos};
      out << "expected_mse=" << expected_rounding_mse(values, make_level_set(raw, 2, cfg.scheme)) << '\n';
      out << "baseline signsgd mse=" << quantization_mse(values, scaled_signsgd(values)) << '\n';
      break;
    }
    case Scheme::kScaledSign: {
      const auto q = scaled_signsgd(values);
      print_levels(q.levels);
      out << "mse=" << quantization_mse(values, q) << '\n';
      break;
    }
    case Scheme::kFullPrecision:
      break;
  }

  fs::create_directories(out_dir);
  write_manifest_file(out_dir / "levels_manifest.txt", "levels", kv, parse_u64(kv, "seed"));
  return 0;
}

// ---------------------------------------------------------------- bench

int cmd_bench(const KeyValues& kv, const fs::path& out_dir, std::ostream& out, std::ostream&) {
  const auto n = parse_u64(kv, "n");
  const auto seed = parse_u64(kv, "seed");
  if (n == 0) throw std::invalid_argument("'n' must be >= 1");
  std::vector<Distribution> dists;
  for (const auto& d : split_list(kv.at("dists"))) dists.push_back(parse_distribution(d));
  std::vector<Scheme> schemes;
  for (const auto& s : split_list(kv.at("schemes"))) schemes.push_back(parse_scheme(s));
  std::vector<int> s_values;
  for (const auto& s : split_list(kv.at("s"))) s_values.push_back(static_cast<int>(parse_double("s", s)));
  std::vector<std::size_t> d_values;
  for (const auto& d : split_list(kv.at("d"))) d_values.push_back(static_cast<std::size_t>(parse_double("d", d)));

  fs::create_directories(out_dir);
  const auto csv_path = out_dir / "bench.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
  csv << "scheme,s,distribution,d,n,expected_mse,empirical_mse,bits_per_element,achieved_ratio,"
         "theoretical_ratio\n";
  csv << std::setprecision(12);
  std::size_t rows = 0;
  for (auto dist : dists) {
    const GradientBuffer grad(synthetic_gradient(dist, n, seed));
    for (auto d : d_values) {
      for (auto scheme : schemes) {
        if (scheme == Scheme::kFullPrecision) continue;
        std::vector<int> ss = s_values;
        SchemeConfig probe{scheme, 3, d, std::nullopt, {}};
        // Schemes with a fixed level count get one row.
        if (nominal_levels(probe) != 3 || scheme == Scheme::kTernGrad) ss = {nominal_levels(probe)};
        for (int s : ss) {
          SchemeConfig cfg{scheme, s, d, std::nullopt, {}};
          validate(cfg);
          const auto buckets = quantize_gradient(grad, cfg, RngStream::derive(seed, {0xbe, rows}).key());
          const bool deterministic = scheme == Scheme::kBinGradB || scheme == Scheme::kScaledSign;
          double expected = 0.0;
          double empirical = 0.0;
          const auto views = bucketize(grad, d);
          for (std::size_t b = 0; b < buckets.size(); ++b) {
            const auto vals = views[b].values();
            const double w = static_cast<double>(vals.size());
            const double emp = quantization_mse(vals, buckets[b]);
            empirical += emp * w;
            expected += (deterministic ? emp : expected_rounding_mse(vals, buckets[b].levels)) * w;
          }
          expected /= static_cast<double>(n);
          empirical /= static_cast<double>(n);
          const auto msg = encode(buckets, static_cast<std::uint32_t>(d));
          const auto rep = ratio_report(msg);
          csv << scheme_name(scheme) << ',' << nominal_levels(cfg) << ',' << distribution_name(dist) << ','
              << d << ',' << n << ',' << expected << ',' << empirical << ',' << rep.bits_per_element << ','
              << rep.achieved_ratio << ',' << rep.theoretical_ratio << '\n';
          ++rows;
        }
      }
    }
  }
  write_manifest_file(out_dir / "bench_manifest.txt", "bench", kv, seed,
                      {{"csv_schema", "bench/1"}, {"qsgd_norm", "max-abs"}});
  out << "wrote " << csv_path.string() << " (" << rows << " rows)\n";
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const KeyValues& kv, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  SimConfig cfg;
  apply_key_values(cfg, kv);
  validate(cfg);
  if (cfg.scheme.clip) err << "note: clipping zeroes any bucket whose elements are all equal\n";

  SimResult res;
  try {
    res = run_sim(cfg);
  } catch (const SimAbort& e) {
    err << "train aborted: " << e.what() << '\n';
    return 3;
  }

  fs::create_directories(out_dir);
  const auto csv_path = out_dir / "metrics.csv";
  {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
    write_metrics_csv(csv, res.metrics);
  }
  std::istringstream resolved_in(to_key_values(cfg));
  const KeyValues resolved = parse_key_values(resolved_in, "config");
  write_manifest_file(out_dir / "train_manifest.txt", "train", resolved, cfg.seed,
                      {{"csv_schema", "metrics/1"}, {"qsgd_norm", "max-abs"}});

  double bits = 0.0;
  std::size_t clamps = 0;
  for (const auto& m : res.metrics) {
    bits += m.bits_per_element;
    clamps += m.clamp_events;
  }
  out << std::setprecision(9);
  out << "train: model=" << model_name(cfg.model.kind) << " scheme=" << scheme_name(cfg.scheme.scheme)
      << " s=" << nominal_levels(cfg.scheme) << " workers=" << cfg.workers << " steps=" << cfg.steps << '\n';
  out << "final_loss=" << res.final_loss << '\n';
  if (!std::isnan(res.final_accuracy)) out << "final_accuracy=" << res.final_accuracy << '\n';
  if (cfg.model.kind == ModelKind::kQuadratic) {
    const auto opt = make_model(cfg.model)->optimum();
    double dist = 0.0;
    for (std::size_t j = 0; j < opt.size(); ++j) dist += (res.params[j] - opt[j]) * (res.params[j] - opt[j]);
    out << "distance_to_optimum=" << std::sqrt(dist) << '\n';
  }
  out << "mean_bits_per_element=" << bits / static_cast<double>(res.metrics.size()) << '\n';
  out << "clamp_events=" << clamps << '\n';
  out << "wrote " << csv_path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- codec-check

void hex_dump(std::ostream& out, std::span<const std::uint8_t> bytes) {
  const auto flags = out.flags();
  for (std::size_t i = 0; i < bytes.size(); i += 16) {
    out << std::hex << std::setw(8) << std::setfill('0') << i << ' ';
    for (std::size_t j = i; j < std::min(bytes.size(), i + 16); ++j) {
      out << ' ' << std::setw(2) << static_cast<int>(bytes[j]);
    }
    out << '\n';
  }
  out.flags(flags);
  out << std::setfill(' ');
}

int cmd_codec_check(const KeyValues& kv, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  out << std::setprecision(9);
  const bool hex = parse_bool(kv.at("hex"));
  fs::create_directories(out_dir);
  write_manifest_file(out_dir / "codec_manifest.txt", "codec-check", kv, parse_u64(kv, "seed"));

  if (const auto& input = kv.at("input"); !input.empty()) {
    std::ifstream f(input, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + input + "'");
    WireMessage msg{std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {})};
    try {
      const auto h = read_header(msg.bytes);
      out << "header: version=" << int(h.version) << " scheme=" << scheme_name(h.scheme)
          << " s=" << h.levels << " d=" << h.bucket_size << " D=" << h.elements << '\n';
      const auto vals = decode_values(msg);
      out << "decoded " << vals.size() << " elements, " << msg.bytes.size() << " bytes\n";
      if (h.elements > 0) {
        const auto rep = ratio_report(msg);
        out << "achieved_ratio=" << rep.achieved_ratio << " theoretical_ratio=" << rep.theoretical_ratio << '\n';
      }
    } catch (const FormatError& e) {
      err << "format error: " << e.what() << '\n';
      return 1;
    } catch (const UnsupportedScheme& e) {
      err << "unsupported scheme: " << e.what() << '\n';
      return 1;
    }
    if (hex) hex_dump(out, msg.bytes);
    return 0;
  }

  SchemeConfig cfg;
  cfg.scheme = parse_scheme(kv.at("scheme"));
  cfg.s = static_cast<int>(parse_u64(kv, "s"));
  cfg.bucket_size = parse_u64(kv, "d");
  validate(cfg);
  const auto n = parse_u64(kv, "n");
  const auto seed = parse_u64(kv, "seed");
  const GradientBuffer grad(synthetic_gradient(parse_distribution(kv.at("dist")), n, seed));

  WireMessage msg;
  bool ok = true;
  if (cfg.scheme == Scheme::kFullPrecision) {
    std::vector<double> dense(grad.values().begin(), grad.values().end());
    msg = encode_dense(dense);
    ok = decode_dense(msg) == dense;
  } else {
    const auto buckets = quantize_gradient(grad, cfg, RngStream::derive(seed, {0xc0}).key());
    msg = encode(buckets, static_cast<std::uint32_t>(cfg.bucket_size));
    const auto back = decode(msg);
    ok = back.size() == buckets.size();
    for (std::size_t b = 0; ok && b < back.size(); ++b) {
      ok = back[b].indices == buckets[b].indices && back[b].levels.levels == buckets[b].levels.levels;
    }
    out << "symbols_per_word=" << symbols_per_word(static_cast<std::uint32_t>(nominal_levels(cfg))) << '\n';
  }
  out << "scheme=" << scheme_name(cfg.scheme) << " s=" << nominal_levels(cfg) << " d=" << cfg.bucket_size
      << " D=" << n << '\n';
  out << "payload_bits=" << msg.payload_bits() << '\n';
  if (n > 0) {
    const auto rep = ratio_report(msg);
    out << "bits_per_element=" << rep.bits_per_element << '\n';
    out << "achieved_ratio=" << rep.achieved_ratio << " theoretical_ratio=" << rep.theoretical_ratio << '\n';
  }
  out << "roundtrip=" << (ok ? "ok" : "MISMATCH") << '\n';
  if (const auto& w = kv.at("write"); !w.empty()) {
    std::ofstream f(w, std::ios::binary);
    f.write(reinterpret_cast<const char*>(msg.bytes.data()), static_cast<std::streamsize>(msg.bytes.size()));
  }
  if (hex) hex_dump(out, msg.bytes);
  return ok ? 0 : 1;
}

std::vector<CommandDef> command_defs() {
  std::vector<CommandDef> defs;
  defs.push_back({"levels",
                   "Solve and inspect the level set for one input",
                   {{"dist", "gaussian"}, {"file", ""}, {"n", "100000"}, {"seed", "1"}, {"scheme", "orq"},
                    {"s", "3"}, {"refine_iters", "0"}, {"clip", "none"}},
                   {},
                   {{"file", "values file (.f32 raw little-endian float32, otherwise text)"},
                    {"dist", "synthetic distribution when no file is given"}}});
  defs.push_back({"bench",
                   "Quantization error and compression ratio per scheme, distribution and bucket size",
                   {{"dists", "gaussian,laplace,mixture"}, {"schemes", "orq,qsgd,linear"}, {"s", "3,5,9"},
                    {"d", "128,512,2048,8192,32768"}, {"n", "131072"}, {"seed", "1"}},
                   {},
                   {}});
  CommandDef train{"train", "Parameter-server training simulation", {}, {"server_requantize"}, {}};
  {
    std::istringstream in(to_key_values(SimConfig{}));
    for (const auto& [k, v] : parse_key_values(in, "defaults")) train.defaults.emplace_back(k, v);
  }
  defs.push_back(train);
  defs.push_back({"codec-check",
                   "Encode, decode and report compression ratios",
                   {{"scheme", "orq"}, {"s", "3"}, {"d", "2048"}, {"n", "2048"}, {"dist", "gaussian"},
                    {"seed", "1"}, {"hex", "false"}, {"write", ""}, {"input", ""}},
                   {"hex"},
                   {{"input", "decode an existing message file instead"},
                    {"write", "write the encoded message to this file"}}});
  return defs;
}

}  // namespace

std::vector<float> read_values_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<float> out;
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".f32") == 0) {
    const std::vector<char> raw((std::istreambuf_iterator<char>(f)), {});
    if (raw.size() % 4 != 0) {
      throw std::runtime_error(path + ": size " + std::to_string(raw.size()) + " is not a multiple of 4 bytes");
    }
    out.resize(raw.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
      out[i] = std::bit_cast<float>(bits);
      if (!std::isfinite(out[i])) throw std::runtime_error(path + ": non-finite value at element " + std::to_string(i));
    }
    return out;
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string tok = line.substr(b, e - b + 1);
    try {
      std::size_t used = 0;
      const float v = std::stof(tok, &used);
      if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError(path, lineno, "not a finite number: '" + tok + "'");
    }
  }
  return out;
}

void write_f32_file(const std::string& path, std::span<const float> values) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) f.put(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"qgrad: gradient quantization toolkit", "qgrad"};
  app.require_subcommand(1);
  const auto defs = command_defs();

  struct Bound {
    CLI::App* sub = nullptr;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::map<std::string, bool> bools;
    std::string config;
    std::string out;
  };
  std::vector<Bound> bound(defs.size());
  for (std::size_t i = 0; i < defs.size(); ++i) {
    const auto& cmd = defs[i];
    auto& b = bound[i];
    b.sub = app.add_subcommand(cmd.name, cmd.help);
    b.sub->add_option("--config", b.config, "key = value file; flags override its entries");
    b.sub->add_option("--out", b.out, std::string("output directory (default $") + kOutDirEnv + " or ./qgrad-out)");
    for (const auto& [key, fallback] : cmd.defaults) {
      const auto h = cmd.key_help.count(key) ? cmd.key_help.at(key) : std::string("default: ") + fallback;
      if (std::find(cmd.bool_keys.begin(), cmd.bool_keys.end(), key) != cmd.bool_keys.end()) {
        b.bools[key] = false;
        b.options[key] = b.sub->add_flag(flag_name(key), b.bools[key], h);
      } else {
        b.values[key];
        b.options[key] = b.sub->add_option(flag_name(key), b.values[key], h);
      }
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  for (std::size_t i = 0; i < defs.size(); ++i) {
    auto& b = bound[i];
    if (!b.sub->parsed()) continue;
    const auto& cmd = defs[i];
    try {
      KeyValues kv(cmd.defaults.begin(), cmd.defaults.end());
      if (!b.config.empty()) {
        const auto file_kv = read_key_values_file(b.config);
        std::string unknown;
        for (const auto& [k, v] : file_kv) {
          if (!kv.count(k)) unknown += " " + k;
        }
        if (!unknown.empty()) throw std::invalid_argument("unknown config keys:" + unknown);
        for (const auto& [k, v] : file_kv) kv[k] = v;
      }
      for (const auto& [key, opt] : b.options) {
        if (opt->count() == 0) continue;
        kv[key] = b.bools.count(key) ? (b.bools[key] ? "true" : "false") : b.values[key];
      }
      KeyValues out_kv;
      if (!b.out.empty()) out_kv["out"] = b.out;
      const auto dir = output_dir(out_kv);
      if (cmd.name == "levels") return cmd_levels(kv, dir, out, err);
      if (cmd.name == "bench") return cmd_bench(kv, dir, out, err);
      if (cmd.name == "train") return cmd_train(kv, dir, out, err);
      if (cmd.name == "codec-check") return cmd_codec_check(kv, dir, out, err);
    } catch (const ParseError& e) {
      err << "parse error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 2;
}

}  // namespace qgrad::cli
