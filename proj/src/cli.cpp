#include "freenoise/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "freenoise/io.hpp"
#include "freenoise/kernels.hpp"
#include "freenoise/metrics.hpp"
#include "freenoise/motion_injection.hpp"
#include "freenoise/noise_schedule.hpp"
#include "freenoise/parallel.hpp"
#include "freenoise/sampler.hpp"

namespace freenoise::cli {

namespace {

using Values = std::map<std::string, std::vector<std::string>>;

// Keys that stand alone (no value token).
const std::set<std::string> kBoolKeys = {"no-temporal-conv", "sliding-disjoint", "parallel-also"};
// Keys that may repeat and accumulate.
const std::set<std::string> kRepeatKeys = {"prompt", "set-a", "set-b"};

struct ParsedArgs {
  Values values;                      // flags merged over config file
  std::vector<std::string> positionals;
};

ParsedArgs parse_args(const std::vector<std::string>& args, const std::set<std::string>& known) {
  Values flags;
  std::vector<std::string> positionals;
  for (size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) {
      positionals.push_back(a);
      continue;
    }
    std::string key = a.substr(2);
    std::string value;
    bool has_value = false;
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
      has_value = true;
    }
    if (!known.count(key)) throw ConfigError("unknown option '--" + key + "'");
    if (kBoolKeys.count(key)) {
      flags[key].push_back(has_value ? value : "1");
      continue;
    }
    if (!has_value) {
      if (i + 1 >= args.size()) throw ConfigError("option '--" + key + "' needs a value");
      value = args[++i];
    }
    flags[key].push_back(value);
  }

  ParsedArgs out;
  out.positionals = std::move(positionals);
  // config file first, command-line flags override per key
  if (const auto it = flags.find("config"); it != flags.end()) {
    const Values file = parse_config_file(it->second.back());
    for (const auto& [key, vals] : file) {
      if (!known.count(key)) {
        throw ConfigError("unknown key '" + key + "' in config file");
      }
      out.values[key] = vals;
    }
  }
  for (const auto& [key, vals] : flags) out.values[key] = vals;
  return out;
}

// typed accessors; every failure names the offending key
long long get_int(const Values& v, const std::string& key, long long fallback) {
  const auto it = v.find(key);
  if (it == v.end()) return fallback;
  try {
    size_t pos = 0;
    const long long r = std::stoll(it->second.back(), &pos);
    if (pos != it->second.back().size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for '" + key + "': '" + it->second.back() + "'");
  }
}

unsigned long long get_u64(const Values& v, const std::string& key, unsigned long long fallback) {
  const auto it = v.find(key);
  if (it == v.end()) return fallback;
  try {
    size_t pos = 0;
    const unsigned long long r = std::stoull(it->second.back(), &pos);
    if (pos != it->second.back().size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for '" + key + "': '" + it->second.back() + "'");
  }
}

double get_double(const Values& v, const std::string& key, double fallback) {
  const auto it = v.find(key);
  if (it == v.end()) return fallback;
  try {
    size_t pos = 0;
    const double r = std::stod(it->second.back(), &pos);
    if (pos != it->second.back().size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for '" + key + "': '" + it->second.back() + "'");
  }
}

std::string get_str(const Values& v, const std::string& key, const std::string& fallback) {
  const auto it = v.find(key);
  return it == v.end() ? fallback : it->second.back();
}

bool get_bool(const Values& v, const std::string& key) {
  const auto it = v.find(key);
  if (it == v.end()) return false;
  const std::string& s = it->second.back();
  return s == "1" || s == "true" || s == "yes" || s == "on";
}

std::vector<std::string> get_list(const Values& v, const std::string& key) {
  const auto it = v.find(key);
  return it == v.end() ? std::vector<std::string>{} : it->second;
}

// ----------------------------------------------------------------------------

const std::set<std::string> kModelKeys = {
    "hidden", "heads", "head-dim", "text-tokens", "text-dim", "time-dim",
    "weight-seed", "no-temporal-conv"};
const std::set<std::string> kSamplerKeys = {
    "mode", "frames", "n-train", "unit", "genl-stride", "guidance", "seed",
    "sliding-disjoint", "height", "width"};
const std::set<std::string> kScheduleKeys = {"steps", "eta", "train-steps", "beta-start",
                                             "beta-end"};
const std::set<std::string> kPromptKeys = {"prompt", "transition", "inject-band",
                                           "decoder-layer"};
const std::set<std::string> kCommonKeys = {"config", "threads", "kernels"};

std::set<std::string> merge_keys(std::initializer_list<const std::set<std::string>*> sets,
                                 std::initializer_list<const char*> extra) {
  std::set<std::string> out;
  for (const auto* s : sets) out.insert(s->begin(), s->end());
  for (const char* e : extra) out.insert(e);
  return out;
}

void apply_common(const Values& v) {
  if (const long long threads = get_int(v, "threads", 0); threads > 0) {
    set_max_threads(static_cast<int>(threads));
  }
  const std::string kern = get_str(v, "kernels", "");
  if (!kern.empty()) kernels::set_backend(kernels::backend_from_name(kern));
}

ModelConfig model_config_from(const Values& v) {
  ModelConfig cfg;
  cfg.hidden_channels = static_cast<int>(get_int(v, "hidden", cfg.hidden_channels));
  cfg.heads = static_cast<int>(get_int(v, "heads", cfg.heads));
  cfg.head_dim = static_cast<int>(get_int(v, "head-dim", cfg.head_dim));
  cfg.text_tokens = static_cast<int>(get_int(v, "text-tokens", cfg.text_tokens));
  cfg.text_dim = static_cast<int>(get_int(v, "text-dim", cfg.text_dim));
  cfg.time_dim = static_cast<int>(get_int(v, "time-dim", cfg.time_dim));
  cfg.weight_seed = get_u64(v, "weight-seed", cfg.weight_seed);
  cfg.temporal_conv = !get_bool(v, "no-temporal-conv");
  cfg.validate();
  return cfg;
}

SamplerConfig sampler_config_from(const Values& v) {
  SamplerConfig cfg;
  cfg.mode = mode_from_name(get_str(v, "mode", "freenoise"));
  cfg.total = static_cast<int>(get_int(v, "frames", 64));
  cfg.n_train = static_cast<int>(get_int(v, "n-train", 16));
  cfg.unit = static_cast<int>(get_int(v, "unit", 4));
  cfg.genl_stride = static_cast<int>(get_int(v, "genl-stride", 0));
  cfg.guidance = static_cast<float>(get_double(v, "guidance", 15.0));
  cfg.seed = get_u64(v, "seed", 0);
  cfg.sliding_disjoint = get_bool(v, "sliding-disjoint");
  const int height = static_cast<int>(get_int(v, "height", 16));
  const int width = static_cast<int>(get_int(v, "width", 16));
  if (height < 2 || width < 2 || height % 2 != 0 || width % 2 != 0) {
    throw ConfigError("height/width must be even and >= 2, got " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  cfg.latent_height = height / 2;
  cfg.latent_width = width / 2;
  cfg.validate();
  return cfg;
}

DiffusionSchedule schedule_from(const Values& v) {
  return make_diffusion_schedule(static_cast<int>(get_int(v, "train-steps", 1000)),
                                 static_cast<float>(get_double(v, "beta-start", 1e-4)),
                                 static_cast<float>(get_double(v, "beta-end", 2e-2)),
                                 static_cast<int>(get_int(v, "steps", 50)),
                                 static_cast<float>(get_double(v, "eta", 0.0)));
}

/// "text" or "text@frame"; the trailing @<int> names the first frame of the
/// prompt's segment.
std::pair<std::string, int> split_prompt_spec(const std::string& spec) {
  const auto at = spec.rfind('@');
  if (at != std::string::npos && at + 1 < spec.size()) {
    const std::string tail = spec.substr(at + 1);
    try {
      size_t pos = 0;
      const int frame = std::stoi(tail, &pos);
      if (pos == tail.size()) return {spec.substr(0, at), frame};
    } catch (const std::exception&) {
      // fall through: '@' was part of the prompt text
    }
  }
  return {spec, -1};
}

PromptTimeline timeline_from(const Values& v, const ModelConfig& model_cfg, int total_frames,
                             int train_steps) {
  std::vector<std::string> specs = get_list(v, "prompt");
  if (specs.empty()) specs.push_back("a man is boating on a lake");

  std::vector<std::string> texts;
  std::vector<int> starts;
  for (size_t i = 0; i < specs.size(); ++i) {
    auto [text, frame] = split_prompt_spec(specs[i]);
    if (frame < 0) frame = (i == 0) ? 0 : -1;
    if (i == 0 && frame != 0) {
      throw ConfigError("first prompt must start at frame 0, got @" + std::to_string(frame));
    }
    if (i > 0 && frame < 0) {
      throw ConfigError("prompt " + std::to_string(i + 1) +
                        " needs a start frame (\"text\"@frame)");
    }
    if (i > 0 && frame <= starts.back()) {
      throw ConfigError("prompt start frames must be strictly increasing");
    }
    texts.push_back(text);
    starts.push_back(frame);
  }
  std::vector<int> segment_frames;
  for (size_t i = 0; i < starts.size(); ++i) {
    const int end = (i + 1 < starts.size()) ? starts[i + 1] : total_frames;
    if (end > total_frames) throw ConfigError("prompt start frame beyond the last frame");
    segment_frames.push_back(end - starts[i]);
  }

  const std::string band = get_str(v, "inject-band", "0.3,0.7");
  const auto comma = band.find(',');
  if (comma == std::string::npos) {
    throw ConfigError("inject-band must be 'start,end' fractions, got '" + band + "'");
  }
  double ta = 0.0, tb = 0.0;
  try {
    ta = std::stod(band.substr(0, comma));
    tb = std::stod(band.substr(comma + 1));
  } catch (const std::exception&) {
    throw ConfigError("inject-band must be 'start,end' fractions, got '" + band + "'");
  }

  return build_timeline(texts, segment_frames, static_cast<int>(get_int(v, "transition", 8)), ta,
                        tb, static_cast<int>(get_int(v, "decoder-layer", -1)), train_steps,
                        model_cfg);
}

// ----------------------------------------------------------------------------
// Subcommands
// ----------------------------------------------------------------------------

int cmd_generate(const std::vector<std::string>& args) {
  const auto known = merge_keys({&kModelKeys, &kSamplerKeys, &kScheduleKeys, &kPromptKeys,
                                 &kCommonKeys},
                                {"out", "export-frames", "load-weights", "dump-weights"});
  const ParsedArgs parsed = parse_args(args, known);
  const Values& v = parsed.values;
  if (!parsed.positionals.empty()) {
    throw ConfigError("unexpected argument '" + parsed.positionals.front() + "'");
  }
  apply_common(v);

  // full validation before any side effect
  const std::string weights_in = get_str(v, "load-weights", "");
  ModelConfig model_cfg = model_config_from(v);
  const SamplerConfig smp = sampler_config_from(v);
  const DiffusionSchedule sched = schedule_from(v);
  ToyVideoLdm model = weights_in.empty() ? ToyVideoLdm(model_cfg) : load_weights(weights_in);
  model_cfg = model.config();
  const PromptTimeline timeline =
      timeline_from(v, model_cfg, smp.total, sched.train_steps);
  ConditionResolver resolver(timeline);
  const std::string out_path = get_str(v, "out", "out.fnv");
  const std::string frames_prefix = get_str(v, "export-frames", "");
  const std::string weights_out = get_str(v, "dump-weights", "");
  if (model_cfg.latent_channels != 12) {
    throw ConfigError("decoding requires latent_channels == 12");
  }

  if (!weights_out.empty()) save_weights(model, weights_out);
  const Array latent = sample_video(smp, resolver, model, sched);
  const Array rgb = decode_video(latent);
  write_container(rgb, out_path);
  if (!frames_prefix.empty()) export_frames_p6(rgb, frames_prefix);

  std::cout << "wrote " << out_path << " (" << rgb.extent(1) << " frames, " << rgb.extent(2)
            << "x" << rgb.extent(3) << ", mode " << mode_name(smp.mode) << ", seed " << smp.seed
            << ")\n";
  return 0;
}

int cmd_bench(const std::vector<std::string>& args) {
  const auto known = merge_keys({&kModelKeys, &kSamplerKeys, &kScheduleKeys, &kCommonKeys},
                                {"modes", "reps", "out", "parallel-also"});
  const ParsedArgs parsed = parse_args(args, known);
  const Values& v = parsed.values;
  apply_common(v);

  std::vector<SamplerMode> modes;
  std::stringstream ss(get_str(v, "modes", "direct,sliding,genl,freenoise"));
  std::string name;
  while (std::getline(ss, name, ',')) modes.push_back(mode_from_name(name));

  const SamplerConfig smp = sampler_config_from(v);
  const DiffusionSchedule sched = schedule_from(v);
  const ToyVideoLdm model(model_config_from(v));
  const int reps = static_cast<int>(get_int(v, "reps", 5));

  // timings are comparable only in serial mode; measure that first
  const int requested_threads = max_threads();
  set_max_threads(1);
  const BenchReport report = run_benchmark(modes, smp, model, sched, reps);
  std::cout << format_report_table(report);
  std::string kv = format_report_key_values(report);

  if (get_bool(v, "parallel-also") && requested_threads > 1) {
    set_max_threads(requested_threads);
    const BenchReport par = run_benchmark(modes, smp, model, sched, reps);
    std::cout << "with " << requested_threads << " threads:\n" << format_report_table(par);
    std::ostringstream extra;
    extra << "threads=" << requested_threads << "\n";
    kv += extra.str() + format_report_key_values(par);
  }
  set_max_threads(requested_threads);

  const std::string out_path = get_str(v, "out", "");
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    if (!os) throw FormatError("cannot open '" + out_path + "' for writing");
    os << kv;
  }
  return 0;
}

int cmd_inspect(const std::vector<std::string>& args) {
  const auto known = merge_keys({&kModelKeys, &kSamplerKeys, &kScheduleKeys, &kPromptKeys,
                                 &kCommonKeys},
                                {});
  const ParsedArgs parsed = parse_args(args, known);
  const Values& v = parsed.values;
  const ModelConfig model_cfg = model_config_from(v);
  const SamplerConfig smp = sampler_config_from(v);
  const DiffusionSchedule sched = schedule_from(v);

  std::cout << "# shuffle plan (n_train=" << smp.n_train << " unit=" << smp.unit
            << " total=" << smp.total << " seed=" << smp.seed << ")\n";
  const ShufflePlan plan = build_shuffle_plan(smp.n_train, smp.unit, smp.total, smp.seed);
  for (int i = 0; i < plan.total; ++i) {
    std::cout << i << " -> " << plan.mapping[static_cast<size_t>(i)] << "\n";
  }

  std::cout << "# windows (window=" << smp.n_train << " stride=" << smp.unit << ")\n";
  const WindowPlan wplan = plan_windows(smp.total, smp.n_train, smp.unit);
  for (size_t j = 0; j < wplan.windows.size(); ++j) {
    const Window& w = wplan.windows[j];
    std::cout << "window " << j << ": start=" << w.start << " center=" << w.center
              << " end=" << w.end << "\n";
  }
  for (int i = 0; i < wplan.total; ++i) {
    std::cout << "frame " << i << ":";
    for (const auto& [j, wgt] : wplan.frame_weights[static_cast<size_t>(i)]) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), " w%zu=%.6f", static_cast<size_t>(j), wgt);
      std::cout << buf;
    }
    std::cout << "\n";
  }

  const PromptTimeline tl = timeline_from(v, model_cfg, smp.total, sched.train_steps);
  std::cout << "# prompt routing (t_alpha=" << tl.t_alpha << " t_beta=" << tl.t_beta
            << " layer_threshold=" << tl.layer_threshold << ")\n";
  ConditionResolver resolver(tl);
  for (int n = 0; n < smp.total; ++n) {
    size_t seg = 0;
    for (size_t k = 0; k < tl.transitions.size(); ++k) {
      if (n >= tl.transitions[k].n_tau) seg = k + 1;
    }
    std::cout << "frame " << n << ": base=prompt" << seg;
    bool in_band = false;
    for (size_t k = 0; k < tl.transitions.size(); ++k) {
      const Transition& tr = tl.transitions[k];
      if (n >= tr.n_gamma && n < tr.n_tau) {
        const double coef = static_cast<double>(n - tr.n_gamma) / (tr.n_tau - tr.n_gamma);
        char buf[64];
        std::snprintf(buf, sizeof(buf), " target=blend(prompt%zu,prompt%zu,%.4f)", k, k + 1,
                      coef);
        std::cout << buf;
        in_band = true;
      }
    }
    if (!in_band) std::cout << " target=prompt" << seg;
    std::cout << "\n";
  }
  return 0;
}

int cmd_metrics(const std::vector<std::string>& args) {
  const auto known = merge_keys({&kCommonKeys}, {"set-a", "set-b"});
  const ParsedArgs parsed = parse_args(args, known);
  const Values& v = parsed.values;
  const auto set_a = get_list(v, "set-a");
  const auto set_b = get_list(v, "set-b");
  if (parsed.positionals.empty() && set_a.empty() && set_b.empty()) {
    throw ConfigError("metrics needs container files (positional) and/or --set-a/--set-b");
  }
  for (const std::string& path : parsed.positionals) {
    const Array video = read_container(path);
    std::cout << path << " consistency=" << consistency_sim(video) << "\n";
  }
  if (!set_a.empty() || !set_b.empty()) {
    auto load = [](const std::vector<std::string>& paths) {
      std::vector<Array> out;
      for (const auto& p : paths) out.push_back(read_container(p));
      return out;
    };
    std::cout << "frechet=" << frechet_feature_distance(load(set_a), load(set_b)) << "\n";
  }
  return 0;
}

void usage(std::ostream& os) {
  os << "usage: freenoise <generate|bench|inspect|metrics> [--key value ...]\n"
        "  generate  sample a video and write an FNV1 container\n"
        "  bench     time the inference modes and report exact pass counts\n"
        "  inspect   print the shuffle mapping, window table and prompt routing\n"
        "  metrics   consistency / feature-distance over container files\n"
        "common options: --config FILE (flat key = value; flags override),\n"
        "  --threads N, --kernels scalar|avx2|neon|auto\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    if (args.empty()) {
      usage(std::cerr);
      return 2;
    }
    const std::string cmd = args[0];
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    if (cmd == "generate") return cmd_generate(rest);
    if (cmd == "bench") return cmd_bench(rest);
    if (cmd == "inspect") return cmd_inspect(rest);
    if (cmd == "metrics") return cmd_metrics(rest);
    if (cmd == "--help" || cmd == "help") {
      usage(std::cout);
      return 0;
    }
    std::cerr << "unknown command '" << cmd << "'\n";
    usage(std::cerr);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace freenoise::cli
