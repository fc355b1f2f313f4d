// Run configuration and command dispatch. The CLI binary is a thin shell
// over run_cli(); every behavior here is reachable as a library call.
//
// Config files are flat key=value text; lines like "[section]" group keys
// for readability and are ignored by the parser. '#' starts a comment.
// Command-line flags override file values.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eval.hpp"

namespace adaea {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exit codes: 1 usage, 2 data/format, 3 configuration, 4 numeric failure.
enum ExitCode {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitConfig = 3,
  kExitNumeric = 4,
};

struct RunConfig {
  std::string command;                      // train|attack|campaign|sweep|disparity|selftest
  std::string dataset = "synthetic";        // synthetic | flatbinary:<path> | idx:<img>:<lbl>:<classes>
  std::string zoo = "smallconv,tinyattention,mlp,linear";
  AttackConfig attack;
  std::string out_dir = "out";
  std::size_t samples = 256;
  std::size_t epochs = 30;
  double learning_rate = 0.005;
  std::uint64_t seed = 7;

  void validate() const {
    static const std::vector<std::string> kCommands{
        "train", "attack", "campaign", "sweep", "disparity", "selftest"};
    bool known = false;
    for (const auto& c : kCommands) known = known || c == command;
    if (!known) throw UsageError("unknown or missing command: '" + command + "'");
    attack.validate();
    if (samples < 1) throw UsageError("samples must be >= 1");
  }
};

inline std::map<std::string, std::string> parse_config_file(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;  // section header
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line is not key=value: '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Applies key=value pairs onto a RunConfig. Shared by the file parser and
// the flag layer so both spell keys identically.
inline void apply_config_key(RunConfig& cfg, const std::string& key,
                             const std::string& value) {
  auto to_double = [&](const char* what) {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      throw UsageError(std::string("invalid value for ") + what + ": " + value);
    }
  };
  auto to_size = [&](const char* what) {
    try {
      return static_cast<std::size_t>(std::stoull(value));
    } catch (const std::exception&) {
      throw UsageError(std::string("invalid value for ") + what + ": " + value);
    }
  };
  if (key == "command") cfg.command = value;
  else if (key == "dataset") cfg.dataset = value;
  else if (key == "zoo") cfg.zoo = value;
  else if (key == "epsilon") cfg.attack.epsilon = to_double("epsilon");
  else if (key == "alpha") cfg.attack.alpha = to_double("alpha");
  else if (key == "iters") cfg.attack.iterations = to_size("iters");
  else if (key == "beta") cfg.attack.beta = to_double("beta");
  else if (key == "eta") cfg.attack.eta = to_double("eta");
  else if (key == "mu") cfg.attack.momentum_decay = to_double("mu");
  else if (key == "di-prob") cfg.attack.di_probability = to_double("di-prob");
  else if (key == "gamma") cfg.attack.gamma_asr = to_double("gamma");
  else if (key == "samples") cfg.samples = to_size("samples");
  else if (key == "epochs") cfg.epochs = to_size("epochs");
  else if (key == "lr") cfg.learning_rate = to_double("lr");
  else if (key == "seed") cfg.seed = to_size("seed");
  else if (key == "out") cfg.out_dir = value;
  else throw UsageError("unknown config key: " + key);
}

// Builds a RunConfig from an optional config file plus flag overrides (in
// order). ADAEA_OUT_DIR supplies the output directory when neither does.
inline RunConfig build_run_config(
    const std::optional<std::string>& config_path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  bool out_set = false;
  if (config_path) {
    for (const auto& [k, v] : parse_config_file(*config_path)) {
      apply_config_key(cfg, k, v);
      out_set = out_set || k == "out";
    }
  }
  for (const auto& [k, v] : overrides) {
    apply_config_key(cfg, k, v);
    out_set = out_set || k == "out";
  }
  if (!out_set) {
    if (const char* env = std::getenv("ADAEA_OUT_DIR")) cfg.out_dir = env;
  }
  cfg.attack.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

// ---- dataset / zoo resolution --------------------------------------------

inline LabeledDataset resolve_dataset(const RunConfig& cfg) {
  if (cfg.dataset == "synthetic") {
    SyntheticSpec spec;
    spec.seed = cfg.seed;
    spec.count = std::max<std::size_t>(cfg.samples * 2, 512);
    return make_synthetic(spec);
  }
  if (cfg.dataset.rfind("flatbinary:", 0) == 0)
    return load_flat_binary(cfg.dataset.substr(11));
  if (cfg.dataset.rfind("idx:", 0) == 0) {
    std::stringstream ss(cfg.dataset.substr(4));
    std::string img, lbl, classes;
    if (!std::getline(ss, img, ':') || !std::getline(ss, lbl, ':') ||
        !std::getline(ss, classes, ':'))
      throw UsageError("idx dataset spec must be idx:<images>:<labels>:<classes>");
    return load_idx(img, lbl, std::stoul(classes));
  }
  throw UsageError("unknown dataset spec: " + cfg.dataset);
}

// Zoo spec is either a comma-separated architecture list (fresh models,
// duplicates get re-seeded copies) or "dir:<path>" of ADEA checkpoints.
inline Zoo resolve_zoo(const RunConfig& cfg, const LabeledDataset& data) {
  Zoo zoo;
  if (cfg.zoo.rfind("dir:", 0) == 0) {
    const std::string dir = cfg.zoo.substr(4);
    if (!std::filesystem::is_directory(dir))
      throw ConfigError("zoo checkpoint directory not found: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".adea") paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ConfigError("no .adea checkpoints in: " + dir);
    for (const auto& p : paths) zoo.push_back(load_checkpoint(p));
    return zoo;
  }

  ZooSpec spec;
  const auto& sh = data.images.at(0).shape();
  spec.input_shape = {sh[0], sh[1], sh[2]};
  spec.num_classes = data.num_classes;
  std::stringstream ss(cfg.zoo);
  std::string arch;
  while (std::getline(ss, arch, ','))
    if (!arch.empty()) spec.archs.push_back(arch_from_name(arch));
  return build_zoo(spec, cfg.seed);
}

inline void train_zoo(Zoo& zoo, const LabeledDataset& data,
                      const RunConfig& cfg, std::ostream& log) {
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    TrainResult r = train_toy(*zoo[i], data, cfg.epochs, cfg.learning_rate,
                              derive_seed(cfg.seed, 500 + i));
    log << "trained " << zoo[i]->name() << ": accuracy "
        << format_fraction(r.final_accuracy) << ", loss "
        << format_fraction(r.final_loss) << "\n";
  }
}

// ---- commands -------------------------------------------------------------

inline int cmd_train(const RunConfig& cfg, std::ostream& log) {
  LabeledDataset data = resolve_dataset(cfg);
  Zoo zoo = resolve_zoo(cfg, data);
  train_zoo(zoo, data, cfg, log);
  std::filesystem::create_directories(cfg.out_dir);
  for (const auto& m : zoo) {
    const std::string path = cfg.out_dir + "/" + m->name() + ".adea";
    save_checkpoint(*m, path);
    log << "saved " << path << "\n";
  }
  return kExitOk;
}

inline std::vector<std::string> split_names(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string n;
  while (std::getline(ss, n, ','))
    if (!n.empty()) out.push_back(n);
  return out;
}

inline CampaignSpec default_campaign(const RunConfig& cfg, const Zoo& zoo) {
  CampaignSpec spec;
  // first two models are surrogates, everything else a black-box target
  if (zoo.size() < 2)
    throw ConfigError("campaign needs a zoo of at least two models");
  spec.surrogate_names = {zoo[0]->name(), zoo[1]->name()};
  for (const auto& m : zoo) spec.target_names.push_back(m->name());
  spec.config = cfg.attack;
  spec.sample_count = cfg.samples;
  spec.seed = cfg.seed;
  return spec;
}

inline int cmd_campaign(const RunConfig& cfg, std::ostream& log) {
  LabeledDataset data = resolve_dataset(cfg);
  Zoo zoo = resolve_zoo(cfg, data);
  if (cfg.zoo.rfind("dir:", 0) != 0) train_zoo(zoo, data, cfg, log);
  CampaignSpec spec = default_campaign(cfg, zoo);
  EvalReport report = run_campaign(spec, data, zoo);
  std::filesystem::create_directories(cfg.out_dir);
  emit_report(report, cfg.out_dir + "/report.csv", ReportFormat::Csv);
  emit_report(report, cfg.out_dir + "/report.json", ReportFormat::Json);
  for (const auto& v : spec.variants)
    log << v << " black-box avg ASR: "
        << format_fraction(report.black_box_average(v, base_attack_name(spec.bases[0])))
        << "\n";
  log << "wrote " << cfg.out_dir << "/report.csv\n";
  return kExitOk;
}

inline int cmd_attack(const RunConfig& cfg, std::ostream& log) {
  LabeledDataset data = resolve_dataset(cfg);
  Zoo zoo = resolve_zoo(cfg, data);
  if (cfg.zoo.rfind("dir:", 0) != 0) train_zoo(zoo, data, cfg, log);
  ModelList surrogates;
  for (const auto& m : zoo) surrogates.push_back(m.get());

  const std::size_t n = std::min(cfg.samples, data.size());
  LabeledDataset adv;
  adv.num_classes = data.num_classes;
  for (std::size_t i = 0; i < n; ++i) {
    AttackConfig ac = cfg.attack;
    ac.seed = derive_seed(cfg.seed, i);
    adv.images.push_back(ada_ea_attack(surrogates, data.images[i],
                                       data.labels[i], ac, BaseAttack::IFgsm));
    adv.labels.push_back(data.labels[i]);
  }
  std::filesystem::create_directories(cfg.out_dir);
  save_flat_binary(adv, cfg.out_dir + "/adversarial.adds");
  for (const auto& m : zoo) {
    std::vector<Image> clean(data.images.begin(), data.images.begin() + n);
    std::vector<std::size_t> labels(data.labels.begin(), data.labels.begin() + n);
    double ca = subset_accuracy(*m, clean, labels);
    double aa = subset_accuracy(*m, adv.images, labels);
    log << m->name() << ": clean " << format_fraction(ca) << " adv "
        << format_fraction(aa) << " asr "
        << format_fraction(attack_success_rate(ca, aa, cfg.attack.gamma_asr))
        << "\n";
  }
  log << "wrote " << cfg.out_dir << "/adversarial.adds\n";
  return kExitOk;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  LabeledDataset data = resolve_dataset(cfg);
  Zoo zoo = resolve_zoo(cfg, data);
  if (cfg.zoo.rfind("dir:", 0) != 0) train_zoo(zoo, data, cfg, log);
  if (zoo.size() < 3)
    throw UsageError("sweep needs two surrogate models plus at least one target");
  ModelList pair{zoo[0].get(), zoo[1].get()};
  std::vector<const Classifier*> targets;
  for (std::size_t i = 2; i < zoo.size(); ++i) targets.push_back(zoo[i].get());

  auto table = weight_sweep_experiment(pair, targets, data, cfg.attack,
                                       BaseAttack::IFgsm, 11, cfg.samples,
                                       cfg.seed);
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream os(cfg.out_dir + "/sweep.csv");
  if (!os) throw IoError("cannot open for write: " + cfg.out_dir + "/sweep.csv");
  os << "w1,avg_black_box_asr\n";
  for (const auto& p : table) {
    if (p.w1 < 0.0)
      os << "agm," << format_fraction(p.avg_black_box_asr) << "\n";
    else
      os << format_fraction(p.w1) << "," << format_fraction(p.avg_black_box_asr)
         << "\n";
    log << (p.w1 < 0.0 ? std::string("agm") : format_fraction(p.w1)) << " -> "
        << format_fraction(p.avg_black_box_asr) << "\n";
  }
  log << "wrote " << cfg.out_dir << "/sweep.csv\n";
  return kExitOk;
}

inline int cmd_disparity(const RunConfig& cfg, std::ostream& log) {
  LabeledDataset data = resolve_dataset(cfg);
  Zoo zoo = resolve_zoo(cfg, data);
  if (cfg.zoo.rfind("dir:", 0) != 0) train_zoo(zoo, data, cfg, log);
  if (zoo.size() < 2) throw UsageError("disparity needs at least two models");

  GradientStack grads;
  for (const auto& m : zoo) {
    grads.grads.push_back(m->input_gradient(data.images.at(0), data.labels.at(0)));
    grads.model_names.push_back(m->name());
  }
  auto files = emit_disparity_artifacts(grads, cfg.attack.eta, cfg.out_dir);
  for (const auto& f : files) log << "wrote " << f << "\n";
  return kExitOk;
}

// Fast invariant suite: gradient oracle spot checks, simplex and shift
// invariance, degenerate-ensemble equivalence, budget invariants.
inline int cmd_selftest(const RunConfig& cfg, std::ostream& log) {
  std::size_t passed = 0, failed = 0;
  auto check = [&](const std::string& name, bool ok) {
    (ok ? passed : failed)++;
    log << (ok ? "PASS " : "FAIL ") << name << "\n";
  };

  SyntheticSpec sspec;
  sspec.count = 64;
  sspec.seed = cfg.seed;
  LabeledDataset data = make_synthetic(sspec);
  ZooSpec zspec;
  zspec.archs = {ArchId::Linear, ArchId::Mlp, ArchId::SmallConv,
                 ArchId::TinyAttention};
  Zoo zoo = build_zoo(zspec, cfg.seed);

  // analytic vs finite-difference input gradients
  for (const auto& m : zoo) {
    const Image& x = data.images[0];
    const std::size_t y = data.labels[0];
    Tensor analytic = m->input_gradient(x, y);
    Tensor fd = finite_diff_gradient(
        [&](const Image& p) { return cross_entropy(m->forward(p), y); }, x,
        1e-5);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
      if (std::abs(analytic[i]) > 1e-8)
        worst = std::max(worst, std::abs(analytic[i] - fd[i]) /
                                    std::abs(analytic[i]));
    check("gradient oracle: " + m->name(), worst < 1e-4);
  }

  // softmax simplex + shift invariance
  {
    RngStream rng(derive_seed(cfg.seed, 42));
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
      std::vector<double> v(4);
      for (double& x : v) x = rng.uniform(-20.0, 20.0);
      std::vector<double> p = softmax(v);
      double sum = 0.0;
      for (double x : p) {
        sum += x;
        ok = ok && x > 0.0;
      }
      ok = ok && std::abs(sum - 1.0) < 1e-12;
      std::vector<double> shifted = v;
      for (double& x : shifted) x += 13.5;
      std::vector<double> p2 = softmax(shifted);
      for (std::size_t i = 0; i < p.size(); ++i)
        ok = ok && std::abs(p[i] - p2[i]) < 1e-12;
    }
    check("softmax simplex and shift invariance", ok);
  }

  // worked adversarial-ratio case
  {
    ProbeMatrix s;
    s.k = 2;
    s.s = {1.0, 2.0, 1.0, 1.0};
    auto rho = adversarial_ratio(s, 10.0);
    check("adversarial ratio worked case",
          std::abs(rho[0] - 10.0) < 1e-12 && std::abs(rho[1] - 20.0) < 1e-12);
  }

  // degenerate ensembles and budget invariant
  {
    AttackConfig ac = cfg.attack;
    ac.seed = derive_seed(cfg.seed, 9);
    const Image& x = data.images[1];
    const std::size_t y = data.labels[1];
    Image single = run_base_attack(*zoo[0], x, y, ac, BaseAttack::IFgsm);
    Image ens = ada_ea_attack({zoo[0].get()}, x, y, ac, BaseAttack::IFgsm);
    check("K=1 ensemble degeneracy (bit-identical)",
          single.data() == ens.data());
    check("budget invariant",
          linf_distance(single, x) <= ac.epsilon + 1e-12 &&
              clip_to_unit(single).data() == single.data());
  }

  log << "selftest: " << passed << " passed, " << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitNumeric;
}

inline int run_cli(const RunConfig& cfg, std::ostream& log = std::cout) {
  cfg.validate();
  if (cfg.command == "train") return cmd_train(cfg, log);
  if (cfg.command == "attack") return cmd_attack(cfg, log);
  if (cfg.command == "campaign") return cmd_campaign(cfg, log);
  if (cfg.command == "sweep") return cmd_sweep(cfg, log);
  if (cfg.command == "disparity") return cmd_disparity(cfg, log);
  if (cfg.command == "selftest") return cmd_selftest(cfg, log);
  throw UsageError("unknown command: " + cfg.command);
}

}  // namespace adaea
