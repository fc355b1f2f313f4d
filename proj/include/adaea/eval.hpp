// Attack-campaign orchestration: clean/adversarial accuracy per target,
// attack success rates, ablation grids, the two-model weight sweep, and
// artifact emission (CSV/JSON reports, P5 graymaps, raw tensor dumps).

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "ensemble.hpp"

namespace adaea {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ASR = 1 - advAcc / (cleanAcc + gamma), clamped to [0,1].
inline double attack_success_rate(double clean_acc, double adv_acc,
                                  double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("attack_success_rate: gamma <= 0");
  return std::clamp(1.0 - adv_acc / (clean_acc + gamma), 0.0, 1.0);
}

struct EvalRow {
  std::string attack_name;   // Ens | +AGM | +DRF | AdaEA | sweep(w1)
  std::string base_attack;
  std::vector<std::string> surrogates;
  std::string target;
  double clean_acc = 0.0;
  double adv_acc = 0.0;
  double asr = 0.0;
  bool white_box = false;
  std::size_t images_evaluated = 0;
  double wall_clock_seconds = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::map<std::string, std::string> config_echo;

  // Mean black-box ASR for one (attack, base) pair; white-box rows excluded.
  double black_box_average(const std::string& attack,
                           const std::string& base) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.attack_name == attack && r.base_attack == base && !r.white_box) {
        acc += r.asr;
        ++n;
      }
    }
    return n ? acc / double(n) : 0.0;
  }
};

struct AttackVariant {
  std::string name;  // "Ens", "+AGM", "+DRF", "AdaEA"
  Ablation ablation;
};

inline std::vector<AttackVariant> ablation_grid() {
  return {{"Ens", {false, false}},
          {"+AGM", {true, false}},
          {"+DRF", {false, true}},
          {"AdaEA", {true, true}}};
}

inline AttackVariant variant_from_name(const std::string& name) {
  for (const auto& v : ablation_grid())
    if (v.name == name) return v;
  throw ConfigError("unknown attack variant: " + name);
}

struct CampaignSpec {
  std::vector<std::string> surrogate_names;
  std::vector<std::string> target_names;
  std::vector<std::string> variants{"Ens", "+AGM", "+DRF", "AdaEA"};
  std::vector<BaseAttack> bases{BaseAttack::IFgsm};
  AttackConfig config;
  std::size_t sample_count = 256;
  std::uint64_t seed = 7;
};

using Zoo = std::vector<std::unique_ptr<Classifier>>;

inline const Classifier* find_model(const Zoo& zoo, const std::string& name) {
  for (const auto& m : zoo)
    if (m->name() == name) return m.get();
  return nullptr;
}

inline double subset_accuracy(const Classifier& m,
                              const std::vector<Image>& images,
                              const std::vector<std::size_t>& labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (predict(m, images[i]) == labels[i]) ++hits;
  return images.empty() ? 0.0 : double(hits) / double(images.size());
}

// One campaign: for each (variant, base) generate adversarial examples from
// the surrogate set once, then score every target on the same sample.
// Deterministic under spec.seed (per-image attack streams are derived from
// it, so rows are order-independent).
inline EvalReport run_campaign(const CampaignSpec& spec,
                               const LabeledDataset& data, const Zoo& zoo) {
  if (spec.sample_count < 1) throw ConfigError("campaign: sample count < 1");
  spec.config.validate();

  ModelList surrogates;
  for (const auto& n : spec.surrogate_names) {
    const Classifier* m = find_model(zoo, n);
    if (!m) throw ConfigError("campaign: unresolvable surrogate model: " + n);
    surrogates.push_back(m);
  }
  std::vector<const Classifier*> targets;
  for (const auto& n : spec.target_names) {
    const Classifier* m = find_model(zoo, n);
    if (!m) throw ConfigError("campaign: unresolvable target model: " + n);
    targets.push_back(m);
  }
  if (surrogates.empty()) throw ConfigError("campaign: no surrogate models");
  if (targets.empty()) throw ConfigError("campaign: no target models");

  const std::size_t n = std::min(spec.sample_count, data.size());
  std::vector<Image> clean(data.images.begin(), data.images.begin() + n);
  std::vector<std::size_t> labels(data.labels.begin(), data.labels.begin() + n);

  EvalReport report;
  report.config_echo["seed"] = std::to_string(spec.seed);
  report.config_echo["samples"] = std::to_string(n);
  {
    std::ostringstream cfg;
    cfg << std::setprecision(17) << spec.config.epsilon << "," << spec.config.alpha
        << "," << spec.config.iterations << "," << spec.config.beta << ","
        << spec.config.eta;
    report.config_echo["epsilon,alpha,iters,beta,eta"] = cfg.str();
  }

  auto is_surrogate = [&](const std::string& name) {
    for (const auto& s : spec.surrogate_names)
      if (s == name) return true;
    return false;
  };

  for (BaseAttack base : spec.bases) {
    for (const auto& variant_name : spec.variants) {
      AttackVariant variant = variant_from_name(variant_name);

      const auto t0 = std::chrono::steady_clock::now();
      std::vector<Image> adv;
      adv.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        AttackConfig cfg = spec.config;
        cfg.seed = derive_seed(spec.seed, i);
        adv.push_back(ada_ea_attack(surrogates, clean[i], labels[i], cfg, base,
                                    variant.ablation));
      }
      const double gen_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();

      for (const Classifier* target : targets) {
        EvalRow row;
        row.attack_name = variant.name;
        row.base_attack = base_attack_name(base);
        row.surrogates = spec.surrogate_names;
        row.target = target->name();
        row.clean_acc = subset_accuracy(*target, clean, labels);
        row.adv_acc = subset_accuracy(*target, adv, labels);
        row.asr = attack_success_rate(row.clean_acc, row.adv_acc,
                                      spec.config.gamma_asr);
        row.white_box = is_surrogate(target->name());
        row.images_evaluated = n;
        row.wall_clock_seconds = gen_seconds;
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

struct SweepPoint {
  double w1 = 0.0;  // weight of the first surrogate; -1 marks the AGM row
  double avg_black_box_asr = 0.0;
};

// Supplementary-style sweep: fixed weights (w1, 1-w1) over a uniform grid,
// plus the AGM-adaptive result for comparison (reported as w1 = -1).
inline std::vector<SweepPoint> weight_sweep_experiment(
    const ModelList& pair, const std::vector<const Classifier*>& targets,
    const LabeledDataset& data, const AttackConfig& config, BaseAttack base,
    std::size_t grid_size, std::size_t sample_count, std::uint64_t seed) {
  if (pair.size() != 2)
    throw ConfigError("weight sweep: exactly two surrogate models required");
  if (grid_size < 3) throw ConfigError("weight sweep: grid size < 3");
  const std::size_t n = std::min(sample_count, data.size());
  std::vector<Image> clean(data.images.begin(), data.images.begin() + n);
  std::vector<std::size_t> labels(data.labels.begin(), data.labels.begin() + n);

  auto evaluate = [&](auto&& attack_fn) {
    std::vector<Image> adv;
    for (std::size_t i = 0; i < n; ++i) {
      AttackConfig cfg = config;
      cfg.seed = derive_seed(seed, i);
      adv.push_back(attack_fn(clean[i], labels[i], cfg));
    }
    double acc = 0.0;
    for (const Classifier* t : targets) {
      double ca = subset_accuracy(*t, clean, labels);
      double aa = subset_accuracy(*t, adv, labels);
      acc += attack_success_rate(ca, aa, config.gamma_asr);
    }
    return targets.empty() ? 0.0 : acc / double(targets.size());
  };

  std::vector<SweepPoint> table;
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double w1 = double(g) / double(grid_size - 1);
    table.push_back({w1, evaluate([&](const Image& x, std::size_t y,
                                      const AttackConfig& cfg) {
                      return weight_sweep_attack(pair, x, y, cfg, base, w1);
                    })});
  }
  table.push_back({-1.0, evaluate([&](const Image& x, std::size_t y,
                                      const AttackConfig& cfg) {
                    return ada_ea_attack(pair, x, y, cfg, base, {true, false});
                  })});
  return table;
}

// ---- report emission ------------------------------------------------------

enum class ReportFormat { Csv, Json };

inline std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += "+";
    out += names[i];
  }
  return out;
}

inline std::string format_fraction(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

// CSV layout: config echo as leading '#' comment lines, then a fixed header.
// delta_vs_ens mirrors the per-row improvement over the equal-weight
// baseline when an Ens row exists for the same (base, target).
inline void emit_report(const EvalReport& report, const std::string& path,
                        ReportFormat format) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);

  auto ens_baseline = [&](const EvalRow& row) -> const EvalRow* {
    for (const auto& r : report.rows)
      if (r.attack_name == "Ens" && r.base_attack == row.base_attack &&
          r.target == row.target)
        return &r;
    return nullptr;
  };

  if (format == ReportFormat::Csv) {
    for (const auto& [k, v] : report.config_echo)
      os << "# " << k << "=" << v << "\n";
    os << "attack,base,surrogates,target,clean_acc,adv_acc,asr,white_box,n,"
          "seconds,delta_vs_ens\n";
    for (const auto& r : report.rows) {
      os << r.attack_name << "," << r.base_attack << ","
         << join_names(r.surrogates) << "," << r.target << ","
         << format_fraction(r.clean_acc) << "," << format_fraction(r.adv_acc)
         << "," << format_fraction(r.asr) << "," << (r.white_box ? 1 : 0)
         << "," << r.images_evaluated << ","
         << format_fraction(r.wall_clock_seconds) << ",";
      const EvalRow* base = ens_baseline(r);
      if (base && &r != base) os << format_fraction(r.asr - base->asr);
      os << "\n";
    }
  } else {
    os << "{\n  \"config\": {";
    bool first = true;
    for (const auto& [k, v] : report.config_echo) {
      os << (first ? "" : ", ") << "\"" << k << "\": \"" << v << "\"";
      first = false;
    }
    os << "},\n  \"rows\": [\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const auto& r = report.rows[i];
      os << "    {\"attack\": \"" << r.attack_name << "\", \"base\": \""
         << r.base_attack << "\", \"surrogates\": \"" << join_names(r.surrogates)
         << "\", \"target\": \"" << r.target << "\", \"clean_acc\": "
         << format_fraction(r.clean_acc) << ", \"adv_acc\": "
         << format_fraction(r.adv_acc) << ", \"asr\": " << format_fraction(r.asr)
         << ", \"white_box\": " << (r.white_box ? "true" : "false")
         << ", \"n\": " << r.images_evaluated << ", \"seconds\": "
         << format_fraction(r.wall_clock_seconds) << "}"
         << (i + 1 < report.rows.size() ? "," : "") << "\n";
    }
    os << "  ]\n}\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

// Parses CSV emitted by emit_report; timing column is read back as-is.
inline EvalReport parse_report_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  EvalReport report;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos)
        report.config_echo[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() < 10) throw FormatError("report row too short: " + line);
    EvalRow r;
    r.attack_name = fields[0];
    r.base_attack = fields[1];
    {
      std::stringstream names(fields[2]);
      std::string nm;
      while (std::getline(names, nm, '+')) r.surrogates.push_back(nm);
    }
    r.target = fields[3];
    r.clean_acc = std::stod(fields[4]);
    r.adv_acc = std::stod(fields[5]);
    r.asr = std::stod(fields[6]);
    r.white_box = fields[7] == "1";
    r.images_evaluated = std::stoul(fields[8]);
    r.wall_clock_seconds = std::stod(fields[9]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

// ---- graymap / raw dumps --------------------------------------------------

// P5 graymap; values in [lo, hi] map linearly to 0..255.
inline void write_pgm(const Tensor& map, const std::string& path, double lo,
                      double hi) {
  if (map.rank() != 2) throw std::invalid_argument("write_pgm: rank-2 map required");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  const std::size_t H = map.shape()[0], W = map.shape()[1];
  os << "P5\n" << W << " " << H << "\n255\n";
  for (std::size_t i = 0; i < map.size(); ++i) {
    double v = (map[i] - lo) / (hi - lo);
    const unsigned char px =
        static_cast<unsigned char>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    os.write(reinterpret_cast<const char*>(&px), 1);
  }
  if (!os) throw IoError("write failed: " + path);
}

inline void save_tensor_dump(const Tensor& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  write_tensor_blob(os, t);
  if (!os) throw IoError("write failed: " + path);
}

inline Tensor load_tensor_dump(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  return read_tensor_blob(is);
}

// Disparity visualization set: the averaged disparity map, the binary
// filter, and one cosine map per model (each model's mean agreement with the
// others), as P5 graymaps plus bit-exact raw dumps.
inline std::vector<std::string> emit_disparity_artifacts(
    const GradientStack& grads, double eta, const std::string& out_dir) {
  grads.validate();
  if (grads.size() < 2)
    throw std::invalid_argument("disparity artifacts: need K >= 2 gradients");
  std::filesystem::create_directories(out_dir);

  std::vector<std::string> written;
  auto emit_map = [&](const Tensor& map, const std::string& stem, double lo,
                      double hi) {
    const std::string pgm = out_dir + "/" + stem + ".pgm";
    const std::string raw = out_dir + "/" + stem + ".bin";
    write_pgm(map, pgm, lo, hi);
    save_tensor_dump(map, raw);
    written.push_back(pgm);
    written.push_back(raw);
  };

  DisparityMap d = disparity_map(grads);
  emit_map(d.d, "disparity", -1.0, 1.0);
  emit_map(binary_filter(d, eta).b, "filter", 0.0, 1.0);

  const std::size_t K = grads.size();
  const std::size_t H = grads.grads[0].shape()[1];
  const std::size_t W = grads.grads[0].shape()[2];
  for (std::size_t i = 0; i < K; ++i) {
    Tensor ci({H, W});
    for (std::size_t p = 0; p < H; ++p)
      for (std::size_t q = 0; q < W; ++q) {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          if (k == i) continue;
          acc += channel_cosine(grads.grads[i], grads.grads[k], p, q);
        }
        ci.at(p, q) = acc / double(K - 1);
      }
    const std::string name = grads.model_names.size() == K
                                 ? grads.model_names[i]
                                 : "model" + std::to_string(i);
    emit_map(ci, "cosine_" + name, -1.0, 1.0);
  }
  return written;
}

}  // namespace adaea
