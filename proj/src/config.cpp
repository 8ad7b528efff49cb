#include "fedproto/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fedproto/plans.hpp"

namespace fedproto {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class KeyMap {
 public:
  explicit KeyMap(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (!entries_.emplace(key, value).second) {
        throw std::invalid_argument("config: duplicate key '" + key + "'");
      }
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string take(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    return it->second;
  }

  std::string require(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw std::invalid_argument("config: missing required key '" + key + "'");
    }
    consumed_.insert(key);
    return it->second;
  }

  std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [key, value] : entries_) {
      if (key.rfind(prefix, 0) == 0) out.push_back(key);
    }
    return out;
  }

  void check_all_consumed() const {
    for (const auto& [key, value] : entries_) {
      if (consumed_.count(key) == 0) {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
    }
  }

 private:
  std::map<std::string, std::string> entries_;
  std::set<std::string> consumed_;
};

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for '" + key + "': " + value);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for '" + key + "': " + value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw std::invalid_argument("config: bad bool for '" + key + "': " + value);
}

SourceKind parse_source(const std::string& key, const std::string& value) {
  if (value == "synthetic") return SourceKind::Synthetic;
  if (value == "csv") return SourceKind::Csv;
  throw std::invalid_argument("config: bad source for '" + key + "': " + value);
}

RatioSource parse_ratio_source(const std::string& key,
                               const std::string& value) {
  if (value == "current") return RatioSource::CurrentRound;
  if (value == "cross") return RatioSource::CrossRound;
  throw std::invalid_argument("config: bad ratio source for '" + key +
                              "': " + value);
}

std::vector<LrScheduleEntry> parse_schedule(const std::string& key,
                                            const std::string& value) {
  std::vector<LrScheduleEntry> out;
  for (const auto& part : split(value, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("config: '" + key +
                                  "' entries must be 'round:lr'");
    }
    LrScheduleEntry entry;
    entry.from_round =
        static_cast<int>(parse_u64(key, trim(part.substr(0, colon))));
    entry.lr = parse_double(key, trim(part.substr(colon + 1)));
    out.push_back(entry);
  }
  return out;
}

std::string schedule_to_string(const std::vector<LrScheduleEntry>& schedule) {
  std::string out;
  for (const auto& entry : schedule) {
    if (!out.empty()) out += ",";
    out += std::to_string(entry.from_round) + ":" + fmt_double(entry.lr);
  }
  return out;
}

PhaseSpec parse_phase(KeyMap& keys, const std::string& prefix) {
  PhaseSpec phase;
  const std::string rounds = keys.require(prefix + "rounds");
  const auto dash = rounds.find('-');
  if (dash == std::string::npos) {
    throw std::invalid_argument("config: '" + prefix +
                                "rounds' must be 'start-end'");
  }
  phase.start_round =
      static_cast<int>(parse_u64(prefix + "rounds", trim(rounds.substr(0, dash))));
  phase.end_round = static_cast<int>(
      parse_u64(prefix + "rounds", trim(rounds.substr(dash + 1))));

  phase.aggregation.scheme =
      scheme_from_name(keys.take(prefix + "aggregator", "fedavg"));
  phase.aggregation.alpha = parse_double(
      prefix + "alpha", keys.take(prefix + "alpha", fmt_double(0.5)));
  phase.aggregation.epsilon = parse_double(
      prefix + "epsilon", keys.take(prefix + "epsilon", fmt_double(1e-5)));
  phase.aggregation.trim_fraction =
      parse_double(prefix + "trim_fraction",
                   keys.take(prefix + "trim_fraction", fmt_double(0.2)));
  phase.aggregation.keep_fraction =
      parse_double(prefix + "keep_fraction",
                   keys.take(prefix + "keep_fraction", fmt_double(0.8)));
  phase.aggregation.regcost_ratio = parse_ratio_source(
      prefix + "regcost_ratio", keys.take(prefix + "regcost_ratio", "current"));
  phase.aggregation.topk_ratio = parse_ratio_source(
      prefix + "topk_ratio", keys.take(prefix + "topk_ratio", "cross"));

  phase.server.kind = server_opt_from_name(keys.take(prefix + "server", "sgd"));
  phase.server.lr = parse_double(prefix + "server_lr",
                                 keys.take(prefix + "server_lr", "1"));
  phase.server.beta = parse_double(prefix + "server_beta",
                                   keys.take(prefix + "server_beta", "0.9"));
  phase.server.beta1 = parse_double(prefix + "server_beta1",
                                    keys.take(prefix + "server_beta1", "0.9"));
  phase.server.beta2 = parse_double(prefix + "server_beta2",
                                    keys.take(prefix + "server_beta2", "0.99"));
  phase.server.tau = parse_double(prefix + "server_tau",
                                  keys.take(prefix + "server_tau", "0.001"));

  phase.client_lr =
      parse_schedule(prefix + "client_lr", keys.require(prefix + "client_lr"));
  phase.epochs_per_round =
      static_cast<int>(parse_u64(prefix + "epochs", keys.take(prefix + "epochs", "1")));

  const std::string selection = keys.take(prefix + "selection", "all");
  if (selection == "all") {
    phase.selection = {SelectionKind::All, 0};
  } else if (selection.rfind("random_fair:", 0) == 0) {
    phase.selection = {SelectionKind::RandomFair,
                       parse_u64(prefix + "selection", selection.substr(12))};
  } else {
    throw std::invalid_argument("config: bad selection '" + selection + "'");
  }
  return phase;
}

void write_phase(std::ostream& os, const std::string& prefix,
                 const PhaseSpec& phase) {
  os << prefix << "rounds = " << phase.start_round << "-" << phase.end_round
     << "\n";
  os << prefix << "aggregator = " << scheme_name(phase.aggregation.scheme)
     << "\n";
  os << prefix << "alpha = " << fmt_double(phase.aggregation.alpha) << "\n";
  os << prefix << "epsilon = " << fmt_double(phase.aggregation.epsilon) << "\n";
  os << prefix << "trim_fraction = " << fmt_double(phase.aggregation.trim_fraction)
     << "\n";
  os << prefix << "keep_fraction = " << fmt_double(phase.aggregation.keep_fraction)
     << "\n";
  os << prefix << "regcost_ratio = "
     << (phase.aggregation.regcost_ratio == RatioSource::CurrentRound ? "current"
                                                                      : "cross")
     << "\n";
  os << prefix << "topk_ratio = "
     << (phase.aggregation.topk_ratio == RatioSource::CurrentRound ? "current"
                                                                   : "cross")
     << "\n";
  os << prefix << "server = " << server_opt_name(phase.server.kind) << "\n";
  os << prefix << "server_lr = " << fmt_double(phase.server.lr) << "\n";
  os << prefix << "server_beta = " << fmt_double(phase.server.beta) << "\n";
  os << prefix << "server_beta1 = " << fmt_double(phase.server.beta1) << "\n";
  os << prefix << "server_beta2 = " << fmt_double(phase.server.beta2) << "\n";
  os << prefix << "server_tau = " << fmt_double(phase.server.tau) << "\n";
  os << prefix << "client_lr = " << schedule_to_string(phase.client_lr) << "\n";
  os << prefix << "epochs = " << phase.epochs_per_round << "\n";
  os << prefix << "selection = ";
  if (phase.selection.kind == SelectionKind::All) {
    os << "all";
  } else {
    os << "random_fair:" << phase.selection.k;
  }
  os << "\n";
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.source == SourceKind::Csv && dataset.path.empty()) {
    throw std::invalid_argument("config: dataset.source=csv requires dataset.path");
  }
  if (dataset.source == SourceKind::Synthetic && !dataset.path.empty()) {
    throw std::invalid_argument(
        "config: dataset.path given but dataset.source is synthetic");
  }
  if (partition.source == SourceKind::Csv && partition.path.empty()) {
    throw std::invalid_argument(
        "config: partition.source=csv requires partition.path");
  }
  if (partition.source == SourceKind::Synthetic && !partition.path.empty()) {
    throw std::invalid_argument(
        "config: partition.path given but partition.source is synthetic");
  }
  if (dataset.source == SourceKind::Synthetic) {
    if (dataset.samples == 0 || dataset.features == 0 || dataset.classes < 2) {
      throw std::invalid_argument("config: bad synthetic dataset dimensions");
    }
    if (!(dataset.separation >= 0.0)) {
      throw std::invalid_argument("config: dataset.separation must be >= 0");
    }
  }
  if (partition.source == SourceKind::Synthetic) {
    if (partition.clients == 0) {
      throw std::invalid_argument("config: partition.clients must be >= 1");
    }
    if (!(partition.concentration > 0.0)) {
      throw std::invalid_argument("config: partition.concentration must be > 0");
    }
    if (partition.profile == ProfileKind::Custom &&
        partition.custom_profile.size() != partition.clients) {
      throw std::invalid_argument(
          "config: custom profile length must equal partition.clients");
    }
  }
  if (model == ModelKind::OneHiddenLayerNet && hidden == 0) {
    throw std::invalid_argument("config: model.hidden must be >= 1 for mlp");
  }
  if (report.last_k == 0) {
    throw std::invalid_argument("config: report.last_k must be >= 1");
  }
  client_defaults.validate();
  plan.validate();
}

ExperimentConfig parse_config_text(const std::string& text) {
  KeyMap keys(text);
  ExperimentConfig config;

  config.seed = parse_u64("seed", keys.take("seed", "0"));
  config.model = model_kind_from_name(keys.take("model.kind", "logistic"));
  config.hidden = parse_u64("model.hidden", keys.take("model.hidden", "16"));

  config.dataset.source =
      parse_source("dataset.source", keys.take("dataset.source", "synthetic"));
  config.dataset.path = keys.take("dataset.path", "");
  config.dataset.samples =
      parse_u64("dataset.samples", keys.take("dataset.samples", "2000"));
  config.dataset.features =
      parse_u64("dataset.features", keys.take("dataset.features", "10"));
  config.dataset.classes = static_cast<int>(
      parse_u64("dataset.classes", keys.take("dataset.classes", "4")));
  config.dataset.separation = parse_double(
      "dataset.separation", keys.take("dataset.separation", "2"));

  config.partition.source = parse_source(
      "partition.source", keys.take("partition.source", "synthetic"));
  config.partition.path = keys.take("partition.path", "");
  config.partition.clients =
      parse_u64("partition.clients", keys.take("partition.clients", "33"));
  config.partition.concentration = parse_double(
      "partition.concentration", keys.take("partition.concentration", "0.5"));
  const std::string profile = keys.take("partition.profile", "skewed");
  if (profile == "uniform") {
    config.partition.profile = ProfileKind::Uniform;
  } else if (profile == "skewed") {
    config.partition.profile = ProfileKind::Skewed;
  } else {
    config.partition.profile = ProfileKind::Custom;
    for (const auto& part : split(profile, ',')) {
      config.partition.custom_profile.push_back(
          parse_double("partition.profile", part));
    }
  }

  config.client_defaults.batch_size =
      parse_u64("client.batch_size", keys.take("client.batch_size", "32"));
  config.client_defaults.beta1 =
      parse_double("client.beta1", keys.take("client.beta1", "0.9"));
  config.client_defaults.beta2 =
      parse_double("client.beta2", keys.take("client.beta2", "0.99"));
  config.client_defaults.tau =
      parse_double("client.tau", keys.take("client.tau", "0.001"));

  const std::string mask = keys.take("mask.sample_weight_only", "");
  if (!mask.empty()) config.mask_sample_weight_only = split(mask, ',');

  config.plan_name = keys.take("plan.name", "");
  const auto phase_keys = keys.keys_with_prefix("plan.phase");
  if (!config.plan_name.empty() && !phase_keys.empty()) {
    throw std::invalid_argument(
        "config: plan.name and inline plan.phaseN.* are mutually exclusive");
  }
  if (config.plan_name.empty() && phase_keys.empty()) {
    throw std::invalid_argument(
        "config: either plan.name or plan.phaseN.* must be given");
  }
  if (!config.plan_name.empty()) {
    config.plan = builtin_plan(config.plan_name);
  } else {
    for (int n = 1;; ++n) {
      const std::string prefix = "plan.phase" + std::to_string(n) + ".";
      if (!keys.has(prefix + "rounds")) break;
      config.plan.phases.push_back(parse_phase(keys, prefix));
    }
    if (config.plan.phases.empty()) {
      throw std::invalid_argument("config: plan.phase1.rounds is required");
    }
    config.plan.max_rounds = config.plan.phases.back().end_round;
  }
  config.plan.time_budget =
      parse_double("plan.budget", keys.take("plan.budget", "10080"));
  const std::string train_cost = keys.take("plan.cost.train", "0");
  config.plan.cost.train_cost.clear();
  for (const auto& part : split(train_cost, ',')) {
    config.plan.cost.train_cost.push_back(
        parse_double("plan.cost.train", part));
  }
  config.plan.cost.validation_cost = parse_double(
      "plan.cost.validation", keys.take("plan.cost.validation", "0"));
  config.plan.cost.communication_cost = parse_double(
      "plan.cost.communication", keys.take("plan.cost.communication", "0"));
  config.plan.reset_opt_state_on_phase = parse_bool(
      "plan.reset_state_on_phase", keys.take("plan.reset_state_on_phase", "false"));
  config.plan.seed = config.seed;

  config.metric = checkpoint_metric_from_name(
      keys.take("checkpoint.metric", "val_accuracy"));
  config.report.last_k =
      parse_u64("report.last_k", keys.take("report.last_k", "5"));
  config.report.per_client =
      parse_bool("report.per_client", keys.take("report.per_client", "false"));
  config.output_dir = keys.take("output_dir", "out");

  keys.check_all_consumed();
  config.validate();
  return config;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::string write_config(const ExperimentConfig& config) {
  std::stringstream os;
  os << "seed = " << config.seed << "\n";
  os << "model.kind = " << model_kind_name(config.model) << "\n";
  os << "model.hidden = " << config.hidden << "\n";
  os << "dataset.source = "
     << (config.dataset.source == SourceKind::Synthetic ? "synthetic" : "csv")
     << "\n";
  if (!config.dataset.path.empty()) {
    os << "dataset.path = " << config.dataset.path << "\n";
  }
  os << "dataset.samples = " << config.dataset.samples << "\n";
  os << "dataset.features = " << config.dataset.features << "\n";
  os << "dataset.classes = " << config.dataset.classes << "\n";
  os << "dataset.separation = " << fmt_double(config.dataset.separation) << "\n";
  os << "partition.source = "
     << (config.partition.source == SourceKind::Synthetic ? "synthetic" : "csv")
     << "\n";
  if (!config.partition.path.empty()) {
    os << "partition.path = " << config.partition.path << "\n";
  }
  os << "partition.clients = " << config.partition.clients << "\n";
  os << "partition.concentration = " << fmt_double(config.partition.concentration)
     << "\n";
  os << "partition.profile = ";
  switch (config.partition.profile) {
    case ProfileKind::Uniform: os << "uniform"; break;
    case ProfileKind::Skewed: os << "skewed"; break;
    case ProfileKind::Custom: {
      std::string joined;
      for (double w : config.partition.custom_profile) {
        if (!joined.empty()) joined += ",";
        joined += fmt_double(w);
      }
      os << joined;
      break;
    }
  }
  os << "\n";
  os << "client.batch_size = " << config.client_defaults.batch_size << "\n";
  os << "client.beta1 = " << fmt_double(config.client_defaults.beta1) << "\n";
  os << "client.beta2 = " << fmt_double(config.client_defaults.beta2) << "\n";
  os << "client.tau = " << fmt_double(config.client_defaults.tau) << "\n";
  if (!config.mask_sample_weight_only.empty()) {
    std::string joined;
    for (const auto& name : config.mask_sample_weight_only) {
      if (!joined.empty()) joined += ",";
      joined += name;
    }
    os << "mask.sample_weight_only = " << joined << "\n";
  }
  if (!config.plan_name.empty()) {
    os << "plan.name = " << config.plan_name << "\n";
  } else {
    for (std::size_t i = 0; i < config.plan.phases.size(); ++i) {
      write_phase(os, "plan.phase" + std::to_string(i + 1) + ".",
                  config.plan.phases[i]);
    }
  }
  os << "plan.budget = " << fmt_double(config.plan.time_budget) << "\n";
  {
    std::string joined;
    for (double c : config.plan.cost.train_cost) {
      if (!joined.empty()) joined += ",";
      joined += fmt_double(c);
    }
    os << "plan.cost.train = " << joined << "\n";
  }
  os << "plan.cost.validation = " << fmt_double(config.plan.cost.validation_cost)
     << "\n";
  os << "plan.cost.communication = "
     << fmt_double(config.plan.cost.communication_cost) << "\n";
  os << "plan.reset_state_on_phase = "
     << (config.plan.reset_opt_state_on_phase ? "true" : "false") << "\n";
  os << "checkpoint.metric = " << checkpoint_metric_name(config.metric) << "\n";
  os << "report.last_k = " << config.report.last_k << "\n";
  os << "report.per_client = " << (config.report.per_client ? "true" : "false")
     << "\n";
  os << "output_dir = " << config.output_dir << "\n";
  return os.str();
}

void write_config_file(const std::string& path, const ExperimentConfig& config) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write config file: " + path);
  os << write_config(config);
}

void apply_env_overrides(ExperimentConfig& config) {
  if (const char* seed = std::getenv("FEDPROTO_SEED")) {
    config.seed = parse_u64("FEDPROTO_SEED", seed);
    config.plan.seed = config.seed;
  }
}

}  // namespace fedproto
