#include "exgrg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "exgrg/error.hpp"

namespace exgrg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                    "' as " + std::string(want));
}

template <class T>
T parse_value(std::string_view key, std::string_view v);

template <>
double parse_value<double>(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    bad_value(key, v, "a finite real");
  return out;
}

template <>
std::uint64_t parse_value<std::uint64_t>(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    bad_value(key, v, "a non-negative integer");
  return out;
}

template <>
bool parse_value<bool>(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean (true/false)");
}

template <>
nn::Activation parse_value<nn::Activation>(std::string_view, std::string_view v) {
  return nn::parse_activation(v);
}

template <>
nn::Norm parse_value<nn::Norm>(std::string_view, std::string_view v) {
  return nn::parse_norm(v);
}

template <>
SimilarityMetric parse_value<SimilarityMetric>(std::string_view key, std::string_view v) {
  if (v == "cosine") return SimilarityMetric::kCosine;
  if (v == "neg_euclidean") return SimilarityMetric::kNegEuclidean;
  bad_value(key, v, "cosine|neg_euclidean");
}

template <>
SignNetArch parse_value<SignNetArch>(std::string_view key, std::string_view v) {
  if (v == "mlp") return SignNetArch::kMlp;
  if (v == "deepset") return SignNetArch::kDeepSet;
  bad_value(key, v, "mlp|deepset");
}

template <>
OtPairs parse_value<OtPairs>(std::string_view key, std::string_view v) {
  if (v == "full") return OtPairs::kFull;
  if (v == "self") return OtPairs::kSelfOnly;
  if (v == "aug") return OtPairs::kAugOnly;
  bad_value(key, v, "full|self|aug");
}

template <>
OptimizerKind parse_value<OptimizerKind>(std::string_view key, std::string_view v) {
  if (v == "adam") return OptimizerKind::kAdam;
  if (v == "adamw") return OptimizerKind::kAdamW;
  bad_value(key, v, "adam|adamw");
}

template <>
FeatureMaskMode parse_value<FeatureMaskMode>(std::string_view key, std::string_view v) {
  if (v == "column") return FeatureMaskMode::kColumn;
  if (v == "entry") return FeatureMaskMode::kEntry;
  bad_value(key, v, "column|entry");
}

std::string format_value(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(nn::Activation v) { return std::string(nn::to_string(v)); }
std::string format_value(nn::Norm v) { return std::string(nn::to_string(v)); }
std::string format_value(SimilarityMetric v) { return std::string(to_string(v)); }
std::string format_value(SignNetArch v) { return std::string(to_string(v)); }
std::string format_value(OtPairs v) { return std::string(to_string(v)); }
std::string format_value(OptimizerKind v) { return std::string(to_string(v)); }
std::string format_value(FeatureMaskMode v) {
  return v == FeatureMaskMode::kColumn ? "column" : "entry";
}

struct Entry {
  std::string key;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

// `field` maps a config to a reference to one member.
template <class Field>
Entry entry(std::string key, Field field) {
  using T = std::remove_cvref_t<decltype(field(std::declval<TrainConfig&>()))>;
  Entry e;
  e.key = key;
  e.set = [field, key](TrainConfig& c, std::string_view v) {
    if constexpr (std::is_same_v<T, std::size_t> && !std::is_same_v<T, std::uint64_t>) {
      field(c) = static_cast<std::size_t>(parse_value<std::uint64_t>(key, v));
    } else {
      field(c) = parse_value<T>(key, v);
    }
  };
  e.get = [field](const TrainConfig& c) {
    const T& value = field(const_cast<TrainConfig&>(c));
    if constexpr (std::is_same_v<T, std::size_t> && !std::is_same_v<T, std::uint64_t>) {
      return format_value(static_cast<std::uint64_t>(value));
    } else {
      return format_value(value);
    }
  };
  return e;
}

#define EXGRG_FIELD(path) [](TrainConfig& c) -> auto& { return c.path; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(entry("seed", EXGRG_FIELD(seed)));
    t.push_back(entry("train.iterations", EXGRG_FIELD(iterations)));
    t.push_back(entry("train.batch_size", EXGRG_FIELD(batch_size)));
    t.push_back(entry("train.optimizer", EXGRG_FIELD(optimizer)));
    t.push_back(entry("train.lr", EXGRG_FIELD(lr)));
    t.push_back(entry("train.weight_decay", EXGRG_FIELD(weight_decay)));
    t.push_back(entry("train.checkpoint_every", EXGRG_FIELD(checkpoint_every)));

    t.push_back(entry("loss.alpha", EXGRG_FIELD(weights.alpha)));
    t.push_back(entry("loss.beta", EXGRG_FIELD(weights.beta)));
    t.push_back(entry("loss.gamma", EXGRG_FIELD(weights.gamma)));
    t.push_back(entry("loss.alpha1", EXGRG_FIELD(weights.alpha1)));
    t.push_back(entry("loss.alpha2", EXGRG_FIELD(weights.alpha2)));

    t.push_back(entry("encoder.activation", EXGRG_FIELD(encoder.activation)));
    t.push_back(entry("encoder.norm", EXGRG_FIELD(encoder.norm)));
    t.push_back(entry("encoder.layers", EXGRG_FIELD(encoder.layers)));
    t.push_back(entry("encoder.hidden", EXGRG_FIELD(encoder.hidden)));
    t.push_back(entry("encoder.out_dim", EXGRG_FIELD(encoder.out_dim)));

    t.push_back(entry("expander.activation", EXGRG_FIELD(expander.activation)));
    t.push_back(entry("expander.norm", EXGRG_FIELD(expander.norm)));
    t.push_back(entry("expander.layers", EXGRG_FIELD(expander.layers)));
    t.push_back(entry("expander.hidden", EXGRG_FIELD(expander.hidden)));
    t.push_back(entry("expander.out_dim", EXGRG_FIELD(expander.out_dim)));

    t.push_back(entry("psi.enabled", EXGRG_FIELD(psi.enabled)));
    t.push_back(entry("psi.layers", EXGRG_FIELD(psi.layers)));
    t.push_back(entry("psi.hidden_ratio", EXGRG_FIELD(psi.hidden_ratio)));
    t.push_back(entry("psi.activation", EXGRG_FIELD(psi.activation)));
    t.push_back(entry("psi.sum_shift", EXGRG_FIELD(psi.sum_shift)));
    t.push_back(entry("psi.sum_scale", EXGRG_FIELD(psi.sum_scale)));
    t.push_back(entry("psi.count_shift", EXGRG_FIELD(psi.count_shift)));
    t.push_back(entry("psi.count_scale", EXGRG_FIELD(psi.count_scale)));

    t.push_back(entry("augment.view1.edge_drop", EXGRG_FIELD(view1.edge_drop_prob)));
    t.push_back(entry("augment.view1.feature_mask", EXGRG_FIELD(view1.feature_mask_prob)));
    t.push_back(entry("augment.view2.edge_drop", EXGRG_FIELD(view2.edge_drop_prob)));
    t.push_back(entry("augment.view2.feature_mask", EXGRG_FIELD(view2.feature_mask_prob)));
    {
      Entry mode = entry("augment.mask_mode", EXGRG_FIELD(view1.mask_mode));
      mode.set = [](TrainConfig& c, std::string_view v) {
        c.view1.mask_mode = c.view2.mask_mode = parse_value<FeatureMaskMode>("augment.mask_mode", v);
      };
      t.push_back(std::move(mode));
    }

    t.push_back(entry("relgraph.intra", EXGRG_FIELD(relgraph.intra)));
    t.push_back(entry("relgraph.binary", EXGRG_FIELD(relgraph.binary)));
    t.push_back(entry("relgraph.knn.metric", EXGRG_FIELD(relgraph.knn_metric)));
    t.push_back(entry("relgraph.knn.k", EXGRG_FIELD(relgraph.knn_k)));
    t.push_back(entry("relgraph.knn.standalone", EXGRG_FIELD(relgraph.knn_standalone)));
    t.push_back(entry("relgraph.pse_metric", EXGRG_FIELD(relgraph.pse_metric)));
    t.push_back(entry("relgraph.lappe.k", EXGRG_FIELD(relgraph.lappe_k)));
    t.push_back(entry("relgraph.lappe.freq", EXGRG_FIELD(relgraph.lappe_freq)));
    t.push_back(entry("relgraph.rwse.k", EXGRG_FIELD(relgraph.rwse_k)));
    t.push_back(entry("relgraph.rwse.kernel", EXGRG_FIELD(relgraph.rwse_kernel)));
    t.push_back(entry("relgraph.rwse.filtered", EXGRG_FIELD(relgraph.rwse_filtered)));
    t.push_back(entry("relgraph.signnet.k", EXGRG_FIELD(relgraph.signnet_k)));
    t.push_back(entry("relgraph.signnet.freq", EXGRG_FIELD(relgraph.signnet_freq)));
    t.push_back(entry("relgraph.signnet.arch", EXGRG_FIELD(relgraph.signnet_arch)));
    t.push_back(entry("relgraph.signnet.hidden", EXGRG_FIELD(relgraph.signnet_hidden)));
    t.push_back(entry("relgraph.signnet.out_dim", EXGRG_FIELD(relgraph.signnet_out)));
    t.push_back(entry("relgraph.signnet.trainable", EXGRG_FIELD(relgraph.signnet_trainable)));
    t.push_back(entry("relgraph.use.aug", EXGRG_FIELD(relgraph.use.aug)));
    t.push_back(entry("relgraph.use.adj", EXGRG_FIELD(relgraph.use.adj)));
    t.push_back(entry("relgraph.use.adj_filtered", EXGRG_FIELD(relgraph.use.adj_filtered)));
    t.push_back(entry("relgraph.use.lappe", EXGRG_FIELD(relgraph.use.lappe)));
    t.push_back(entry("relgraph.use.rwse", EXGRG_FIELD(relgraph.use.rwse)));
    t.push_back(entry("relgraph.use.signnet", EXGRG_FIELD(relgraph.use.signnet)));
    t.push_back(entry("relgraph.use.cluster", EXGRG_FIELD(relgraph.use.cluster)));

    t.push_back(entry("pse.normalized_laplacian", EXGRG_FIELD(pse.normalized_laplacian)));
    t.push_back(entry("pse.rwse_exact_limit", EXGRG_FIELD(pse.rwse_exact_limit)));
    t.push_back(entry("pse.rwse_walks", EXGRG_FIELD(pse.rwse_walks)));

    t.push_back(entry("cluster.k", EXGRG_FIELD(cluster.prototypes)));
    t.push_back(entry("cluster.tau", EXGRG_FIELD(cluster.tau)));
    t.push_back(entry("cluster.epsilon", EXGRG_FIELD(cluster.epsilon)));
    t.push_back(entry("cluster.sinkhorn_iters", EXGRG_FIELD(cluster.sinkhorn_iters)));
    t.push_back(entry("cluster.kg_ratio", EXGRG_FIELD(cluster.kg_ratio)));
    t.push_back(entry("cluster.global_topk", EXGRG_FIELD(cluster.global_topk)));
    t.push_back(entry("cluster.pairs", EXGRG_FIELD(cluster.pairs)));
    return t;
  }();
  return table;
}

#undef EXGRG_FIELD

void require(bool ok, std::string_view key, std::string_view what) {
  if (!ok) throw ConfigError("config key '" + std::string(key) + "': " + std::string(what));
}

}  // namespace

void LossWeights::validate() const {
  const std::pair<const char*, double> terms[] = {{"loss.alpha", alpha},
                                                  {"loss.beta", beta},
                                                  {"loss.gamma", gamma},
                                                  {"loss.alpha1", alpha1},
                                                  {"loss.alpha2", alpha2}};
  for (const auto& [key, v] : terms) require(std::isfinite(v) && v >= 0.0, key, "must be finite and >= 0");
}

void TrainConfig::validate() const {
  require(batch_size >= 2 && batch_size % 2 == 0, "train.batch_size", "must be even and >= 2");
  require(std::isfinite(lr) && lr > 0.0, "train.lr", "must be > 0");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
  weights.validate();
  require(encoder.layers >= 1, "encoder.layers", "must be >= 1");
  require(encoder.hidden >= 1, "encoder.hidden", "must be >= 1");
  require(encoder.out_dim >= 1, "encoder.out_dim", "must be >= 1");
  require(expander.layers >= 1, "expander.layers", "must be >= 1");
  require(expander.hidden >= 1, "expander.hidden", "must be >= 1");
  require(expander.out_dim >= 1, "expander.out_dim", "must be >= 1");
  require(psi.layers >= 1, "psi.layers", "must be >= 1");
  require(psi.hidden_ratio >= 1, "psi.hidden_ratio", "must be >= 1");
  require(psi.sum_scale > 0.0, "psi.sum_scale", "must be > 0");
  require(psi.count_scale > 0.0, "psi.count_scale", "must be > 0");
  const auto prob = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  require(prob(view1.edge_drop_prob), "augment.view1.edge_drop", "must lie in [0, 1]");
  require(prob(view1.feature_mask_prob), "augment.view1.feature_mask", "must lie in [0, 1]");
  require(prob(view2.edge_drop_prob), "augment.view2.edge_drop", "must lie in [0, 1]");
  require(prob(view2.feature_mask_prob), "augment.view2.feature_mask", "must lie in [0, 1]");
  require(relgraph.knn_k >= 1, "relgraph.knn.k", "must be >= 1");
  require(relgraph.lappe_k >= 1, "relgraph.lappe.k", "must be >= 1");
  require(relgraph.lappe_freq >= 1, "relgraph.lappe.freq", "must be >= 1");
  require(relgraph.rwse_k >= 1, "relgraph.rwse.k", "must be >= 1");
  require(relgraph.rwse_kernel >= 1, "relgraph.rwse.kernel", "must be >= 1");
  require(relgraph.signnet_k >= 1, "relgraph.signnet.k", "must be >= 1");
  require(relgraph.signnet_freq >= 1, "relgraph.signnet.freq", "must be >= 1");
  require(relgraph.signnet_hidden >= 1, "relgraph.signnet.hidden", "must be >= 1");
  require(relgraph.signnet_out >= 1, "relgraph.signnet.out_dim", "must be >= 1");
  const auto& u = relgraph.use;
  require(u.aug || u.adj || u.adj_filtered || u.lappe || u.rwse || u.signnet || u.cluster ||
              relgraph.knn_standalone,
          "relgraph.use", "at least one relation graph must be enabled");
  require(pse.rwse_walks >= 1, "pse.rwse_walks", "must be >= 1");
  require(cluster.prototypes >= 2, "cluster.k", "must be >= 2");
  require(std::isfinite(cluster.tau) && cluster.tau > 0.0, "cluster.tau", "must be > 0");
  require(std::isfinite(cluster.epsilon) && cluster.epsilon > 0.0, "cluster.epsilon", "must be > 0");
  require(cluster.sinkhorn_iters >= 1, "cluster.sinkhorn_iters", "must be >= 1");
  require(std::isfinite(cluster.kg_ratio) && cluster.kg_ratio > 0.0, "cluster.kg_ratio",
          "must be > 0");
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

TrainConfig parse_config(std::string_view text, const TrainConfig& base, std::string_view origin) {
  TrainConfig cfg = base;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base, path.string());
}

std::string to_string(const TrainConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

std::string_view to_string(SimilarityMetric m) {
  return m == SimilarityMetric::kCosine ? "cosine" : "neg_euclidean";
}
std::string_view to_string(SignNetArch a) { return a == SignNetArch::kMlp ? "mlp" : "deepset"; }
std::string_view to_string(OtPairs p) {
  switch (p) {
    case OtPairs::kFull: return "full";
    case OtPairs::kSelfOnly: return "self";
    case OtPairs::kAugOnly: return "aug";
  }
  return "full";
}
std::string_view to_string(OptimizerKind o) { return o == OptimizerKind::kAdam ? "adam" : "adamw"; }

}  // namespace exgrg
