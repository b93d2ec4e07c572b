#include "exgrg/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

#include "exgrg/error.hpp"

namespace exgrg {

Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

namespace {

std::string where(const std::filesystem::path& path, std::size_t line, std::size_t column) {
  std::ostringstream out;
  out << path.string() << ":" << line << ":" << column;
  return out.str();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

template <typename T>
T parse_number(std::string_view token, const std::filesystem::path& path, std::size_t line,
               std::size_t column) {
  T value{};
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw DataError(where(path, line, column) + ": cannot parse '" + std::string(token) + "'");
  }
  return value;
}

// Splits on whitespace and returns (token, 1-based column) pairs.
std::vector<std::pair<std::string_view, std::size_t>> split_ws(std::string_view s) {
  std::vector<std::pair<std::string_view, std::size_t>> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_blank(s[i])) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && !is_blank(s[j])) ++j;
    out.emplace_back(s.substr(i, j - i), i + 1);
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (is_blank(s.front()) || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (is_blank(s.back()) || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

Matrix read_features(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      const std::string_view field =
          trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start));
      values.push_back(parse_number<double>(field, path, lineno, start + 1));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    if (count != cols) {
      throw DataError(where(path, lineno, 1) + ": expected " + std::to_string(cols) +
                      " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw DataError(path.string() + ": no feature rows");
  return Matrix(rows, cols, std::move(values));
}

std::vector<std::pair<std::size_t, std::size_t>> read_edges(const std::filesystem::path& path,
                                                            std::size_t num_nodes) {
  auto in = open_input(path);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tokens = split_ws(line);
    if (tokens.size() != 2) {
      throw DataError(where(path, lineno, 1) + ": expected two node ids, found " +
                      std::to_string(tokens.size()) + " fields");
    }
    std::size_t ends[2];
    for (int k = 0; k < 2; ++k) {
      ends[k] = parse_number<std::size_t>(tokens[k].first, path, lineno, tokens[k].second);
      if (ends[k] >= num_nodes) {
        throw DataError(where(path, lineno, tokens[k].second) + ": node id " +
                        std::to_string(ends[k]) + " out of range (M = " +
                        std::to_string(num_nodes) + ")");
      }
    }
    edges.emplace_back(ends[0], ends[1]);
  }
  return edges;
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    labels.push_back(parse_number<int>(body, path, lineno, 1));
  }
  return labels;
}

}  // namespace

SourceGraph::SourceGraph(SparseMatrix adjacency, Matrix features,
                         std::optional<std::vector<int>> labels)
    : adjacency_(std::move(adjacency)), features_(std::move(features)), labels_(std::move(labels)) {
  const std::size_t m = adjacency_.rows();
  if (adjacency_.cols() != m) throw DataError("SourceGraph: adjacency is not square");
  if (features_.rows() != m) {
    throw DataError("SourceGraph: feature row count " + std::to_string(features_.rows()) +
                    " != node count " + std::to_string(m));
  }
  for (std::size_t r = 0; r < m; ++r) {
    const auto cols = adjacency_.row_cols(r);
    const auto vals = adjacency_.row_values(r);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (cols[p] == r) throw DataError("SourceGraph: adjacency has a self-loop");
      if (vals[p] != 1.0) throw DataError("SourceGraph: adjacency must be 0/1");
      if (!adjacency_.contains(cols[p], r)) throw DataError("SourceGraph: adjacency not symmetric");
    }
  }
  if (labels_) {
    if (labels_->size() != m) {
      throw DataError("SourceGraph: " + std::to_string(labels_->size()) + " labels for " +
                      std::to_string(m) + " nodes");
    }
    int max_label = -1;
    for (int y : *labels_) {
      if (y < 0) throw DataError("SourceGraph: negative label");
      max_label = std::max(max_label, y);
    }
    num_classes_ = max_label + 1;
  }
}

SparseMatrix symmetric_adjacency(std::size_t num_nodes,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<Triplet> t;
  t.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    t.push_back({u, v, 1.0});
    t.push_back({v, u, 1.0});
  }
  return SparseMatrix::from_triplets(num_nodes, num_nodes, std::move(t),
                                     DuplicatePolicy::kKeepFirst);
}

SourceGraph load_graph(const std::filesystem::path& edge_list_path,
                       const std::filesystem::path& features_path,
                       const std::optional<std::filesystem::path>& labels_path) {
  Matrix features = read_features(features_path);
  const std::size_t m = features.rows();
  auto edges = read_edges(edge_list_path, m);
  std::optional<std::vector<int>> labels;
  if (labels_path) labels = read_labels(*labels_path);
  return SourceGraph(symmetric_adjacency(m, edges), std::move(features), std::move(labels));
}

SourceGraph load_graph_dir(const std::filesystem::path& dir) {
  const auto labels = dir / "labels.txt";
  return load_graph(dir / "edges.txt", dir / "features.csv",
                    std::filesystem::exists(labels) ? std::optional(labels) : std::nullopt);
}

void save_graph_dir(const SourceGraph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "edges.txt");
    out << "# " << g.num_nodes() << " nodes, " << g.num_edges() << " undirected edges\n";
    const auto& a = g.adjacency();
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t c : a.row_cols(r))
        if (r < c) out << r << ' ' << c << '\n';
  }
  {
    std::ofstream out(dir / "features.csv");
    out << std::setprecision(17);
    const auto& x = g.features();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) out << (c ? "," : "") << x(r, c);
      out << '\n';
    }
  }
  if (g.labels()) {
    std::ofstream out(dir / "labels.txt");
    for (int y : *g.labels()) out << y << '\n';
  }
  if (!std::filesystem::exists(dir / "edges.txt")) throw DataError("cannot write " + dir.string());
}

SourceGraph generate_sbm(const SbmParams& params) {
  if (params.p_in < 0.0 || params.p_in > 1.0 || params.p_out < 0.0 || params.p_out > 1.0)
    throw ConfigError("generate_sbm: probabilities must lie in [0,1]");
  const std::size_t m = params.blocks * params.nodes_per_block;
  if (m == 0) throw ConfigError("generate_sbm: zero nodes");
  if (params.feature_dim == 0) throw ConfigError("generate_sbm: zero feature dimension");

  Rng rng(params.seed);
  std::bernoulli_distribution in_edge(params.p_in);
  std::bernoulli_distribution out_edge(params.p_out);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const bool same = i / params.nodes_per_block == j / params.nodes_per_block;
      if (same ? in_edge(rng) : out_edge(rng)) edges.emplace_back(i, j);
    }
  }

  Matrix x(m, params.feature_dim);
  std::normal_distribution<double> noise(0.0, params.feature_noise);
  std::vector<int> labels(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t block = i / params.nodes_per_block;
    labels[i] = static_cast<int>(block);
    for (std::size_t c = 0; c < params.feature_dim; ++c) x(i, c) = noise(rng);
    x(i, block % params.feature_dim) += 1.0;
  }
  return SourceGraph(symmetric_adjacency(m, edges), std::move(x), std::move(labels));
}

void AugmentConfig::validate() const {
  if (!(edge_drop_prob >= 0.0 && edge_drop_prob <= 1.0) ||
      !(feature_mask_prob >= 0.0 && feature_mask_prob <= 1.0))
    throw ConfigError("augmentation probabilities must lie in [0,1]");
}

GraphView augment(const SourceGraph& g, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto& a = g.adjacency();
  std::bernoulli_distribution drop_edge(cfg.edge_drop_prob);
  std::vector<Triplet> kept;
  kept.reserve(a.nnz());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c : a.row_cols(r)) {
      if (c <= r) continue;
      if (drop_edge(rng)) continue;
      kept.push_back({r, c, 1.0});
      kept.push_back({c, r, 1.0});
    }
  }

  GraphView view{SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(kept)), g.features()};
  std::bernoulli_distribution mask(cfg.feature_mask_prob);
  Matrix& x = view.features;
  if (cfg.mask_mode == FeatureMaskMode::kColumn) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (!mask(rng)) continue;
      for (std::size_t r = 0; r < x.rows(); ++r) x(r, c) = 0.0;
    }
  } else {
    for (double& v : x.values())
      if (mask(rng)) v = 0.0;
  }
  return view;
}

ViewPair build_views(const SourceGraph& g, const AugmentConfig& cfg1, const AugmentConfig& cfg2,
                     Rng& rng) {
  ViewPair pair;
  pair.view1 = augment(g, cfg1, rng);
  pair.view2 = augment(g, cfg2, rng);
  pair.block_adjacency = block_diagonal(pair.view1.adjacency, pair.view2.adjacency);
  const std::size_t m = g.num_nodes();
  const std::size_t d = g.feature_dim();
  pair.stacked_features = Matrix(2 * m, d);
  std::copy(pair.view1.features.values().begin(), pair.view1.features.values().end(),
            pair.stacked_features.values().begin());
  std::copy(pair.view2.features.values().begin(), pair.view2.features.values().end(),
            pair.stacked_features.values().begin() + static_cast<std::ptrdiff_t>(m * d));
  return pair;
}

MiniBatchIndex sample_batch(std::size_t num_source_nodes, std::size_t batch_size, Rng& rng) {
  if (batch_size % 2 != 0) throw ConfigError("sample_batch: batch size must be even");
  if (batch_size == 0 || batch_size > 2 * num_source_nodes)
    throw ConfigError("sample_batch: batch size must lie in [2, 2M]");
  const std::size_t half = batch_size / 2;

  std::vector<std::size_t> pool(num_source_nodes);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < half; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, num_source_nodes - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }

  MiniBatchIndex batch;
  batch.num_source_nodes = num_source_nodes;
  batch.batch_nodes.resize(batch_size);
  batch.augment_pairs.reserve(half);
  for (std::size_t t = 0; t < half; ++t) {
    batch.batch_nodes[t] = pool[t];
    batch.batch_nodes[t + half] = pool[t] + num_source_nodes;
    batch.augment_pairs.emplace_back(t, t + half);
  }
  return batch;
}

MiniBatchIndex sample_batch(const ViewPair& pair, std::size_t batch_size, Rng& rng) {
  return sample_batch(pair.num_source_nodes(), batch_size, rng);
}

Split load_split(const std::filesystem::path& path, std::size_t num_nodes) {
  auto in = open_input(path);
  Split split;
  bool seen[3] = {false, false, false};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const std::size_t colon = body.find(':');
    if (colon == std::string_view::npos)
      throw DataError(where(path, lineno, 1) + ": expected 'train:', 'val:' or 'test:'");
    const std::string_view key = trim(body.substr(0, colon));
    std::vector<std::size_t>* target = nullptr;
    int slot = 0;
    if (key == "train") {
      target = &split.train;
      slot = 0;
    } else if (key == "val") {
      target = &split.val;
      slot = 1;
    } else if (key == "test") {
      target = &split.test;
      slot = 2;
    } else {
      throw DataError(where(path, lineno, 1) + ": unknown split '" + std::string(key) + "'");
    }
    seen[slot] = true;
    std::size_t start = colon + 1;
    while (start < body.size()) {
      const std::size_t comma = body.find(',', start);
      const std::size_t end = comma == std::string_view::npos ? body.size() : comma;
      const std::string_view field = trim(body.substr(start, end - start));
      if (!field.empty()) {
        const auto id = parse_number<std::size_t>(field, path, lineno, start + 1);
        if (id >= num_nodes) throw DataError(where(path, lineno, start + 1) + ": node id out of range");
        target->push_back(id);
      }
      start = end + 1;
    }
  }
  if (!(seen[0] && seen[1] && seen[2]))
    throw DataError(path.string() + ": split file needs train, val and test lines");
  std::vector<char> used(num_nodes, 0);
  for (const auto* part : {&split.train, &split.val, &split.test})
    for (std::size_t id : *part) {
      if (used[id]) throw DataError(path.string() + ": splits are not disjoint");
      used[id] = 1;
    }
  return split;
}

std::size_t count_components(const SparseMatrix& adjacency) {
  const std::size_t n = adjacency.rows();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::size_t components = n;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c : adjacency.row_cols(r)) {
      const std::size_t a = find(r);
      const std::size_t b = find(c);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
  }
  return components;
}

}  // namespace exgrg
