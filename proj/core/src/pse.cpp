#include "exgrg/pse.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "exgrg/error.hpp"

namespace exgrg {

std::string_view to_string(EncodingKind k) {
  switch (k) {
    case EncodingKind::kLapPE: return "lappe";
    case EncodingKind::kRwse: return "rwse";
    case EncodingKind::kSignNet: return "signnet";
  }
  return "lappe";
}

Matrix lowest_nonzero_modes(const SpectralDecomposition& d, std::size_t freq) {
  const std::size_t n = d.eigenvalues.size();
  std::vector<std::size_t> picked;
  for (std::size_t j = 0; j < n && picked.size() < freq; ++j)
    if (d.eigenvalues[j] > kZeroEigenvalueThreshold) picked.push_back(j);
  if (picked.size() < freq) {
    std::size_t available = 0;
    for (double l : d.eigenvalues) available += l > kZeroEigenvalueThreshold ? 1 : 0;
    throw ConfigError("requested " + std::to_string(freq) + " non-zero Laplacian modes but only " +
                      std::to_string(available) + " exist");
  }
  Matrix out(n, freq);
  for (std::size_t c = 0; c < freq; ++c)
    for (std::size_t i = 0; i < n; ++i) out(i, c) = d.eigenvectors(i, picked[c]);
  return out;
}

Encoding lappe(const SourceGraph& g, std::size_t freq, bool normalized) {
  if (freq == 0) throw ConfigError("lappe: frequency count must be >= 1");
  if (freq > g.num_nodes())
    throw ConfigError("lappe: frequency count exceeds the number of nodes");
  const SpectralDecomposition d = eigendecompose_symmetric(laplacian(g, normalized));
  Encoding e;
  e.kind = EncodingKind::kLapPE;
  e.values = lowest_nonzero_modes(d, freq);
  e.isolated.assign(g.num_nodes(), false);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) e.isolated[i] = g.degree(i) == 0;
  return e;
}

namespace {

// Exact return probabilities. Each new mass entry is the sum of its incoming
// contributions sorted ascending, so the result does not depend on node labels.
void rwse_exact(const SparseMatrix& a, std::size_t kernel, Matrix& out) {
  const std::size_t n = a.rows();
  std::vector<double> inv_degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t d = a.row_cols(i).size();
    if (d > 0) inv_degree[i] = 1.0 / static_cast<double>(d);
  }
  std::vector<double> mass(n), next(n);
  std::vector<double> terms;
  std::vector<char> active(n), next_active(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (inv_degree[s] == 0.0) continue;
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(active.begin(), active.end(), 0);
    mass[s] = 1.0;
    active[s] = 1;
    for (std::size_t k = 0; k < kernel; ++k) {
      std::fill(next_active.begin(), next_active.end(), 0);
      for (std::size_t i = 0; i < n; ++i)
        if (active[i])
          for (std::size_t j : a.row_cols(i)) next_active[j] = 1;
      for (std::size_t j = 0; j < n; ++j) {
        if (!next_active[j]) {
          next[j] = 0.0;
          continue;
        }
        terms.clear();
        for (std::size_t i : a.row_cols(j))
          if (active[i]) terms.push_back(mass[i] * inv_degree[i]);
        std::sort(terms.begin(), terms.end());
        double acc = 0.0;
        for (double t : terms) acc += t;
        next[j] = acc;
      }
      mass.swap(next);
      active.swap(next_active);
      out(s, k) = mass[s];
    }
  }
}

void rwse_monte_carlo(const SparseMatrix& a, std::size_t kernel, const RwseOptions& opt,
                      Matrix& out) {
  const std::size_t n = a.rows();
  std::vector<std::size_t> returns(kernel);
  for (std::size_t s = 0; s < n; ++s) {
    if (a.row_cols(s).empty()) continue;
    Rng rng = derive_rng(opt.seed, s);
    std::fill(returns.begin(), returns.end(), 0);
    for (std::size_t w = 0; w < opt.walks_per_node; ++w) {
      std::size_t at = s;
      for (std::size_t k = 0; k < kernel; ++k) {
        const auto nbrs = a.row_cols(at);
        std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
        at = nbrs[pick(rng)];
        if (at == s) ++returns[k];
      }
    }
    for (std::size_t k = 0; k < kernel; ++k)
      out(s, k) = static_cast<double>(returns[k]) / static_cast<double>(opt.walks_per_node);
  }
}

}  // namespace

Encoding rwse(const SourceGraph& g, std::size_t kernel, const RwseOptions& options) {
  if (kernel == 0) throw ConfigError("rwse: kernel must be >= 1");
  if (options.walks_per_node == 0) throw ConfigError("rwse: walks_per_node must be >= 1");
  Encoding e;
  e.kind = EncodingKind::kRwse;
  e.values = Matrix(g.num_nodes(), kernel);
  e.isolated.assign(g.num_nodes(), false);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) e.isolated[i] = g.degree(i) == 0;
  if (g.num_nodes() <= options.exact_limit) {
    rwse_exact(g.adjacency(), kernel, e.values);
  } else {
    rwse_monte_carlo(g.adjacency(), kernel, options, e.values);
  }
  return e;
}

SignNet::SignNet(nn::ParameterStore& store, const std::string& prefix, std::size_t freq,
                 std::size_t hidden, std::size_t out_dim, SignNetArch arch, Rng& rng,
                 bool trainable)
    : freq_(freq), hidden_(hidden), arch_(arch) {
  if (freq == 0 || hidden == 0 || out_dim == 0)
    throw ConfigError("SignNet: dimensions must be positive");
  phi_ = nn::Mlp(store, prefix + ".phi", {1, hidden, hidden}, nn::Activation::kRelu,
                 nn::Norm::kNone, rng, false, trainable);
  const std::size_t rho_in = arch == SignNetArch::kMlp ? freq * hidden : hidden;
  rho_ = nn::Mlp(store, prefix + ".rho", {rho_in, hidden, out_dim}, nn::Activation::kRelu,
                 nn::Norm::kNone, rng, false, trainable);
}

ad::Var SignNet::forward(const nn::Binding& params, const Matrix& eigvecs) const {
  if (eigvecs.cols() != freq_)
    throw ShapeError("SignNet: got " + std::to_string(eigvecs.cols()) +
                     " eigenvectors, configured for " + std::to_string(freq_));
  ad::Tape& tape = params.tape();
  const std::size_t m = eigvecs.rows();
  // Row i * freq + j holds node i's entry of eigenvector j.
  Matrix pos(m * freq_, 1), neg(m * freq_, 1);
  for (std::size_t i = 0; i < m * freq_; ++i) {
    pos.values()[i] = eigvecs.values()[i];
    neg.values()[i] = -eigvecs.values()[i];
  }
  const ad::Var sym = ad::add(phi_.forward(params, tape.constant(std::move(pos))),
                              phi_.forward(params, tape.constant(std::move(neg))));
  ad::Var pooled;
  if (arch_ == SignNetArch::kDeepSet) {
    std::vector<Triplet> t;
    t.reserve(m * freq_);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < freq_; ++j) t.push_back({i, i * freq_ + j, 1.0});
    pooled = ad::sparse_dense_matmul(SparseMatrix::from_triplets(m, m * freq_, std::move(t)), sym);
  } else {
    // Concatenation: block j of the output row takes eigenvector j's slice.
    std::vector<std::size_t> rows(m);
    for (std::size_t j = 0; j < freq_; ++j) {
      for (std::size_t i = 0; i < m; ++i) rows[i] = i * freq_ + j;
      Matrix place(hidden_, freq_ * hidden_);
      for (std::size_t h = 0; h < hidden_; ++h) place(h, j * hidden_ + h) = 1.0;
      const ad::Var part = ad::matmul(ad::gather_rows(sym, rows), tape.constant(std::move(place)));
      pooled = pooled.valid() ? ad::add(pooled, part) : part;
    }
  }
  return rho_.forward(params, pooled);
}

Encoding signnet_encode(const SignNet& net, const nn::ParameterStore& store,
                        const Matrix& eigvecs) {
  ad::Tape tape;
  const nn::Binding params(tape, store, /*freeze_all=*/true);
  Encoding e;
  e.kind = EncodingKind::kSignNet;
  e.values = net.forward(params, eigvecs).value();
  e.isolated.assign(eigvecs.rows(), false);
  return e;
}

RankDiagnostic laplacian_rank_diagnostic(const SparseMatrix& g) {
  const std::size_t n = g.rows();
  if (g.cols() != n) throw ShapeError("laplacian_rank_diagnostic: graph is not square");
  Matrix sym(n, n);
  for (const auto& t : g.triplets()) {
    if (t.row == t.col) continue;
    sym(t.row, t.col) += 0.5 * t.value;
    sym(t.col, t.row) += 0.5 * t.value;
  }
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      degree += sym(i, j);
      l(i, j) = -sym(i, j);
    }
    l(i, i) = degree;
  }
  RankDiagnostic out;
  for (double lambda : eigendecompose_symmetric(l).eigenvalues)
    if (std::abs(lambda) <= kZeroEigenvalueThreshold) ++out.zero_eigenvalues;
  out.components = count_components(SparseMatrix::from_dense(sym));
  return out;
}

}  // namespace exgrg
