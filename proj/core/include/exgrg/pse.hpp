#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "exgrg/autodiff.hpp"
#include "exgrg/config.hpp"
#include "exgrg/graph.hpp"
#include "exgrg/matrix.hpp"
#include "exgrg/nn.hpp"
#include "exgrg/sparse.hpp"
#include "exgrg/spectral.hpp"

namespace exgrg {

enum class EncodingKind { kLapPE, kRwse, kSignNet };

std::string_view to_string(EncodingKind k);

/// Per-node encoding E (M x D_E) of the source graph.
struct Encoding {
  EncodingKind kind = EncodingKind::kLapPE;
  Matrix values;
  /// Nodes without neighbours; their RWSE rows are zero.
  std::vector<bool> isolated;
};

/// Eigenvectors of the `freq` lowest eigenvalues strictly above the zero
/// threshold. Throws ConfigError when fewer than `freq` such modes exist.
Matrix lowest_nonzero_modes(const SpectralDecomposition& d, std::size_t freq);

Encoding lappe(const SourceGraph& g, std::size_t freq, bool normalized = true);

struct RwseOptions {
  /// Exact diagonal tracking up to this many nodes, Monte-Carlo above.
  std::size_t exact_limit = 5000;
  std::size_t walks_per_node = 2000;
  std::uint64_t seed = 0;
};

/// E[i, k] = ((D^-1 A)^(k+1))_ii for k = 0 .. kernel-1.
Encoding rwse(const SourceGraph& g, std::size_t kernel, const RwseOptions& options = {});

/// Sign-invariant encoder rho(aggregate_j [phi(v_j) + phi(-v_j)]) over eigenvector entries.
class SignNet {
 public:
  SignNet() = default;
  SignNet(nn::ParameterStore& store, const std::string& prefix, std::size_t freq,
          std::size_t hidden, std::size_t out_dim, SignNetArch arch, Rng& rng, bool trainable);

  /// `eigvecs` is M x freq.
  ad::Var forward(const nn::Binding& params, const Matrix& eigvecs) const;

  std::size_t freq() const noexcept { return freq_; }
  SignNetArch arch() const noexcept { return arch_; }

 private:
  nn::Mlp phi_;
  nn::Mlp rho_;
  std::size_t freq_ = 0;
  std::size_t hidden_ = 0;
  SignNetArch arch_ = SignNetArch::kDeepSet;
};

/// Evaluates the SignNet off-tape with the parameters currently in `store`.
Encoding signnet_encode(const SignNet& net, const nn::ParameterStore& store, const Matrix& eigvecs);

struct RankDiagnostic {
  std::size_t zero_eigenvalues = 0;
  std::size_t components = 0;
};

/// Zero-eigenvalue count of L = D - G (G symmetrized as (G + G^T)/2) and the
/// number of connected components of its support.
RankDiagnostic laplacian_rank_diagnostic(const SparseMatrix& g);

}  // namespace exgrg
