#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unipoint {

enum class BasisKind { Exp, Pl, Cos, Sig, Relu };
enum class TransferKind { Softplus, MaxSig };

inline constexpr std::array<BasisKind, 5> kAllBasisKinds{BasisKind::Exp, BasisKind::Pl, BasisKind::Cos,
                                                         BasisKind::Sig, BasisKind::Relu};
inline constexpr std::array<TransferKind, 2> kAllTransferKinds{TransferKind::Softplus,
                                                               TransferKind::MaxSig};

/// Exponent cap for EXP basis terms and exponential intensities.
inline constexpr double kExpClamp = 30.0;

[[nodiscard]] constexpr std::size_t param_dim(BasisKind kind) {
  switch (kind) {
  case BasisKind::Cos:
  case BasisKind::Sig:
    return 3;
  default:
    return 2;
  }
}

[[nodiscard]] std::string_view to_string(BasisKind kind);
[[nodiscard]] std::string_view to_string(TransferKind kind);
[[nodiscard]] BasisKind parse_basis_kind(std::string_view s);
[[nodiscard]] TransferKind parse_transfer_kind(std::string_view s);

[[nodiscard]] inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
[[nodiscard]] double softplus(double x);
/// Inverse of softplus on (0, inf).
[[nodiscard]] double softplus_inverse(double y);

/// Gradient of a single basis term.
struct BasisGrad {
  double dx = 0.0;
  std::array<double, 3> dp{}; ///< only the first param_dim entries are meaningful
};

/// phi(x; p) for one term. PL treats p[1] as a raw exponent mapped through softplus.
[[nodiscard]] double basis_eval(BasisKind kind, std::span<const double> p, double x);
[[nodiscard]] BasisGrad basis_grad(BasisKind kind, std::span<const double> p, double x);

/// J x param_dim parameter block, row j holding the parameters of term j.
struct BasisParams {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  BasisParams() = default;
  BasisParams(std::size_t r, std::size_t c, std::vector<double> v);

  [[nodiscard]] std::span<const double> row(std::size_t j) const {
    return std::span<const double>(values).subspan(j * cols, cols);
  }
};

[[nodiscard]] double basis_sum(BasisKind kind, const BasisParams& params, double x);

[[nodiscard]] double transfer_eval(TransferKind kind, double x);
[[nodiscard]] double transfer_grad(TransferKind kind, double x);
/// log f(x); falls back to the asymptote x where f(x) underflows to 0 (both transfers behave like e^x there).
[[nodiscard]] double log_transfer(TransferKind kind, double x);
/// d/dx log f(x), with the matching asymptote 1 where f(x) underflows.
[[nodiscard]] double log_transfer_grad(TransferKind kind, double x);

/// A (possibly heterogeneous) list of basis blocks. A single-family spec has one block.
///
/// Parameters are laid out block by block in declaration order, each block
/// holding `count` rows of that family's param_dim entries.
class BasisSpec {
public:
  struct Block {
    BasisKind kind;
    std::size_t count;
    friend bool operator==(const Block&, const Block&) = default;
  };

  BasisSpec() = default;
  BasisSpec(BasisKind kind, std::size_t count);
  explicit BasisSpec(std::vector<Block> blocks);

  /// Accepts "EXP", "PL", ... (count taken from `default_count`) or "MIXED(PL32+RELU32)".
  static BasisSpec parse(std::string_view text, std::size_t default_count);
  [[nodiscard]] std::string to_string() const;
  [[nodiscard]] bool is_mixed() const { return blocks_.size() > 1; }

  [[nodiscard]] const std::vector<Block>& blocks() const { return blocks_; }
  /// Total number of basis terms J.
  [[nodiscard]] std::size_t terms() const { return terms_; }
  /// Length of the flat parameter vector (sum of param_dim over all terms).
  [[nodiscard]] std::size_t param_count() const { return param_count_; }

  friend bool operator==(const BasisSpec& a, const BasisSpec& b) { return a.blocks_ == b.blocks_; }

private:
  std::vector<Block> blocks_;
  std::size_t terms_ = 0;
  std::size_t param_count_ = 0;
};

/// Sum over all terms of a (possibly mixed) spec. Throws ShapeError on size mismatch.
[[nodiscard]] double mixed_sum(const BasisSpec& spec, std::span<const double> params, double x);

/// out[k] = mixed_sum(spec, params, xs[k]), bit for bit; per-term constants are computed once.
void mixed_sum_many(const BasisSpec& spec, std::span<const double> params, std::span<const double> xs,
                    std::span<double> out);

/// Adds d(sum)/d(params) * scale into `dparams` and returns d(sum)/dx.
double mixed_sum_backward(const BasisSpec& spec, std::span<const double> params, double x,
                          double scale, std::span<double> dparams);

} // namespace unipoint
