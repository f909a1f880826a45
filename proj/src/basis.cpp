#include "unipoint/basis.hpp"

#include "unipoint/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace unipoint {

std::string_view to_string(BasisKind kind) {
  switch (kind) {
  case BasisKind::Exp: return "EXP";
  case BasisKind::Pl: return "PL";
  case BasisKind::Cos: return "COS";
  case BasisKind::Sig: return "SIG";
  case BasisKind::Relu: return "RELU";
  }
  return "?";
}

std::string_view to_string(TransferKind kind) {
  return kind == TransferKind::Softplus ? "SOFTPLUS" : "MAXSIG";
}

BasisKind parse_basis_kind(std::string_view s) {
  for (auto k : kAllBasisKinds) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown basis kind '" + std::string(s) + "'");
}

TransferKind parse_transfer_kind(std::string_view s) {
  for (auto k : kAllTransferKinds) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown transfer kind '" + std::string(s) + "'");
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw PreconditionError("softplus_inverse needs y > 0");
  // log(e^y - 1) = y + log(1 - e^-y)
  return y + std::log(-std::expm1(-y));
}

double basis_eval(BasisKind kind, std::span<const double> p, double x) {
  switch (kind) {
  case BasisKind::Exp:
    return p[0] * std::exp(std::min(p[1] * x, kExpClamp));
  case BasisKind::Pl:
    return p[0] * std::exp(-softplus(p[1]) * std::log1p(x));
  case BasisKind::Cos:
    return p[0] * std::cos(p[1] * x + p[2]);
  case BasisKind::Sig:
    return p[0] * sigmoid(p[1] * x + p[2]);
  case BasisKind::Relu:
    return std::max(0.0, p[0] * x + p[1]);
  }
  return 0.0;
}

BasisGrad basis_grad(BasisKind kind, std::span<const double> p, double x) {
  BasisGrad g;
  switch (kind) {
  case BasisKind::Exp: {
    const double z = p[1] * x;
    if (z > kExpClamp) {
      g.dp[0] = std::exp(kExpClamp);
    } else {
      const double e = std::exp(z);
      g.dp[0] = e;
      g.dp[1] = p[0] * x * e;
      g.dx = p[0] * p[1] * e;
    }
    break;
  }
  case BasisKind::Pl: {
    const double expo = softplus(p[1]);
    const double l = std::log1p(x);
    const double f = std::exp(-expo * l); // (1+x)^-expo
    g.dp[0] = f;
    g.dp[1] = -p[0] * f * l * sigmoid(p[1]);
    g.dx = -p[0] * expo * f / (1.0 + x);
    break;
  }
  case BasisKind::Cos: {
    const double z = p[1] * x + p[2];
    const double s = std::sin(z);
    g.dp[0] = std::cos(z);
    g.dp[1] = -p[0] * x * s;
    g.dp[2] = -p[0] * s;
    g.dx = -p[0] * p[1] * s;
    break;
  }
  case BasisKind::Sig: {
    const double s = sigmoid(p[1] * x + p[2]);
    const double dz = p[0] * s * (1.0 - s);
    g.dp[0] = s;
    g.dp[1] = x * dz;
    g.dp[2] = dz;
    g.dx = p[1] * dz;
    break;
  }
  case BasisKind::Relu: {
    // Subgradient 0 at the kink.
    if (p[0] * x + p[1] > 0.0) {
      g.dp[0] = x;
      g.dp[1] = 1.0;
      g.dx = p[0];
    }
    break;
  }
  }
  return g;
}

BasisParams::BasisParams(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) throw ShapeError("BasisParams size does not match rows*cols");
}

double basis_sum(BasisKind kind, const BasisParams& params, double x) {
  if (params.rows > 0 && params.cols != param_dim(kind)) {
    throw ShapeError("BasisParams column count does not match the basis family");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < params.rows; ++j) s += basis_eval(kind, params.row(j), x);
  return s;
}

double transfer_eval(TransferKind kind, double x) {
  if (kind == TransferKind::Softplus) return softplus(x);
  return std::max(sigmoid(x), x);
}

double transfer_grad(TransferKind kind, double x) {
  const double s = sigmoid(x);
  if (kind == TransferKind::Softplus) return s;
  // Tie goes to the linear branch.
  return s > x ? s * (1.0 - s) : 1.0;
}

double log_transfer(TransferKind kind, double x) {
  const double v = transfer_eval(kind, x);
  return v > 0.0 ? std::log(v) : x;
}

double log_transfer_grad(TransferKind kind, double x) {
  const double v = transfer_eval(kind, x);
  return v > 0.0 ? transfer_grad(kind, x) / v : 1.0;
}

BasisSpec::BasisSpec(BasisKind kind, std::size_t count) : BasisSpec(std::vector<Block>{{kind, count}}) {}

BasisSpec::BasisSpec(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ConfigError("basis spec needs at least one block");
  for (const auto& b : blocks_) {
    if (b.count == 0) throw ConfigError("basis block with zero terms");
    terms_ += b.count;
    param_count_ += b.count * param_dim(b.kind);
  }
}

namespace {

std::size_t parse_count(std::string_view digits, std::string_view context) {
  std::size_t v = 0;
  const auto* end = digits.data() + digits.size();
  auto [ptr, ec] = std::from_chars(digits.data(), end, v);
  if (ec != std::errc{} || ptr != end || v == 0) {
    throw ConfigError("bad basis count in '" + std::string(context) + "'");
  }
  return v;
}

} // namespace

BasisSpec BasisSpec::parse(std::string_view text, std::size_t default_count) {
  constexpr std::string_view prefix = "MIXED(";
  if (text.substr(0, prefix.size()) != prefix) {
    return BasisSpec(parse_basis_kind(text), default_count);
  }
  if (text.back() != ')') throw ConfigError("unterminated MIXED spec '" + std::string(text) + "'");
  std::string_view body = text.substr(prefix.size(), text.size() - prefix.size() - 1);
  std::vector<Block> blocks;
  while (!body.empty()) {
    const auto plus = body.find('+');
    const std::string_view item = body.substr(0, plus);
    const auto digit = item.find_first_of("0123456789");
    if (digit == std::string_view::npos || digit == 0) {
      throw ConfigError("bad MIXED component '" + std::string(item) + "'");
    }
    blocks.push_back({parse_basis_kind(item.substr(0, digit)), parse_count(item.substr(digit), text)});
    body = plus == std::string_view::npos ? std::string_view{} : body.substr(plus + 1);
  }
  return BasisSpec(std::move(blocks));
}

std::string BasisSpec::to_string() const {
  if (blocks_.size() == 1) return std::string(unipoint::to_string(blocks_[0].kind));
  std::string out = "MIXED(";
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (i) out += '+';
    out += unipoint::to_string(blocks_[i].kind);
    out += std::to_string(blocks_[i].count);
  }
  return out + ")";
}

double mixed_sum(const BasisSpec& spec, std::span<const double> params, double x) {
  if (params.size() != spec.param_count()) throw ShapeError("parameter vector does not match basis spec");
  double s = 0.0;
  std::size_t off = 0;
  for (const auto& b : spec.blocks()) {
    const std::size_t d = param_dim(b.kind);
    for (std::size_t j = 0; j < b.count; ++j, off += d) s += basis_eval(b.kind, params.subspan(off, d), x);
  }
  return s;
}

void mixed_sum_many(const BasisSpec& spec, std::span<const double> params, std::span<const double> xs,
                    std::span<double> out) {
  if (params.size() != spec.param_count()) throw ShapeError("parameter vector does not match basis spec");
  if (xs.size() != out.size()) throw ShapeError("mixed_sum_many output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> log1p_x;
  std::size_t off = 0;
  for (const auto& b : spec.blocks()) {
    const std::size_t d = param_dim(b.kind);
    if (b.kind == BasisKind::Pl && log1p_x.empty()) {
      log1p_x.resize(xs.size());
      for (std::size_t k = 0; k < xs.size(); ++k) log1p_x[k] = std::log1p(xs[k]);
    }
    for (std::size_t j = 0; j < b.count; ++j, off += d) {
      const auto p = params.subspan(off, d);
      switch (b.kind) {
      case BasisKind::Exp:
        for (std::size_t k = 0; k < xs.size(); ++k) out[k] += p[0] * std::exp(std::min(p[1] * xs[k], kExpClamp));
        break;
      case BasisKind::Pl: {
        const double e = -softplus(p[1]);
        for (std::size_t k = 0; k < xs.size(); ++k) out[k] += p[0] * std::exp(e * log1p_x[k]);
        break;
      }
      default:
        for (std::size_t k = 0; k < xs.size(); ++k) out[k] += basis_eval(b.kind, p, xs[k]);
      }
    }
  }
}

double mixed_sum_backward(const BasisSpec& spec, std::span<const double> params, double x, double scale,
                          std::span<double> dparams) {
  double dx = 0.0;
  std::size_t off = 0;
  for (const auto& b : spec.blocks()) {
    const std::size_t d = param_dim(b.kind);
    for (std::size_t j = 0; j < b.count; ++j, off += d) {
      const auto g = basis_grad(b.kind, params.subspan(off, d), x);
      for (std::size_t k = 0; k < d; ++k) dparams[off + k] += scale * g.dp[k];
      dx += g.dx;
    }
  }
  return dx;
}

} // namespace unipoint
