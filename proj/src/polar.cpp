#include "evlc/polar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace evlc {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double bhattacharyya(int n, int index, double z) {
  if (n == 1) return z;
  const int half = n / 2;
  if (index < half) return bhattacharyya(half, index, 2.0 * z - z * z);
  return bhattacharyya(half, index - half, z * z);
}

// Exact check-node combination, log((1 + e^{a+b}) / (e^a + e^b)).
double boxplus(double a, double b) {
  const double sign = ((a < 0) != (b < 0)) ? -1.0 : 1.0;
  return sign * std::min(std::abs(a), std::abs(b)) + std::log1p(std::exp(-std::abs(a + b))) -
         std::log1p(std::exp(-std::abs(a - b)));
}

// -log P(bit = u) for an LLR, stable for large magnitudes.
double bit_penalty(double llr, std::uint8_t u) {
  const double x = u ? -llr : llr;
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

struct Path {
  std::vector<std::vector<double>> alpha;       // alpha[d] has N >> d entries
  std::vector<std::vector<std::uint8_t>> left;  // codeword of the last finished left child
  Bits u;
  double metric = 0.0;
};

}  // namespace

void PolarCodeConfig::validate() const {
  if (!is_power_of_two(block_length)) throw std::invalid_argument("block length must be a power of two");
  if (info_length < 0 || info_length > block_length) {
    throw std::invalid_argument("info length must lie in [0, N]");
  }
  if (list_size < 1) throw std::invalid_argument("list size must be >= 1");
  if (crc.width < 0 || crc.width > 31) throw std::invalid_argument("unsupported CRC width");
  if (crc.width > info_length) throw std::invalid_argument("CRC wider than the info set");
  if (!frozen_set.empty()) {
    if (static_cast<int>(frozen_set.size()) != block_length - info_length) {
      throw std::invalid_argument("frozen set must hold N - K indices");
    }
    std::vector<std::uint8_t> seen(block_length, 0);
    for (int f : frozen_set) {
      if (f < 0 || f >= block_length || seen[f]) throw std::invalid_argument("invalid frozen set");
      seen[f] = 1;
    }
  }
}

std::vector<int> PolarCodeConfig::resolved_frozen_set() const {
  if (frozen_set.empty()) return build_frozen_set(block_length, info_length);
  auto sorted = frozen_set;
  std::sort(sorted.begin(), sorted.end());
  return sorted;
}

std::vector<double> bhattacharyya_parameters(int block_length, double z0) {
  if (!is_power_of_two(block_length)) throw std::invalid_argument("block length must be a power of two");
  std::vector<double> z(block_length);
  for (int i = 0; i < block_length; ++i) z[i] = bhattacharyya(block_length, i, z0);
  return z;
}

std::vector<int> build_frozen_set(int block_length, int info_length) {
  if (info_length < 0 || info_length > block_length) {
    throw std::invalid_argument("info length must lie in [0, N]");
  }
  const auto z = bhattacharyya_parameters(block_length);
  std::vector<int> order(block_length);
  std::iota(order.begin(), order.end(), 0);
  // Least reliable first; equal parameters freeze the lower index first.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return z[a] > z[b]; });
  std::vector<int> frozen(order.begin(), order.begin() + (block_length - info_length));
  std::sort(frozen.begin(), frozen.end());
  return frozen;
}

std::uint32_t crc_remainder(std::span<const std::uint8_t> bits, const CrcSpec& spec) {
  if (spec.width == 0) return 0;
  const std::uint32_t mask = (spec.width == 32) ? 0xffffffffu : ((1u << spec.width) - 1u);
  std::uint32_t reg = 0;
  for (auto b : bits) {
    const std::uint32_t feedback = ((reg >> (spec.width - 1)) & 1u) ^ (b ? 1u : 0u);
    reg = (reg << 1) & mask;
    if (feedback) reg ^= spec.polynomial & mask;
  }
  return reg;
}

Bits crc_append(std::span<const std::uint8_t> bits, const CrcSpec& spec) {
  Bits out(bits.begin(), bits.end());
  const auto rem = crc_remainder(bits, spec);
  for (int i = spec.width - 1; i >= 0; --i) out.push_back((rem >> i) & 1u);
  return out;
}

bool crc_check(std::span<const std::uint8_t> bits_with_crc, const CrcSpec& spec) {
  return crc_remainder(bits_with_crc, spec) == 0;
}

Bits polar_transform(std::span<const std::uint8_t> u) {
  Bits x(u.begin(), u.end());
  const std::size_t n = x.size();
  for (std::size_t half = 1; half < n; half *= 2) {
    for (std::size_t block = 0; block < n; block += 2 * half) {
      for (std::size_t j = block; j < block + half; ++j) x[j] ^= x[j + half];
    }
  }
  return x;
}

Bits polar_encode(std::span<const std::uint8_t> info_bits, const PolarCodeConfig& config) {
  config.validate();
  if (static_cast<int>(info_bits.size()) != config.info_length) {
    throw SizeMismatchError("polar_encode: expected " + std::to_string(config.info_length) +
                            " info bits, got " + std::to_string(info_bits.size()));
  }
  const auto frozen = config.resolved_frozen_set();
  std::vector<std::uint8_t> is_frozen(config.block_length, 0);
  for (int f : frozen) is_frozen[f] = 1;
  Bits u(config.block_length, 0);
  std::size_t next = 0;
  for (int i = 0; i < config.block_length; ++i) {
    if (!is_frozen[i]) u[i] = info_bits[next++] ? 1 : 0;
  }
  return polar_transform(u);
}

Bits polar_encode_payload(std::span<const std::uint8_t> payload_bits,
                          const PolarCodeConfig& config) {
  if (static_cast<int>(payload_bits.size()) != config.payload_length()) {
    throw SizeMismatchError("polar_encode_payload: expected " +
                            std::to_string(config.payload_length()) + " payload bits");
  }
  const Bits info = crc_append(payload_bits, config.crc);
  return polar_encode(info, config);
}

SclDecoder::SclDecoder(PolarCodeConfig config) : config_(std::move(config)) {
  config_.validate();
  frozen_.assign(config_.block_length, 0);
  for (int f : config_.resolved_frozen_set()) frozen_[f] = 1;
  stages_ = std::countr_zero(static_cast<unsigned>(config_.block_length));
}

SclResult SclDecoder::decode(std::span<const double> llrs) const {
  const int n_total = config_.block_length;
  const int stages = stages_;
  if (static_cast<int>(llrs.size()) != n_total) {
    throw SizeMismatchError("scl_decode: expected " + std::to_string(n_total) + " LLRs, got " +
                            std::to_string(llrs.size()));
  }
  for (double v : llrs) {
    if (!std::isfinite(v)) throw std::invalid_argument("scl_decode: non-finite LLR");
  }

  std::vector<Path> paths(1);
  {
    Path& root = paths.front();
    root.alpha.resize(stages + 1);
    root.left.resize(stages + 1);
    for (int d = 0; d <= stages; ++d) {
      root.alpha[d].assign(static_cast<std::size_t>(n_total >> d), 0.0);
      root.left[d].assign(static_cast<std::size_t>(n_total >> d), 0);
    }
    root.alpha[0].assign(llrs.begin(), llrs.end());
    root.u.reserve(n_total);
  }

  const auto descend = [stages](Path& p, int leaf) {
    int start = 1;
    if (leaf > 0) {
      const int top = std::bit_width(static_cast<unsigned>(leaf ^ (leaf - 1))) - 1;
      start = stages - top;
      const auto& parent = p.alpha[start - 1];
      auto& child = p.alpha[start];
      const std::size_t half = child.size();
      for (std::size_t j = 0; j < half; ++j) {
        child[j] = parent[j + half] + (p.left[start][j] ? -parent[j] : parent[j]);
      }
      ++start;
    }
    for (int d = start; d <= stages; ++d) {
      const auto& parent = p.alpha[d - 1];
      auto& child = p.alpha[d];
      const std::size_t half = child.size();
      for (std::size_t j = 0; j < half; ++j) child[j] = boxplus(parent[j], parent[j + half]);
    }
  };

  const auto commit = [stages](Path& p, int leaf, std::uint8_t bit) {
    p.u.push_back(bit);
    std::vector<std::uint8_t> cur{bit};
    for (int d = stages; d > 0; --d) {
      const int node = leaf >> (stages - d);
      if ((node & 1) == 0) {
        p.left[d] = std::move(cur);
        return;
      }
      std::vector<std::uint8_t> merged(cur.size() * 2);
      const auto& left = p.left[d];
      for (std::size_t j = 0; j < cur.size(); ++j) {
        merged[j] = left[j] ^ cur[j];
        merged[j + cur.size()] = cur[j];
      }
      cur = std::move(merged);
    }
  };

  struct Candidate {
    double metric;
    std::size_t path;
    std::uint8_t bit;
  };
  std::vector<Candidate> candidates;

  for (int leaf = 0; leaf < n_total; ++leaf) {
    for (auto& p : paths) descend(p, leaf);
    if (frozen_[leaf]) {
      for (auto& p : paths) {
        p.metric += bit_penalty(p.alpha[stages][0], 0);
        commit(p, leaf, 0);
      }
      continue;
    }
    candidates.clear();
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const double llr = paths[i].alpha[stages][0];
      candidates.push_back({paths[i].metric + bit_penalty(llr, 0), i, 0});
      candidates.push_back({paths[i].metric + bit_penalty(llr, 1), i, 1});
    }
    const std::size_t keep =
        std::min(candidates.size(), static_cast<std::size_t>(config_.list_size));
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.metric < b.metric; });
    candidates.resize(keep);

    std::vector<Path> next;
    next.reserve(keep);
    std::vector<int> uses(paths.size(), 0);
    for (const auto& c : candidates) ++uses[c.path];
    for (const auto& c : candidates) {
      // The last user of a path takes it over; earlier users copy.
      if (--uses[c.path] == 0) {
        next.push_back(std::move(paths[c.path]));
      } else {
        next.push_back(paths[c.path]);
      }
      next.back().metric = c.metric;
      commit(next.back(), leaf, c.bit);
    }
    paths = std::move(next);
  }

  std::stable_sort(paths.begin(), paths.end(),
                   [](const Path& a, const Path& b) { return a.metric < b.metric; });

  const auto extract = [&](const Path& p) {
    Bits info;
    info.reserve(config_.info_length);
    for (int i = 0; i < n_total; ++i) {
      if (!frozen_[i]) info.push_back(p.u[i]);
    }
    return info;
  };

  SclResult result;
  const Path* chosen = &paths.front();
  Bits info = extract(*chosen);
  bool ok = crc_check(info, config_.crc);
  if (!ok) {
    for (const auto& p : paths) {
      Bits candidate = extract(p);
      if (crc_check(candidate, config_.crc)) {
        chosen = &p;
        info = std::move(candidate);
        ok = true;
        break;
      }
    }
  }
  result.crc_ok = ok;
  result.path_metric = chosen->metric;
  result.payload.assign(info.begin(), info.begin() + config_.payload_length());
  return result;
}

SclResult scl_decode(const SoftBits& soft, const PolarCodeConfig& config) {
  return SclDecoder(config).decode(soft.llrs);
}

}  // namespace evlc
