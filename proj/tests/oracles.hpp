#pragma once

// Brute-force reference computations used to freeze expected values in tests.
// Nothing here calls into the code paths under test.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace evlc::oracle {

using Bits = std::vector<std::uint8_t>;

// Rising edges of a chip string, with the chip preceding index 0 given.
inline std::vector<int> scan_rising(const Bits& chips, int before) {
  std::vector<int> out;
  int prev = before;
  for (std::size_t i = 0; i < chips.size(); ++i) {
    if (chips[i] == 1 && prev == 0) out.push_back(static_cast<int>(i));
    prev = chips[i];
  }
  return out;
}

// Explicit Kronecker power of [[1,0],[1,1]], row-major N x N.
inline std::vector<Bits> kronecker_generator(int n) {
  std::vector<Bits> g{{1}};
  while (static_cast<int>(g.size()) < n) {
    const std::size_t m = g.size();
    std::vector<Bits> next(2 * m, Bits(2 * m, 0));
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        next[r][c] = g[r][c];          // [[G, 0],
        next[r + m][c] = g[r][c];      //  [G, G]]
        next[r + m][c + m] = g[r][c];
      }
    }
    g = std::move(next);
  }
  return g;
}

inline Bits multiply(const Bits& u, const std::vector<Bits>& g) {
  Bits x(g.size(), 0);
  for (std::size_t r = 0; r < u.size(); ++r) {
    if (!u[r]) continue;
    for (std::size_t c = 0; c < x.size(); ++c) x[c] ^= g[r][c];
  }
  return x;
}

inline std::uint32_t crc_bitwise(const Bits& bits, int width, std::uint32_t poly) {
  // Long division of bits * x^width by (x^width + poly).
  Bits work = bits;
  work.resize(bits.size() + width, 0);
  Bits divisor(width + 1, 0);
  divisor[0] = 1;
  for (int i = 0; i < width; ++i) divisor[i + 1] = (poly >> (width - 1 - i)) & 1u;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!work[i]) continue;
    for (int j = 0; j <= width; ++j) work[i + j] ^= divisor[j];
  }
  std::uint32_t rem = 0;
  for (int i = 0; i < width; ++i) rem = (rem << 1) | work[bits.size() + i];
  return rem;
}

// log P(y | codeword) up to a constant, with LLR > 0 favouring 0.
inline double codeword_loglik(const Bits& x, const std::vector<double>& llr) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] ? -llr[i] : llr[i];
    s += -std::log1p(std::exp(-v));
  }
  return s;
}

struct MlResult {
  Bits payload;
  bool found = false;
};

// Exhaustive maximum likelihood over all payloads whose CRC-extended info
// word is encoded with the given frozen mask.
inline MlResult ml_decode(const std::vector<double>& llr, const std::vector<std::uint8_t>& frozen,
                          int payload_bits, int crc_width, std::uint32_t crc_poly) {
  const int n = static_cast<int>(llr.size());
  const auto g = kronecker_generator(n);
  MlResult best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::uint32_t p = 0; p < (1u << payload_bits); ++p) {
    Bits info(payload_bits);
    for (int i = 0; i < payload_bits; ++i) info[i] = (p >> (payload_bits - 1 - i)) & 1u;
    const auto rem = crc_bitwise(info, crc_width, crc_poly);
    Bits full = info;
    for (int i = crc_width - 1; i >= 0; --i) full.push_back((rem >> i) & 1u);
    Bits u(n, 0);
    std::size_t k = 0;
    for (int i = 0; i < n; ++i) {
      if (!frozen[i]) u[i] = full[k++];
    }
    const double ll = codeword_loglik(multiply(u, g), llr);
    if (ll > best_ll) {
      best_ll = ll;
      best.payload = info;
      best.found = true;
    }
  }
  return best;
}

// Erasure probability of u_i under genie-aided successive cancellation on a
// BEC(1/2), by enumerating every erasure pattern of the N channel outputs.
inline std::vector<double> bec_erasure_probabilities(int n) {
  const auto g = kronecker_generator(n);
  std::vector<double> prob(n, 0.0);
  for (std::uint32_t pattern = 0; pattern < (1u << n); ++pattern) {
    for (int i = 0; i < n; ++i) {
      // u_i is ambiguous iff some v with v_{<i} = 0, v_i = 1 maps to a word
      // that vanishes on every unerased output.
      bool ambiguous = false;
      const int tail = n - i - 1;
      for (std::uint32_t t = 0; t < (1u << tail) && !ambiguous; ++t) {
        Bits v(n, 0);
        v[i] = 1;
        for (int j = 0; j < tail; ++j) v[i + 1 + j] = (t >> j) & 1u;
        const Bits x = multiply(v, g);
        bool vanishes = true;
        for (int c = 0; c < n; ++c) {
          const bool erased = (pattern >> c) & 1u;
          if (!erased && x[c]) {
            vanishes = false;
            break;
          }
        }
        ambiguous = vanishes;
      }
      if (ambiguous) prob[i] += 1.0;
    }
  }
  for (auto& p : prob) p /= static_cast<double>(1u << n);
  return prob;
}

}  // namespace evlc::oracle
