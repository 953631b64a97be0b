#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evlc/frame.hpp"

namespace evlc {

/// Generator polynomial without the implicit leading term, MSB-first division.
struct CrcSpec {
  int width = 8;
  std::uint32_t polynomial = 0x07;
};

struct PolarCodeConfig {
  int block_length = 128;  // N
  int info_length = 48;    // K, CRC bits included
  int list_size = 8;       // L
  CrcSpec crc;
  // Empty selects the Bhattacharyya construction.
  std::vector<int> frozen_set;

  void validate() const;
  int payload_length() const { return info_length - crc.width; }
  // Frozen set actually used (explicit or constructed), sorted.
  std::vector<int> resolved_frozen_set() const;
};

struct SoftBits {
  std::vector<double> llrs;  // > 0 favours bit 0
};

struct SclResult {
  Bits payload;  // info bits with the CRC stripped
  bool crc_ok = false;
  double path_metric = 0.0;
};

// Bhattacharyya parameters of the N synthetic channels for a BEC with erasure
// probability z0; index MSB is the first (channel-side) polarization step.
std::vector<double> bhattacharyya_parameters(int block_length, double z0 = 0.5);

std::vector<int> build_frozen_set(int block_length, int info_length);

std::uint32_t crc_remainder(std::span<const std::uint8_t> bits, const CrcSpec& spec = {});
Bits crc_append(std::span<const std::uint8_t> bits, const CrcSpec& spec = {});
bool crc_check(std::span<const std::uint8_t> bits_with_crc, const CrcSpec& spec = {});

inline Bits crc8_append(std::span<const std::uint8_t> bits) { return crc_append(bits); }
inline bool crc8_check(std::span<const std::uint8_t> bits) { return crc_check(bits); }

// x = u F^{(x)n} with F = [[1,0],[1,1]]; its own inverse.
Bits polar_transform(std::span<const std::uint8_t> u);

// info_bits has K entries (payload followed by CRC).
Bits polar_encode(std::span<const std::uint8_t> info_bits, const PolarCodeConfig& config);

// Attaches the CRC to a payload and encodes.
Bits polar_encode_payload(std::span<const std::uint8_t> payload_bits,
                          const PolarCodeConfig& config);

SclResult scl_decode(const SoftBits& soft, const PolarCodeConfig& config);

/*
 * Precomputed decoder state for repeated decodes with one configuration.
 * Safe to share between threads; decode() keeps all mutable state local.
 */
class SclDecoder {
 public:
  explicit SclDecoder(PolarCodeConfig config);
  SclResult decode(std::span<const double> llrs) const;
  const PolarCodeConfig& config() const { return config_; }

 private:
  PolarCodeConfig config_;
  std::vector<std::uint8_t> frozen_;  // per index
  int stages_ = 0;
};

}  // namespace evlc
