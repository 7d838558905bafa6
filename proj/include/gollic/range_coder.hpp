#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gollic {

class CodecError : public std::runtime_error {
 public:
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

// Arithmetic coder over 16-bit integer CDFs. 32-bit interval registers with
// pending-bit renormalization (no carry propagation into emitted bytes),
// byte-aligned output. Whole-stream overhead is bounded by a few bits, well
// under the 32-bit slack budget.
class ArithmeticEncoder {
 public:
  // cum_lo/cum_hi are cumulative masses out of 65536, cum_hi > cum_lo.
  void encode(uint32_t cum_lo, uint32_t cum_hi) {
    if (cum_hi <= cum_lo || cum_hi > 65536)
      throw CodecError("arithmetic encode: invalid CDF interval");
    uint64_t range = static_cast<uint64_t>(high_) - low_ + 1;
    high_ = low_ + static_cast<uint32_t>((range * cum_hi) >> 16) - 1;
    low_ = low_ + static_cast<uint32_t>((range * cum_lo) >> 16);
    for (;;) {
      if (high_ < 0x80000000u) {
        emit(0);
      } else if (low_ >= 0x80000000u) {
        emit(1);
        low_ -= 0x80000000u;
        high_ -= 0x80000000u;
      } else if (low_ >= 0x40000000u && high_ < 0xC0000000u) {
        ++pending_;
        low_ -= 0x40000000u;
        high_ -= 0x40000000u;
      } else {
        break;
      }
      low_ <<= 1;
      high_ = (high_ << 1) | 1;
    }
    ++count_;
  }

  void encode_symbol(const uint32_t* cdf, int sym) { encode(cdf[sym], cdf[sym + 1]); }

  uint64_t symbol_count() const { return count_; }

  std::vector<uint8_t> finish() {
    if (count_ > 0) {
      ++pending_;
      emit(low_ >= 0x40000000u ? 1 : 0);
    }
    if (nbits_ % 8 != 0) {
      // pad to byte boundary with zeros
      while (nbits_ % 8 != 0) put_bit(0);
    }
    return std::move(bytes_);
  }

 private:
  void emit(int bit) {
    put_bit(bit);
    while (pending_ > 0) {
      put_bit(1 - bit);
      --pending_;
    }
  }
  void put_bit(int bit) {
    if (nbits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<uint8_t>(0x80u >> (nbits_ % 8));
    ++nbits_;
  }

  uint32_t low_ = 0;
  uint32_t high_ = 0xFFFFFFFFu;
  uint64_t pending_ = 0;
  uint64_t nbits_ = 0;
  uint64_t count_ = 0;
  std::vector<uint8_t> bytes_;
};

class ArithmeticDecoder {
 public:
  ArithmeticDecoder(const uint8_t* bytes, size_t nbytes) : bytes_(bytes), nbytes_(nbytes) {
    for (int i = 0; i < 32; ++i) value_ = (value_ << 1) | next_bit();
  }

  // Cumulative target in [0, 65536) locating the next symbol.
  uint32_t target() const {
    uint64_t range = static_cast<uint64_t>(high_) - low_ + 1;
    return static_cast<uint32_t>(((static_cast<uint64_t>(value_ - low_) + 1) * 65536 - 1) / range);
  }

  void consume(uint32_t cum_lo, uint32_t cum_hi) {
    uint64_t range = static_cast<uint64_t>(high_) - low_ + 1;
    high_ = low_ + static_cast<uint32_t>((range * cum_hi) >> 16) - 1;
    low_ = low_ + static_cast<uint32_t>((range * cum_lo) >> 16);
    for (;;) {
      if (high_ < 0x80000000u) {
      } else if (low_ >= 0x80000000u) {
        low_ -= 0x80000000u;
        high_ -= 0x80000000u;
        value_ -= 0x80000000u;
      } else if (low_ >= 0x40000000u && high_ < 0xC0000000u) {
        low_ -= 0x40000000u;
        high_ -= 0x40000000u;
        value_ -= 0x40000000u;
      } else {
        break;
      }
      low_ <<= 1;
      high_ = (high_ << 1) | 1;
      value_ = (value_ << 1) | next_bit();
    }
  }

  int decode_symbol(const uint32_t* cdf, int count) {
    uint32_t t = target();
    int lo = 0, hi = count;  // invariant: cdf[lo] <= t < cdf[hi]
    while (hi - lo > 1) {
      int mid = (lo + hi) / 2;
      if (cdf[mid] <= t)
        lo = mid;
      else
        hi = mid;
    }
    consume(cdf[lo], cdf[lo + 1]);
    return lo;
  }

 private:
  uint32_t next_bit() {
    // Legitimate streams read at most ~32 bits past the written payload;
    // anything further means the stream was truncated.
    if (bitpos_ > nbytes_ * 8 + 64) throw CodecError("arithmetic decode: truncated stream");
    uint32_t bit = 0;
    if (bitpos_ < nbytes_ * 8) bit = (bytes_[bitpos_ / 8] >> (7 - bitpos_ % 8)) & 1u;
    ++bitpos_;
    return bit;
  }

  const uint8_t* bytes_;
  size_t nbytes_;
  size_t bitpos_ = 0;
  uint32_t low_ = 0;
  uint32_t high_ = 0xFFFFFFFFu;
  uint32_t value_ = 0;
};

// Uniform CDF over `count` symbols: 65536 split by largest remainder, which
// for equal masses means the first (65536 mod count) symbols are one wider.
inline std::vector<uint32_t> uniform_cdf(int count) {
  if (count < 1 || count > 65536) throw CodecError("uniform_cdf: bad alphabet size");
  std::vector<uint32_t> cdf(static_cast<size_t>(count) + 1);
  uint32_t base = 65536u / static_cast<uint32_t>(count);
  uint32_t extra = 65536u % static_cast<uint32_t>(count);
  uint32_t acc = 0;
  for (int i = 0; i < count; ++i) {
    cdf[static_cast<size_t>(i)] = acc;
    acc += base + (static_cast<uint32_t>(i) < extra ? 1 : 0);
  }
  cdf[static_cast<size_t>(count)] = acc;
  return cdf;
}

}  // namespace gollic
