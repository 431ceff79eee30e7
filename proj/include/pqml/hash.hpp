#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pqml {

using Hash256 = std::array<uint8_t, 32>;

Hash256 sha256(const uint8_t* data, size_t len);
Hash256 sha256(const std::vector<uint8_t>& data);
Hash256 sha256(const std::string& data);

std::string to_hex(const uint8_t* data, size_t len);
std::string to_hex(const Hash256& hash);
std::string to_hex(const std::vector<uint8_t>& data);
std::vector<uint8_t> from_hex(const std::string& hex);

// Byte-buffer builder for hash inputs; integers go in big-endian.
class ByteWriter {
public:
    void put_u8(uint8_t v) { bytes_.push_back(v); }
    void put_u64(uint64_t v) {
        for (int i = 7; i >= 0; --i) {
            bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
        }
    }
    void put_bytes(const uint8_t* data, size_t len) {
        bytes_.insert(bytes_.end(), data, data + len);
    }
    void put_bytes(const std::vector<uint8_t>& data) {
        bytes_.insert(bytes_.end(), data.begin(), data.end());
    }
    void put_str(const std::string& s) {
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    const std::vector<uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<uint8_t> bytes_;
};

// Deterministic hash-based random stream: value i is derived from
// SHA-256(seed || label || node || i). Every node/purpose gets its own
// independent stream so simulations replay bit-exactly.
class DetStream {
public:
    DetStream(uint64_t seed, const std::string& label, uint64_t node = 0)
        : seed_(seed), label_(label), node_(node) {}

    uint64_t next_u64();
    // Uniform in the open interval (0,1).
    double next_unit();
    double uniform(double lo, double hi);
    // Standard normal via the inverse-CDF of next_unit().
    double normal();
    double lognormal(double mu, double sigma);
    // 32 fresh bytes, for commitment nonces.
    std::array<uint8_t, 32> next_bytes32();

private:
    uint64_t seed_;
    std::string label_;
    uint64_t node_;
    uint64_t counter_ = 0;
};

// Inverse standard normal CDF. Acklam's rational approximation refined by
// one Halley step against erfc; absolute error below 1e-9 on (0,1).
double inverse_normal_cdf(double p);

}  // namespace pqml
