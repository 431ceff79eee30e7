#pragma once

#include <array>
#include <vector>

#include "pqml/domain.hpp"
#include "pqml/hash.hpp"

namespace pqml {

enum class SealScheme : uint8_t { HashCommit = 0, KeypairSeal = 1 };

std::string to_string(SealScheme scheme);
SealScheme seal_scheme_from_string(const std::string& name);

struct SealedScore {
    SealScheme scheme = SealScheme::HashCommit;
    uint64_t round_id = 0;
    NodeId assessor;
    std::vector<uint8_t> commitment;  // 32 bytes hash-commit, 64 bytes signature
};

struct RevealRecord {
    uint64_t round_id = 0;
    NodeId assessor;
    QualityScore score;
    std::vector<uint8_t> opening;  // 32-byte nonce or 32-byte public key
};

struct SealResult {
    SealedScore sealed;
    RevealRecord reveal;
};

// Thrown by open() when a reveal does not match its commitment; carries
// the misbehaving assessor so consensus can flag it.
class VerificationError : public std::runtime_error {
public:
    VerificationError(const NodeId& assessor, const std::string& what)
        : std::runtime_error(what), assessor(assessor) {}
    NodeId assessor;
};

// Binds a score to a round and assessor without revealing it.
//   hash-commit:  H("PQML-commit-v1" || round || assessor || score || nonce)
//   keypair-seal: Ed25519 signature of (round || assessor || score) under a
//                 fresh key derived from the randomness; opening = public key.
SealResult seal(QualityScore score, uint64_t round_id, const NodeId& assessor,
                const std::array<uint8_t, 32>& randomness,
                SealScheme scheme = SealScheme::HashCommit);

// Verifies the reveal against its commitment and returns the score.
// Throws VerificationError on any mismatch.
QualityScore open(const SealedScore& sealed, const RevealRecord& reveal);

}  // namespace pqml
