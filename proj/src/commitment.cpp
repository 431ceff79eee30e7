#include "pqml/commitment.hpp"

#include <openssl/evp.h>

#include <memory>

namespace pqml {

namespace {

constexpr char kDomainSeparator[] = "PQML-commit-v1";

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct CtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using CtxPtr = std::unique_ptr<EVP_MD_CTX, CtxDeleter>;

std::vector<uint8_t> seal_message(uint64_t round_id, const NodeId& assessor,
                                  QualityScore score) {
    ByteWriter w;
    w.put_u64(round_id);
    w.put_u64(assessor.id);
    w.put_u8(static_cast<uint8_t>(assessor.role));
    auto score_bytes = micros_to_bytes(score.micros);
    w.put_bytes(score_bytes.data(), score_bytes.size());
    return w.bytes();
}

std::vector<uint8_t> hash_commitment(uint64_t round_id, const NodeId& assessor,
                                     QualityScore score,
                                     const std::vector<uint8_t>& nonce) {
    ByteWriter w;
    w.put_str(kDomainSeparator);
    w.put_bytes(seal_message(round_id, assessor, score));
    w.put_bytes(nonce);
    Hash256 h = sha256(w.bytes());
    return {h.begin(), h.end()};
}

}  // namespace

std::string to_string(SealScheme scheme) {
    return scheme == SealScheme::HashCommit ? "hash-commit" : "keypair-seal";
}

SealScheme seal_scheme_from_string(const std::string& name) {
    if (name == "hash-commit") return SealScheme::HashCommit;
    if (name == "keypair-seal") return SealScheme::KeypairSeal;
    throw std::invalid_argument("unknown seal scheme '" + name + "'");
}

SealResult seal(QualityScore score, uint64_t round_id, const NodeId& assessor,
                const std::array<uint8_t, 32>& randomness, SealScheme scheme) {
    SealResult out;
    out.sealed.scheme = scheme;
    out.sealed.round_id = round_id;
    out.sealed.assessor = assessor;
    out.reveal.round_id = round_id;
    out.reveal.assessor = assessor;
    out.reveal.score = score;

    if (scheme == SealScheme::HashCommit) {
        out.reveal.opening.assign(randomness.begin(), randomness.end());
        out.sealed.commitment =
            hash_commitment(round_id, assessor, score, out.reveal.opening);
        return out;
    }

    // keypair-seal: a fresh Ed25519 key per round, seeded from the
    // randomness so simulation replays are byte-identical.
    PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr,
                                             randomness.data(), randomness.size()));
    if (!key) throw std::runtime_error("seal: Ed25519 key derivation failed");

    auto msg = seal_message(round_id, assessor, score);
    CtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) {
        throw std::runtime_error("seal: sign init failed");
    }
    size_t sig_len = 64;
    out.sealed.commitment.resize(sig_len);
    if (EVP_DigestSign(ctx.get(), out.sealed.commitment.data(), &sig_len,
                       msg.data(), msg.size()) != 1 ||
        sig_len != 64) {
        throw std::runtime_error("seal: signing failed");
    }

    size_t pub_len = 32;
    out.reveal.opening.resize(pub_len);
    if (EVP_PKEY_get_raw_public_key(key.get(), out.reveal.opening.data(), &pub_len) != 1 ||
        pub_len != 32) {
        throw std::runtime_error("seal: public key export failed");
    }
    return out;
}

QualityScore open(const SealedScore& sealed, const RevealRecord& reveal) {
    if (sealed.round_id != reveal.round_id || !(sealed.assessor == reveal.assessor)) {
        throw VerificationError(reveal.assessor, "open: round or assessor mismatch");
    }
    if (sealed.scheme == SealScheme::HashCommit) {
        auto expected = hash_commitment(sealed.round_id, sealed.assessor,
                                        reveal.score, reveal.opening);
        if (expected != sealed.commitment) {
            throw VerificationError(reveal.assessor,
                                    "open: commitment mismatch for " +
                                        to_string(reveal.assessor));
        }
        return reveal.score;
    }

    if (reveal.opening.size() != 32 || sealed.commitment.size() != 64) {
        throw VerificationError(reveal.assessor, "open: malformed keypair-seal record");
    }
    PkeyPtr key(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr,
                                            reveal.opening.data(),
                                            reveal.opening.size()));
    if (!key) throw VerificationError(reveal.assessor, "open: bad public key");

    auto msg = seal_message(sealed.round_id, sealed.assessor, reveal.score);
    CtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx ||
        EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) {
        throw std::runtime_error("open: verify init failed");
    }
    if (EVP_DigestVerify(ctx.get(), sealed.commitment.data(),
                         sealed.commitment.size(), msg.data(), msg.size()) != 1) {
        throw VerificationError(reveal.assessor,
                                "open: signature mismatch for " +
                                    to_string(reveal.assessor));
    }
    return reveal.score;
}

}  // namespace pqml
