#include <doctest.h>

#include <set>

#include "pqml/commitment.hpp"
#include "pqml/hash.hpp"

using namespace pqml;

namespace {

const NodeId kAssessor{42, NodeRole::Assessor};

std::array<uint8_t, 32> rand32(DetStream& stream) { return stream.next_bytes32(); }

}  // namespace

TEST_CASE("seal/open round trip for both schemes") {
    DetStream stream(1, "commit-roundtrip");
    for (auto scheme : {SealScheme::HashCommit, SealScheme::KeypairSeal}) {
        CAPTURE(to_string(scheme));
        for (int i = 0; i < 50; ++i) {
            QualityScore score{static_cast<int64_t>(stream.next_u64() % 10'000'001)};
            auto result = seal(score, 7, kAssessor, rand32(stream), scheme);
            CHECK(result.sealed.scheme == scheme);
            CHECK(result.sealed.commitment.size() ==
                  (scheme == SealScheme::HashCommit ? 32u : 64u));
            CHECK(result.reveal.opening.size() == 32u);
            CHECK(open(result.sealed, result.reveal) == score);
        }
    }
}

TEST_CASE("binding: any mutation fails verification") {
    DetStream stream(2, "commit-binding");
    for (auto scheme : {SealScheme::HashCommit, SealScheme::KeypairSeal}) {
        CAPTURE(to_string(scheme));
        auto result = seal(QualityScore{7'250'000}, 3, kAssessor, rand32(stream), scheme);

        auto tampered_score = result.reveal;
        tampered_score.score.micros += 1;  // one micro-unit
        CHECK_THROWS_AS(open(result.sealed, tampered_score), VerificationError);

        auto tampered_round = result.reveal;
        tampered_round.round_id = 4;
        CHECK_THROWS_AS(open(result.sealed, tampered_round), VerificationError);

        auto tampered_node = result.reveal;
        tampered_node.assessor.id = 43;
        CHECK_THROWS_AS(open(result.sealed, tampered_node), VerificationError);

        auto tampered_opening = result.reveal;
        tampered_opening.opening[0] ^= 0x01;
        CHECK_THROWS_AS(open(result.sealed, tampered_opening), VerificationError);

        auto tampered_commit = result.sealed;
        tampered_commit.commitment[0] ^= 0x01;
        CHECK_THROWS_AS(open(tampered_commit, result.reveal), VerificationError);

        // The error names the misbehaving assessor.
        try {
            open(result.sealed, tampered_score);
            FAIL("expected VerificationError");
        } catch (const VerificationError& e) {
            CHECK(e.assessor.id == kAssessor.id);
        }
    }
}

TEST_CASE("hiding: same score, different nonces, distinct commitments") {
    DetStream stream(3, "commit-hiding");
    QualityScore score{5'000'000};
    auto a = seal(score, 1, kAssessor, rand32(stream));
    auto b = seal(score, 1, kAssessor, rand32(stream));
    CHECK(a.sealed.commitment != b.sealed.commitment);
}

TEST_CASE("determinism: identical randomness gives identical bytes") {
    std::array<uint8_t, 32> randomness{};
    randomness[5] = 0xab;
    for (auto scheme : {SealScheme::HashCommit, SealScheme::KeypairSeal}) {
        auto a = seal(QualityScore{1'234'567}, 9, kAssessor, randomness, scheme);
        auto b = seal(QualityScore{1'234'567}, 9, kAssessor, randomness, scheme);
        CHECK(a.sealed.commitment == b.sealed.commitment);
        CHECK(a.reveal.opening == b.reveal.opening);
    }
}

TEST_CASE("binding smoke: no collisions over 1e5 random pairs") {
    DetStream stream(4, "commit-collide");
    std::set<std::vector<uint8_t>> seen;
    for (int i = 0; i < 100'000; ++i) {
        QualityScore score{static_cast<int64_t>(stream.next_u64() % 10'000'001)};
        auto result = seal(score, 1, kAssessor, rand32(stream));
        // Distinct (score, nonce) pairs may repeat when the score collides;
        // commitments must still never collide because the nonce differs.
        CHECK(seen.insert(result.sealed.commitment).second);
    }
}

TEST_CASE("hiding smoke: commitment bits are balanced over 1e4 seals") {
    DetStream stream(5, "commit-bits");
    QualityScore score{7'000'000};
    const int n = 10'000;
    std::array<int, 256> ones{};
    for (int i = 0; i < n; ++i) {
        auto result = seal(score, 1, kAssessor, rand32(stream));
        for (int bit = 0; bit < 256; ++bit) {
            if (result.sealed.commitment[bit / 8] >> (7 - bit % 8) & 1) ones[bit]++;
        }
    }
    for (int bit = 0; bit < 256; ++bit) {
        CHECK(ones[bit] >= n * 40 / 100);
        CHECK(ones[bit] <= n * 60 / 100);
    }
}

TEST_CASE("scheme names round trip") {
    CHECK(seal_scheme_from_string("hash-commit") == SealScheme::HashCommit);
    CHECK(seal_scheme_from_string("keypair-seal") == SealScheme::KeypairSeal);
    CHECK(to_string(SealScheme::HashCommit) == "hash-commit");
    CHECK(to_string(SealScheme::KeypairSeal) == "keypair-seal");
    CHECK_THROWS_AS(seal_scheme_from_string("bogus"), std::invalid_argument);
}
