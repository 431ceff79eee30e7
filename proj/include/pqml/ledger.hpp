#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pqml/hash.hpp"

namespace pqml {

// Insertion-ordered JSON keeps serialized key order fixed, which the hash
// chain requires.
using Json = nlohmann::ordered_json;

enum class RecordKind : uint8_t {
    QueryPosted,
    ResponsePosted,
    AssessorsAssigned,
    ScoreSealed,
    ScoreRevealed,
    RoundFinalized,
    RoundAborted,
    RewardsDistributed,
};

std::string to_string(RecordKind kind);
RecordKind record_kind_from_string(const std::string& name);

struct LedgerRecord {
    uint64_t seq = 0;
    int64_t time_us = 0;
    Hash256 prev_hash{};
    RecordKind kind = RecordKind::QueryPosted;
    Json body;

    // Canonical line bytes: fixed key order, no insignificant whitespace.
    std::string serialize() const;
};

class LedgerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LedgerParseError : public LedgerError {
public:
    LedgerParseError(size_t line, const std::string& what)
        : LedgerError("ledger parse error at line " + std::to_string(line) + ": " + what),
          line(line) {}
    size_t line;
};

// Single-writer append-only hash-chained JSON Lines file.
class LedgerWriter {
public:
    explicit LedgerWriter(const std::string& path);

    LedgerRecord append(RecordKind kind, Json body, int64_t time_us);
    uint64_t size() const { return next_seq_; }
    void flush() { out_.flush(); }

private:
    std::ofstream out_;
    std::string path_;
    uint64_t next_seq_ = 0;
    Hash256 prev_hash_{};  // 32 zero bytes before the first record
};

std::vector<LedgerRecord> read_ledger(const std::string& path);

struct ChainVerification {
    bool ok = true;
    uint64_t first_bad_seq = 0;  // valid only when !ok
};

// Recomputes every prev_hash link; reports the first record whose link or
// seq is wrong. Malformed lines raise LedgerParseError.
ChainVerification verify_chain(const std::string& path);

}  // namespace pqml
