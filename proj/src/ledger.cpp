#include "pqml/ledger.hpp"

namespace pqml {

namespace {

const char* kKindNames[] = {
    "QueryPosted",      "ResponsePosted", "AssessorsAssigned", "ScoreSealed",
    "ScoreRevealed",    "RoundFinalized", "RoundAborted",      "RewardsDistributed",
};

}  // namespace

std::string to_string(RecordKind kind) {
    return kKindNames[static_cast<size_t>(kind)];
}

RecordKind record_kind_from_string(const std::string& name) {
    for (size_t i = 0; i < std::size(kKindNames); ++i) {
        if (name == kKindNames[i]) return static_cast<RecordKind>(i);
    }
    throw std::invalid_argument("unknown record kind '" + name + "'");
}

std::string LedgerRecord::serialize() const {
    Json j;
    j["seq"] = seq;
    j["time_us"] = time_us;
    j["prev"] = to_hex(prev_hash);
    j["kind"] = to_string(kind);
    j["body"] = body;
    return j.dump();
}

LedgerWriter::LedgerWriter(const std::string& path) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw LedgerError("cannot open ledger file " + path);
}

LedgerRecord LedgerWriter::append(RecordKind kind, Json body, int64_t time_us) {
    LedgerRecord rec;
    rec.seq = next_seq_;
    rec.time_us = time_us;
    rec.prev_hash = prev_hash_;
    rec.kind = kind;
    rec.body = std::move(body);

    std::string line = rec.serialize();
    out_ << line << '\n';
    if (!out_) throw LedgerError("write failure on ledger file " + path_);

    prev_hash_ = sha256(line);  // hash excludes the trailing newline
    ++next_seq_;
    return rec;
}

namespace {

LedgerRecord parse_line(const std::string& line, size_t line_no) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const std::exception& e) {
        throw LedgerParseError(line_no, e.what());
    }
    try {
        LedgerRecord rec;
        rec.seq = j.at("seq").get<uint64_t>();
        rec.time_us = j.at("time_us").get<int64_t>();
        auto prev = from_hex(j.at("prev").get<std::string>());
        if (prev.size() != 32) throw std::invalid_argument("prev hash must be 32 bytes");
        std::copy(prev.begin(), prev.end(), rec.prev_hash.begin());
        rec.kind = record_kind_from_string(j.at("kind").get<std::string>());
        rec.body = j.at("body");
        return rec;
    } catch (const std::exception& e) {
        throw LedgerParseError(line_no, e.what());
    }
}

}  // namespace

std::vector<LedgerRecord> read_ledger(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LedgerError("cannot open ledger file " + path);
    std::vector<LedgerRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        out.push_back(parse_line(line, line_no));
    }
    return out;
}

ChainVerification verify_chain(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LedgerError("cannot open ledger file " + path);

    Hash256 expected_prev{};
    uint64_t expected_seq = 0;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        LedgerRecord rec = parse_line(line, line_no);
        if (rec.seq != expected_seq || rec.prev_hash != expected_prev ||
            rec.serialize() != line) {
            return {false, expected_seq};
        }
        expected_prev = sha256(line);
        ++expected_seq;
    }
    return {true, 0};
}

}  // namespace pqml
