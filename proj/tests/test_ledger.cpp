#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pqml/ledger.hpp"

using namespace pqml;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pqml-ledger-test-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_sample(const std::string& path, int records = 3) {
    LedgerWriter writer(path);
    for (int i = 0; i < records; ++i) {
        Json body;
        body["query_id"] = i + 1;
        body["attempt"] = 0;
        writer.append(RecordKind::QueryPosted, body, 1000 * (i + 1));
    }
    writer.flush();
    return path;
}

}  // namespace

TEST_CASE("genesis record links to the zero hash") {
    TempDir dir;
    auto path = write_sample(dir.file("a.jsonl"), 1);
    auto records = read_ledger(path);
    REQUIRE(records.size() == 1);
    CHECK(records[0].seq == 0);
    CHECK(records[0].prev_hash == Hash256{});
    CHECK(records[0].kind == RecordKind::QueryPosted);
    CHECK(records[0].body["query_id"] == 1);
}

TEST_CASE("each prev_hash equals the hash of the previous line") {
    TempDir dir;
    auto path = write_sample(dir.file("b.jsonl"), 5);
    auto records = read_ledger(path);
    REQUIRE(records.size() == 5);

    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 5);

    for (size_t i = 1; i < records.size(); ++i) {
        CHECK(records[i].seq == i);
        auto expect = sha256(
            std::vector<uint8_t>(lines[i - 1].begin(), lines[i - 1].end()));
        CHECK(records[i].prev_hash == expect);
    }
    CHECK(verify_chain(path).ok);
}

TEST_CASE("serialize round-trips through read_ledger byte-identically") {
    TempDir dir;
    auto path = write_sample(dir.file("c.jsonl"), 4);
    auto records = read_ledger(path);

    std::ifstream in(path);
    std::string line;
    size_t i = 0;
    while (std::getline(in, line)) {
        REQUIRE(i < records.size());
        CHECK(records[i].serialize() == line);
        ++i;
    }
    CHECK(i == records.size());
}

TEST_CASE("a flipped byte is detected with the right sequence number") {
    TempDir dir;
    auto path = write_sample(dir.file("d.jsonl"), 5);

    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), {});
    in.close();

    // Flip a digit inside line 3 (seq 2) without breaking JSON syntax.
    size_t nl = 0;
    size_t pos = 0;
    for (int skip = 0; skip < 2; ++skip) nl = content.find('\n', nl) + 1;
    pos = content.find("\"query_id\":3", nl);
    REQUIRE(pos != std::string::npos);
    content[pos + 12 - 1] = '9';  // 3 -> 9

    std::ofstream out(path, std::ios::trunc);
    out << content;
    out.close();

    auto result = verify_chain(path);
    CHECK_FALSE(result.ok);
    // The record itself still parses; the chain breaks at its successor,
    // whose prev_hash no longer matches the mutated bytes.
    CHECK(result.first_bad_seq == 3);
}

TEST_CASE("tampering with the last record is caught by canonical-form check") {
    TempDir dir;
    auto path = write_sample(dir.file("e.jsonl"), 2);

    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), {});
    in.close();
    size_t pos = content.rfind("\"query_id\":2");
    REQUIRE(pos != std::string::npos);
    // Adding whitespace keeps JSON meaning but changes the bytes.
    content.insert(pos, " ");
    std::ofstream(path, std::ios::trunc) << content;

    auto result = verify_chain(path);
    CHECK_FALSE(result.ok);
    CHECK(result.first_bad_seq == 1);
}

TEST_CASE("truncated or malformed lines raise a parse error") {
    TempDir dir;
    auto path = write_sample(dir.file("f.jsonl"), 3);

    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream(path, std::ios::trunc) << content.substr(0, content.size() - 10);

    CHECK_THROWS_AS(read_ledger(path), LedgerParseError);
    try {
        verify_chain(path);
        FAIL("expected LedgerParseError");
    } catch (const LedgerParseError& e) {
        CHECK(e.line == 3);
    }
}

TEST_CASE("missing required keys raise a parse error") {
    TempDir dir;
    auto path = dir.file("g.jsonl");
    std::ofstream(path) << "{\"seq\":0,\"time_us\":1}\n";
    CHECK_THROWS_AS(read_ledger(path), LedgerParseError);
}

TEST_CASE("record kinds round trip through names") {
    for (auto kind : {RecordKind::QueryPosted, RecordKind::ResponsePosted,
                      RecordKind::AssessorsAssigned, RecordKind::ScoreSealed,
                      RecordKind::ScoreRevealed, RecordKind::RoundFinalized,
                      RecordKind::RoundAborted, RecordKind::RewardsDistributed}) {
        CHECK(record_kind_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(record_kind_from_string("NotAKind"), std::invalid_argument);
}

TEST_CASE("read_ledger on a missing file raises") {
    CHECK_THROWS_AS(read_ledger("/nonexistent/dir/ledger.jsonl"), LedgerError);
}
