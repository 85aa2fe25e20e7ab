#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "crag/errors.hpp"
#include "crag/vectorstore.hpp"
#include "support/oracles.hpp"
#include "support/stubs.hpp"

using namespace crag;
using namespace crag::testing;

namespace {

EmbeddedChunk entry(const std::string& id, std::vector<double> v,
                    const std::string& embedder = "map/test") {
    EmbeddedChunk e;
    e.chunk = Chunk{id, "doc", 0, "text of " + id, {0, 1}};
    e.vector = EmbeddingVector{std::move(v), embedder};
    return e;
}

VectorStore toy_store() {
    const double s = 1.0 / std::sqrt(2.0);
    return VectorStore({entry("A", {1, 0}), entry("B", {0, 1}), entry("C", {s, s})}, "map/test",
                       Metric::cosine, ChunkingConfig{}, "2026-01-01T00:00:00Z");
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("ranked_query returns all entries in score order") {
    auto store = toy_store();
    auto hits = store.ranked_query(EmbeddingVector{{1, 0}, "map/test"}, kAll);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].chunk_id == "A");
    CHECK(hits[0].score == doctest::Approx(1.0));
    CHECK(hits[1].chunk_id == "C");
    CHECK(hits[1].score == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(hits[2].chunk_id == "B");
    CHECK(hits[2].score == doctest::Approx(0.0));
    CHECK(hits[0].rank == 1);
    CHECK(hits[2].rank == 3);
}

TEST_CASE("ties break by ascending chunk_id") {
    VectorStore store({entry("z", {1, 0}), entry("a", {1, 0})}, "map/test", Metric::cosine,
                      ChunkingConfig{}, "");
    auto hits = store.ranked_query(EmbeddingVector{{1, 0}, "map/test"}, kAll);
    CHECK(hits[0].chunk_id == "a");
    CHECK(hits[1].chunk_id == "z");
}

TEST_CASE("limit=1 returns exactly the best hit") {
    auto hits = toy_store().ranked_query(EmbeddingVector{{1, 0}, "map/test"}, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].chunk_id == "A");
}

TEST_CASE("duplicate chunk_id is fatal and names the id") {
    CHECK_THROWS_WITH_AS(VectorStore({entry("dup", {1, 0}), entry("dup", {0, 1})}, "map/test",
                                     Metric::cosine, ChunkingConfig{}, ""),
                         doctest::Contains("dup"), DataError);
}

TEST_CASE("empty store is fatal") {
    CHECK_THROWS_WITH_AS(VectorStore({}, "map/test", Metric::cosine, ChunkingConfig{}, ""),
                         doctest::Contains("empty store"), DataError);
}

TEST_CASE("embedder mismatch on query is a contract error") {
    auto store = toy_store();
    CHECK_THROWS_AS(store.ranked_query(EmbeddingVector{{1, 0}, "other"}, kAll), ContractError);
}

TEST_CASE("build keeps insertion order and stamps metadata") {
    MapEmbedder emb({{"one", {1, 0}}, {"two", {0, 1}}}, 2);
    std::vector<Chunk> chunks{{"c1", "d", 0, "one", {0, 1}}, {"c2", "d", 1, "two", {1, 2}}};
    auto store = VectorStore::build(chunks, emb, Metric::cosine, ChunkingConfig{8, 2});
    CHECK(store.size() == 2);
    CHECK(store.entries()[0].chunk.chunk_id == "c1");
    CHECK(store.embedder_id() == "map/test");
    CHECK(store.chunking().chunk_size == 8);
    CHECK_FALSE(store.created_at().empty());
}

TEST_CASE("ranked_query(limit=k) is the k-prefix of limit=ALL") {
    SplitMix64 rng(11);
    std::vector<EmbeddedChunk> entries;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> v(4);
        for (auto& x : v)
            x = static_cast<double>(rng.bounded(100)) / 50.0 - 1.0;
        entries.push_back(entry("c" + std::to_string(i), v));
    }
    VectorStore store(entries, "map/test", Metric::cosine, ChunkingConfig{}, "");
    EmbeddingVector q{{0.3, -0.2, 0.9, 0.1}, "map/test"};
    auto all = store.ranked_query(q, kAll);
    for (std::size_t k : {1u, 3u, 17u, 40u, 100u}) {
        auto topk = store.ranked_query(q, k);
        REQUIRE(topk.size() == std::min<std::size_t>(k, all.size()));
        for (std::size_t i = 0; i < topk.size(); ++i) {
            CHECK(topk[i].chunk_id == all[i].chunk_id);
            CHECK(topk[i].score == all[i].score);
        }
    }
}

TEST_CASE("ranked_query matches the naive oracle on random stores, ties included") {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng.bounded(100);
        std::vector<EmbeddedChunk> entries;
        std::vector<OracleEntry> oracle_entries;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> v(3);
            // coarse grid injects plenty of exact ties
            for (auto& x : v)
                x = static_cast<double>(rng.bounded(5)) / 2.0 - 1.0;
            std::string id = "c" + std::to_string(i);
            entries.push_back(entry(id, v));
            oracle_entries.push_back(OracleEntry{id, v});
        }
        VectorStore store(entries, "map/test", Metric::cosine, ChunkingConfig{}, "");
        std::vector<double> qv{static_cast<double>(rng.bounded(5)) / 2.0 - 1.0,
                               static_cast<double>(rng.bounded(5)) / 2.0 - 1.0,
                               static_cast<double>(rng.bounded(5)) / 2.0 - 1.0};
        auto got = store.ranked_query(EmbeddingVector{qv, "map/test"}, kAll);
        auto want = oracle_filter(oracle_entries, qv, Metric::cosine, std::nullopt,
                                  Comparison::geq);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].chunk_id == want[i].chunk_id);
            CHECK(got[i].score == want[i].score);
        }
    }
}

TEST_CASE("insertion order does not affect query results") {
    std::vector<EmbeddedChunk> entries{entry("a", {1, 0}), entry("b", {1, 0}), entry("c", {0, 1})};
    VectorStore fwd(entries, "map/test", Metric::cosine, ChunkingConfig{}, "");
    std::reverse(entries.begin(), entries.end());
    VectorStore rev(entries, "map/test", Metric::cosine, ChunkingConfig{}, "");
    EmbeddingVector q{{0.7, 0.7}, "map/test"};
    auto h1 = fwd.ranked_query(q, kAll);
    auto h2 = rev.ranked_query(q, kAll);
    REQUIRE(h1.size() == h2.size());
    for (std::size_t i = 0; i < h1.size(); ++i) {
        CHECK(h1[i].chunk_id == h2[i].chunk_id);
        CHECK(h1[i].score == h2[i].score);
    }
}

TEST_CASE("save/load round-trip preserves ranked_query bit-exactly") {
    SplitMix64 rng(99);
    std::vector<EmbeddedChunk> entries;
    for (int i = 0; i < 7; ++i) {
        std::vector<double> v(5);
        for (auto& x : v)
            x = static_cast<double>(rng.next() % 200001) / 100000.0 - 1.0;
        entries.push_back(entry("c" + std::to_string(i), v));
    }
    VectorStore store(entries, "map/test", Metric::cosine, ChunkingConfig{64, 8},
                      "2026-01-02T03:04:05Z");
    const std::string path = temp_path("crag-store-roundtrip.jsonl");
    save_store(store, path);
    auto loaded = load_store(path);
    CHECK(loaded.embedder_id() == store.embedder_id());
    CHECK(loaded.chunking().chunk_size == 64);
    EmbeddingVector q{{0.1, -0.9, 0.4, 0.0, 0.2}, "map/test"};
    auto before = store.ranked_query(q, kAll);
    auto after = loaded.ranked_query(q, kAll);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].chunk_id == after[i].chunk_id);
        CHECK(before[i].score == after[i].score); // exact double equality
    }
    std::remove(path.c_str());
}

TEST_CASE("truncated store file is a corrupt-store error") {
    auto store = toy_store();
    const std::string path = temp_path("crag-store-trunc.jsonl");
    save_store(store, path);
    // chop mid-record
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content.substr(0, content.size() / 2 + 10);
    out.close();
    CHECK_THROWS_WITH_AS(load_store(path), doctest::Contains("corrupt store"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("header version mismatch is fatal and prints both values") {
    const std::string path = temp_path("crag-store-badver.jsonl");
    std::ofstream out(path, std::ios::binary);
    out << R"({"format":"conformal-rag-store","version":9,"embedder_id":"e","dim":2,)"
        << R"("metric_default":"cosine","chunking":{"size":4,"overlap":1}})"
        << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_store(path), doctest::Contains("9"), DataError);
    std::remove(path.c_str());
}
