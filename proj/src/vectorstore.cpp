#include "crag/vectorstore.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "crag/errors.hpp"

using nlohmann::json;

namespace crag {

namespace {
constexpr const char* kFormat = "conformal-rag-store";
constexpr int kVersion = 1;
} // namespace

std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

VectorStore::VectorStore(std::vector<EmbeddedChunk> entries, std::string embedder_id,
                         Metric metric_default, ChunkingConfig chunking, std::string created_at)
    : entries_(std::move(entries)), embedder_id_(std::move(embedder_id)),
      metric_default_(metric_default), chunking_(chunking), created_at_(std::move(created_at)) {
    if (entries_.empty())
        throw DataError("empty store: refusing to build a store with zero chunks");
    std::unordered_set<std::string> ids;
    for (const auto& e : entries_) {
        if (!ids.insert(e.chunk.chunk_id).second)
            throw DataError("duplicate chunk_id: " + e.chunk.chunk_id);
        if (e.vector.embedder_id != embedder_id_)
            throw ContractError("store embedder '" + embedder_id_ + "' vs chunk vector embedder '" +
                                e.vector.embedder_id + "' (chunk " + e.chunk.chunk_id + ")");
    }
}

VectorStore VectorStore::build(const std::vector<Chunk>& chunks, EmbeddingProvider& provider,
                               Metric metric_default, const ChunkingConfig& chunking) {
    if (chunks.empty())
        throw DataError("empty store: no chunks to embed");
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks)
        texts.push_back(c.text);
    auto vectors = provider.embed_batch(texts);
    if (vectors.size() != chunks.size())
        throw ContractError("provider returned " + std::to_string(vectors.size()) +
                            " vectors for " + std::to_string(chunks.size()) + " chunks");
    std::vector<EmbeddedChunk> entries;
    entries.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i)
        entries.push_back(EmbeddedChunk{chunks[i], std::move(vectors[i])});
    return VectorStore(std::move(entries), provider.embedder_id(), metric_default, chunking,
                       iso8601_utc_now());
}

std::vector<RankedHit> VectorStore::ranked_query(const EmbeddingVector& question_vector,
                                                 std::size_t limit) const {
    return ranked_query(question_vector, limit, metric_default_);
}

std::vector<RankedHit> VectorStore::ranked_query(const EmbeddingVector& question_vector,
                                                 std::size_t limit, Metric metric) const {
    if (question_vector.embedder_id != embedder_id_)
        throw ContractError("query embedder '" + question_vector.embedder_id +
                            "' does not match store embedder '" + embedder_id_ + "'");
    std::vector<RankedHit> hits;
    hits.reserve(entries_.size());
    for (const auto& e : entries_)
        hits.push_back(RankedHit{e.chunk.chunk_id, similarity(question_vector, e.vector, metric), 0});
    std::sort(hits.begin(), hits.end(), [](const RankedHit& a, const RankedHit& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    });
    if (limit < hits.size())
        hits.resize(limit);
    for (std::size_t i = 0; i < hits.size(); ++i)
        hits[i].rank = i + 1;
    return hits;
}

const Chunk* VectorStore::find_chunk(const std::string& chunk_id) const {
    for (const auto& e : entries_)
        if (e.chunk.chunk_id == chunk_id)
            return &e.chunk;
    return nullptr;
}

std::string VectorStore::header_line() const {
    json header = {
        {"format", kFormat},
        {"version", kVersion},
        {"embedder_id", embedder_id_},
        {"dim", entries_.front().vector.dim()},
        {"metric_default", to_string(metric_default_)},
        {"chunking", {{"size", chunking_.chunk_size}, {"overlap", chunking_.overlap}}},
        {"created_at", created_at_},
    };
    return header.dump();
}

void save_store(const VectorStore& store, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write store file: " + path);
        out << store.header_line() << "\n";
        for (const auto& e : store.entries()) {
            json rec = {
                {"chunk_id", e.chunk.chunk_id},
                {"doc_id", e.chunk.doc_id},
                {"ordinal", e.chunk.ordinal},
                {"text", e.chunk.text},
                {"token_span", {e.chunk.token_span.start, e.chunk.token_span.end}},
                {"vector", e.vector.values},
            };
            out << rec.dump() << "\n";
        }
        if (!out)
            throw DataError("write failed: " + path);
    }
    std::filesystem::rename(tmp, path);
}

VectorStore load_store(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open store file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError("corrupt store: empty file " + path);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError("corrupt store: bad header in " + path + ": " + e.what());
    }
    if (header.value("format", "") != kFormat)
        throw DataError("store header mismatch: format '" + header.value("format", "") +
                        "', expected '" + kFormat + "'");
    if (header.value("version", -1) != kVersion)
        throw DataError("store version mismatch: got " + std::to_string(header.value("version", -1)) +
                        ", expected " + std::to_string(kVersion));

    const std::string embedder_id = header.at("embedder_id").get<std::string>();
    const std::size_t dim = header.at("dim").get<std::size_t>();
    Metric metric = metric_from_string(header.at("metric_default").get<std::string>());
    ChunkingConfig chunking{header.at("chunking").at("size").get<std::size_t>(),
                            header.at("chunking").at("overlap").get<std::size_t>()};
    std::string created_at = header.value("created_at", "");

    std::vector<EmbeddedChunk> entries;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        json rec;
        try {
            rec = json::parse(line);
            EmbeddedChunk e;
            e.chunk.chunk_id = rec.at("chunk_id").get<std::string>();
            e.chunk.doc_id = rec.at("doc_id").get<std::string>();
            e.chunk.ordinal = rec.at("ordinal").get<std::size_t>();
            e.chunk.text = rec.at("text").get<std::string>();
            e.chunk.token_span.start = rec.at("token_span").at(0).get<std::size_t>();
            e.chunk.token_span.end = rec.at("token_span").at(1).get<std::size_t>();
            e.vector.values = rec.at("vector").get<std::vector<double>>();
            e.vector.embedder_id = embedder_id;
            if (e.vector.values.size() != dim)
                throw DataError("corrupt store: vector dim " + std::to_string(e.vector.values.size()) +
                                " != header dim " + std::to_string(dim) + " at line " +
                                std::to_string(lineno));
            entries.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw DataError("corrupt store: line " + std::to_string(lineno) + " of " + path + ": " +
                            ex.what());
        }
    }
    if (entries.empty())
        throw DataError("corrupt store: no records in " + path);
    return VectorStore(std::move(entries), embedder_id, metric, chunking, std::move(created_at));
}

} // namespace crag
