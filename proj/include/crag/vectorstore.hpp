#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "crag/corpus.hpp"
#include "crag/embedding.hpp"

namespace crag {

struct EmbeddedChunk {
    Chunk chunk;
    EmbeddingVector vector;
};

struct RankedHit {
    std::string chunk_id;
    double score = 0.0;
    std::size_t rank = 0; // 1-based
};

inline constexpr std::size_t kAll = std::numeric_limits<std::size_t>::max();

// Immutable after construction. Exact linear scan, ties broken by ascending
// chunk_id so results are a total order independent of insertion order.
class VectorStore {
public:
    VectorStore(std::vector<EmbeddedChunk> entries, std::string embedder_id,
                Metric metric_default, ChunkingConfig chunking, std::string created_at);

    static VectorStore build(const std::vector<Chunk>& chunks, EmbeddingProvider& provider,
                             Metric metric_default, const ChunkingConfig& chunking);

    std::vector<RankedHit> ranked_query(const EmbeddingVector& question_vector,
                                        std::size_t limit = kAll) const;
    std::vector<RankedHit> ranked_query(const EmbeddingVector& question_vector,
                                        std::size_t limit, Metric metric) const;

    const std::vector<EmbeddedChunk>& entries() const { return entries_; }
    const Chunk* find_chunk(const std::string& chunk_id) const;
    std::size_t size() const { return entries_.size(); }
    const std::string& embedder_id() const { return embedder_id_; }
    Metric metric_default() const { return metric_default_; }
    const ChunkingConfig& chunking() const { return chunking_; }
    const std::string& created_at() const { return created_at_; }

    // Header JSON rendered exactly as persisted (used for report fingerprints).
    std::string header_line() const;

private:
    std::vector<EmbeddedChunk> entries_;
    std::string embedder_id_;
    Metric metric_default_;
    ChunkingConfig chunking_;
    std::string created_at_;
};

// Versioned JSON Lines file: header line then one record per chunk.
// load(save(s)) reproduces every ranked_query score bit-exactly.
void save_store(const VectorStore& store, const std::string& path);
VectorStore load_store(const std::string& path);

std::string iso8601_utc_now();

} // namespace crag
