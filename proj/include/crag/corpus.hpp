#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace crag {

struct Document {
    std::string doc_id;
    std::string source_path;
    std::string text;
    std::map<std::string, std::string> metadata;
};

struct TokenSpan {
    std::size_t start = 0; // inclusive token offset
    std::size_t end = 0;   // exclusive
};

struct Chunk {
    std::string chunk_id; // "{doc_id}#{ordinal:06d}"
    std::string doc_id;
    std::size_t ordinal = 0;
    std::string text; // verbatim substring of the document
    TokenSpan token_span;
};

struct ChunkingConfig {
    std::size_t chunk_size = 256; // tokens
    std::size_t overlap = 32;    // tokens
};

// One whitespace-delimited token and its character extent in the source text.
struct TokenPos {
    std::size_t char_begin = 0;
    std::size_t char_end = 0;
};

std::vector<TokenPos> tokenize_whitespace(const std::string& text);

// Loads every regular file under root (or each file in an explicit list) as one
// Document. doc_id is the path relative to root, ordering is lexicographic.
// Whitespace-only or undecodable files are rejected per-file; an empty result
// is fatal.
struct LoadResult {
    std::vector<Document> documents;
    std::vector<std::string> rejected; // "path: reason"
};

LoadResult load_corpus(const std::string& root);
LoadResult load_corpus_files(const std::vector<std::string>& paths);

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg);

std::string make_chunk_id(const std::string& doc_id, std::size_t ordinal);

} // namespace crag
