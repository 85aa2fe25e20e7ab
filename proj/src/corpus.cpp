#include "crag/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "crag/errors.hpp"

namespace fs = std::filesystem;

namespace crag {

namespace {

bool is_space_byte(unsigned char c) {
    return std::isspace(c) != 0;
}

bool all_whitespace(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return is_space_byte(static_cast<unsigned char>(c)); });
}

// Minimal UTF-8 well-formedness check; rejecting here keeps the corpus from
// silently shrinking downstream.
bool valid_utf8(const std::string& s) {
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t extra;
        if (c < 0x80)
            extra = 0;
        else if ((c >> 5) == 0x6)
            extra = 1;
        else if ((c >> 4) == 0xE)
            extra = 2;
        else if ((c >> 3) == 0x1E)
            extra = 3;
        else
            return false;
        if (i + extra >= s.size())
            return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2)
                return false;
        }
        i += extra + 1;
    }
    return true;
}

std::optional<std::string> read_file(const fs::path& p, std::string& reason) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        reason = "unreadable";
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        reason = "read error";
        return std::nullopt;
    }
    return buf.str();
}

LoadResult load_paths(const std::vector<std::pair<std::string, fs::path>>& ids_and_paths) {
    LoadResult out;
    for (const auto& [doc_id, path] : ids_and_paths) {
        std::string reason;
        auto text = read_file(path, reason);
        if (!text) {
            out.rejected.push_back(path.string() + ": " + reason);
            continue;
        }
        if (!valid_utf8(*text)) {
            out.rejected.push_back(path.string() + ": not valid UTF-8");
            continue;
        }
        if (all_whitespace(*text)) {
            out.rejected.push_back(path.string() + ": empty or whitespace-only");
            continue;
        }
        out.documents.push_back(Document{doc_id, path.string(), std::move(*text), {}});
    }
    if (out.documents.empty()) {
        std::string detail;
        for (const auto& r : out.rejected)
            detail += "\n  " + r;
        throw DataError("empty corpus: no loadable documents" + detail);
    }
    return out;
}

} // namespace

std::vector<TokenPos> tokenize_whitespace(const std::string& text) {
    std::vector<TokenPos> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space_byte(static_cast<unsigned char>(text[i])))
            ++i;
        if (i >= text.size())
            break;
        std::size_t begin = i;
        while (i < text.size() && !is_space_byte(static_cast<unsigned char>(text[i])))
            ++i;
        tokens.push_back(TokenPos{begin, i});
    }
    return tokens;
}

LoadResult load_corpus(const std::string& root) {
    fs::path rootp(root);
    if (!fs::exists(rootp))
        throw DataError("corpus path does not exist: " + root);
    std::vector<std::pair<std::string, fs::path>> files;
    if (fs::is_regular_file(rootp)) {
        files.emplace_back(rootp.filename().string(), rootp);
    } else {
        for (const auto& entry : fs::recursive_directory_iterator(rootp)) {
            if (entry.is_regular_file())
                files.emplace_back(fs::relative(entry.path(), rootp).generic_string(), entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return load_paths(files);
}

LoadResult load_corpus_files(const std::vector<std::string>& paths) {
    std::vector<std::pair<std::string, fs::path>> files;
    for (const auto& p : paths)
        files.emplace_back(fs::path(p).filename().string(), fs::path(p));
    std::sort(files.begin(), files.end());
    return load_paths(files);
}

std::string make_chunk_id(const std::string& doc_id, std::size_t ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06zu", ordinal);
    return doc_id + "#" + buf;
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg) {
    if (cfg.chunk_size < 1)
        throw ConfigError("chunking.size must be >= 1");
    if (cfg.overlap >= cfg.chunk_size)
        throw ConfigError("chunking.overlap must be < chunking.size");

    const auto tokens = tokenize_whitespace(doc.text);
    std::vector<Chunk> chunks;
    if (tokens.empty())
        return chunks;

    const std::size_t stride = cfg.chunk_size - cfg.overlap;
    std::size_t ordinal = 0;
    for (std::size_t start = 0; start < tokens.size(); start += stride) {
        std::size_t end = std::min(start + cfg.chunk_size, tokens.size());
        // Verbatim substring from first token start to last token end.
        std::size_t cbegin = tokens[start].char_begin;
        std::size_t cend = tokens[end - 1].char_end;
        chunks.push_back(Chunk{make_chunk_id(doc.doc_id, ordinal), doc.doc_id, ordinal,
                               doc.text.substr(cbegin, cend - cbegin), TokenSpan{start, end}});
        ++ordinal;
        if (end == tokens.size())
            break;
    }
    return chunks;
}

} // namespace crag
