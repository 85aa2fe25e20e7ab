#include "crag/embedding.hpp"

#include <cctype>
#include <cmath>

#include "crag/errors.hpp"

namespace crag {

std::string to_string(Metric m) {
    return m == Metric::cosine ? "cosine" : "dot";
}

Metric metric_from_string(const std::string& s) {
    if (s == "cosine")
        return Metric::cosine;
    if (s == "dot")
        return Metric::dot;
    throw ConfigError("similarity.metric: unknown metric '" + s + "' (expected cosine|dot)");
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b, Metric metric) {
    if (a.dim() != b.dim())
        throw ContractError("similarity: dimension mismatch " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
    if (a.embedder_id != b.embedder_id)
        throw ContractError("similarity: embedder mismatch '" + a.embedder_id + "' vs '" +
                            b.embedder_id + "'");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        dot += a.values[i] * b.values[i];
    if (metric == Metric::dot)
        return dot;
    double na = 0.0, nb = 0.0;
    for (double v : a.values)
        na += v * v;
    for (double v : b.values)
        nb += v * v;
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

EmbeddingVector EmbeddingProvider::embed(const std::string& text) {
    auto out = embed_batch({text});
    if (out.size() != 1)
        throw ContractError("provider returned " + std::to_string(out.size()) +
                            " vectors for 1 input");
    return std::move(out.front());
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ReferenceEmbedder::ReferenceEmbedder(std::size_t dim) : dim_(dim) {
    if (dim_ < 2)
        throw ConfigError("embedding.dim must be >= 2 for the reference embedder");
    id_ = "reference/fnv1a-bucket/dim" + std::to_string(dim_);
}

std::vector<EmbeddingVector> ReferenceEmbedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> buckets(dim_, 0.0);
        std::string token;
        auto flush = [&] {
            if (!token.empty()) {
                buckets[fnv1a64(token) % dim_] += 1.0;
                token.clear();
            }
        };
        for (unsigned char c : text) {
            if (std::isalnum(c))
                token.push_back(static_cast<char>(std::tolower(c)));
            else
                flush();
        }
        flush();
        double norm = 0.0;
        for (double v : buckets)
            norm += v * v;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& v : buckets)
                v /= norm;
        }
        out.push_back(EmbeddingVector{std::move(buckets), id_});
    }
    return out;
}

} // namespace crag
