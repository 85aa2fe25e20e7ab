#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crag {

enum class Metric { cosine, dot };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

struct EmbeddingVector {
    std::vector<double> values;
    std::string embedder_id;

    std::size_t dim() const { return values.size(); }
};

// cosine = dot/(|a||b|), defined as 0.0 when either norm is zero.
// Throws ContractError on dim or embedder_id mismatch.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b, Metric metric);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string embedder_id() const = 0;
    virtual std::size_t dim() const = 0;
    // Results are in input order, one vector per text.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;

    EmbeddingVector embed(const std::string& text);
};

// Deterministic offline embedder: lowercase, split on non-alphanumeric,
// FNV-1a 64 hash each token into one of `dim` buckets, L2-normalize.
// No tokens leaves the zero vector.
class ReferenceEmbedder final : public EmbeddingProvider {
public:
    explicit ReferenceEmbedder(std::size_t dim);

    std::string embedder_id() const override { return id_; }
    std::size_t dim() const override { return dim_; }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    std::size_t dim_;
    std::string id_;
};

std::uint64_t fnv1a64(const std::string& bytes);

} // namespace crag
