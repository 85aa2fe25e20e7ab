#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crag/calibration.hpp"
#include "crag/vectorstore.hpp"

namespace crag {

enum class Comparison { geq, strict_gt };

std::string to_string(Comparison c);
Comparison comparison_from_string(const std::string& s);

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

struct RetrievedContext {
    std::string question;
    std::vector<RankedHit> hits; // descending score
    Threshold threshold_used;    // nullopt = RETRIEVE_ALL
    bool threshold_absent = false; // true for the top-k baseline path
    Comparison comparison = Comparison::geq;
    bool truncated = false;
    std::string truncation_reason;
    double alpha = 0.0;
};

struct RetrieveOptions {
    std::size_t budget = kUnlimited; // max chunk count
    Comparison comparison = Comparison::geq;
};

RetrievedContext conformal_retrieve(const std::string& question, const VectorStore& store,
                                    const CalibrationReport& report, EmbeddingProvider& provider,
                                    const RetrieveOptions& opts = {}, const WarnFn& warn = {});

// Conventional fixed-k baseline, no threshold. k larger than the store clamps.
RetrievedContext top_k_retrieve(const std::string& question, const VectorStore& store,
                                EmbeddingProvider& provider, std::size_t k,
                                Metric metric = Metric::cosine);

std::string context_to_json(const RetrievedContext& ctx);

} // namespace crag
