#include "crag/retrieval.hpp"

#include <json.hpp>

#include "crag/errors.hpp"

using nlohmann::json;

namespace crag {

std::string to_string(Comparison c) {
    return c == Comparison::geq ? "geq" : "strict-gt";
}

Comparison comparison_from_string(const std::string& s) {
    if (s == "geq")
        return Comparison::geq;
    if (s == "strict-gt")
        return Comparison::strict_gt;
    throw ConfigError("retrieval.comparison: unknown value '" + s + "' (expected geq|strict-gt)");
}

RetrievedContext conformal_retrieve(const std::string& question, const VectorStore& store,
                                    const CalibrationReport& report, EmbeddingProvider& provider,
                                    const RetrieveOptions& opts, const WarnFn& warn) {
    if (report.embedder_id != store.embedder_id())
        throw ContractError("calibration report embedder '" + report.embedder_id +
                            "' does not match store embedder '" + store.embedder_id() + "'");
    if (compute_threshold(report.scores, report.alpha, report.quantile_mode) != report.threshold)
        throw DataError("corrupt calibration report: threshold does not re-derive from scores");

    RetrievedContext ctx;
    ctx.question = question;
    ctx.threshold_used = report.threshold;
    ctx.comparison = opts.comparison;
    ctx.alpha = report.alpha;

    const EmbeddingVector qvec = provider.embed(question);
    const auto all = store.ranked_query(qvec, kAll, report.metric);
    std::vector<RankedHit> qualifying;
    for (const auto& hit : all) {
        bool keep = !report.threshold ||
                    (opts.comparison == Comparison::geq ? hit.score >= *report.threshold
                                                        : hit.score > *report.threshold);
        if (keep)
            qualifying.push_back(hit);
    }
    if (qualifying.size() > opts.budget) {
        qualifying.resize(opts.budget);
        ctx.truncated = true;
        ctx.truncation_reason = "budget";
        if (warn)
            warn("retrieved set truncated to budget " + std::to_string(opts.budget) +
                 "; the (1-alpha) coverage guarantee no longer holds for this query");
    }
    ctx.hits = std::move(qualifying);
    return ctx;
}

RetrievedContext top_k_retrieve(const std::string& question, const VectorStore& store,
                                EmbeddingProvider& provider, std::size_t k, Metric metric) {
    if (k < 1)
        throw ConfigError("top-k retrieval requires k >= 1");
    RetrievedContext ctx;
    ctx.question = question;
    ctx.threshold_absent = true;
    const EmbeddingVector qvec = provider.embed(question);
    ctx.hits = store.ranked_query(qvec, k, metric);
    return ctx;
}

std::string context_to_json(const RetrievedContext& ctx) {
    json hits = json::array();
    for (const auto& h : ctx.hits)
        hits.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}, {"rank", h.rank}});
    json j = {
        {"question", ctx.question},
        {"hits", hits},
        {"comparison", to_string(ctx.comparison)},
        {"truncated", ctx.truncated},
        {"alpha", ctx.alpha},
    };
    if (ctx.threshold_absent)
        j["threshold_used"] = "absent";
    else if (ctx.threshold_used)
        j["threshold_used"] = *ctx.threshold_used;
    else
        j["threshold_used"] = "RETRIEVE_ALL";
    if (ctx.truncated)
        j["truncation_reason"] = ctx.truncation_reason;
    return j.dump(2);
}

} // namespace crag
