#include "crag/evaluation.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "crag/errors.hpp"

using nlohmann::json;

namespace crag {

namespace {

void check_disjoint(const std::vector<CalibrationQuestion>& calib,
                    const std::vector<CalibrationQuestion>& test) {
    if (calib.empty() || test.empty())
        throw DataError("both calibration and test splits must be non-empty");
    std::unordered_set<std::string> calib_ids;
    for (const auto& q : calib)
        if (!calib_ids.insert(q.question_id).second)
            throw DataError("duplicate question_id within calibration split: " + q.question_id);
    std::unordered_set<std::string> test_ids;
    for (const auto& q : test) {
        if (!test_ids.insert(q.question_id).second)
            throw DataError("duplicate question_id within test split: " + q.question_id);
        if (calib_ids.count(q.question_id))
            throw DataError("question_id appears in both splits: " + q.question_id);
    }
}

} // namespace

CoverageResult evaluate_coverage(const VectorStore& store,
                                 const std::vector<CalibrationQuestion>& calibration_questions,
                                 const std::vector<CalibrationQuestion>& test_questions,
                                 EmbeddingProvider& provider, RelevanceJudge& judge,
                                 const EvaluateOptions& opts, const WarnFn& warn) {
    check_disjoint(calibration_questions, test_questions);

    CalibrationOptions copts;
    copts.alpha = opts.alpha;
    copts.mode = opts.mode;
    copts.max_rank = opts.max_rank;
    copts.metric = opts.metric;
    CalibrationReport report =
        run_calibration(store, calibration_questions, provider, judge, copts, warn);

    CoverageResult result;
    result.alpha = opts.alpha;
    result.mode = opts.mode;
    result.threshold = report.threshold;

    std::vector<std::size_t> set_sizes;
    RetrieveOptions ropts;
    ropts.comparison = opts.comparison;
    for (const auto& q : test_questions) {
        auto outcome = label_question(q, store, provider, judge, opts.max_rank, opts.metric);
        for (const auto& w : outcome.warnings)
            if (warn)
                warn(w);
        if (!outcome.record) {
            ++result.n_excluded;
            continue;
        }
        auto ctx = conformal_retrieve(q.question, store, report, provider, ropts, warn);
        bool covered = std::any_of(ctx.hits.begin(), ctx.hits.end(), [&](const RankedHit& h) {
            return h.chunk_id == outcome.record->answer_chunk_id;
        });
        PerQuestionResult pq;
        pq.question_id = q.question_id;
        pq.covered = covered;
        pq.set_size = ctx.hits.size();
        if (!covered)
            pq.answer_rank_if_missed = outcome.record->answer_rank;
        set_sizes.push_back(pq.set_size);
        if (covered)
            ++result.n_covered;
        result.per_question.push_back(std::move(pq));
    }

    result.n_test = result.per_question.size();
    if (result.n_test == 0)
        throw DataError("no answerable test questions; cannot evaluate coverage");
    result.empirical_coverage =
        static_cast<double>(result.n_covered) / static_cast<double>(result.n_test);

    double sum = 0.0;
    for (auto s : set_sizes) {
        sum += static_cast<double>(s);
        result.max_set_size = std::max(result.max_set_size, s);
    }
    result.mean_set_size = sum / static_cast<double>(set_sizes.size());
    std::sort(set_sizes.begin(), set_sizes.end());
    const std::size_t n = set_sizes.size();
    result.median_set_size =
        (n % 2 == 1) ? static_cast<double>(set_sizes[n / 2])
                     : (static_cast<double>(set_sizes[n / 2 - 1] + set_sizes[n / 2])) / 2.0;
    return result;
}

std::vector<CoverageResult> sweep_alpha(const VectorStore& store,
                                        const std::vector<CalibrationQuestion>& calib,
                                        const std::vector<CalibrationQuestion>& test,
                                        EmbeddingProvider& provider, RelevanceJudge& judge,
                                        const std::vector<double>& alphas,
                                        const EvaluateOptions& opts, const WarnFn& warn) {
    if (alphas.empty())
        throw ConfigError("alpha sweep requires at least one alpha");
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0))
            throw ConfigError("alpha must lie strictly in (0,1), got " + std::to_string(a));

    std::vector<CoverageResult> results;
    for (double a : alphas) {
        EvaluateOptions o = opts;
        o.alpha = a;
        results.push_back(evaluate_coverage(store, calib, test, provider, judge, o, warn));
    }
    // Labeling noise is the only way this can trip; surface it rather than fail.
    for (std::size_t i = 1; i < results.size() && warn; ++i) {
        if (alphas[i] > alphas[i - 1] && results[i].mean_set_size > results[i - 1].mean_set_size)
            warn("mean set size increased from alpha=" + std::to_string(alphas[i - 1]) +
                 " to alpha=" + std::to_string(alphas[i]));
    }
    return results;
}

std::string sweep_to_csv(const std::vector<CoverageResult>& results) {
    std::ostringstream out;
    out << "alpha,threshold,coverage,mean_set_size,median_set_size,max_set_size\n";
    out.precision(17);
    for (const auto& r : results) {
        out << r.alpha << ",";
        if (r.threshold)
            out << *r.threshold;
        else
            out << "RETRIEVE_ALL";
        out << "," << r.empirical_coverage << "," << r.mean_set_size << "," << r.median_set_size
            << "," << r.max_set_size << "\n";
    }
    return out.str();
}

std::string coverage_detail_jsonl(const CoverageResult& r) {
    std::ostringstream out;
    for (const auto& pq : r.per_question) {
        json j = {{"question_id", pq.question_id},
                  {"covered", pq.covered},
                  {"set_size", pq.set_size},
                  {"alpha", r.alpha}};
        if (pq.answer_rank_if_missed)
            j["answer_rank_if_missed"] = *pq.answer_rank_if_missed;
        out << j.dump() << "\n";
    }
    return out.str();
}

} // namespace crag
