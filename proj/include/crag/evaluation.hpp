#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crag/calibration.hpp"
#include "crag/retrieval.hpp"

namespace crag {

struct PerQuestionResult {
    std::string question_id;
    bool covered = false;
    std::size_t set_size = 0;
    std::optional<std::size_t> answer_rank_if_missed;
};

struct CoverageResult {
    double alpha = 0.0;
    QuantileMode mode = QuantileMode::finite_sample;
    Threshold threshold;
    std::size_t n_test = 0;
    std::size_t n_covered = 0;
    std::size_t n_excluded = 0; // unanswerable test questions, reported separately
    double empirical_coverage = 0.0;
    double mean_set_size = 0.0;
    double median_set_size = 0.0;
    std::size_t max_set_size = 0;
    std::vector<PerQuestionResult> per_question;
};

struct EvaluateOptions {
    double alpha = 0.1;
    QuantileMode mode = QuantileMode::finite_sample;
    Comparison comparison = Comparison::geq;
    std::size_t max_rank = 50;
    Metric metric = Metric::cosine;
};

// Calibrates on the calibration split, then checks for each test question
// whether its first answer-bearing chunk lands in the conformal set.
CoverageResult evaluate_coverage(const VectorStore& store,
                                 const std::vector<CalibrationQuestion>& calibration_questions,
                                 const std::vector<CalibrationQuestion>& test_questions,
                                 EmbeddingProvider& provider, RelevanceJudge& judge,
                                 const EvaluateOptions& opts, const WarnFn& warn = {});

std::vector<CoverageResult> sweep_alpha(const VectorStore& store,
                                        const std::vector<CalibrationQuestion>& calib,
                                        const std::vector<CalibrationQuestion>& test,
                                        EmbeddingProvider& provider, RelevanceJudge& judge,
                                        const std::vector<double>& alphas,
                                        const EvaluateOptions& opts, const WarnFn& warn = {});

// "alpha,threshold,coverage,mean_set_size,median_set_size,max_set_size"
std::string sweep_to_csv(const std::vector<CoverageResult>& results);
std::string coverage_detail_jsonl(const CoverageResult& r);

} // namespace crag
