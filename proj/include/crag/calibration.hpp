#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crag/embedding.hpp"
#include "crag/vectorstore.hpp"

namespace crag {

enum class QuestionOrigin { generated, imported };

struct CalibrationQuestion {
    std::string question_id;
    std::string question;
    std::string reference_answer; // may be empty for imported sets
    std::optional<std::string> source_doc_id;
    QuestionOrigin origin = QuestionOrigin::imported;
};

struct CalibrationRecord {
    std::string question_id;
    std::string answer_chunk_id;
    std::size_t answer_rank = 0; // 1-based, first accepted rank
    double score = 0.0;
    std::string judge_id;
};

enum class QuantileMode { paper_percentile, finite_sample };

std::string to_string(QuantileMode m);
QuantileMode quantile_mode_from_string(const std::string& s);

// nullopt means RETRIEVE_ALL: no finite cutoff exists at this alpha and n,
// every chunk qualifies.
using Threshold = std::optional<double>;

struct CalibrationReport {
    double alpha = 0.1;
    QuantileMode quantile_mode = QuantileMode::finite_sample;
    Threshold threshold;
    std::size_t n_questions = 0;
    std::size_t n_labeled = 0;
    std::size_t n_dropped = 0;
    std::vector<double> scores; // sorted descending
    std::string embedder_id;
    Metric metric = Metric::cosine;
    std::string created_at;
    std::string store_fingerprint;
    std::string rng; // generator algorithm + seed, when questions were generated
    std::vector<CalibrationRecord> records;
};

class RelevanceJudge {
public:
    virtual ~RelevanceJudge() = default;
    virtual std::string judge_id() const = 0;
    // May throw TransportError; the labeler treats that as a rejection.
    virtual bool accepts(const std::string& question, const std::string& reference_answer,
                         const std::string& chunk_text) = 0;
};

// Lowercase, whitespace-normalized containment of the reference answer in the
// chunk text. An empty reference answer never matches.
class SubstringJudge final : public RelevanceJudge {
public:
    std::string judge_id() const override { return "substring"; }
    bool accepts(const std::string& question, const std::string& reference_answer,
                 const std::string& chunk_text) override;
};

struct GeneratedQA {
    std::string question;
    std::string answer;
};

class QuestionGenerator {
public:
    virtual ~QuestionGenerator() = default;
    virtual GeneratedQA generate(const Chunk& chunk) = 0;
};

// splitmix64; fixed algorithm so seeded sampling reproduces across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    // Uniform in [0, bound).
    std::uint64_t bounded(std::uint64_t bound);

private:
    std::uint64_t state_;
};

std::vector<CalibrationQuestion> generate_calibration_set(const VectorStore& store,
                                                          QuestionGenerator& generator,
                                                          std::size_t n, std::uint64_t seed,
                                                          const std::function<void(const std::string&)>& warn = {});

std::vector<CalibrationQuestion> import_calibration_set(const std::string& path);

struct LabelOutcome {
    std::optional<CalibrationRecord> record; // nullopt = NO_ANSWER_FOUND
    std::vector<std::string> warnings;
};

LabelOutcome label_question(const CalibrationQuestion& q, const VectorStore& store,
                            EmbeddingProvider& provider, RelevanceJudge& judge,
                            std::size_t max_rank = 50, Metric metric = Metric::cosine);

Threshold compute_threshold(const std::vector<double>& scores, double alpha, QuantileMode mode);

struct CalibrationOptions {
    double alpha = 0.1;
    QuantileMode mode = QuantileMode::finite_sample;
    std::size_t max_rank = 50;
    Metric metric = Metric::cosine;
    bool strict = false; // any dropped question becomes fatal
    std::string rng;     // provenance of question sampling, if any
};

using WarnFn = std::function<void(const std::string&)>;

CalibrationReport run_calibration(const VectorStore& store,
                                  const std::vector<CalibrationQuestion>& questions,
                                  EmbeddingProvider& provider, RelevanceJudge& judge,
                                  const CalibrationOptions& opts, const WarnFn& warn = {});

void save_report(const CalibrationReport& report, const std::string& path);
// Re-derives the threshold from scores+alpha+mode and fails on mismatch.
CalibrationReport load_report(const std::string& path);

} // namespace crag
