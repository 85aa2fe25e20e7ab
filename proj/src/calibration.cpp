#include "crag/calibration.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "crag/errors.hpp"

using nlohmann::json;

namespace crag {

namespace {

void warn_if(const WarnFn& warn, const std::string& msg) {
    if (warn)
        warn(msg);
}

std::string normalize_for_match(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) {
                out.push_back(' ');
                pending_space = false;
            }
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

// Store identity for report provenance; the creation timestamp is excluded so
// rebuilding an identical store keeps the same fingerprint.
std::string store_fingerprint(const VectorStore& store) {
    json header = json::parse(store.header_line());
    header.erase("created_at");
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(header.dump())));
    return buf;
}

} // namespace

std::string to_string(QuantileMode m) {
    return m == QuantileMode::paper_percentile ? "paper-percentile" : "finite-sample";
}

QuantileMode quantile_mode_from_string(const std::string& s) {
    if (s == "paper-percentile")
        return QuantileMode::paper_percentile;
    if (s == "finite-sample")
        return QuantileMode::finite_sample;
    throw ConfigError("calibration.mode: unknown mode '" + s +
                      "' (expected paper-percentile|finite-sample)");
}

bool SubstringJudge::accepts(const std::string&, const std::string& reference_answer,
                             const std::string& chunk_text) {
    const std::string needle = normalize_for_match(reference_answer);
    if (needle.empty())
        return false;
    return normalize_for_match(chunk_text).find(needle) != std::string::npos;
}

std::uint64_t SplitMix64::next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::bounded(std::uint64_t bound) {
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = next();
    } while (r >= limit);
    return r % bound;
}

std::vector<CalibrationQuestion> generate_calibration_set(
    const VectorStore& store, QuestionGenerator& generator, std::size_t n, std::uint64_t seed,
    const std::function<void(const std::string&)>& warn) {
    if (n < 1)
        throw ConfigError("calibration set size n must be >= 1");
    if (n > store.size())
        throw ConfigError("calibration set size " + std::to_string(n) + " exceeds store size " +
                          std::to_string(store.size()));

    // Seeded Fisher-Yates permutation; the first n usable entries are a
    // uniform without-replacement sample, and walking further resamples past
    // duplicates or generator failures.
    std::vector<std::size_t> order(store.size());
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.bounded(i)]);

    std::vector<CalibrationQuestion> questions;
    std::unordered_set<std::string> seen_texts;
    for (std::size_t idx : order) {
        if (questions.size() == n)
            break;
        const Chunk& chunk = store.entries()[idx].chunk;
        GeneratedQA qa;
        try {
            qa = generator.generate(chunk);
        } catch (const DataError& e) {
            warn_if(warn, std::string("generator output dropped for ") + chunk.chunk_id + ": " +
                              e.what());
            continue;
        }
        if (qa.question.empty() || qa.answer.empty()) {
            warn_if(warn, "generator output dropped for " + chunk.chunk_id +
                              ": missing question or answer");
            continue;
        }
        if (!seen_texts.insert(qa.question).second)
            continue; // duplicate text, resample from the remaining pool
        CalibrationQuestion q;
        q.question_id = "gen-" + std::to_string(questions.size() + 1) + "-" + chunk.chunk_id;
        q.question = qa.question;
        q.reference_answer = qa.answer;
        q.source_doc_id = chunk.doc_id;
        q.origin = QuestionOrigin::generated;
        questions.push_back(std::move(q));
    }
    if (questions.size() < n)
        warn_if(warn, "chunk pool exhausted: generated " + std::to_string(questions.size()) +
                          " of " + std::to_string(n) + " requested questions");
    return questions;
}

std::vector<CalibrationQuestion> import_calibration_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open question file: " + path);
    std::vector<CalibrationQuestion> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("question file " + path + ": line " + std::to_string(lineno) +
                            " is not valid JSON: " + e.what());
        }
        if (!rec.is_object() || !rec.contains("question") || !rec["question"].is_string() ||
            rec["question"].get<std::string>().empty())
            throw DataError("question file " + path + ": line " + std::to_string(lineno) +
                            " is missing a non-empty \"question\" field");
        CalibrationQuestion q;
        q.question = rec["question"].get<std::string>();
        q.question_id = rec.value("question_id", "line-" + std::to_string(lineno));
        q.reference_answer = rec.value("reference_answer", "");
        if (rec.contains("source_doc_id"))
            q.source_doc_id = rec["source_doc_id"].get<std::string>();
        q.origin = QuestionOrigin::imported;
        out.push_back(std::move(q));
    }
    if (out.empty())
        throw DataError("empty calibration set: " + path);
    return out;
}

LabelOutcome label_question(const CalibrationQuestion& q, const VectorStore& store,
                            EmbeddingProvider& provider, RelevanceJudge& judge,
                            std::size_t max_rank, Metric metric) {
    LabelOutcome out;
    const EmbeddingVector qvec = provider.embed(q.question);
    const auto hits = store.ranked_query(qvec, max_rank, metric);
    for (const auto& hit : hits) {
        const Chunk* chunk = store.find_chunk(hit.chunk_id);
        bool accepted = false;
        try {
            accepted = judge.accepts(q.question, q.reference_answer, chunk->text);
        } catch (const TransportError& e) {
            out.warnings.push_back("judge failed on " + hit.chunk_id + " for " + q.question_id +
                                   ", treated as reject: " + e.what());
        }
        if (accepted) {
            out.record = CalibrationRecord{q.question_id, hit.chunk_id, hit.rank, hit.score,
                                           judge.judge_id()};
            return out;
        }
    }
    return out; // NO_ANSWER_FOUND
}

Threshold compute_threshold(const std::vector<double>& scores, double alpha, QuantileMode mode) {
    if (scores.empty())
        throw DataError("no labeled calibration records: cannot compute threshold");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("alpha must lie strictly in (0,1), got " + std::to_string(alpha));

    std::vector<double> sorted(scores);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    const std::size_t n = sorted.size();
    const std::size_t m = (mode == QuantileMode::paper_percentile) ? n : n + 1;
    auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(m)));
    if (k < 1)
        k = 1;
    if (k > n)
        return std::nullopt; // RETRIEVE_ALL: no finite cutoff at this alpha
    return sorted[k - 1];
}

CalibrationReport run_calibration(const VectorStore& store,
                                  const std::vector<CalibrationQuestion>& questions,
                                  EmbeddingProvider& provider, RelevanceJudge& judge,
                                  const CalibrationOptions& opts, const WarnFn& warn) {
    if (questions.empty())
        throw DataError("no calibration questions");

    // Duplicate texts are allowed but worth surfacing.
    {
        std::unordered_set<std::string> texts;
        std::size_t dups = 0;
        for (const auto& q : questions)
            if (!texts.insert(q.question).second)
                ++dups;
        if (dups > 0)
            warn_if(warn, std::to_string(dups) + " duplicate question texts in calibration set");
    }

    CalibrationReport report;
    report.alpha = opts.alpha;
    report.quantile_mode = opts.mode;
    report.n_questions = questions.size();
    report.embedder_id = store.embedder_id();
    report.metric = opts.metric;
    report.rng = opts.rng;
    report.store_fingerprint = store_fingerprint(store);

    std::vector<std::string> dropped_ids;
    for (const auto& q : questions) {
        auto outcome = label_question(q, store, provider, judge, opts.max_rank, opts.metric);
        for (const auto& w : outcome.warnings)
            warn_if(warn, w);
        if (outcome.record) {
            report.records.push_back(*outcome.record);
            report.scores.push_back(outcome.record->score);
        } else {
            dropped_ids.push_back(q.question_id);
        }
    }
    report.n_labeled = report.records.size();
    report.n_dropped = dropped_ids.size();

    if (!dropped_ids.empty()) {
        std::string ids;
        for (const auto& id : dropped_ids)
            ids += (ids.empty() ? "" : ", ") + id;
        if (opts.strict)
            throw DataError("strict mode: " + std::to_string(dropped_ids.size()) +
                            " questions had no answer-bearing chunk within max_rank: " + ids);
        warn_if(warn, "dropped " + std::to_string(dropped_ids.size()) +
                          " questions with no answer-bearing chunk: " + ids);
    }
    if (report.n_labeled == 0)
        throw DataError("all " + std::to_string(questions.size()) +
                        " calibration questions were dropped; nothing to calibrate on");
    if (static_cast<double>(report.n_dropped) / static_cast<double>(report.n_questions) > 0.2)
        warn_if(warn,
                "GUARANTEE VALIDITY WARNING: " + std::to_string(report.n_dropped) + " of " +
                    std::to_string(report.n_questions) +
                    " calibration questions were unanswerable (>20%); the coverage guarantee "
                    "rests on every calibration question being answerable from the store");

    std::sort(report.scores.begin(), report.scores.end(), std::greater<double>());
    report.threshold = compute_threshold(report.scores, opts.alpha, opts.mode);
    report.created_at = iso8601_utc_now();
    return report;
}

void save_report(const CalibrationReport& report, const std::string& path) {
    json j;
    j["format"] = "conformal-rag-calibration";
    j["version"] = 1;
    j["alpha"] = report.alpha;
    j["quantile_mode"] = to_string(report.quantile_mode);
    if (report.threshold)
        j["threshold"] = *report.threshold;
    else
        j["threshold"] = nullptr; // RETRIEVE_ALL
    j["n_questions"] = report.n_questions;
    j["n_labeled"] = report.n_labeled;
    j["n_dropped"] = report.n_dropped;
    j["scores"] = report.scores;
    j["embedder_id"] = report.embedder_id;
    j["metric"] = to_string(report.metric);
    j["created_at"] = report.created_at;
    j["store_fingerprint"] = report.store_fingerprint;
    if (!report.rng.empty())
        j["rng"] = report.rng;
    json recs = json::array();
    for (const auto& r : report.records)
        recs.push_back({{"question_id", r.question_id},
                        {"answer_chunk_id", r.answer_chunk_id},
                        {"answer_rank", r.answer_rank},
                        {"score", r.score},
                        {"judge_id", r.judge_id}});
    j["records"] = recs;

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write calibration report: " + path);
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

CalibrationReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open calibration report: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("corrupt calibration report " + path + ": " + e.what());
    }
    if (j.value("format", "") != "conformal-rag-calibration")
        throw DataError("not a calibration report: " + path);

    CalibrationReport r;
    r.alpha = j.at("alpha").get<double>();
    r.quantile_mode = quantile_mode_from_string(j.at("quantile_mode").get<std::string>());
    if (!j.at("threshold").is_null())
        r.threshold = j.at("threshold").get<double>();
    r.n_questions = j.at("n_questions").get<std::size_t>();
    r.n_labeled = j.at("n_labeled").get<std::size_t>();
    r.n_dropped = j.at("n_dropped").get<std::size_t>();
    r.scores = j.at("scores").get<std::vector<double>>();
    r.embedder_id = j.at("embedder_id").get<std::string>();
    r.metric = metric_from_string(j.at("metric").get<std::string>());
    r.created_at = j.value("created_at", "");
    r.store_fingerprint = j.value("store_fingerprint", "");
    r.rng = j.value("rng", "");
    for (const auto& rec : j.value("records", json::array()))
        r.records.push_back(CalibrationRecord{rec.at("question_id").get<std::string>(),
                                              rec.at("answer_chunk_id").get<std::string>(),
                                              rec.at("answer_rank").get<std::size_t>(),
                                              rec.at("score").get<double>(),
                                              rec.value("judge_id", "")});

    if (r.n_labeled != r.scores.size() || r.n_labeled + r.n_dropped != r.n_questions)
        throw DataError("corrupt calibration report: inconsistent counts in " + path);
    const Threshold rederived = compute_threshold(r.scores, r.alpha, r.quantile_mode);
    if (rederived != r.threshold)
        throw DataError("corrupt calibration report: stored threshold does not re-derive from "
                        "scores+alpha+mode in " +
                        path);
    return r;
}

} // namespace crag
