#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crag/calibration.hpp"
#include "crag/corpus.hpp"

namespace crag::testing {

// Exchangeable question workload over a synthetic corpus. Each document
// carries a unique two-token answer phrase embedded in shared noise
// vocabulary; each question contains its document's answer tokens plus noise,
// and sometimes the answer tokens of a distractor document so that plain
// top-1 retrieval misses while the answer phrase still identifies exactly one
// chunk for the substring judge.
struct SyntheticWorkload {
    std::vector<Document> documents;
    std::vector<CalibrationQuestion> calibration;
    std::vector<CalibrationQuestion> test;
};

inline std::string answer_phrase(std::size_t doc) {
    return "answer" + std::to_string(doc) + "key secret" + std::to_string(doc) + "token";
}

inline SyntheticWorkload make_synthetic_workload(std::uint64_t seed, std::size_t n_docs = 200,
                                                 std::size_t n_questions = 600,
                                                 std::size_t n_calibration = 400) {
    SplitMix64 rng(seed);
    const std::size_t vocab = 50;
    auto noise_word = [&](std::size_t i) { return "noise" + std::to_string(i); };

    SyntheticWorkload w;
    for (std::size_t d = 0; d < n_docs; ++d) {
        std::string text;
        for (std::size_t i = 0; i < 20; ++i)
            text += noise_word(rng.bounded(vocab)) + " ";
        text += answer_phrase(d) + " ";
        for (std::size_t i = 0; i < 20; ++i)
            text += noise_word(rng.bounded(vocab)) + " ";
        w.documents.push_back(
            Document{"doc" + std::to_string(d) + ".txt", "", std::move(text), {}});
    }

    for (std::size_t q = 0; q < n_questions; ++q) {
        const std::size_t d = static_cast<std::size_t>(rng.bounded(n_docs));
        std::string text = answer_phrase(d);
        for (std::size_t i = 0; i < 6; ++i)
            text += " " + noise_word(rng.bounded(vocab));
        if (rng.bounded(10) < 3) {
            // hard question: pulled toward a distractor document
            const std::size_t other = static_cast<std::size_t>(rng.bounded(n_docs));
            text += " answer" + std::to_string(other) + "key";
            text += " secret" + std::to_string(other) + "token";
        }
        CalibrationQuestion cq;
        cq.question_id = "q" + std::to_string(q);
        cq.question = std::move(text);
        cq.reference_answer = answer_phrase(d);
        cq.source_doc_id = w.documents[d].doc_id;
        cq.origin = QuestionOrigin::imported;
        if (q < n_calibration)
            w.calibration.push_back(std::move(cq));
        else
            w.test.push_back(std::move(cq));
    }
    return w;
}

} // namespace crag::testing
