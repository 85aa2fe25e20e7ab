#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>

#include "crag/calibration.hpp"
#include "crag/embedding.hpp"
#include "crag/generation.hpp"

namespace crag {

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{100};
    double multiplier = 2.0;
    double jitter = 0.25; // fraction of the delay, uniform
    std::uint64_t jitter_seed = 0x9e3779b97f4a7c15ULL;
};

// Runs fn until it succeeds or attempts are exhausted; rethrows the last
// failure as TransportError carrying the attempt count. Sleeps with
// exponential backoff plus jitter between attempts.
void with_retries(const RetryPolicy& policy, const std::string& what,
                  const std::function<void()>& fn);

struct RemoteConfig {
    std::string endpoint; // e.g. http://host:port/v1/embeddings
    std::string model;
    std::string api_key; // from CONFORMAL_RAG_API_KEY only
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 4;
    RetryPolicy retry;
};

// POST {"model":..., "input":[...]} -> {"data":[{"index":..,"embedding":[..]},..]}.
// Batches inputs, runs up to max_in_flight batches concurrently, returns
// vectors in input order.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    RemoteEmbedder(RemoteConfig cfg, std::size_t dim);

    std::string embedder_id() const override { return id_; }
    std::size_t dim() const override { return dim_; }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    RemoteConfig cfg_;
    std::size_t dim_;
    std::string id_;
};

// POST {"model":..., "messages":[{"role":..,"content":..},..]}
//   -> {"choices":[{"message":{"content":..}}]}.
class RemoteChatProvider final : public ChatProvider {
public:
    explicit RemoteChatProvider(RemoteConfig cfg);

    std::string model_id() const override { return cfg_.model; }
    std::string complete(const std::vector<ChatMessage>& messages) override;

private:
    RemoteConfig cfg_;
};

// Chat-backed judge: prompts for a strict yes/no; any other output counts as
// "no" after one reprompt.
class LlmJudge final : public RelevanceJudge {
public:
    LlmJudge(ChatProvider& chat, std::string prompt_template);

    std::string judge_id() const override;
    bool accepts(const std::string& question, const std::string& reference_answer,
                 const std::string& chunk_text) override;

private:
    ChatProvider& chat_;
    std::string prompt_template_;
};

// Chat-backed question generator; expects a JSON object with "question" and
// "answer" fields in the reply. Malformed output throws DataError.
class LlmQuestionGenerator final : public QuestionGenerator {
public:
    LlmQuestionGenerator(ChatProvider& chat, std::string prompt_template);

    GeneratedQA generate(const Chunk& chunk) override;

private:
    ChatProvider& chat_;
    std::string prompt_template_;
};

std::string default_judge_prompt();
std::string default_generator_prompt();

} // namespace crag
