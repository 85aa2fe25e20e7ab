#include "crag/remote.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "crag/errors.hpp"

using nlohmann::json;

namespace crag {

namespace {

struct Endpoint {
    std::string scheme_host; // "http://host:port" for the httplib client
    std::string path;
};

Endpoint parse_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint must be an http(s) URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
        return Endpoint{url, "/"};
    return Endpoint{url.substr(0, path_start), url.substr(path_start)};
}

json post_json(const RemoteConfig& cfg, const json& body) {
    const Endpoint ep = parse_endpoint(cfg.endpoint);
    json reply;
    with_retries(cfg.retry, "POST " + cfg.endpoint, [&] {
        httplib::Client client(ep.scheme_host);
        client.set_connection_timeout(10);
        client.set_read_timeout(120);
        httplib::Headers headers;
        if (!cfg.api_key.empty())
            headers.emplace("Authorization", "Bearer " + cfg.api_key);
        auto res = client.Post(ep.path, headers, body.dump(), "application/json");
        if (!res)
            throw std::runtime_error("connection failed: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300)
            throw std::runtime_error("HTTP " + std::to_string(res->status) + ": " + res->body);
        reply = json::parse(res->body);
    });
    return reply;
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string fill(std::string tpl, const std::string& key, const std::string& value) {
    std::size_t pos;
    while ((pos = tpl.find(key)) != std::string::npos)
        tpl.replace(pos, key.size(), value);
    return tpl;
}

} // namespace

void with_retries(const RetryPolicy& policy, const std::string& what,
                  const std::function<void()>& fn) {
    SplitMix64 rng(policy.jitter_seed);
    double delay_ms = static_cast<double>(policy.base_delay.count());
    std::string last_error;
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        try {
            fn();
            return;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
        if (attempt < policy.max_attempts) {
            double jitter =
                delay_ms * policy.jitter * (static_cast<double>(rng.bounded(1000)) / 1000.0);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long>(delay_ms + jitter)));
            delay_ms *= policy.multiplier;
        }
    }
    throw TransportError(what + " failed: " + last_error, policy.max_attempts);
}

RemoteEmbedder::RemoteEmbedder(RemoteConfig cfg, std::size_t dim)
    : cfg_(std::move(cfg)), dim_(dim) {
    if (cfg_.endpoint.empty())
        throw ConfigError("embedding.endpoint is required for the remote provider");
    if (dim_ < 1)
        throw ConfigError("embedding.dim must be >= 1");
    id_ = "remote/" + cfg_.model + "/dim" + std::to_string(dim_);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) {
    const std::size_t batch = std::max<std::size_t>(cfg_.batch_size, 1);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t i = 0; i < texts.size(); i += batch)
        ranges.emplace_back(i, std::min(i + batch, texts.size()));

    std::vector<EmbeddingVector> out(texts.size());
    auto run_range = [&](std::size_t begin, std::size_t end) {
        json body = {{"model", cfg_.model},
                     {"input", std::vector<std::string>(texts.begin() + begin, texts.begin() + end)}};
        json reply = post_json(cfg_, body);
        if (!reply.contains("data") || !reply["data"].is_array() ||
            reply["data"].size() != end - begin)
            throw ContractError("embedding provider returned " +
                                std::to_string(reply.value("data", json::array()).size()) +
                                " embeddings for " + std::to_string(end - begin) + " inputs");
        for (const auto& item : reply["data"]) {
            const std::size_t idx = item.at("index").get<std::size_t>();
            if (idx >= end - begin)
                throw ContractError("embedding provider returned out-of-range index " +
                                    std::to_string(idx));
            EmbeddingVector v;
            v.values = item.at("embedding").get<std::vector<double>>();
            v.embedder_id = id_;
            if (v.values.size() != dim_)
                throw ContractError("embedding provider returned dim " +
                                    std::to_string(v.values.size()) + ", declared dim " +
                                    std::to_string(dim_));
            out[begin + idx] = std::move(v);
        }
    };

    // Bounded in-flight batches; results land at fixed offsets so output
    // order always matches input order.
    const std::size_t in_flight = std::max<std::size_t>(cfg_.max_in_flight, 1);
    std::size_t next = 0;
    std::vector<std::future<void>> pending;
    while (next < ranges.size() || !pending.empty()) {
        while (next < ranges.size() && pending.size() < in_flight) {
            auto [b, e] = ranges[next++];
            pending.push_back(std::async(std::launch::async, run_range, b, e));
        }
        pending.front().get();
        pending.erase(pending.begin());
    }
    return out;
}

RemoteChatProvider::RemoteChatProvider(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty())
        throw ConfigError("llm.endpoint is required for remote chat calls");
}

std::string RemoteChatProvider::complete(const std::vector<ChatMessage>& messages) {
    json msgs = json::array();
    for (const auto& m : messages)
        msgs.push_back({{"role", m.role}, {"content", m.content}});
    json reply = post_json(cfg_, {{"model", cfg_.model}, {"messages", msgs}});
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ContractError(std::string("malformed chat completion response: ") + e.what());
    }
}

std::string default_judge_prompt() {
    return "Question: {{question}}\n"
           "Reference answer (may be empty): {{answer}}\n"
           "Text chunk:\n{{chunk}}\n\n"
           "Does this text chunk contain the information needed to answer the question? "
           "Reply with exactly one word: yes or no.";
}

std::string default_generator_prompt() {
    return "Read the following text and write one question that it answers, together with the "
           "answer. Reply with a JSON object: {\"question\": \"...\", \"answer\": \"...\"}. The "
           "answer must appear in the text.\n\nText:\n{{chunk}}";
}

LlmJudge::LlmJudge(ChatProvider& chat, std::string prompt_template)
    : chat_(chat), prompt_template_(std::move(prompt_template)) {
    if (prompt_template_.empty())
        prompt_template_ = default_judge_prompt();
}

std::string LlmJudge::judge_id() const {
    return "llm/" + chat_.model_id();
}

bool LlmJudge::accepts(const std::string& question, const std::string& reference_answer,
                       const std::string& chunk_text) {
    std::string prompt = fill(prompt_template_, "{{question}}", question);
    prompt = fill(prompt, "{{answer}}", reference_answer);
    prompt = fill(prompt, "{{chunk}}", chunk_text);

    // One reprompt on a non-yes/no reply; anything else counts as "no".
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply = lowercase(chat_.complete(
            {{"system", "You reply with exactly one word: yes or no."}, {"user", prompt}}));
        reply.erase(std::remove_if(reply.begin(), reply.end(),
                                   [](unsigned char c) { return !std::isalpha(c); }),
                    reply.end());
        if (reply == "yes")
            return true;
        if (reply == "no")
            return false;
    }
    return false;
}

LlmQuestionGenerator::LlmQuestionGenerator(ChatProvider& chat, std::string prompt_template)
    : chat_(chat), prompt_template_(std::move(prompt_template)) {
    if (prompt_template_.empty())
        prompt_template_ = default_generator_prompt();
}

GeneratedQA LlmQuestionGenerator::generate(const Chunk& chunk) {
    const std::string prompt = fill(prompt_template_, "{{chunk}}", chunk.text);
    const std::string reply = chat_.complete(
        {{"system", "You write question/answer pairs as JSON."}, {"user", prompt}});
    json j;
    try {
        j = json::parse(reply);
    } catch (const json::exception&) {
        // Tolerate replies that wrap the JSON in prose or fences.
        auto b = reply.find('{');
        auto e = reply.rfind('}');
        if (b == std::string::npos || e == std::string::npos || e <= b)
            throw DataError("generator reply is not JSON: " + reply.substr(0, 120));
        try {
            j = json::parse(reply.substr(b, e - b + 1));
        } catch (const json::exception&) {
            throw DataError("generator reply is not JSON: " + reply.substr(0, 120));
        }
    }
    if (!j.contains("question") || !j.contains("answer"))
        throw DataError("generator reply missing question or answer field");
    return GeneratedQA{j["question"].get<std::string>(), j["answer"].get<std::string>()};
}

} // namespace crag
