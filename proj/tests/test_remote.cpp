#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "crag/errors.hpp"
#include "crag/remote.hpp"
#include "support/stubs.hpp"

using namespace crag;
using namespace crag::testing;
using nlohmann::json;

namespace {

RetryPolicy fast_retry() {
    RetryPolicy p;
    p.base_delay = std::chrono::milliseconds(1);
    return p;
}

// Local embedding endpoint that fails the first `failures` requests, then
// returns per-input vectors [len(text), batch_index].
struct EmbeddingServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};
    int failures;

    explicit EmbeddingServer(int failures = 0) : failures(failures) {
        server.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = ++requests;
            if (n <= this->failures) {
                res.status = 503;
                res.set_content("try later", "text/plain");
                return;
            }
            auto body = json::parse(req.body);
            json data = json::array();
            std::size_t i = 0;
            for (const auto& input : body.at("input")) {
                const auto text = input.get<std::string>();
                data.push_back({{"index", i}, {"embedding", {double(text.size()), double(i)}}});
                ++i;
            }
            res.set_content(json({{"data", data}}).dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~EmbeddingServer() {
        server.stop();
        thread.join();
    }
    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
    }
};

} // namespace

TEST_CASE("remote embedder batches requests and keeps input order") {
    EmbeddingServer srv;
    RemoteConfig cfg;
    cfg.endpoint = srv.endpoint();
    cfg.model = "test-model";
    cfg.batch_size = 2;
    cfg.retry = fast_retry();
    RemoteEmbedder emb(cfg, 2);
    auto out = emb.embed_batch({"a", "bb", "ccc", "dddd", "eeeee"});
    REQUIRE(out.size() == 5);
    CHECK(srv.requests.load() == 3); // ceil(5/2) batches
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].values[0] == double(i + 1));       // text length, input order preserved
        CHECK(out[i].values[1] == double(i % 2));       // position within its batch
        CHECK(out[i].embedder_id == emb.embedder_id());
    }
}

TEST_CASE("remote embedder retries transient failures with backoff") {
    EmbeddingServer srv(2); // first two requests 503
    RemoteConfig cfg;
    cfg.endpoint = srv.endpoint();
    cfg.model = "m";
    cfg.retry = fast_retry();
    RemoteEmbedder emb(cfg, 2);
    auto out = emb.embed_batch({"hello"});
    REQUIRE(out.size() == 1);
    CHECK(srv.requests.load() == 3);
}

TEST_CASE("remote embedder gives up after max attempts with the attempt count") {
    EmbeddingServer srv(1000);
    RemoteConfig cfg;
    cfg.endpoint = srv.endpoint();
    cfg.model = "m";
    cfg.retry = fast_retry();
    RemoteEmbedder emb(cfg, 2);
    try {
        emb.embed_batch({"hello"});
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts == 5);
    }
    CHECK(srv.requests.load() == 5);
}

TEST_CASE("declared-dimension violation is a provider contract error") {
    EmbeddingServer srv;
    RemoteConfig cfg;
    cfg.endpoint = srv.endpoint();
    cfg.model = "m";
    cfg.retry = fast_retry();
    RemoteEmbedder emb(cfg, 7); // server always returns dim 2
    CHECK_THROWS_AS(emb.embed_batch({"hello"}), ContractError);
}

TEST_CASE("remote chat provider round-trips the completion contract") {
    httplib::Server server;
    server.Post("/v1/chat", [](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body);
        std::string user = body.at("messages").back().at("content").get<std::string>();
        json reply = {{"choices", {{{"message", {{"content", "echo: " + user}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    cfg.model = "chat-model";
    cfg.retry = fast_retry();
    RemoteChatProvider chat(cfg);
    CHECK(chat.complete({{"system", "s"}, {"user", "hi"}}) == "echo: hi");

    server.stop();
    t.join();
}

TEST_CASE("llm judge: yes, no, and one reprompt on garbage") {
    ScriptedChatStub yes({"Yes."});
    LlmJudge j1(yes, "");
    CHECK(j1.accepts("q", "a", "chunk"));

    ScriptedChatStub no({"no"});
    LlmJudge j2(no, "");
    CHECK_FALSE(j2.accepts("q", "a", "chunk"));

    ScriptedChatStub garbage_then_yes({"I think maybe", "yes"});
    LlmJudge j3(garbage_then_yes, "");
    CHECK(j3.accepts("q", "a", "chunk"));
    CHECK(garbage_then_yes.calls() == 2);

    ScriptedChatStub garbage_twice({"hmm", "unsure"});
    LlmJudge j4(garbage_twice, "");
    CHECK_FALSE(j4.accepts("q", "a", "chunk")); // anything else counts as no
}

TEST_CASE("llm question generator parses plain and fenced JSON, rejects garbage") {
    Chunk chunk{"c1", "d", 0, "the sky is blue", {0, 4}};

    ScriptedChatStub plain({R"({"question":"what color is the sky?","answer":"blue"})"});
    LlmQuestionGenerator g1(plain, "");
    auto qa = g1.generate(chunk);
    CHECK(qa.question == "what color is the sky?");
    CHECK(qa.answer == "blue");

    ScriptedChatStub fenced({"Sure!\n```json\n{\"question\":\"q?\",\"answer\":\"a\"}\n```"});
    LlmQuestionGenerator g2(fenced, "");
    CHECK(g2.generate(chunk).answer == "a");

    ScriptedChatStub missing({R"({"question":"q?"})"});
    LlmQuestionGenerator g3(missing, "");
    CHECK_THROWS_AS(g3.generate(chunk), DataError);

    ScriptedChatStub garbage({"not json at all"});
    LlmQuestionGenerator g4(garbage, "");
    CHECK_THROWS_AS(g4.generate(chunk), DataError);
}
