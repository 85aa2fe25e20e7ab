#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crag/retrieval.hpp"
#include "crag/vectorstore.hpp"

namespace crag {

struct ChatMessage {
    std::string role;
    std::string content;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string model_id() const = 0;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct PromptTemplate {
    // Must contain {{context}} and {{question}}.
    std::string user_text;
    std::string system_text;
};

PromptTemplate default_prompt_template();
std::string default_abstention_sentence();

struct AssembledPrompt {
    std::string system_text;
    std::vector<std::pair<std::string, std::string>> context_blocks; // (chunk_id, text)
    std::string question;
    std::string rendered_user; // template with placeholders filled
    std::size_t total_chars = 0;
    bool abstention = false;
};

// Blocks render in hit order, each prefixed "[source: <chunk_id>]". A char
// budget drops lowest-score blocks until the rendered prompt fits and marks
// the context truncated.
AssembledPrompt assemble_context(RetrievedContext& ctx, const VectorStore& store,
                                 const PromptTemplate& tmpl,
                                 std::size_t char_budget = kUnlimited);

struct AnswerResult {
    std::string text;
    std::string model_id;
    std::size_t prompt_chars = 0;
    double elapsed_seconds = 0.0;
};

AnswerResult answer(const AssembledPrompt& prompt, ChatProvider& llm);

} // namespace crag
