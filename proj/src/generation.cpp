#include "crag/generation.hpp"

#include <chrono>

#include "crag/errors.hpp"

namespace crag {

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

} // namespace

std::string default_abstention_sentence() {
    return "I cannot answer this question from the provided context.";
}

PromptTemplate default_prompt_template() {
    PromptTemplate t;
    t.system_text =
        "You answer questions using only the context blocks provided. Cite the chunk ids of the "
        "blocks you rely on. If the context contains contradictory information, state the "
        "contradiction explicitly. If the context does not contain the answer, reply exactly: " +
        default_abstention_sentence();
    t.user_text = "Context:\n{{context}}\n\nQuestion: {{question}}";
    return t;
}

AssembledPrompt assemble_context(RetrievedContext& ctx, const VectorStore& store,
                                 const PromptTemplate& tmpl, std::size_t char_budget) {
    if (tmpl.user_text.find("{{context}}") == std::string::npos ||
        tmpl.user_text.find("{{question}}") == std::string::npos)
        throw ConfigError("prompt template must contain {{context}} and {{question}} placeholders");

    AssembledPrompt p;
    p.system_text = tmpl.system_text;
    p.question = ctx.question;

    for (const auto& hit : ctx.hits) {
        const Chunk* chunk = store.find_chunk(hit.chunk_id);
        if (!chunk)
            throw DataError("retrieved chunk not present in store: " + hit.chunk_id);
        p.context_blocks.emplace_back(hit.chunk_id, chunk->text);
    }

    auto render = [&] {
        std::string context_text;
        if (p.context_blocks.empty()) {
            context_text = "(no context cleared the retrieval threshold; reply exactly with: " +
                           default_abstention_sentence() + ")";
        } else {
            for (const auto& [id, text] : p.context_blocks) {
                if (!context_text.empty())
                    context_text += "\n\n";
                context_text += "[source: " + id + "]\n" + text;
            }
        }
        std::string user = replace_all(tmpl.user_text, "{{context}}", context_text);
        return replace_all(user, "{{question}}", p.question);
    };

    p.rendered_user = render();
    // Drop lowest-score blocks until the rendered prompt fits the budget.
    while (p.rendered_user.size() > char_budget && !p.context_blocks.empty()) {
        p.context_blocks.pop_back();
        ctx.truncated = true;
        ctx.truncation_reason = "char-budget";
        p.rendered_user = render();
    }
    p.abstention = p.context_blocks.empty() && ctx.hits.empty();
    p.total_chars = p.rendered_user.size() + p.system_text.size();
    return p;
}

AnswerResult answer(const AssembledPrompt& prompt, ChatProvider& llm) {
    const auto start = std::chrono::steady_clock::now();
    AnswerResult result;
    result.text = llm.complete({{"system", prompt.system_text}, {"user", prompt.rendered_user}});
    result.model_id = llm.model_id();
    result.prompt_chars = prompt.total_chars;
    result.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

} // namespace crag
