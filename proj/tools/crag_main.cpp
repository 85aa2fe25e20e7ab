#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "crag/calibration.hpp"
#include "crag/config.hpp"
#include "crag/corpus.hpp"
#include "crag/embedding.hpp"
#include "crag/errors.hpp"
#include "crag/evaluation.hpp"
#include "crag/generation.hpp"
#include "crag/remote.hpp"
#include "crag/retrieval.hpp"
#include "crag/vectorstore.hpp"

namespace {

using namespace crag;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitTransport = 4;

void warn_to_stderr(const std::string& msg) {
    std::cerr << "warning: " << msg << "\n";
}

std::string env_api_key() {
    const char* k = std::getenv("CONFORMAL_RAG_API_KEY");
    return k ? k : "";
}

RemoteConfig remote_config(const std::string& endpoint, const std::string& model,
                           std::size_t batch) {
    RemoteConfig rc;
    rc.endpoint = endpoint;
    rc.model = model;
    rc.api_key = env_api_key();
    rc.batch_size = batch;
    return rc;
}

std::unique_ptr<EmbeddingProvider> make_provider(const Config& cfg) {
    if (cfg.embedding.provider == "reference")
        return std::make_unique<ReferenceEmbedder>(cfg.embedding.dim);
    return std::make_unique<RemoteEmbedder>(
        remote_config(cfg.embedding.endpoint, cfg.embedding.model, cfg.embedding.batch),
        cfg.embedding.dim);
}

// When the store was built with the reference embedder, rebuild the provider
// at the store's dimension so queries embed into the same space.
std::unique_ptr<EmbeddingProvider> make_provider_for_store(const Config& cfg,
                                                           const VectorStore& store) {
    auto provider = make_provider(cfg);
    if (provider->embedder_id() == store.embedder_id())
        return provider;
    const std::string prefix = "reference/fnv1a-bucket/dim";
    if (store.embedder_id().rfind(prefix, 0) == 0) {
        auto dim = static_cast<std::size_t>(std::stoull(store.embedder_id().substr(prefix.size())));
        warn_to_stderr("store embedder '" + store.embedder_id() +
                       "' differs from configured embedder '" + provider->embedder_id() +
                       "'; using the store's reference embedder");
        return std::make_unique<ReferenceEmbedder>(dim);
    }
    warn_to_stderr("store embedder '" + store.embedder_id() +
                   "' differs from configured embedder '" + provider->embedder_id() + "'");
    return provider;
}

std::string read_template_file(const std::string& dir, const std::string& name,
                               const std::string& fallback) {
    if (dir.empty())
        return fallback;
    std::ifstream in(std::filesystem::path(dir) / name, std::ios::binary);
    if (!in)
        return fallback;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct JudgeBundle {
    std::unique_ptr<ChatProvider> chat; // keeps the llm judge's provider alive
    std::unique_ptr<RelevanceJudge> judge;
};

JudgeBundle make_judge(const Config& cfg) {
    JudgeBundle b;
    if (cfg.calibration.judge == "substring") {
        b.judge = std::make_unique<SubstringJudge>();
        return b;
    }
    b.chat = std::make_unique<RemoteChatProvider>(
        remote_config(cfg.llm.endpoint, cfg.llm.model, 1));
    b.judge = std::make_unique<LlmJudge>(
        *b.chat, read_template_file(cfg.paths.templates, "judge_prompt.txt", default_judge_prompt()));
    return b;
}

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write: " + path);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

std::vector<double> parse_alphas(const std::string& s) {
    std::vector<double> alphas;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos;
            double a = std::stod(item, &pos);
            if (pos != item.size())
                throw std::invalid_argument(item);
            alphas.push_back(a);
        } catch (const std::exception&) {
            throw ConfigError("calibration.alpha: cannot parse '" + item + "'");
        }
    }
    if (alphas.empty())
        throw ConfigError("calibration.alpha: empty alpha list");
    return alphas;
}

int cmd_ingest(const Config& cfg, const std::string& corpus_dir, const std::string& out_path) {
    if (!std::filesystem::exists(corpus_dir))
        throw ConfigError("--corpus path does not exist: " + corpus_dir);
    auto loaded = load_corpus(corpus_dir);
    for (const auto& r : loaded.rejected)
        warn_to_stderr("rejected " + r);

    std::vector<Chunk> chunks;
    for (const auto& doc : loaded.documents) {
        auto doc_chunks = chunk_document(doc, cfg.chunking);
        chunks.insert(chunks.end(), doc_chunks.begin(), doc_chunks.end());
    }
    auto provider = make_provider(cfg);
    auto store = VectorStore::build(chunks, *provider, cfg.similarity_metric, cfg.chunking);
    save_store(store, out_path);
    std::cout << "ingested " << loaded.documents.size() << " documents into " << store.size()
              << " chunks\nembedder_id: " << store.embedder_id() << "\nstore: " << out_path << "\n";
    return kExitOk;
}

int cmd_calibrate(const Config& cfg, const std::string& store_path, const std::string& questions_path,
                  std::size_t generate_n, std::uint64_t seed, const std::string& out_path) {
    auto store = load_store(store_path);
    auto provider = make_provider_for_store(cfg, store);
    auto judge = make_judge(cfg);

    std::vector<CalibrationQuestion> questions;
    CalibrationOptions opts;
    opts.alpha = cfg.calibration.alpha;
    opts.mode = cfg.calibration.mode;
    opts.max_rank = cfg.calibration.max_rank;
    opts.metric = cfg.similarity_metric;
    opts.strict = cfg.calibration.strict;

    if (generate_n > 0) {
        RemoteChatProvider chat(remote_config(cfg.llm.endpoint, cfg.llm.model, 1));
        LlmQuestionGenerator generator(
            chat,
            read_template_file(cfg.paths.templates, "generator_prompt.txt", default_generator_prompt()));
        questions = generate_calibration_set(store, generator, generate_n, seed, warn_to_stderr);
        opts.rng = "splitmix64/seed=" + std::to_string(seed);
    } else {
        questions = import_calibration_set(questions_path);
    }

    auto report = run_calibration(store, questions, *provider, *judge.judge, opts, warn_to_stderr);
    save_report(report, out_path);

    std::cout << "n_labeled: " << report.n_labeled << "\nn_dropped: " << report.n_dropped << "\n";
    if (report.threshold)
        std::cout << "threshold: " << *report.threshold << "\n";
    else
        std::cout << "threshold: RETRIEVE_ALL (no finite cutoff at this alpha and n)\n";
    std::cout << "report: " << out_path << "\n";
    return kExitOk;
}

int cmd_query(const Config& cfg, const std::string& store_path, const std::string& report_path,
              const std::string& question, bool as_json, bool dry_run) {
    auto store = load_store(store_path);
    auto report = load_report(report_path);
    auto provider = make_provider_for_store(cfg, store);

    RetrieveOptions ropts;
    ropts.comparison = cfg.retrieval.comparison;
    if (cfg.retrieval.max_chunks > 0)
        ropts.budget = cfg.retrieval.max_chunks;

    auto ctx = conformal_retrieve(question, store, report, *provider, ropts, warn_to_stderr);

    PromptTemplate tmpl = default_prompt_template();
    tmpl.system_text =
        read_template_file(cfg.paths.templates, "answer_system.txt", tmpl.system_text);
    tmpl.user_text = read_template_file(cfg.paths.templates, "answer_prompt.txt", tmpl.user_text);
    const std::size_t char_budget =
        cfg.retrieval.max_context_chars > 0 ? cfg.retrieval.max_context_chars : kUnlimited;
    auto prompt = assemble_context(ctx, store, tmpl, char_budget);

    if (as_json) {
        std::cout << context_to_json(ctx) << "\n";
    } else {
        if (ctx.threshold_used)
            std::cout << "threshold: " << *ctx.threshold_used << " (" << to_string(ctx.comparison)
                      << ")\n";
        else
            std::cout << "threshold: RETRIEVE_ALL\n";
        std::cout << "truncated: " << (ctx.truncated ? "yes (" + ctx.truncation_reason + ")" : "no")
                  << "\nhits (" << ctx.hits.size() << "):\n";
        for (const auto& h : ctx.hits)
            std::printf("  %4zu  %-40s  %.6f\n", h.rank, h.chunk_id.c_str(), h.score);
    }
    if (dry_run)
        return kExitOk;

    RemoteChatProvider chat(remote_config(cfg.llm.endpoint, cfg.llm.model, 1));
    auto result = answer(prompt, chat);
    std::cout << "\nanswer (" << result.model_id << "):\n" << result.text << "\n";
    return kExitOk;
}

int cmd_evaluate(const Config& cfg, const std::string& store_path, const std::string& calib_path,
                 const std::string& test_path, const std::string& alphas_str,
                 const std::string& out_csv, const std::string& detail_out) {
    auto store = load_store(store_path);
    auto provider = make_provider_for_store(cfg, store);
    auto judge = make_judge(cfg);
    auto calib = import_calibration_set(calib_path);
    auto test = import_calibration_set(test_path);
    auto alphas = parse_alphas(alphas_str);

    for (const auto& cq : calib)
        for (const auto& tq : test)
            if (cq.question_id == tq.question_id)
                throw ConfigError("calibration and test splits overlap on question_id " +
                                  cq.question_id);

    EvaluateOptions opts;
    opts.mode = cfg.calibration.mode;
    opts.comparison = cfg.retrieval.comparison;
    opts.max_rank = cfg.calibration.max_rank;
    opts.metric = cfg.similarity_metric;

    auto results = sweep_alpha(store, calib, test, *provider, *judge.judge, alphas, opts,
                               warn_to_stderr);
    const std::string csv = sweep_to_csv(results);
    if (!out_csv.empty())
        write_atomic(out_csv, csv);
    std::cout << csv;
    for (const auto& r : results)
        std::printf("alpha=%.4f  target=%.4f  coverage=%.4f  mean_set_size=%.2f  excluded=%zu\n",
                    r.alpha, 1.0 - r.alpha, r.empirical_coverage, r.mean_set_size, r.n_excluded);
    if (!detail_out.empty()) {
        std::string detail;
        for (const auto& r : results)
            detail += coverage_detail_jsonl(r);
        write_atomic(detail_out, detail);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conformal-prediction-calibrated retrieval for RAG pipelines"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "Config file (TOML-style key = value)");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Chunk and embed a corpus into a vector store");
    std::string corpus_dir, store_out;
    std::size_t chunk_size = 0, overlap_val = SIZE_MAX;
    std::string embedder_flag, metric_flag;
    std::size_t dim_flag = 0;
    ingest->add_option("--corpus", corpus_dir, "Corpus directory of UTF-8 text files")->required();
    ingest->add_option("--out", store_out, "Output store path")->required();
    ingest->add_option("--chunk-size", chunk_size, "Chunk size in tokens");
    ingest->add_option("--overlap", overlap_val, "Chunk overlap in tokens");
    ingest->add_option("--embedder", embedder_flag, "reference|remote");
    ingest->add_option("--dim", dim_flag, "Embedding dimension");
    ingest->add_option("--metric", metric_flag, "cosine|dot");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Label questions and compute the threshold");
    std::string cal_store, questions_path, report_out, mode_flag, judge_flag;
    std::size_t generate_n = 0, max_rank_flag = 0;
    std::uint64_t seed = 0;
    double alpha_flag = -1.0;
    bool strict_flag = false;
    calibrate->add_option("--store", cal_store, "Vector store path")->required();
    auto* qopt = calibrate->add_option("--questions", questions_path, "JSON Lines question file");
    auto* gopt = calibrate->add_option("--generate", generate_n, "Generate N questions via the LLM");
    qopt->excludes(gopt);
    gopt->excludes(qopt);
    calibrate->add_option("--seed", seed, "RNG seed for question sampling");
    calibrate->add_option("--alpha", alpha_flag, "Error rate in (0,1)");
    calibrate->add_option("--mode", mode_flag, "paper-percentile|finite-sample");
    calibrate->add_option("--judge", judge_flag, "substring|llm");
    calibrate->add_option("--max-rank", max_rank_flag, "Max rank walked during labeling");
    calibrate->add_flag("--strict", strict_flag, "Fail on any unanswerable question");
    calibrate->add_option("--out", report_out, "Output report path")->required();

    // query
    auto* query = app.add_subcommand("query", "Conformal retrieval plus grounded answering");
    std::string q_store, q_report, question, q_comparison;
    std::size_t max_chunks = 0, max_context_chars = 0;
    bool as_json = false, dry_run = false;
    query->add_option("--store", q_store, "Vector store path")->required();
    query->add_option("--calibration", q_report, "Calibration report path")->required();
    query->add_option("question", question, "Question text")->required();
    query->add_flag("--json", as_json, "Emit the retrieval result as JSON");
    query->add_flag("--dry-run", dry_run, "Stop before the chat provider call");
    query->add_option("--comparison", q_comparison, "geq|strict-gt");
    query->add_option("--max-chunks", max_chunks, "Retrieval budget in chunks");
    query->add_option("--max-context-chars", max_context_chars, "Context character budget");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Empirical coverage vs 1-alpha");
    std::string e_store, e_calib, e_test, e_alphas, e_out, e_detail, e_mode;
    evaluate->add_option("--store", e_store, "Vector store path")->required();
    evaluate->add_option("--calib", e_calib, "Calibration question file")->required();
    evaluate->add_option("--test", e_test, "Test question file")->required();
    evaluate->add_option("--alpha", e_alphas, "Alpha or comma-separated alphas")->required();
    evaluate->add_option("--mode", e_mode, "paper-percentile|finite-sample");
    evaluate->add_option("--out", e_out, "Output CSV path");
    evaluate->add_option("--detail-out", e_detail, "Per-question JSON Lines output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        Config cfg = config_path.empty() ? Config{} : load_config(config_path);

        // Flags override file values.
        if (chunk_size > 0)
            cfg.chunking.chunk_size = chunk_size;
        if (overlap_val != SIZE_MAX)
            cfg.chunking.overlap = overlap_val;
        if (!embedder_flag.empty())
            cfg.embedding.provider = embedder_flag;
        if (dim_flag > 0)
            cfg.embedding.dim = dim_flag;
        if (!metric_flag.empty())
            cfg.similarity_metric = metric_from_string(metric_flag);
        if (alpha_flag >= 0.0)
            cfg.calibration.alpha = alpha_flag;
        if (!mode_flag.empty() || !e_mode.empty())
            cfg.calibration.mode = quantile_mode_from_string(!mode_flag.empty() ? mode_flag : e_mode);
        if (!judge_flag.empty())
            cfg.calibration.judge = judge_flag;
        if (max_rank_flag > 0)
            cfg.calibration.max_rank = max_rank_flag;
        if (strict_flag)
            cfg.calibration.strict = true;
        if (!q_comparison.empty())
            cfg.retrieval.comparison = comparison_from_string(q_comparison);
        if (max_chunks > 0)
            cfg.retrieval.max_chunks = max_chunks;
        if (max_context_chars > 0)
            cfg.retrieval.max_context_chars = max_context_chars;

        cfg.validate();
        std::cerr << "effective config:\n" << dump_config(cfg);

        if (ingest->parsed())
            return cmd_ingest(cfg, corpus_dir, store_out);
        if (calibrate->parsed()) {
            if (questions_path.empty() && generate_n == 0)
                throw ConfigError("calibrate requires --questions or --generate");
            return cmd_calibrate(cfg, cal_store, questions_path, generate_n, seed, report_out);
        }
        if (query->parsed())
            return cmd_query(cfg, q_store, q_report, question, as_json, dry_run);
        if (evaluate->parsed())
            return cmd_evaluate(cfg, e_store, e_calib, e_test, e_alphas, e_out, e_detail);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TransportError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
