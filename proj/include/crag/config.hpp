#pragma once

#include <cstddef>
#include <string>

#include "crag/calibration.hpp"
#include "crag/corpus.hpp"
#include "crag/embedding.hpp"
#include "crag/retrieval.hpp"

namespace crag {

// Full effective configuration. File values override defaults, CLI flags
// override file values. Unknown keys in the file are errors.
struct Config {
    ChunkingConfig chunking;

    struct Embedding {
        std::string provider = "reference"; // reference|remote
        std::string endpoint;
        std::string model;
        std::size_t dim = 256;
        std::size_t batch = 64;
    } embedding;

    Metric similarity_metric = Metric::cosine;

    struct Calibration {
        double alpha = 0.1;
        QuantileMode mode = QuantileMode::finite_sample;
        std::size_t max_rank = 50;
        std::string judge = "substring"; // substring|llm
        bool strict = false;
    } calibration;

    struct Retrieval {
        Comparison comparison = Comparison::geq;
        std::size_t max_chunks = 0;        // 0 = unlimited
        std::size_t max_context_chars = 0; // 0 = unlimited
    } retrieval;

    struct Llm {
        std::string endpoint;
        std::string model;
    } llm;

    struct Paths {
        std::string store;
        std::string report;
        std::string templates;
    } paths;

    void validate() const; // throws ConfigError naming the field path
};

Config load_config(const std::string& path);
Config parse_config_text(const std::string& text, const std::string& origin = "<config>");

// Effective config as key=value lines, secrets redacted.
std::string dump_config(const Config& cfg);

} // namespace crag
