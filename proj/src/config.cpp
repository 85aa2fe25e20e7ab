#include "crag/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crag/errors.hpp"

namespace crag {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s, const std::string& where) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    if (!s.empty() && (s.front() == '"' || s.back() == '"'))
        throw ConfigError(where + ": unbalanced quotes in value " + s);
    return s;
}

std::size_t parse_size(const std::string& v, const std::string& key) {
    try {
        std::size_t pos;
        long long n = std::stoll(v, &pos);
        if (pos != v.size() || n < 0)
            throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos;
        double d = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true")
        return true;
    if (v == "false")
        return false;
    throw ConfigError(key + ": expected true|false, got '" + v + "'");
}

void apply(Config& cfg, const std::string& key, const std::string& value) {
    if (key == "chunking.size")
        cfg.chunking.chunk_size = parse_size(value, key);
    else if (key == "chunking.overlap")
        cfg.chunking.overlap = parse_size(value, key);
    else if (key == "embedding.provider")
        cfg.embedding.provider = value;
    else if (key == "embedding.endpoint")
        cfg.embedding.endpoint = value;
    else if (key == "embedding.model")
        cfg.embedding.model = value;
    else if (key == "embedding.dim")
        cfg.embedding.dim = parse_size(value, key);
    else if (key == "embedding.batch")
        cfg.embedding.batch = parse_size(value, key);
    else if (key == "similarity.metric")
        cfg.similarity_metric = metric_from_string(value);
    else if (key == "calibration.alpha")
        cfg.calibration.alpha = parse_double(value, key);
    else if (key == "calibration.mode")
        cfg.calibration.mode = quantile_mode_from_string(value);
    else if (key == "calibration.max_rank")
        cfg.calibration.max_rank = parse_size(value, key);
    else if (key == "calibration.judge")
        cfg.calibration.judge = value;
    else if (key == "calibration.strict")
        cfg.calibration.strict = parse_bool(value, key);
    else if (key == "retrieval.comparison")
        cfg.retrieval.comparison = comparison_from_string(value);
    else if (key == "retrieval.max_chunks")
        cfg.retrieval.max_chunks = parse_size(value, key);
    else if (key == "retrieval.max_context_chars")
        cfg.retrieval.max_context_chars = parse_size(value, key);
    else if (key == "llm.endpoint")
        cfg.llm.endpoint = value;
    else if (key == "llm.model")
        cfg.llm.model = value;
    else if (key == "paths.store")
        cfg.paths.store = value;
    else if (key == "paths.report")
        cfg.paths.report = value;
    else if (key == "paths.templates")
        cfg.paths.templates = value;
    else
        throw ConfigError("unknown config key: " + key);
}

} // namespace

void Config::validate() const {
    if (chunking.chunk_size < 1)
        throw ConfigError("chunking.size: must be >= 1");
    if (chunking.overlap >= chunking.chunk_size)
        throw ConfigError("chunking.overlap: must be < chunking.size");
    if (embedding.provider != "reference" && embedding.provider != "remote")
        throw ConfigError("embedding.provider: expected reference|remote, got '" +
                          embedding.provider + "'");
    if (embedding.provider == "remote" && embedding.endpoint.empty())
        throw ConfigError("embedding.endpoint: required when embedding.provider = remote");
    if (embedding.dim < 2)
        throw ConfigError("embedding.dim: must be >= 2");
    if (embedding.batch < 1)
        throw ConfigError("embedding.batch: must be >= 1");
    if (!(calibration.alpha > 0.0 && calibration.alpha < 1.0))
        throw ConfigError("calibration.alpha: must lie strictly in (0,1)");
    if (calibration.max_rank < 1)
        throw ConfigError("calibration.max_rank: must be >= 1");
    if (calibration.judge != "substring" && calibration.judge != "llm")
        throw ConfigError("calibration.judge: expected substring|llm, got '" + calibration.judge +
                          "'");
    if (calibration.judge == "llm" && llm.endpoint.empty())
        throw ConfigError("llm.endpoint: required when calibration.judge = llm");
}

Config parse_config_text(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto comment = line.find('#');
        if (comment != std::string::npos)
            line = line.substr(0, comment);
        line = trim(line);
        if (line.empty())
            continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + ": malformed section header " + line);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = unquote(trim(line.substr(eq + 1)), where);
        if (!section.empty() && key.find('.') == std::string::npos)
            key = section + "." + key;
        try {
            apply(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string dump_config(const Config& cfg) {
    std::ostringstream out;
    out << "chunking.size = " << cfg.chunking.chunk_size << "\n";
    out << "chunking.overlap = " << cfg.chunking.overlap << "\n";
    out << "embedding.provider = " << cfg.embedding.provider << "\n";
    out << "embedding.endpoint = " << cfg.embedding.endpoint << "\n";
    out << "embedding.model = " << cfg.embedding.model << "\n";
    out << "embedding.dim = " << cfg.embedding.dim << "\n";
    out << "embedding.batch = " << cfg.embedding.batch << "\n";
    out << "similarity.metric = " << to_string(cfg.similarity_metric) << "\n";
    out << "calibration.alpha = " << cfg.calibration.alpha << "\n";
    out << "calibration.mode = " << to_string(cfg.calibration.mode) << "\n";
    out << "calibration.max_rank = " << cfg.calibration.max_rank << "\n";
    out << "calibration.judge = " << cfg.calibration.judge << "\n";
    out << "calibration.strict = " << (cfg.calibration.strict ? "true" : "false") << "\n";
    out << "retrieval.comparison = " << to_string(cfg.retrieval.comparison) << "\n";
    out << "retrieval.max_chunks = " << cfg.retrieval.max_chunks << "\n";
    out << "retrieval.max_context_chars = " << cfg.retrieval.max_context_chars << "\n";
    out << "llm.endpoint = " << cfg.llm.endpoint << "\n";
    out << "llm.model = " << cfg.llm.model << "\n";
    out << "paths.store = " << cfg.paths.store << "\n";
    out << "paths.report = " << cfg.paths.report << "\n";
    out << "paths.templates = " << cfg.paths.templates << "\n";
    const char* key = std::getenv("CONFORMAL_RAG_API_KEY");
    out << "api_key = " << (key && *key ? "<redacted>" : "<unset>") << "\n";
    return out.str();
}

} // namespace crag
