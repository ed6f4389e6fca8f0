#include "unidomain/oracle.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace unidomain::oracle {

std::string to_string(Mode mode) {
    switch (mode) {
    case Mode::live:
        return "live";
    case Mode::record:
        return "record";
    case Mode::replay:
        return "replay";
    }
    return "?";
}

Mode parse_mode(const std::string &text) {
    if (text == "live")
        return Mode::live;
    if (text == "record")
        return Mode::record;
    if (text == "replay")
        return Mode::replay;
    throw Error("unknown oracle mode `" + text + "` (expected live, record or replay)");
}

// Hashing and encoding ---------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static const char *hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()),
                            reinterpret_cast<const unsigned char *>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string Image::sha256() const { return sha256_hex(data); }

std::string request_digest(const nlohmann::json &canonical) { return sha256_hex(canonical.dump()); }

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

Vector stub_embed(const std::string &text) {
    Vector v(kStubDim, 0.0);
    if (text.empty()) {
        std::fill(v.begin(), v.end(), 1.0 / std::sqrt(static_cast<double>(kStubDim)));
        return v;
    }
    std::string padded = "^^" + text + "$$";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i)
        v[fnv1a64(std::string_view(padded).substr(i, 3)) % kStubDim] += 1.0;
    double norm = 0.0;
    for (double x : v)
        norm += x * x;
    norm = std::sqrt(norm);
    for (double &x : v)
        x /= norm;
    return v;
}

double cosine(const Vector &a, const Vector &b) {
    if (a.size() != b.size())
        throw Error("cosine of vectors with different dimensions");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0)
        return 0.0;
    return dot / std::sqrt(na * nb);
}

// Requests ---------------------------------------------------------------------

Message Message::text(std::string role, std::string content) {
    return {std::move(role), {Part::of_text(std::move(content))}};
}

nlohmann::json ChatRequest::canonical() const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto &m : messages) {
        nlohmann::json content = nlohmann::json::array();
        for (const auto &p : m.parts) {
            if (p.image)
                content.push_back({{"type", "image"}, {"media_type", p.image->media_type}, {"sha256", p.image->sha256()}});
            else
                content.push_back({{"type", "text"}, {"text", p.text}});
        }
        msgs.push_back({{"role", m.role}, {"content", content}});
    }
    return {{"kind", "chat"},
            {"model", model},
            {"messages", msgs},
            {"temperature", temperature},
            {"max_tokens", max_tokens}};
}

nlohmann::json ChatRequest::wire() const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto &m : messages) {
        nlohmann::json content = nlohmann::json::array();
        for (const auto &p : m.parts) {
            if (p.image)
                content.push_back({{"type", "image_url"},
                                   {"image_url", {{"url", "data:" + p.image->media_type + ";base64," +
                                                              base64_encode(p.image->data)}}}});
            else
                content.push_back({{"type", "text"}, {"text", p.text}});
        }
        msgs.push_back({{"role", m.role}, {"content", content}});
    }
    return {{"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens}};
}

std::string ChatRequest::all_text() const {
    std::string out;
    for (const auto &m : messages)
        for (const auto &p : m.parts)
            if (!p.image)
                out += p.text + "\n";
    return out;
}

// Transcript -----------------------------------------------------------------

Transcript::Transcript(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in)
        return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        try {
            auto doc = nlohmann::json::parse(line);
            TranscriptRecord r{doc.at("digest").get<std::string>(), doc.at("request"), doc.at("response"),
                               doc.value("latency_s", 0.0)};
            if (!index_.count(r.digest)) {
                index_[r.digest] = records_.size();
                records_.push_back(std::move(r));
            }
        } catch (const nlohmann::json::exception &e) {
            throw OracleError(path_.string() + ":" + std::to_string(lineno) + ": bad transcript record: " + e.what());
        }
    }
}

const TranscriptRecord *Transcript::find(const std::string &digest) const {
    std::lock_guard lock(mutex_);
    auto it = index_.find(digest);
    return it == index_.end() ? nullptr : &records_[it->second];
}

bool Transcript::append(TranscriptRecord record) {
    std::lock_guard lock(mutex_);
    if (index_.count(record.digest))
        return false;
    if (!path_.empty()) {
        if (path_.has_parent_path())
            std::filesystem::create_directories(path_.parent_path());
        std::ofstream out(path_, std::ios::app);
        if (!out)
            throw OracleError("cannot append to transcript " + path_.string());
        nlohmann::json doc{{"digest", record.digest},
                           {"request", record.request},
                           {"response", record.response},
                           {"latency_s", record.latency_s}};
        out << doc.dump() << "\n";
    }
    index_[record.digest] = records_.size();
    records_.push_back(std::move(record));
    return true;
}

std::size_t Transcript::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::vector<Vector> ScriptedBackend::embed(const std::vector<std::string> &texts, const std::string &) {
    std::vector<Vector> out;
    for (const auto &t : texts)
        out.push_back(stub_embed(t));
    return out;
}

// Client ---------------------------------------------------------------------

OracleConfig OracleConfig::from_env(OracleConfig base) {
    auto env = [](const char *name) -> const char * {
        const char *v = std::getenv(name);
        return v && *v ? v : nullptr;
    };
    if (auto v = env("ORACLE_BASE_URL"))
        base.http.base_url = v;
    if (auto v = env("ORACLE_API_KEY"))
        base.http.api_key = v;
    if (auto v = env("ORACLE_MODE"))
        base.mode = parse_mode(v);
    if (auto v = env("ORACLE_MODEL"))
        base.model = v;
    if (auto v = env("ORACLE_EMBED_MODEL"))
        base.embed_model = v;
    return base;
}

OracleClient::OracleClient(OracleConfig config, std::shared_ptr<Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)), transcript_(config_.transcript),
      slots_(std::clamp(config_.parallelism, 1, 256)) {}

std::shared_ptr<Backend> OracleClient::backend() {
    static std::mutex init_mutex;
    std::lock_guard lock(init_mutex);
    if (!backend_)
        backend_ = make_http_backend(config_.http);
    return backend_;
}

ChatRequest OracleClient::request() const {
    ChatRequest r;
    r.model = config_.model;
    return r;
}

namespace {

struct SlotGuard {
    std::counting_semaphore<256> &sem;
    explicit SlotGuard(std::counting_semaphore<256> &s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
};

} // namespace

CallResult OracleClient::chat(const ChatRequest &request) {
    if (request.messages.empty())
        throw OracleError("chat request has no messages");
    nlohmann::json canonical = request.canonical();
    std::string digest = request_digest(canonical);
    CallResult result{{}, digest, 0.0};

    if (config_.mode == Mode::replay) {
        const TranscriptRecord *rec = transcript_.find(digest);
        if (!rec)
            throw ReplayMiss(digest);
        result.text = rec->response.get<std::string>();
        result.latency_s = rec->latency_s;
    } else {
        SlotGuard slot(slots_);
        auto start = std::chrono::steady_clock::now();
        result.text = backend()->chat(request);
        result.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (config_.mode == Mode::record)
            transcript_.append({digest, canonical, result.text, result.latency_s});
    }
    n_calls_.fetch_add(1);
    thinking_time_.fetch_add(result.latency_s);
    return result;
}

std::vector<Vector> OracleClient::embed(const std::vector<std::string> &texts, double *latency_s) {
    if (texts.empty())
        throw OracleError("embed called with no texts");
    std::vector<Vector> out;
    double latency = 0.0;
    if (config_.embed_model == "stub") {
        for (const auto &t : texts)
            out.push_back(stub_embed(t));
    } else {
        nlohmann::json canonical{{"kind", "embed"}, {"model", config_.embed_model}, {"input", texts}};
        std::string digest = request_digest(canonical);
        if (config_.mode == Mode::replay) {
            const TranscriptRecord *rec = transcript_.find(digest);
            if (!rec)
                throw ReplayMiss(digest);
            out = rec->response.get<std::vector<Vector>>();
            latency = rec->latency_s;
        } else {
            SlotGuard slot(slots_);
            auto start = std::chrono::steady_clock::now();
            out = backend()->embed(texts, config_.embed_model);
            latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            for (auto &v : out) {
                double norm = 0;
                for (double x : v)
                    norm += x * x;
                if (norm > 0)
                    for (double &x : v)
                        x /= std::sqrt(norm);
            }
            if (config_.mode == Mode::record)
                transcript_.append({digest, canonical, out, latency});
        }
    }
    n_calls_.fetch_add(1);
    thinking_time_.fetch_add(latency);
    if (latency_s)
        *latency_s = latency;
    return out;
}

UsageCounters OracleClient::usage() const { return {n_calls_.load(), thinking_time_.load()}; }

// Session --------------------------------------------------------------------

std::string OracleSession::chat(const ChatRequest &request) {
    CallResult r = client_.chat(request);
    usage_.n_calls += 1;
    usage_.thinking_time += r.latency_s;
    trace_.push_back({stage_, "chat", r.digest, r.latency_s});
    return r.text;
}

std::vector<Vector> OracleSession::embed(const std::vector<std::string> &texts) {
    double latency = 0.0;
    auto out = client_.embed(texts, &latency);
    usage_.n_calls += 1;
    usage_.thinking_time += latency;
    trace_.push_back({stage_, "embed", {}, latency});
    return out;
}

void OracleSession::absorb(const OracleSession &other) {
    usage_.n_calls += other.usage_.n_calls;
    usage_.thinking_time += other.usage_.thinking_time;
    trace_.insert(trace_.end(), other.trace_.begin(), other.trace_.end());
}

} // namespace unidomain::oracle
