#pragma once

// Gateway for every chat and embedding call. Live mode talks to an
// OpenAI-compatible endpoint, record mode additionally appends to a JSONL
// transcript, replay mode answers from the transcript only.

#include "unidomain/errors.hpp"

#include <json.hpp>

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

namespace unidomain::oracle {

using Vector = std::vector<double>;
inline constexpr std::size_t kStubDim = 256;

class OracleError : public Error {
public:
    using Error::Error;
};

class NetworkError : public OracleError {
public:
    using OracleError::OracleError;
};

class ReplayMiss : public OracleError {
public:
    explicit ReplayMiss(std::string digest)
        : OracleError("no transcript record for request digest " + digest), digest_(std::move(digest)) {}
    const std::string &digest() const { return digest_; }

private:
    std::string digest_;
};

class ProviderError : public OracleError {
public:
    ProviderError(int status, std::string body)
        : OracleError("provider returned HTTP " + std::to_string(status) + ": " + body.substr(0, 300)),
          status_(status), body_(std::move(body)) {}
    int status() const { return status_; }
    const std::string &body() const { return body_; }

private:
    int status_;
    std::string body_;
};

enum class Mode { live, record, replay };
std::string to_string(Mode mode);
Mode parse_mode(const std::string &text);

struct Image {
    std::string media_type = "image/png";
    std::string data; // encoded bytes

    std::string sha256() const;
};

struct Part {
    std::string text;
    std::shared_ptr<const Image> image; // set for image parts

    static Part of_text(std::string t) { return {std::move(t), nullptr}; }
    static Part of_image(Image img) { return {{}, std::make_shared<const Image>(std::move(img))}; }
};

struct Message {
    std::string role; // system | user | assistant
    std::vector<Part> parts;

    static Message text(std::string role, std::string content);
};

struct ChatRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 4096;

    /// Canonical form used for digests and transcripts; images appear by hash.
    nlohmann::json canonical() const;
    /// OpenAI wire body with images inlined as base64 data URIs.
    nlohmann::json wire() const;
    /// All text parts joined, for inspection in tests.
    std::string all_text() const;
};

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);
std::string request_digest(const nlohmann::json &canonical);

/// Character-trigram bag (padded `^^`/`$$`) hashed with FNV-1a 64 into 256
/// buckets, L2-normalized. The empty string maps to the all-equal unit vector.
Vector stub_embed(const std::string &text);
std::uint64_t fnv1a64(std::string_view bytes);
double cosine(const Vector &a, const Vector &b);

struct UsageCounters {
    std::size_t n_calls = 0;
    double thinking_time = 0.0;
};

// Transcript -----------------------------------------------------------------

struct TranscriptRecord {
    std::string digest;
    nlohmann::json request;
    nlohmann::json response; // string for chat, array of vectors for embed
    double latency_s = 0.0;
};

class Transcript {
public:
    Transcript() = default;
    /// Loads records if the file exists; appends go to the same file.
    explicit Transcript(std::filesystem::path path);

    const TranscriptRecord *find(const std::string &digest) const;
    /// Returns false when the digest is already present.
    bool append(TranscriptRecord record);
    std::size_t size() const;
    const std::filesystem::path &path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::deque<TranscriptRecord> records_; // stable addresses for find()
    std::map<std::string, std::size_t> index_;
};

// Backends -------------------------------------------------------------------

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string chat(const ChatRequest &request) = 0;
    virtual std::vector<Vector> embed(const std::vector<std::string> &texts, const std::string &model) = 0;
};

struct HttpSettings {
    std::string base_url = "http://localhost:8000";
    std::string api_key;
    double timeout_s = 120.0;
    int max_attempts = 3;
    double backoff_s = 1.0; // doubled after each failed attempt
};

std::unique_ptr<Backend> make_http_backend(const HttpSettings &settings);

/// Answers chats with a callback; used for authoring fixtures and in tests.
class ScriptedBackend : public Backend {
public:
    using Responder = std::function<std::string(const ChatRequest &)>;
    explicit ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

    std::string chat(const ChatRequest &request) override { return responder_(request); }
    std::vector<Vector> embed(const std::vector<std::string> &texts, const std::string &) override;

private:
    Responder responder_;
};

// Client ---------------------------------------------------------------------

struct OracleConfig {
    Mode mode = Mode::replay;
    HttpSettings http;
    std::string model = "gpt-4.1";
    std::string embed_model = "stub"; // "stub" embeds locally in every mode
    std::filesystem::path transcript;
    int parallelism = 4;

    /// Overrides fields from ORACLE_* environment variables when set.
    static OracleConfig from_env(OracleConfig base);
    static OracleConfig from_env() { return from_env(OracleConfig{}); }
};

struct CallResult {
    std::string text;
    std::string digest;
    double latency_s = 0.0;
};

class OracleClient {
public:
    explicit OracleClient(OracleConfig config, std::shared_ptr<Backend> backend = nullptr);

    CallResult chat(const ChatRequest &request);
    std::vector<Vector> embed(const std::vector<std::string> &texts, double *latency_s = nullptr);

    UsageCounters usage() const;
    const OracleConfig &config() const { return config_; }
    const Transcript &transcript() const { return transcript_; }
    /// Request skeleton with the configured model and deterministic defaults.
    ChatRequest request() const;

private:
    OracleConfig config_;
    std::shared_ptr<Backend> backend_;
    Transcript transcript_;
    std::counting_semaphore<256> slots_;
    std::atomic<std::size_t> n_calls_{0};
    std::atomic<double> thinking_time_{0.0};

    std::shared_ptr<Backend> backend();
};

struct TraceEntry {
    std::string stage;
    std::string kind; // chat | embed
    std::string digest;
    double latency_s = 0.0;
};

/// Per-task view of a client: keeps its own counters and a stage-labelled
/// trace so concurrent tasks do not mix their accounting.
class OracleSession {
public:
    explicit OracleSession(OracleClient &client) : client_(client) {}

    void set_stage(std::string stage) { stage_ = std::move(stage); }
    const std::string &stage() const { return stage_; }

    std::string chat(const ChatRequest &request);
    std::vector<Vector> embed(const std::vector<std::string> &texts);
    ChatRequest request() const { return client_.request(); }

    const UsageCounters &usage() const { return usage_; }
    const std::vector<TraceEntry> &trace() const { return trace_; }
    OracleClient &client() { return client_; }

    /// Appends another session's counters and trace, e.g. after a parallel fan-out.
    void absorb(const OracleSession &other);

private:
    OracleClient &client_;
    std::string stage_ = "default";
    UsageCounters usage_;
    std::vector<TraceEntry> trace_;
};

} // namespace unidomain::oracle
