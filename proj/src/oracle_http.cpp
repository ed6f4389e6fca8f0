// OpenAI-compatible HTTP backend.

#include <httplib.h>

#include "unidomain/oracle.hpp"

#include <chrono>
#include <optional>
#include <thread>

namespace unidomain::oracle {

namespace {

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string prefix; // path prefix without trailing slash
};

Endpoint split_url(const std::string &url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw OracleError("oracle base URL must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    e.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!e.prefix.empty() && e.prefix.back() == '/')
        e.prefix.pop_back();
    return e;
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpSettings settings) : settings_(std::move(settings)), endpoint_(split_url(settings_.base_url)) {}

    std::string chat(const ChatRequest &request) override {
        nlohmann::json reply = post("/chat/completions", request.wire());
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception &) {
            throw ProviderError(200, "unexpected chat response shape: " + reply.dump());
        }
    }

    std::vector<Vector> embed(const std::vector<std::string> &texts, const std::string &model) override {
        nlohmann::json reply = post("/embeddings", {{"model", model}, {"input", texts}});
        std::vector<Vector> out(texts.size());
        try {
            for (const auto &item : reply.at("data")) {
                std::size_t i = item.value("index", std::size_t{0});
                if (i >= out.size())
                    throw ProviderError(200, "embedding index out of range");
                out[i] = item.at("embedding").get<Vector>();
            }
        } catch (const nlohmann::json::exception &) {
            throw ProviderError(200, "unexpected embedding response shape: " + reply.dump());
        }
        return out;
    }

private:
    HttpSettings settings_;
    Endpoint endpoint_;

    std::string path(const std::string &suffix) const {
        std::string p = endpoint_.prefix;
        if (p.size() < 3 || p.substr(p.size() - 3) != "/v1")
            p += "/v1";
        return p + suffix;
    }

    nlohmann::json post(const std::string &suffix, const nlohmann::json &body) {
        httplib::Client client(endpoint_.origin);
        auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(settings_.timeout_s));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (!settings_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + settings_.api_key);

        const std::string payload = body.dump();
        double backoff = settings_.backoff_s;
        std::string last_error;
        std::optional<ProviderError> last_provider;
        for (int attempt = 1; attempt <= settings_.max_attempts; ++attempt) {
            auto res = client.Post(path(suffix), headers, payload, "application/json");
            if (res && res->status == 200) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception &) {
                    throw ProviderError(res->status, res->body);
                }
            }
            if (res) {
                if (!retryable(res->status))
                    throw ProviderError(res->status, res->body);
                last_provider.emplace(res->status, res->body);
            } else {
                last_error = httplib::to_string(res.error());
                last_provider.reset();
            }
            if (attempt < settings_.max_attempts) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                backoff *= 2;
            }
        }
        if (last_provider)
            throw *last_provider;
        throw NetworkError("request to " + endpoint_.origin + path(suffix) + " failed after " +
                           std::to_string(settings_.max_attempts) + " attempts: " + last_error);
    }
};

} // namespace

std::unique_ptr<Backend> make_http_backend(const HttpSettings &settings) {
    return std::make_unique<HttpBackend>(settings);
}

} // namespace unidomain::oracle
