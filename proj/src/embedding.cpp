#include "bimem/embedding.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <mutex>

#include <json.hpp>

#include "bimem/errors.hpp"
#include "bimem/http_support.hpp"
#include "bimem/text.hpp"

namespace bimem {

namespace {

double dot_and_norms(std::span<const double> a, std::span<const double> b,
                     double& norm_a, double& norm_b) {
    if (a.size() != b.size()) {
        throw data_error("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
    double dot = 0.0;
    norm_a = 0.0;
    norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    return dot;
}

// 64-bit FNV-1a. Fully defined integer arithmetic keeps buckets identical on
// every platform.
std::uint64_t fnv1a(const std::string& token) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : token) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

}  // namespace

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    double na = 0.0, nb = 0.0;
    double dot = dot_and_norms(a, b, na, nb);
    if (na == 0.0 || nb == 0.0) throw data_error("cosine: zero-norm vector");
    double sim = dot / (std::sqrt(na) * std::sqrt(nb));
    if (sim > 1.0) sim = 1.0;
    if (sim < -1.0) sim = -1.0;
    return sim;
}

double ranking_sim(std::span<const double> a, std::span<const double> b) {
    double na = 0.0, nb = 0.0;
    double dot = dot_and_norms(a, b, na, nb);
    if (na == 0.0 || nb == 0.0) return 0.0;
    double sim = dot / (std::sqrt(na) * std::sqrt(nb));
    if (sim > 1.0) sim = 1.0;
    if (sim < -1.0) sim = -1.0;
    return sim;
}

Vector deterministic_embed(const std::string& text, int dim) {
    if (dim < 8) throw usage_error("deterministic_embed: dim must be >= 8");
    Vector v(static_cast<std::size_t>(dim), 0.0);
    for (const std::string& token : tokenize(text)) {
        v[fnv1a(token) % static_cast<std::uint64_t>(dim)] += 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

HashingEmbedder::HashingEmbedder(int dim) : dim_(dim), name_("hash-" + std::to_string(dim)) {
    if (dim < 8) throw usage_error("HashingEmbedder: dim must be >= 8");
}

Vector HashingEmbedder::embed(const std::string& text) {
    std::string trimmed = trim_copy(text);
    if (trimmed.empty()) throw data_error("embed: empty text");
    return deterministic_embed(trimmed, dim_);
}

// ----- remote provider ------------------------------------------------------

struct RemoteEmbedder::Impl {
    RemoteEmbedderConfig config;
    std::mutex dim_mutex;
    int dimension = 0;

    // Bounded in-flight requests; a condition variable keeps it C++17-safe
    // and avoids a hard cap at compile time.
    std::mutex slot_mutex;
    std::condition_variable slot_cv;
    int in_flight = 0;

    explicit Impl(RemoteEmbedderConfig cfg) : config(std::move(cfg)), dimension(config.dimension) {}

    struct SlotGuard {
        Impl& impl;
        explicit SlotGuard(Impl& i) : impl(i) {
            std::unique_lock lock(impl.slot_mutex);
            impl.slot_cv.wait(lock, [&] { return impl.in_flight < impl.config.max_inflight; });
            ++impl.in_flight;
        }
        ~SlotGuard() {
            {
                std::lock_guard lock(impl.slot_mutex);
                --impl.in_flight;
            }
            impl.slot_cv.notify_one();
        }
    };
};

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))),
      name_("remote:" + impl_->config.model) {
    if (impl_->config.base_url.empty()) {
        throw usage_error("RemoteEmbedder: base_url is empty (set BIMEM_EMBED_URL)");
    }
    if (impl_->config.max_inflight < 1) impl_->config.max_inflight = 1;
}

RemoteEmbedder::~RemoteEmbedder() = default;

int RemoteEmbedder::dimension() const {
    std::lock_guard lock(impl_->dim_mutex);
    if (impl_->dimension <= 0) {
        throw usage_error("RemoteEmbedder: dimension unknown until the first embed call");
    }
    return impl_->dimension;
}

namespace {

Vector parse_embedding_response(const std::string& body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw backend_error(std::string("embedding response is not JSON: ") + e.what());
    }
    const nlohmann::json* row = nullptr;
    if (doc.contains("data") && doc["data"].is_array() && !doc["data"].empty()) {
        const auto& first = doc["data"][0];
        if (first.is_object() && first.contains("embedding")) {
            row = &first["embedding"];
        } else if (first.is_array()) {
            row = &first;
        }
    } else if (doc.contains("embeddings") && doc["embeddings"].is_array() && !doc["embeddings"].empty()) {
        row = &doc["embeddings"][0];
    }
    if (row == nullptr || !row->is_array() || row->empty()) {
        throw backend_error("embedding response carries no vector");
    }
    Vector v;
    v.reserve(row->size());
    for (const auto& x : *row) {
        if (!x.is_number()) throw backend_error("embedding vector has a non-numeric entry");
        v.push_back(x.get<double>());
    }
    return v;
}

}  // namespace

Vector RemoteEmbedder::embed(const std::string& text) {
    std::string trimmed = trim_copy(text);
    if (trimmed.empty()) throw data_error("embed: empty text");

    nlohmann::json payload{{"model", impl_->config.model}, {"input", {trimmed}}};
    const std::string body = payload.dump();

    int last_status = 0;
    std::string last_message;
    for (int attempt = 0; attempt <= impl_->config.max_retries; ++attempt) {
        Impl::SlotGuard slot(*impl_);
        httplib::Client client(impl_->config.base_url);
        client.set_read_timeout(impl_->config.timeout_seconds, 0);
        client.set_connection_timeout(impl_->config.timeout_seconds, 0);
        httplib::Headers headers;
        if (!impl_->config.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + impl_->config.api_key);
        }
        auto res = client.Post(impl_->config.path, headers, body, "application/json");
        if (!res) {
            last_message = "embedding transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_status = res->status;
            last_message = "embedding endpoint returned HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            Vector v = parse_embedding_response(res->body);
            std::lock_guard lock(impl_->dim_mutex);
            if (impl_->dimension <= 0) {
                impl_->dimension = static_cast<int>(v.size());
            } else if (impl_->dimension != static_cast<int>(v.size())) {
                throw backend_error("embedding dimension changed mid-run (" +
                                    std::to_string(impl_->dimension) + " -> " +
                                    std::to_string(v.size()) + ")");
            }
            return v;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::backend) throw;
            last_message = e.what();
        }
    }
    throw backend_error(last_message.empty() ? "embedding request failed" : last_message, last_status);
}

RemoteEmbedderConfig remote_embedder_config_from_env() {
    RemoteEmbedderConfig config;
    if (const char* url = std::getenv("BIMEM_EMBED_URL")) config.base_url = url;
    if (const char* key = std::getenv("BIMEM_API_KEY")) config.api_key = key;
    if (const char* model = std::getenv("BIMEM_EMBED_MODEL")) config.model = model;
    return config;
}

std::unique_ptr<EmbeddingProvider> make_provider(const std::string& id) {
    if (id.rfind("hash-", 0) == 0) {
        int dim = 0;
        try {
            dim = std::stoi(id.substr(5));
        } catch (const std::exception&) {
            throw usage_error("unknown embedding provider id: " + id);
        }
        return std::make_unique<HashingEmbedder>(dim);
    }
    if (id.rfind("remote:", 0) == 0 || id == "remote") {
        RemoteEmbedderConfig config = remote_embedder_config_from_env();
        if (id.size() > 7) config.model = id.substr(7);
        return std::make_unique<RemoteEmbedder>(std::move(config));
    }
    throw usage_error("unknown embedding provider id: " + id);
}

}  // namespace bimem
