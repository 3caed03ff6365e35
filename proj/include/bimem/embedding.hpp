#pragma once
// Embedding providers and vector similarity. One provider serves a bank for
// both edge construction and retrieval.

#include <memory>
#include <span>
#include <string>

#include "bimem/memory.hpp"

namespace bimem {

// Cosine similarity in [-1, 1]. Throws a data error on length mismatch and
// on zero-norm input (callers that rank use ranking_sim instead).
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Same, but a zero-norm side scores 0: a no-token text never outranks real
// matches.
double ranking_sim(std::span<const double> a, std::span<const double> b);

// Bag-of-tokens hashing embedder: lowercase, split on non-alphanumerics,
// FNV-1a bucket per token, counts L2-normalized. Stable across platforms.
// Requires dim >= 8.
Vector deterministic_embed(const std::string& text, int dim);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual int dimension() const = 0;
    virtual const std::string& name() const = 0;

    // Deterministic per provider instance; input is trimmed first and must
    // be non-empty afterwards. Must be callable concurrently.
    virtual Vector embed(const std::string& text) = 0;
};

// Offline provider backed by deterministic_embed.
class HashingEmbedder final : public EmbeddingProvider {
public:
    explicit HashingEmbedder(int dim = 1024);

    int dimension() const override { return dim_; }
    const std::string& name() const override { return name_; }
    Vector embed(const std::string& text) override;

private:
    int dim_;
    std::string name_;
};

struct RemoteEmbedderConfig {
    std::string base_url;    // e.g. http://host:port
    std::string path = "/v1/embeddings";
    std::string api_key;
    std::string model = "all-MiniLM-L6-v2";
    int dimension = 0;       // 0 = infer from the first response
    int max_retries = 2;
    int max_inflight = 4;
    int timeout_seconds = 60;
};

// HTTP provider: POST {model, input: [text]} against an embeddings endpoint,
// expecting one vector per input. Bounded in-flight requests.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig config);
    ~RemoteEmbedder() override;

    int dimension() const override;
    const std::string& name() const override { return name_; }
    Vector embed(const std::string& text) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string name_;
};

// Reads BIMEM_EMBED_URL / BIMEM_API_KEY / BIMEM_EMBED_MODEL.
RemoteEmbedderConfig remote_embedder_config_from_env();

// Provider factory from a provenance identifier ("hash-256" or
// "remote:<model>"). Remote providers need the environment configured.
std::unique_ptr<EmbeddingProvider> make_provider(const std::string& id);

}  // namespace bimem
