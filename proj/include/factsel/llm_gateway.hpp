#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "factsel/core.hpp"
#include "factsel/corpus.hpp"
#include "factsel/prompt_engine.hpp"
#include "factsel/sha256.hpp"

namespace factsel {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff{250}; // doubled per attempt
};

struct QueryConfig {
    std::string endpoint_url;
    std::string model_id = "mock";
    double temperature = 1.0; // experiment default
    int n = 15;
    std::optional<long> seed;
    int max_parallel = 4;
    std::chrono::milliseconds timeout{60000};
    RetryPolicy retry;
    std::filesystem::path cache_dir;
};

/// Identity of one sampled response; its hex form names the cache file.
struct CacheKey {
    std::string model_id;
    std::string prompt_hash;
    double temperature = 1.0;
    std::optional<long> seed;
    int response_index = 0;

    std::string serialize() const {
        std::string s = model_id + "\n" + prompt_hash + "\n";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", temperature);
        s += buf;
        s += "\n";
        s += seed ? std::to_string(*seed) : "-";
        s += "\n" + std::to_string(response_index);
        return s;
    }

    std::string hex() const { return Sha256::hex(serialize()); }
};

/// One chat completion per call; response_index distinguishes the n samples
/// of a single prompt.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::string& prompt_text, const QueryConfig& cfg,
                                 int response_index) = 0;
};

/// Scripted backend for tests and offline runs. Responses cycle through the
/// per-prompt template list by response_index; unknown prompts get the
/// default response. Counts fetches and observed concurrency.
class MockBackend final : public ChatBackend {
public:
    explicit MockBackend(std::map<std::string, std::vector<std::string>> script = {},
                         std::string default_response = "")
        : script_(std::move(script)), default_response_(std::move(default_response)) {}

    void script(const std::string& prompt_hash, std::vector<std::string> responses) {
        std::lock_guard lock(mu_);
        script_[prompt_hash] = std::move(responses);
    }

    std::string complete(const std::string& prompt_text, const QueryConfig&,
                         int response_index) override {
        int now = ++in_flight_;
        {
            std::lock_guard lock(mu_);
            max_in_flight_ = std::max(max_in_flight_, now);
        }
        ++calls_;
        std::string out;
        {
            std::lock_guard lock(mu_);
            auto it = script_.find(Sha256::hex(prompt_text));
            if (it != script_.end() && !it->second.empty())
                out = it->second[response_index % it->second.size()];
            else
                out = default_response_;
        }
        std::this_thread::sleep_for(std::chrono::microseconds(50));
        --in_flight_;
        return out;
    }

    int calls() const { return calls_.load(); }
    int max_in_flight() const {
        std::lock_guard lock(mu_);
        return max_in_flight_;
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<std::string>> script_;
    std::string default_response_;
    std::atomic<int> calls_{0};
    std::atomic<int> in_flight_{0};
    int max_in_flight_ = 0;
};

class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
        if (!root_.empty()) std::filesystem::create_directories(root_);
    }

    bool enabled() const { return !root_.empty(); }

    std::optional<std::string> get(const CacheKey& key) const {
        if (!enabled()) return std::nullopt;
        auto p = path_for(key);
        if (!std::filesystem::exists(p)) return std::nullopt;
        return detail::read_file(p);
    }

    // Write-temp then rename, so concurrent writers of distinct keys are safe
    // and readers never see partial files.
    void put(const CacheKey& key, const std::string& body) const {
        if (!enabled()) return;
        auto p = path_for(key);
        auto tmp = p;
        tmp += ".tmp." + std::to_string(
                             std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary);
            out << body;
        }
        std::filesystem::rename(tmp, p);
    }

    std::filesystem::path path_for(const CacheKey& key) const {
        return root_ / (key.hex() + ".txt");
    }

private:
    std::filesystem::path root_;
};

/// Fetches exactly n responses for a prompt, cache-first; misses are fetched
/// with bounded parallelism and persisted before return. Order is stable by
/// response_index, so a completed run replays bit-identically offline.
inline std::vector<std::string> sample(const RenderedPrompt& prompt, const QueryConfig& cfg,
                                       ChatBackend& backend) {
    if (cfg.n < 1) throw Error("sample: n must be >= 1");
    if (cfg.max_parallel < 1) throw Error("sample: max_parallel must be >= 1");
    ResponseCache cache(cfg.cache_dir);
    std::vector<std::optional<std::string>> slots(cfg.n);
    std::vector<int> missing;
    for (int i = 0; i < cfg.n; ++i) {
        CacheKey key{cfg.model_id, prompt.prompt_hash, cfg.temperature, cfg.seed, i};
        if (auto hit = cache.get(key)) slots[i] = std::move(*hit);
        else missing.push_back(i);
    }

    if (!missing.empty()) {
        std::atomic<std::size_t> next{0};
        std::mutex err_mu;
        std::vector<std::pair<int, std::string>> failures;
        auto worker = [&] {
            for (;;) {
                std::size_t at = next.fetch_add(1);
                if (at >= missing.size()) return;
                int index = missing[at];
                std::string last_error;
                bool done = false;
                auto backoff = cfg.retry.backoff;
                for (int attempt = 0; attempt < cfg.retry.max_attempts && !done; ++attempt) {
                    if (attempt > 0) {
                        std::this_thread::sleep_for(backoff);
                        backoff *= 2;
                    }
                    try {
                        std::string body = backend.complete(prompt.text, cfg, index);
                        CacheKey key{cfg.model_id, prompt.prompt_hash, cfg.temperature,
                                     cfg.seed, index};
                        cache.put(key, body);
                        slots[index] = std::move(body);
                        done = true;
                    } catch (const std::exception& e) {
                        last_error = e.what();
                    }
                }
                if (!done) {
                    std::lock_guard lock(err_mu);
                    failures.emplace_back(index, last_error);
                }
            }
        };
        int threads = std::min<int>(cfg.max_parallel, static_cast<int>(missing.size()));
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (!failures.empty()) {
            std::string msg = "sample: exhausted retries for response indices:";
            for (const auto& [idx, err] : failures)
                msg += " #" + std::to_string(idx) + " (" + err + ")";
            throw Error(msg);
        }
    }

    std::vector<std::string> out;
    out.reserve(cfg.n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

} // namespace factsel
