#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "factsel/core.hpp"
#include "factsel/corpus.hpp"
#include "factsel/fact_extract.hpp"
#include "factsel/llm_gateway.hpp"
#include "factsel/prompt_engine.hpp"

namespace factsel {

/// The candidate patch is the last fenced code block that defines a function
/// with the buggy function's name; chain-of-thought responses put reasoning
/// and intermediate snippets first.
inline std::optional<std::string> extract_patch(std::string_view raw_text,
                                                std::string_view function_name) {
    std::optional<std::string> best;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = raw_text.find("```", pos);
        if (open == std::string_view::npos) break;
        std::size_t body_start = raw_text.find('\n', open);
        if (body_start == std::string_view::npos) break;
        ++body_start;
        std::size_t close = raw_text.find("```", body_start);
        if (close == std::string_view::npos) break;
        std::string_view body = raw_text.substr(body_start, close - body_start);
        std::string needle = "def " + std::string(function_name);
        std::size_t at = body.find(needle);
        while (at != std::string_view::npos) {
            std::size_t after = at + needle.size();
            if (after < body.size() && (body[after] == '(' || body[after] == ' ')) {
                best = std::string(body);
                break;
            }
            at = body.find(needle, at + 1);
        }
        pos = close + 3;
    }
    return best;
}

/// Replaces exactly the buggy function's lines with the patch, re-indented to
/// the original function's indentation. The rest of the file is untouched, so
/// splicing the original function text back is the identity.
inline std::string splice(const BugRecord& bug, const std::string& patch,
                          const SourceParser& parser = default_parser()) {
    ModuleInfo patch_mod;
    try {
        patch_mod = parser.parse(patch);
    } catch (const std::exception& e) {
        throw Error(std::string("splice: patch does not parse: ") + e.what());
    }
    std::vector<const FunctionNode*> top;
    for (const auto& fn : patch_mod.functions)
        if (fn.indent == 0) top.push_back(&fn);
    if (top.size() != 1)
        throw Error("splice: patch must define exactly one top-level function, found " +
                    std::to_string(top.size()));
    ModuleInfo src_mod = parser.parse(bug.source_text);
    const FunctionNode* target = nullptr;
    for (const auto& fn : src_mod.functions)
        if (fn.header_line >= bug.span_begin && fn.header_line <= bug.span_end &&
            (!target || fn.indent < target->indent))
            target = &fn;
    if (!target) throw Error("splice: span does not contain a function");
    if (top[0]->name != target->name)
        throw Error("splice: patch defines '" + top[0]->name + "', expected '" + target->name +
                    "'");

    auto lines = detail::split_lines(bug.source_text);
    std::string out;
    for (int ln = 1; ln < bug.span_begin; ++ln) out += lines[ln - 1] + "\n";
    out += detail::indent_block(patch, target->indent);
    for (int ln = bug.span_end + 1; ln <= static_cast<int>(lines.size()); ++ln)
        out += lines[ln - 1] + "\n";
    return out;
}

namespace detail {

struct CommandResult {
    bool started = false;
    bool timed_out = false;
    int exit_code = -1;
};

inline CommandResult run_command(const std::string& command, const std::filesystem::path& cwd,
                                 std::chrono::milliseconds timeout) {
    CommandResult result;
    pid_t pid = ::fork();
    if (pid < 0) return result;
    if (pid == 0) {
        ::setpgid(0, 0);
        if (::chdir(cwd.c_str()) != 0) ::_exit(126);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    result.started = true;
    auto deadline = std::chrono::steady_clock::now() + timeout;
    int status = 0;
    for (;;) {
        pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (done < 0) return result;
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(-pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            result.timed_out = true;
            return result;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    return result;
}

} // namespace detail

/// Writes the patched source into the sandbox working copy, runs the bug's
/// test command there, and classifies the outcome. The sandbox's source file
/// is restored afterward; nothing outside the sandbox is touched.
inline Verdict validate(const BugRecord& bug, const std::string& patched_source,
                        const std::filesystem::path& sandbox,
                        std::chrono::milliseconds timeout) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(sandbox)) throw Error("sandbox is not a directory: " + sandbox.string());
    fs::path target = sandbox / bug.source_file_path;
    if (!fs::exists(target))
        throw Error("sandbox has no working copy of " + bug.source_file_path);
    std::string original = detail::read_file(target);
    {
        std::ofstream out(target, std::ios::binary | std::ios::trunc);
        out << patched_source;
    }
    detail::CommandResult res = detail::run_command(bug.test_command, sandbox, timeout);
    {
        std::ofstream out(target, std::ios::binary | std::ios::trunc);
        out << original;
    }
    if (!res.started) return Verdict::BuildError;
    if (res.timed_out) return Verdict::Timeout;
    if (res.exit_code == 0) return Verdict::Plausible;
    if (res.exit_code == 126 || res.exit_code == 127) return Verdict::BuildError;
    return Verdict::TestFail;
}

struct RunOptions {
    std::filesystem::path results_dir;
    std::filesystem::path sandbox_root;
    std::chrono::milliseconds test_timeout{30000};
    int parallel_jobs = 1;
    bool include_cot = true;
    bool include_import_preamble = true;
    FactOrder fact_order = canonical_order();
    int order_index = 0;
};

struct JobFailure {
    Job job;
    std::string message;
};

struct RunSummary {
    std::vector<ResponseSet> response_sets;
    std::vector<JobFailure> failures;
};

namespace detail {

inline std::string sanitize_id(std::string_view id) {
    std::string out;
    for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

inline std::filesystem::path result_path(const RunOptions& opts, const Job& job) {
    return opts.results_dir /
           (sanitize_id(job.bug_id) + "_" + job.effective.to_string() + "_o" +
            std::to_string(opts.order_index) + ".json");
}

inline void write_atomic(const std::filesystem::path& path, const std::string& body) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << body;
    }
    std::filesystem::rename(tmp, path);
}

} // namespace detail

/// The full sweep for one job: render the prompt, draw n responses (cache
/// first), then extract/splice/validate each response in a private sandbox.
inline ResponseSet run_job(const Job& job, const BugRecord& bug,
                           const std::filesystem::path& bug_dir, const QueryConfig& cfg,
                           ChatBackend& backend, const RunOptions& opts,
                           const SourceParser& parser = default_parser()) {
    namespace fs = std::filesystem;
    ExtractedFacts facts = extract_all_facts(bug, parser);
    PromptPlan plan{job, opts.fact_order, opts.include_cot, opts.include_import_preamble};
    RenderedPrompt prompt = render(plan, facts);
    std::vector<std::string> raw = sample(prompt, cfg, backend);

    fs::path sandbox = opts.sandbox_root /
                       (detail::sanitize_id(job.bug_id) + "_" + job.effective.to_string());
    fs::remove_all(sandbox);
    fs::create_directories(sandbox.parent_path());
    fs::copy(bug_dir, sandbox, fs::copy_options::recursive);

    ResponseSet rs;
    rs.job = job;
    rs.model_id = cfg.model_id;
    rs.params = {cfg.temperature, cfg.seed, cfg.n};
    rs.order_index = opts.order_index;
    for (const std::string& text : raw) {
        LlmResponse r;
        r.raw_text = text;
        auto patch = extract_patch(text, facts.function_name);
        if (!patch) {
            r.verdict = Verdict::PatchExtractionFail;
        } else {
            r.patch = patch;
            try {
                std::string patched = splice(bug, *patch, parser);
                r.verdict = validate(bug, patched, sandbox, opts.test_timeout);
            } catch (const Error&) {
                r.verdict = Verdict::PatchExtractionFail; // malformed patch
            }
        }
        rs.responses.push_back(std::move(r));
    }
    fs::remove_all(sandbox);
    return rs;
}

/// Sweep over deduped jobs with bounded parallelism. Persisted results are
/// skipped, so an interrupted sweep resumes with no repeated LLM calls.
inline RunSummary run_jobs(const std::vector<Job>& jobs, const Corpus& corpus,
                           const QueryConfig& cfg, ChatBackend& backend,
                           const RunOptions& opts,
                           const SourceParser& parser = default_parser()) {
    namespace fs = std::filesystem;
    fs::create_directories(opts.results_dir);
    fs::create_directories(opts.sandbox_root);
    std::vector<Job> work = dedupe_jobs(jobs);

    RunSummary summary;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t at = next.fetch_add(1);
            if (at >= work.size()) return;
            const Job& job = work[at];
            try {
                fs::path out_path = detail::result_path(opts, job);
                ResponseSet rs;
                if (fs::exists(out_path)) {
                    rs = response_set_from_json(
                        nlohmann::json::parse(detail::read_file(out_path)));
                } else {
                    const BugRecord& bug = corpus.find(job.bug_id);
                    rs = run_job(job, bug, bug.bug_dir, cfg, backend, opts, parser);
                    detail::write_atomic(out_path, response_set_to_json(rs).dump(2));
                }
                std::lock_guard lock(mu);
                summary.response_sets.push_back(std::move(rs));
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                summary.failures.push_back({job, e.what()});
            }
        }
    };
    int threads = std::max(1, std::min<int>(opts.parallel_jobs, static_cast<int>(work.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // Stable output order regardless of scheduling.
    std::sort(summary.response_sets.begin(), summary.response_sets.end(),
              [](const ResponseSet& a, const ResponseSet& b) {
                  return std::tie(a.job.bug_id, a.job.effective) <
                         std::tie(b.job.bug_id, b.job.effective);
              });
    return summary;
}

} // namespace factsel
