#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace docback::narrative {

/// Compressed page theme: at most five normalized words.
struct PageSummary {
    int page_index = 0;
    std::vector<std::string> words;
    std::string raw;  // provider output before normalization

    bool empty() const { return words.empty(); }
    std::string joined() const;
};

/// One background design instruction for a page.
struct Instruction {
    int page_index = 0;
    std::string text;
    std::string provider_id;
    std::string mode;  // "prompt_text" | "prompt_only" | "text_only"
};

/// Bounded FIFO of prior instructions (most recent last).
class NarrativeBank {
public:
    explicit NarrativeBank(int window_n = 3);

    int window() const { return window_n_; }
    const std::deque<Instruction>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    nlohmann::json to_json() const;
    static NarrativeBank from_json(const nlohmann::json& doc);

private:
    friend NarrativeBank bank_push(const NarrativeBank& bank, const Instruction& instruction);
    int window_n_;
    std::deque<Instruction> entries_;
};

/// Text completion backend. `complete` receives a system prompt (one of
/// the templates in prompts.hpp) and a structured user payload.
class TextProvider {
public:
    virtual ~TextProvider() = default;
    virtual std::string complete(const std::string& system_prompt,
                                 const std::string& user_payload) const = 0;
    virtual std::string id() const = 0;
};

/// Deterministic offline provider used by tests and the default CLI mode.
///
/// Summaries: the first five whitespace tokens of the payload, lowercased
/// with punctuation stripped. Instructions:
///   "background: <summary words>; style: <prompt>; continue: <last prior>"
/// with "none" standing in for absent parts.
class StubProvider : public TextProvider {
public:
    std::string complete(const std::string& system_prompt,
                         const std::string& user_payload) const override;
    std::string id() const override { return "stub"; }
};

/// Build the instruct user payload: prior instructions oldest to newest,
/// then the user prompt, then the summary, one "key: value" line each.
std::string build_instruct_payload(const std::optional<PageSummary>& summary,
                                   const std::optional<std::string>& user_prompt,
                                   const NarrativeBank& bank);

/// Distill page text into a <=5-word theme. Empty text short-circuits to
/// an empty summary without consulting the provider.
PageSummary summarize(const std::string& page_text, const TextProvider& provider,
                      int page_index = 0);

/// Generate the page instruction from summary and/or user prompt plus
/// the memory of prior instructions. The result is not pushed onto the
/// bank; callers decide when to advance the memory.
Instruction instruct(const std::optional<PageSummary>& summary,
                     const std::optional<std::string>& user_prompt, const NarrativeBank& bank,
                     const TextProvider& provider, int page_index = 0);

/// Append with FIFO eviction beyond the bank's window.
NarrativeBank bank_push(const NarrativeBank& bank, const Instruction& instruction);

/// Sequential recursion over a document: each page's instruction is
/// conditioned on the bank built from the previous pages.
std::vector<Instruction> run_document(const std::vector<std::optional<PageSummary>>& pages,
                                      const std::optional<std::string>& user_prompt,
                                      int window_n, const TextProvider& provider);

}  // namespace docback::narrative
