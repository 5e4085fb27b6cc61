#include "docback/narrative.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "docback/errors.hpp"
#include "docback/prompts.hpp"

namespace docback::narrative {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string strip_quotes(std::string s) {
    while (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                             (s.front() == '\'' && s.back() == '\''))) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::istringstream in(s);
    std::string word;
    while (in >> word) words.push_back(word);
    return words;
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string strip_punct(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (!std::ispunct(c)) out.push_back(static_cast<char>(c));
    }
    return out;
}

/// Collapse all whitespace runs (including newlines) to single spaces.
std::string collapse_whitespace(const std::string& s) {
    std::string out;
    bool in_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_space = !out.empty();
            continue;
        }
        if (in_space) out.push_back(' ');
        in_space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

}  // namespace

std::string PageSummary::joined() const {
    std::string out;
    for (const auto& word : words) {
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

NarrativeBank::NarrativeBank(int window_n) : window_n_(window_n) {
    if (window_n < 0) throw ValidationError("bank window must be >= 0");
}

nlohmann::json NarrativeBank::to_json() const {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : entries_) {
        entries.push_back({{"page_index", e.page_index},
                           {"text", e.text},
                           {"provider_id", e.provider_id},
                           {"mode", e.mode}});
    }
    return nlohmann::json{{"window_n", window_n_}, {"entries", entries}};
}

NarrativeBank NarrativeBank::from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("window_n") || !doc.contains("entries")) {
        throw ValidationError("bank: expected {window_n, entries}");
    }
    NarrativeBank bank(doc["window_n"].get<int>());
    for (const auto& e : doc["entries"]) {
        Instruction inst;
        inst.page_index = e.value("page_index", 0);
        inst.text = e.value("text", std::string());
        inst.provider_id = e.value("provider_id", std::string());
        inst.mode = e.value("mode", std::string());
        bank = bank_push(bank, inst);
    }
    return bank;
}

std::string StubProvider::complete(const std::string& system_prompt,
                                   const std::string& user_payload) const {
    if (system_prompt == prompts::kSummarizeSystem) {
        auto words = split_words(user_payload);
        if (words.size() > 5) words.resize(5);
        std::string out;
        for (const auto& word : words) {
            const std::string cleaned = strip_punct(to_lower(word));
            if (cleaned.empty()) continue;
            if (!out.empty()) out.push_back(' ');
            out += cleaned;
        }
        return out;
    }

    // Instruction task: echo the conditioning pieces back in a fixed shape.
    std::string summary = "none";
    std::string prompt = "none";
    std::string last_prior = "none";
    std::istringstream in(user_payload);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("prior: ", 0) == 0) {
            last_prior = line.substr(7);
        } else if (line.rfind("prompt: ", 0) == 0) {
            prompt = line.substr(8);
        } else if (line.rfind("summary: ", 0) == 0) {
            summary = line.substr(9);
        }
    }
    return "background: " + summary + "; style: " + prompt + "; continue: " + last_prior;
}

std::string build_instruct_payload(const std::optional<PageSummary>& summary,
                                   const std::optional<std::string>& user_prompt,
                                   const NarrativeBank& bank) {
    std::string payload;
    for (const auto& entry : bank.entries()) {
        payload += "prior: " + entry.text + "\n";
    }
    if (user_prompt) payload += "prompt: " + *user_prompt + "\n";
    if (summary && !summary->empty()) payload += "summary: " + summary->joined() + "\n";
    return payload;
}

PageSummary summarize(const std::string& page_text, const TextProvider& provider,
                      int page_index) {
    PageSummary summary;
    summary.page_index = page_index;
    if (trim(page_text).empty()) return summary;

    std::string raw;
    try {
        raw = provider.complete(prompts::kSummarizeSystem, page_text);
    } catch (const ProviderError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProviderError(provider.id(), e.what());
    }
    summary.raw = raw;

    auto words = split_words(strip_quotes(trim(raw)));
    if (words.size() > 5) words.resize(5);
    for (auto& word : words) word = to_lower(word);
    summary.words = std::move(words);
    if (summary.words.empty()) {
        throw Error("degenerate summary from provider '" + provider.id() + "'");
    }
    return summary;
}

Instruction instruct(const std::optional<PageSummary>& summary,
                     const std::optional<std::string>& user_prompt, const NarrativeBank& bank,
                     const TextProvider& provider, int page_index) {
    const bool has_summary = summary && !summary->empty();
    const bool has_prompt = user_prompt.has_value();
    if (!has_summary && !has_prompt) {
        throw Error("instruct: no conditioning signal (need a summary or a user prompt)");
    }

    const std::string payload = build_instruct_payload(summary, user_prompt, bank);
    std::string raw;
    try {
        raw = provider.complete(prompts::kInstructSystem, payload);
    } catch (const ProviderError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProviderError(provider.id(), e.what());
    }

    Instruction instruction;
    instruction.page_index = page_index;
    instruction.text = strip_quotes(trim(collapse_whitespace(raw)));
    instruction.provider_id = provider.id();
    instruction.mode = has_summary ? (has_prompt ? "prompt_text" : "text_only") : "prompt_only";
    if (instruction.text.empty()) {
        throw Error("empty instruction from provider '" + provider.id() + "'");
    }
    return instruction;
}

NarrativeBank bank_push(const NarrativeBank& bank, const Instruction& instruction) {
    NarrativeBank next = bank;
    next.entries_.push_back(instruction);
    while (next.entries_.size() > static_cast<std::size_t>(next.window_n_)) {
        next.entries_.pop_front();
    }
    return next;
}

std::vector<Instruction> run_document(const std::vector<std::optional<PageSummary>>& pages,
                                      const std::optional<std::string>& user_prompt,
                                      int window_n, const TextProvider& provider) {
    NarrativeBank bank(window_n);
    std::vector<Instruction> instructions;
    instructions.reserve(pages.size());
    for (std::size_t i = 0; i < pages.size(); ++i) {
        const int page_index = pages[i] ? pages[i]->page_index : static_cast<int>(i);
        try {
            instructions.push_back(instruct(pages[i], user_prompt, bank, provider, page_index));
        } catch (const ProviderError& e) {
            throw ProviderError(e.provider_id(),
                                std::string(e.what()) + " (completed " +
                                    std::to_string(instructions.size()) + " of " +
                                    std::to_string(pages.size()) + " pages)");
        }
        bank = bank_push(bank, instructions.back());
    }
    return instructions;
}

}  // namespace docback::narrative
