#pragma once

namespace docback::narrative::prompts {

// Versioned prompt templates. Bump kVersion whenever the wording of a
// template changes so downstream runs can tell which prompts produced
// their instructions.
inline constexpr const char* kVersion = "v1";

inline constexpr const char* kSummarizeSystem =
    "You label one document page for visual design. Reply with the page's "
    "dominant theme in five words or fewer, lowercase, no punctuation, "
    "nothing else. [docback-sum-v1]";

inline constexpr const char* kInstructSystem =
    "You write one-sentence background design instructions for document "
    "pages. Keep motifs consistent with any prior instructions listed in "
    "the request, honor the style request if one is given, and reflect the "
    "page summary if one is given. Reply with exactly one sentence. "
    "[docback-inst-v1]";

}  // namespace docback::narrative::prompts
