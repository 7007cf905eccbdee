#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vac/data_model.hpp"
#include "vac/retrieval.hpp"
#include "vac/util.hpp"

namespace vac {

enum class TemplateId { respond, refine, feedback, plan, plan_respond, judge };

const char* template_id_name(TemplateId id);
std::optional<TemplateId> template_id_from_name(const std::string& name);

struct PromptTemplate {
    TemplateId template_id;
    std::string body;  // contains {{slot}} placeholders
};

struct RenderedPrompt {
    std::string text;
    std::vector<std::string> included_doc_ids;  // rank-prefix of the input docs
    bool truncated = false;
    int estimated_tokens = 0;
    TemplateId template_id = TemplateId::respond;
};

// Estimates tokens for budget enforcement. The default is the chars/4
// heuristic with a 10% safety margin; a backend tokenizer can replace it.
using TokenCounter = std::function<int(std::string_view)>;
int heuristic_token_count(std::string_view text);

struct PromptBudget {
    int token_budget = 8192;      // combined input+output limit
    int max_output_tokens = 1024;  // reserved for the completion
    TokenCounter counter;          // unset: heuristic_token_count

    int prompt_token_limit() const { return token_budget - max_output_tokens; }
};

// Loads the six template fixtures from a directory (respond.txt, refine.txt,
// feedback.txt, plan.txt, plan_respond.txt, judge.txt), falling back to the
// built-in defaults for missing files. Immutable after load.
class TemplateSet {
public:
    static TemplateSet builtin_defaults();
    static TemplateSet load(const fs::path& dir);

    const PromptTemplate& get(TemplateId id) const;

private:
    std::map<TemplateId, PromptTemplate> templates_;
};

// Section markers used by the default templates. The synthetic backend keys
// off these to classify prompts, and the refinement/feedback mocks parse the
// sections.
namespace markers {
inline constexpr const char* kDocuments = "## Retrieved user history";
inline constexpr const char* kQuestion = "## Question";
inline constexpr const char* kNarrative = "## Narrative";
inline constexpr const char* kPreviousResponse = "## Previous response";
inline constexpr const char* kFeedback = "## Feedback";
inline constexpr const char* kPlanRequest = "## Plan request";
inline constexpr const char* kPlan = "## Plan";
inline constexpr const char* kAspect = "## Aspect";
inline constexpr const char* kResponse = "## Response";
}  // namespace markers

// Extract the body of a "## ..." section from a rendered prompt; empty when
// the section is absent.
std::string extract_section(const std::string& prompt, const std::string& marker);

class Renderer {
public:
    Renderer(TemplateSet templates, PromptBudget budget)
        : templates_(std::move(templates)), budget_(std::move(budget)) {}

    RenderedPrompt render_respond(const std::string& query,
                                  const std::vector<RankedDoc>& docs) const;
    RenderedPrompt render_refine(const std::string& query, const std::vector<RankedDoc>& docs,
                                 const std::string& prev_response,
                                 const std::string& feedback) const;
    RenderedPrompt render_feedback(const std::string& query, const std::vector<RankedDoc>& docs,
                                   const std::string& narrative,
                                   const std::string& response) const;
    RenderedPrompt render_plan(const std::string& query,
                               const std::vector<RankedDoc>& docs) const;
    RenderedPrompt render_plan_respond(const std::string& query,
                                       const std::vector<RankedDoc>& docs,
                                       const std::string& plan) const;
    // Exactly one aspect per judgment call.
    RenderedPrompt render_judge(const std::string& query, const std::string& response,
                                const std::vector<RubricAspect>& aspects,
                                const std::string& narrative,
                                bool include_narrative = true) const;

    const PromptBudget& budget() const { return budget_; }
    const TemplateSet& templates() const { return templates_; }

private:
    RenderedPrompt render_with_docs(TemplateId id,
                                    const std::map<std::string, std::string>& slots,
                                    const std::vector<RankedDoc>& docs) const;
    int count_tokens(std::string_view text) const;

    TemplateSet templates_;
    PromptBudget budget_;
};

struct PromptLogEntry {
    std::string template_name;
    std::string example_id;
    std::string text;
};

// Append-only JSONL log of every prompt a run renders; the leakage audit
// replays it.
class PromptLogger {
public:
    explicit PromptLogger(fs::path path);
    void log(const std::string& example_id, const RenderedPrompt& prompt);
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::mutex mu_;
};

std::vector<PromptLogEntry> read_prompt_log(const fs::path& path);

inline void log_prompt(PromptLogger* logger, const std::string& example_id,
                       const RenderedPrompt& prompt) {
    if (logger != nullptr) logger->log(example_id, prompt);
}

}  // namespace vac
