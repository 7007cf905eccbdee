#include "vac/prompts.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace vac {

namespace {

struct TemplateInfo {
    TemplateId id;
    const char* name;
    const char* filename;
    const char* body;
    std::vector<const char*> required_slots;
};

const char* kRespondBody =
    "You are answering a question for a specific user. Use the user's past questions, shown "
    "below when available, to tailor the answer to them.\n"
    "{{documents}}\n"
    "## Question\n"
    "{{query}}\n"
    "\n"
    "Write the final personalized answer now.\n";

const char* kRefineBody =
    "You are improving an answer for a specific user. Use the user's past questions, the "
    "previous response, and the feedback below.\n"
    "{{documents}}\n"
    "## Question\n"
    "{{query}}\n"
    "\n"
    "## Previous response\n"
    "{{previous_response}}\n"
    "\n"
    "## Feedback\n"
    "{{feedback}}\n"
    "\n"
    "Rewrite the response so it addresses the feedback while staying grounded in the user's "
    "history.\n";

const char* kFeedbackBody =
    "You review personalized answers and write natural language feedback that makes them "
    "better for one specific user. Compare the narrative describing what the user really "
    "wants with the previous response, then say concretely what to add, remove, or change.\n"
    "{{documents}}\n"
    "## Question\n"
    "{{query}}\n"
    "\n"
    "## Narrative\n"
    "{{narrative}}\n"
    "\n"
    "## Previous response\n"
    "{{previous_response}}\n"
    "\n"
    "Write specific, actionable feedback for improving the personalization of the response. "
    "Do not rewrite the response yourself.\n";

const char* kPlanBody =
    "You prepare high-level response plans. Read the question and the user's past questions, "
    "then produce a short numbered plan of what a personalized answer should cover. Do not "
    "write the answer itself.\n"
    "{{documents}}\n"
    "## Question\n"
    "{{query}}\n"
    "\n"
    "## Plan request\n"
    "Write the numbered plan now.\n";

const char* kPlanRespondBody =
    "You are answering a question for a specific user. Follow the plan below and ground the "
    "answer in the user's past questions.\n"
    "{{documents}}\n"
    "## Question\n"
    "{{query}}\n"
    "\n"
    "## Plan\n"
    "{{plan}}\n"
    "\n"
    "Write the final personalized answer now, following the plan.\n";

const char* kJudgeBody =
    "You grade whether a response addresses one expected aspect of an ideal answer.\n"
    "\n"
    "## Question\n"
    "{{query}}\n"
    "{{narrative_section}}"
    "## Aspect\n"
    "{{aspect}}\n"
    "\n"
    "## Response\n"
    "{{response}}\n"
    "\n"
    "Decide how well the response addresses this aspect: 0 = not addressed, 1 = partially "
    "addressed, 2 = fully addressed. Explain briefly, then end with a final line of exactly "
    "\"Score: <0|1|2>\".\n";

const std::array<TemplateInfo, 6>& template_table() {
    static const std::array<TemplateInfo, 6> table = {{
        {TemplateId::respond, "respond", "respond.txt", kRespondBody, {"{{documents}}", "{{query}}"}},
        {TemplateId::refine, "refine", "refine.txt", kRefineBody,
         {"{{documents}}", "{{query}}", "{{previous_response}}", "{{feedback}}"}},
        {TemplateId::feedback, "feedback", "feedback.txt", kFeedbackBody,
         {"{{documents}}", "{{query}}", "{{narrative}}", "{{previous_response}}"}},
        {TemplateId::plan, "plan", "plan.txt", kPlanBody, {"{{documents}}", "{{query}}"}},
        {TemplateId::plan_respond, "plan_respond", "plan_respond.txt", kPlanRespondBody,
         {"{{documents}}", "{{query}}", "{{plan}}"}},
        {TemplateId::judge, "judge", "judge.txt", kJudgeBody,
         {"{{query}}", "{{narrative_section}}", "{{aspect}}", "{{response}}"}},
    }};
    return table;
}

const TemplateInfo& info_for(TemplateId id) {
    for (const auto& info : template_table()) {
        if (info.id == id) return info;
    }
    throw VacError("unknown template id");
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

}  // namespace

const char* template_id_name(TemplateId id) { return info_for(id).name; }

std::optional<TemplateId> template_id_from_name(const std::string& name) {
    for (const auto& info : template_table()) {
        if (name == info.name) return info.id;
    }
    return std::nullopt;
}

int heuristic_token_count(std::string_view text) {
    // chars/4 with a 10% safety margin, rounded up.
    const std::size_t chars = text.size();
    return static_cast<int>((chars * 11 + 39) / 40);
}

TemplateSet TemplateSet::builtin_defaults() {
    TemplateSet set;
    for (const auto& info : template_table()) {
        set.templates_[info.id] = PromptTemplate{info.id, info.body};
    }
    return set;
}

TemplateSet TemplateSet::load(const fs::path& dir) {
    TemplateSet set = builtin_defaults();
    for (const auto& info : template_table()) {
        const fs::path file = dir / info.filename;
        if (!fs::exists(file)) continue;
        std::string body = read_file(file);
        for (const char* slot : info.required_slots) {
            if (body.find(slot) == std::string::npos) {
                throw ConfigError("template file " + file.string() + " is missing slot " + slot);
            }
        }
        set.templates_[info.id] = PromptTemplate{info.id, std::move(body)};
    }
    return set;
}

const PromptTemplate& TemplateSet::get(TemplateId id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw VacError("template not loaded");
    return it->second;
}

std::string extract_section(const std::string& prompt, const std::string& marker) {
    const std::string header = marker + "\n";
    const auto start = prompt.find(header);
    if (start == std::string::npos) return "";
    const auto body_start = start + header.size();
    auto end = prompt.find("\n## ", body_start);
    if (end == std::string::npos) {
        end = prompt.size();
    }
    std::string body = prompt.substr(body_start, end - body_start);
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
    return body;
}

int Renderer::count_tokens(std::string_view text) const {
    if (budget_.counter) return budget_.counter(text);
    return heuristic_token_count(text);
}

namespace {

std::string doc_entry(const RankedDoc& doc, const std::string& description) {
    std::string entry = "[" + std::to_string(doc.rank) + "] Previous question: " +
                        doc.question_text + "\n";
    entry += "    Details: " + description + "\n";
    return entry;
}

}  // namespace

RenderedPrompt Renderer::render_with_docs(TemplateId id,
                                          const std::map<std::string, std::string>& slots,
                                          const std::vector<RankedDoc>& docs) const {
    const PromptTemplate& tmpl = templates_.get(id);
    std::string base = tmpl.body;
    for (const auto& [slot, value] : slots) {
        base = replace_all(std::move(base), "{{" + slot + "}}", value);
    }

    const int limit = budget_.prompt_token_limit();
    if (limit <= 0) throw ConfigError("token budget leaves no room for the prompt");

    auto assemble = [&](const std::string& doc_block) {
        // The documents slot collapses entirely when no docs are included.
        return replace_all(base, "{{documents}}",
                           doc_block.empty() ? std::string()
                                             : "\n" + std::string(markers::kDocuments) + "\n" +
                                                   doc_block);
    };

    const std::string without_docs = assemble("");
    if (count_tokens(without_docs) > limit) {
        throw VacError(std::string("prompt for template '") + template_id_name(id) +
                       "' exceeds the token budget before any documents are added (" +
                       std::to_string(count_tokens(without_docs)) + " > " + std::to_string(limit) +
                       " tokens)");
    }

    RenderedPrompt out;
    out.template_id = id;

    // Longest rank-prefix of whole documents that fits.
    std::string doc_block;
    std::size_t included = 0;
    for (const auto& doc : docs) {
        const std::string candidate = doc_block + doc_entry(doc, doc.description_text);
        if (count_tokens(assemble(candidate)) > limit) break;
        doc_block = candidate;
        out.included_doc_ids.push_back(doc.doc_id);
        ++included;
    }

    if (included < docs.size()) {
        out.truncated = true;
        // Try to keep the next document with its description truncated
        // tail-first. The question line is never truncated; if it does not
        // fit the document is dropped.
        const RankedDoc& next = docs[included];
        const std::string skeleton = doc_block + doc_entry(next, "...");
        if (count_tokens(assemble(skeleton)) <= limit) {
            std::size_t lo = 0, hi = next.description_text.size();
            while (lo < hi) {  // largest prefix that fits
                const std::size_t mid = (lo + hi + 1) / 2;
                const std::string candidate =
                    doc_block + doc_entry(next, next.description_text.substr(0, mid) + "...");
                if (count_tokens(assemble(candidate)) <= limit) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            if (lo > 0) {
                doc_block += doc_entry(next, next.description_text.substr(0, lo) + "...");
                out.included_doc_ids.push_back(next.doc_id);
            }
        }
    }

    out.text = assemble(doc_block);
    out.estimated_tokens = count_tokens(out.text);
    return out;
}

RenderedPrompt Renderer::render_respond(const std::string& query,
                                        const std::vector<RankedDoc>& docs) const {
    return render_with_docs(TemplateId::respond, {{"query", query}}, docs);
}

RenderedPrompt Renderer::render_refine(const std::string& query,
                                       const std::vector<RankedDoc>& docs,
                                       const std::string& prev_response,
                                       const std::string& feedback) const {
    if (feedback.empty()) throw VacError("render_refine: feedback must be non-empty");
    if (prev_response.empty()) throw VacError("render_refine: previous response must be non-empty");
    return render_with_docs(
        TemplateId::refine,
        {{"query", query}, {"previous_response", prev_response}, {"feedback", feedback}}, docs);
}

RenderedPrompt Renderer::render_feedback(const std::string& query,
                                         const std::vector<RankedDoc>& docs,
                                         const std::string& narrative,
                                         const std::string& response) const {
    if (narrative.empty()) throw VacError("render_feedback: narrative must be non-empty");
    return render_with_docs(
        TemplateId::feedback,
        {{"query", query}, {"narrative", narrative}, {"previous_response", response}}, docs);
}

RenderedPrompt Renderer::render_plan(const std::string& query,
                                     const std::vector<RankedDoc>& docs) const {
    return render_with_docs(TemplateId::plan, {{"query", query}}, docs);
}

RenderedPrompt Renderer::render_plan_respond(const std::string& query,
                                             const std::vector<RankedDoc>& docs,
                                             const std::string& plan) const {
    if (plan.empty()) throw VacError("render_plan_respond: plan must be non-empty");
    return render_with_docs(TemplateId::plan_respond, {{"query", query}, {"plan", plan}}, docs);
}

RenderedPrompt Renderer::render_judge(const std::string& query, const std::string& response,
                                      const std::vector<RubricAspect>& aspects,
                                      const std::string& narrative,
                                      bool include_narrative) const {
    if (aspects.size() != 1) {
        throw VacError("render_judge: exactly one aspect per judgment (got " +
                       std::to_string(aspects.size()) + ")");
    }
    std::string narrative_section;
    if (include_narrative && !narrative.empty()) {
        narrative_section = "\n" + std::string(markers::kNarrative) + "\n" + narrative + "\n\n";
    } else {
        narrative_section = "\n";
    }
    return render_with_docs(TemplateId::judge,
                            {{"query", query},
                             {"narrative_section", narrative_section},
                             {"aspect", aspects[0].description},
                             {"response", response}},
                            {});
}

PromptLogger::PromptLogger(fs::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
}

void PromptLogger::log(const std::string& example_id, const RenderedPrompt& prompt) {
    json entry;
    entry["template"] = template_id_name(prompt.template_id);
    entry["example_id"] = example_id;
    entry["text"] = prompt.text;
    std::lock_guard<std::mutex> lock(mu_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw VacError("cannot append to prompt log: " + path_.string());
    out << entry.dump() << "\n";
}

std::vector<PromptLogEntry> read_prompt_log(const fs::path& path) {
    std::vector<PromptLogEntry> entries;
    if (!fs::exists(path)) return entries;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        entries.push_back({j.at("template").get<std::string>(),
                           j.at("example_id").get<std::string>(),
                           j.at("text").get<std::string>()});
    }
    return entries;
}

}  // namespace vac
