#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/kb.hpp"

namespace linkforge {

struct SentenceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // half-open
};

// Rule-based sentence boundaries: sentence-final punctuation followed by whitespace and
// an uppercase letter, or end of text. Periods inside any occurrence of a listed
// abbreviation never split.
inline std::vector<SentenceSpan> sentence_spans(const std::string& text,
                                                const std::vector<std::string>& abbreviations = {}) {
    std::vector<bool> protected_dot(text.size(), false);
    for (const auto& abbr : abbreviations) {
        if (abbr.empty()) continue;
        std::size_t pos = 0;
        while ((pos = text.find(abbr, pos)) != std::string::npos) {
            for (std::size_t j = pos; j < pos + abbr.size() && j < text.size(); ++j)
                if (text[j] == '.') protected_dot[j] = true;
            ++pos;
        }
    }
    std::vector<SentenceSpan> spans;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        if (c == '.' && protected_dot[i]) continue;
        std::size_t j = i + 1;
        while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        const bool at_end = j >= text.size();
        const bool new_sentence = !at_end && j > i + 1 &&
                                  std::isupper(static_cast<unsigned char>(text[j]));
        if (at_end || new_sentence) {
            spans.push_back({start, i + 1});
            start = j;
            i = j > 0 ? j - 1 : 0;
        }
    }
    if (start < text.size()) {
        if (!trim(text.substr(start)).empty()) spans.push_back({start, text.size()});
    }
    return spans;
}

inline std::vector<std::string> sentence_split(const std::string& text,
                                               const std::vector<std::string>& abbreviations = {}) {
    std::vector<std::string> out;
    for (const auto& span : sentence_spans(text, abbreviations))
        out.push_back(trim(text.substr(span.begin, span.end - span.begin)));
    return out;
}

inline std::string first_n_sentences(const std::string& text, int n,
                                     const std::vector<std::string>& abbreviations = {}) {
    if (n <= 0) return text;
    auto sentences = sentence_split(text, abbreviations);
    std::string out;
    for (std::size_t i = 0; i < sentences.size() && i < static_cast<std::size_t>(n); ++i) {
        if (!out.empty()) out += ' ';
        out += sentences[i];
    }
    return out;
}

enum class AdapterKind { wikia_dump, taxonomy, acronym_dict, generic_jsonl };

inline const char* to_string(AdapterKind k) {
    switch (k) {
        case AdapterKind::wikia_dump: return "wikia_dump";
        case AdapterKind::taxonomy: return "taxonomy";
        case AdapterKind::acronym_dict: return "acronym_dict";
        case AdapterKind::generic_jsonl: return "generic_jsonl";
    }
    return "?";
}

inline AdapterKind adapter_kind_from_string(const std::string& s) {
    for (AdapterKind k : {AdapterKind::wikia_dump, AdapterKind::taxonomy,
                          AdapterKind::acronym_dict, AdapterKind::generic_jsonl})
        if (s == to_string(k)) return k;
    throw Error("unknown adapter kind: " + s);
}

struct AdapterSpec {
    AdapterKind kind = AdapterKind::generic_jsonl;
    int description_sentences = 0;  // 0 = keep source text verbatim
    std::string unk_marker = "__UNK__";
    std::vector<std::string> abbreviations;
};

struct ConvertStats {
    std::size_t entities = 0;
    std::size_t mentions = 0;
};

namespace detail {

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open input file: " + path);
    std::vector<nlohmann::json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& ex) {
            throw SchemaMismatch(line_no, std::string("invalid JSON: ") + ex.what());
        }
        if (!records.back().is_object()) throw SchemaMismatch(line_no, "record is not an object");
    }
    return records;
}

inline std::string require_string(const nlohmann::json& rec, const char* field, std::size_t record_no) {
    if (!rec.contains(field) || !rec[field].is_string())
        throw SchemaMismatch(record_no, std::string("missing required string field \"") + field + "\"");
    return rec[field].get<std::string>();
}

inline long require_int(const nlohmann::json& rec, const char* field, std::size_t record_no) {
    if (!rec.contains(field) || !rec[field].is_number_integer())
        throw SchemaMismatch(record_no, std::string("missing required integer field \"") + field + "\"");
    return rec[field].get<long>();
}

inline nlohmann::json kb_record(const std::string& id, const std::string& name,
                                const std::string& description,
                                const std::vector<std::string>& aliases = {}) {
    nlohmann::json j;
    j["id"] = id;
    j["name"] = name;
    if (!description.empty()) j["description"] = description;
    if (!aliases.empty()) j["aliases"] = aliases;
    return j;
}

inline nlohmann::json task_record(const std::string& id, const std::string& text, long start,
                                  long end, const std::string& gold_id,
                                  const std::vector<std::string>& candidates = {},
                                  const std::string& domain = "") {
    nlohmann::json j;
    j["id"] = id;
    j["text"] = text;
    j["mention_start"] = start;
    j["mention_end"] = end;
    if (!gold_id.empty()) j["gold_id"] = gold_id;
    if (!candidates.empty()) j["candidates"] = candidates;
    if (!domain.empty()) j["domain"] = domain;
    return j;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write output file: " + path);
    for (const auto& line : lines) out << line << '\n';
}

}  // namespace detail

// Converts one benchmark layout into the canonical KB and mention-task files. The input
// path is a directory holding the source pair for the declared kind:
//   wikia_dump    documents.jsonl + mentions.jsonl  (token-index mention spans)
//   taxonomy      entities.jsonl  + mentions.jsonl  (missing gold -> UNK marker)
//   acronym_dict  dictionary.jsonl + mentions.jsonl (per-acronym candidate lists)
//   generic_jsonl kb.jsonl + tasks.jsonl            (validating passthrough)
inline ConvertStats convert(const AdapterSpec& spec, const std::string& input_dir,
                            const std::string& kb_out, const std::string& tasks_out) {
    namespace fs = std::filesystem;
    ConvertStats stats;
    std::vector<std::string> kb_lines;
    std::vector<std::string> task_lines;

    switch (spec.kind) {
        case AdapterKind::wikia_dump: {
            auto docs = detail::read_jsonl((fs::path(input_dir) / "documents.jsonl").string());
            auto mentions = detail::read_jsonl((fs::path(input_dir) / "mentions.jsonl").string());
            std::unordered_map<std::string, std::vector<std::string>> doc_tokens;
            std::size_t rec = 0;
            for (const auto& d : docs) {
                ++rec;
                const std::string id = detail::require_string(d, "document_id", rec);
                const std::string title = detail::require_string(d, "title", rec);
                const std::string text = detail::require_string(d, "text", rec);
                std::string description = spec.description_sentences > 0
                                              ? first_n_sentences(text, spec.description_sentences,
                                                                  spec.abbreviations)
                                              : text;
                kb_lines.push_back(detail::kb_record(id, title, description).dump());
                std::istringstream ss(text);
                std::string tok;
                auto& toks = doc_tokens[id];
                while (ss >> tok) toks.push_back(tok);
            }
            rec = 0;
            for (const auto& m : mentions) {
                ++rec;
                const std::string id = detail::require_string(m, "mention_id", rec);
                const std::string doc_id = detail::require_string(m, "context_document_id", rec);
                const long tok_start = detail::require_int(m, "start_index", rec);
                const long tok_end = detail::require_int(m, "end_index", rec);
                auto it = doc_tokens.find(doc_id);
                if (it == doc_tokens.end())
                    throw SchemaMismatch(rec, "mention references unknown document " + doc_id);
                const auto& toks = it->second;
                if (tok_start < 0 || tok_end <= tok_start ||
                    static_cast<std::size_t>(tok_end) > toks.size())
                    throw SchemaMismatch(rec, "token span out of range for mention " + id);
                // Context normalized to single-space joined tokens; spans become char offsets.
                std::string text;
                long start_char = -1, end_char = -1;
                for (std::size_t t = 0; t < toks.size(); ++t) {
                    if (t > 0) text += ' ';
                    if (static_cast<long>(t) == tok_start) start_char = static_cast<long>(text.size());
                    text += toks[t];
                    if (static_cast<long>(t) == tok_end - 1) end_char = static_cast<long>(text.size());
                }
                std::vector<std::string> candidates;
                if (m.contains("candidates"))
                    candidates = m["candidates"].get<std::vector<std::string>>();
                const std::string gold = detail::require_string(m, "label_document_id", rec);
                const std::string domain = m.value("corpus", "");
                task_lines.push_back(
                    detail::task_record(id, text, start_char, end_char, gold, candidates, domain)
                        .dump());
            }
            break;
        }
        case AdapterKind::taxonomy: {
            auto entities = detail::read_jsonl((fs::path(input_dir) / "entities.jsonl").string());
            auto mentions = detail::read_jsonl((fs::path(input_dir) / "mentions.jsonl").string());
            std::size_t rec = 0;
            for (const auto& e : entities) {
                ++rec;
                const std::string id = detail::require_string(e, "id", rec);
                const std::string name = detail::require_string(e, "name", rec);
                std::string description = e.value("description", "");
                if (spec.description_sentences > 0)
                    description = first_n_sentences(description, spec.description_sentences,
                                                    spec.abbreviations);
                std::vector<std::string> aliases;
                if (e.contains("aliases")) aliases = e["aliases"].get<std::vector<std::string>>();
                kb_lines.push_back(detail::kb_record(id, name, description, aliases).dump());
            }
            rec = 0;
            for (const auto& m : mentions) {
                ++rec;
                const std::string id = detail::require_string(m, "id", rec);
                const std::string text = detail::require_string(m, "text", rec);
                const long start = detail::require_int(m, "mention_start", rec);
                const long end = detail::require_int(m, "mention_end", rec);
                std::string gold = spec.unk_marker;
                if (m.contains("gold_id") && m["gold_id"].is_string() &&
                    !m["gold_id"].get<std::string>().empty())
                    gold = m["gold_id"].get<std::string>();
                task_lines.push_back(
                    detail::task_record(id, text, start, end, gold, {}, m.value("domain", ""))
                        .dump());
            }
            break;
        }
        case AdapterKind::acronym_dict: {
            auto dict = detail::read_jsonl((fs::path(input_dir) / "dictionary.jsonl").string());
            auto mentions = detail::read_jsonl((fs::path(input_dir) / "mentions.jsonl").string());
            // normalized acronym -> (long form -> id, ordered ids)
            struct AcronymEntry {
                std::unordered_map<std::string, std::string> id_by_long_form;
                std::vector<std::string> ids;
            };
            std::unordered_map<std::string, AcronymEntry> table;
            std::size_t rec = 0;
            for (const auto& d : dict) {
                ++rec;
                const std::string acronym = detail::require_string(d, "acronym", rec);
                if (!d.contains("long_forms") || !d["long_forms"].is_array())
                    throw SchemaMismatch(rec, "missing required array field \"long_forms\"");
                auto& entry = table[AliasDictionary::normalize_surface(acronym)];
                std::size_t i = entry.ids.size();
                for (const auto& lf : d["long_forms"]) {
                    if (!lf.is_string()) throw SchemaMismatch(rec, "long_forms must be strings");
                    const std::string long_form = lf.get<std::string>();
                    const std::string id = acronym + "#" + std::to_string(i++);
                    // Long forms are the whole entity text; shown as the name alone.
                    kb_lines.push_back(detail::kb_record(id, long_form, "", {acronym}).dump());
                    entry.id_by_long_form[long_form] = id;
                    entry.ids.push_back(id);
                }
            }
            rec = 0;
            for (const auto& m : mentions) {
                ++rec;
                const std::string id = detail::require_string(m, "id", rec);
                const std::string text = detail::require_string(m, "text", rec);
                const long start = detail::require_int(m, "mention_start", rec);
                const long end = detail::require_int(m, "mention_end", rec);
                if (start < 0 || end <= start || static_cast<std::size_t>(end) > text.size())
                    throw SchemaMismatch(rec, "mention span out of range for " + id);
                const std::string surface =
                    text.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(end - start));
                auto it = table.find(AliasDictionary::normalize_surface(surface));
                if (it == table.end())
                    throw SchemaMismatch(rec, "mention surface \"" + surface + "\" not in dictionary");
                const std::string gold_long_form = detail::require_string(m, "gold_long_form", rec);
                auto gold_it = it->second.id_by_long_form.find(gold_long_form);
                if (gold_it == it->second.id_by_long_form.end())
                    throw SchemaMismatch(rec, "gold long form not in dictionary for " + id);
                task_lines.push_back(detail::task_record(id, text, start, end, gold_it->second,
                                                         it->second.ids, m.value("domain", ""))
                                         .dump());
            }
            break;
        }
        case AdapterKind::generic_jsonl: {
            const std::string kb_path = (fs::path(input_dir) / "kb.jsonl").string();
            const std::string tasks_path = (fs::path(input_dir) / "tasks.jsonl").string();
            load_kb_file(kb_path);  // validation only; throws on malformed records
            std::ifstream kin(kb_path);
            std::string line;
            while (std::getline(kin, line))
                if (!trim(line).empty()) kb_lines.push_back(line);
            std::ifstream tin(tasks_path);
            if (!tin) throw Error("cannot open input file: " + tasks_path);
            std::size_t rec = 0;
            while (std::getline(tin, line)) {
                if (trim(line).empty()) continue;
                ++rec;
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(line);
                } catch (const nlohmann::json::exception& ex) {
                    throw SchemaMismatch(rec, std::string("invalid JSON: ") + ex.what());
                }
                detail::require_string(j, "id", rec);
                detail::require_string(j, "text", rec);
                detail::require_int(j, "mention_start", rec);
                detail::require_int(j, "mention_end", rec);
                task_lines.push_back(line);
            }
            break;
        }
    }

    detail::write_lines(kb_out, kb_lines);
    detail::write_lines(tasks_out, task_lines);
    stats.entities = kb_lines.size();
    stats.mentions = task_lines.size();
    return stats;
}

}  // namespace linkforge
