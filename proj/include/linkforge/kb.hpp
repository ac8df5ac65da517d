#pragma once

#include <fstream>
#include <istream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/util.hpp"

namespace linkforge {

struct Entity {
    std::string id;
    std::string name;
    std::string description;
};

// "name: description", or the bare name when the description is empty.
inline std::string verbalize_entity(const Entity& e) {
    if (e.description.empty()) return e.name;
    return e.name + ": " + e.description;
}

class KnowledgeBase {
public:
    void add(Entity e) {
        if (e.id.empty()) throw Error("entity id must be non-empty");
        if (e.name.empty()) throw Error("entity name must be non-empty (id " + e.id + ")");
        auto [it, inserted] = by_id_.emplace(e.id, entities_.size());
        if (!inserted) throw DuplicateId(e.id);
        entities_.push_back(std::move(e));
    }

    const Entity* find(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &entities_[it->second];
    }

    const Entity& get(const std::string& id) const {
        const Entity* e = find(id);
        if (!e) throw Error("unknown entity id: " + id);
        return *e;
    }

    bool contains(const std::string& id) const { return by_id_.count(id) > 0; }
    std::size_t size() const { return entities_.size(); }
    bool empty() const { return entities_.empty(); }

    // Iteration follows insertion order.
    const std::vector<Entity>& entities() const { return entities_; }
    auto begin() const { return entities_.begin(); }
    auto end() const { return entities_.end(); }

    const std::string& source() const { return source_; }
    void set_source(std::string s) { source_ = std::move(s); }

private:
    std::vector<Entity> entities_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::string source_;
};

// Context text with a mention span, plus the bracket-marked rendering.
struct MarkedContext {
    std::string text;
    std::size_t mention_start = 0;
    std::size_t mention_end = 0;
    std::string rendered;

    std::string surface() const { return text.substr(mention_start, mention_end - mention_start); }
};

inline MarkedContext mark_mention(const std::string& text, std::size_t start, std::size_t end) {
    if (start > text.size() || end > text.size() || start > end)
        throw OffsetOutOfRange("mention span [" + std::to_string(start) + ", " + std::to_string(end) +
                               ") out of range for text of length " + std::to_string(text.size()));
    if (start == end) throw EmptyMention("mention span is empty");
    MarkedContext ctx;
    ctx.text = text;
    ctx.mention_start = start;
    ctx.mention_end = end;
    ctx.rendered.reserve(text.size() + 2);
    ctx.rendered.append(text, 0, start);
    ctx.rendered.push_back('[');
    ctx.rendered.append(text, start, end - start);
    ctx.rendered.push_back(']');
    ctx.rendered.append(text, end, text.size() - end);
    return ctx;
}

// Surface string -> entity ids, in prior order. Keys are normalized on insert and lookup:
// case fold, trim, collapse internal whitespace.
class AliasDictionary {
public:
    static std::string normalize_surface(std::string_view surface) {
        return ascii_lower(collapse_whitespace(surface));
    }

    void add(std::string_view surface, const std::string& entity_id) {
        auto& ids = map_[normalize_surface(surface)];
        for (const auto& existing : ids)
            if (existing == entity_id) return;
        ids.push_back(entity_id);
    }

    const std::vector<std::string>& lookup(std::string_view surface) const {
        static const std::vector<std::string> kEmpty;
        auto it = map_.find(normalize_surface(surface));
        return it == map_.end() ? kEmpty : it->second;
    }

    std::size_t size() const { return map_.size(); }
    bool empty() const { return map_.empty(); }
    const std::unordered_map<std::string, std::vector<std::string>>& entries() const { return map_; }

private:
    std::unordered_map<std::string, std::vector<std::string>> map_;
};

inline std::vector<std::string> dict_candidates(const AliasDictionary& d, std::string_view surface) {
    return d.lookup(surface);
}

struct LoadedKb {
    KnowledgeBase kb;
    AliasDictionary aliases;
};

// Line-delimited JSON: {"id", "name", "description"?, "aliases"?: [..]}.
inline LoadedKb load_kb(std::istream& in, const std::string& source_name = "") {
    LoadedKb out;
    out.kb.set_source(source_name);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw MalformedRecord(line_no, std::string("invalid JSON: ") + ex.what());
        }
        if (!rec.is_object()) throw MalformedRecord(line_no, "record is not a JSON object");
        if (!rec.contains("id") || !rec["id"].is_string())
            throw MalformedRecord(line_no, "missing required string field \"id\"");
        if (!rec.contains("name") || !rec["name"].is_string())
            throw MalformedRecord(line_no, "missing required string field \"name\"");
        Entity e;
        e.id = rec["id"].get<std::string>();
        e.name = rec["name"].get<std::string>();
        if (rec.contains("description") && !rec["description"].is_null()) {
            if (!rec["description"].is_string())
                throw MalformedRecord(line_no, "\"description\" must be a string");
            e.description = rec["description"].get<std::string>();
        }
        std::vector<std::string> aliases;
        if (rec.contains("aliases") && !rec["aliases"].is_null()) {
            if (!rec["aliases"].is_array())
                throw MalformedRecord(line_no, "\"aliases\" must be an array of strings");
            for (const auto& a : rec["aliases"]) {
                if (!a.is_string()) throw MalformedRecord(line_no, "\"aliases\" must be an array of strings");
                aliases.push_back(a.get<std::string>());
            }
        }
        const std::string id = e.id;
        out.kb.add(std::move(e));
        for (const auto& a : aliases) out.aliases.add(a, id);
    }
    return out;
}

inline LoadedKb load_kb_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open KB file: " + path);
    return load_kb(in, path);
}

}  // namespace linkforge
