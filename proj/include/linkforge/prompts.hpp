#pragma once

#include <string>

namespace linkforge::prompts {

// Instruction for the pointwise yes/no reranking scorer.
inline constexpr const char* kRerankerInstruction =
    "Given a text with a marked mention enclosed in square brackets, retrieve relevant "
    "entities that the mention refers to.";

// Instruction prepended to queries for instruction-tuned embedding retrievers.
inline constexpr const char* kRetrieverInstruction =
    "Given an ambiguous mention, retrieve relevant entities that the mention refers to.";

// System prompt for the candidate selection stage.
inline constexpr const char* kSelectionSystem =
    "You are an expert designed to disambiguate entities in text, taking into account the "
    "overall context and a list of entity candidates. You are provided with an input text "
    "that includes a full contextual narrative, a marked mention enclosed in square "
    "brackets, and a list of candidates, each preceded by an index number.\n\n"
    "Your task is to determine the most appropriate entity from the candidates based on "
    "the context and candidate entity descriptions.\n"
    "Please show your choice with only the index, e.g., \"answer: 3\".";

inline constexpr const char* kNoneOptionLine = "0. None of the candidates";

// Chat-message rendering of a yes/no scoring request. The instruction rides as the
// system message; this builds the user message.
inline std::string yes_no_user_message(const std::string& query, const std::string& document) {
    std::string out;
    out.reserve(query.size() + document.size() + 96);
    out += "Query: ";
    out += query;
    out += "\nDocument: ";
    out += document;
    out += "\nIs the document relevant to the marked mention? Answer yes or no.";
    return out;
}

}  // namespace linkforge::prompts
