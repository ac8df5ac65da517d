#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace linkforge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// KB ingestion
struct MalformedRecord : Error {
    MalformedRecord(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_no(line) {}
    std::size_t line_no;
};
struct DuplicateId : Error {
    explicit DuplicateId(const std::string& entity_id)
        : Error("duplicate entity id: " + entity_id), id(entity_id) {}
    std::string id;
};

// Mention marking
struct OffsetOutOfRange : Error {
    using Error::Error;
};
struct EmptyMention : Error {
    using Error::Error;
};

// Retrieval
struct EmptyKb : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct ZeroVector : Error {
    using Error::Error;
};
struct MentionMismatch : Error {
    using Error::Error;
};

// Gateway
struct TransportError : Error {
    explicit TransportError(const std::string& what, int http_status = 0)
        : Error(what), status(http_status) {}
    int status;
};
struct BackendRefused : Error {
    explicit BackendRefused(const std::string& what, int http_status = 0)
        : Error(what), status(http_status) {}
    int status;
};
struct LogprobsUnsupported : Error {
    using Error::Error;
};

// Scoring / metrics
struct NonFiniteInput : Error {
    using Error::Error;
};
struct EmptySet : Error {
    using Error::Error;
};
struct EmptyGatedSet : Error {
    using Error::Error;
};
struct OrderingNeedsGold : Error {
    using Error::Error;
};
struct RequestedExceedsStored : Error {
    using Error::Error;
};

// Adapters
struct SchemaMismatch : Error {
    SchemaMismatch(std::size_t line, const std::string& what)
        : Error("record " + std::to_string(line) + ": " + what), line_no(line) {}
    std::size_t line_no;
};

}  // namespace linkforge
