#pragma once

// Newline-delimited UTF-8 records over a TCP stream.
//   request:  {"id": "<string>", "features": [numbers]}
//   response: {"id": "<string>", "probs": [numbers]}
//           | {"id": "<string>", "error": "<code>: <detail>"}
//   ping:     {"cmd":"ping"}  ->  {"ok":true,"classes":C}
// Responses may arrive in any order; "id" is the correlation key. Numbers are
// serialized with 17 significant digits so doubles survive the round trip
// bit-exactly. Error codes: dimension_mismatch, parse_error, bad_request.

#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dkd/errors.hpp"
#include "dkd/prob.hpp"

namespace dkd::wire {

inline constexpr const char* kErrDimension = "dimension_mismatch";
inline constexpr const char* kErrParse = "parse_error";
inline constexpr const char* kErrBadRequest = "bad_request";

inline void append_number(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

inline void append_array(std::string& out, std::span<const double> values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        append_number(out, values[i]);
    }
    out += ']';
}

inline std::string escape(const std::string& s) {
    return nlohmann::json(s).dump();
}

inline std::string make_request(const std::string& id, std::span<const double> features) {
    std::string out = "{\"id\":" + escape(id) + ",\"features\":";
    append_array(out, features);
    out += '}';
    return out;
}

inline std::string make_probs_response(const std::string& id, std::span<const double> probs) {
    std::string out = "{\"id\":" + escape(id) + ",\"probs\":";
    append_array(out, probs);
    out += '}';
    return out;
}

inline std::string make_error_response(const std::string& id, const std::string& code,
                                       const std::string& detail) {
    return "{\"id\":" + escape(id) + ",\"error\":" + escape(code + ": " + detail) + "}";
}

inline std::string make_ping() { return R"({"cmd":"ping"})"; }

inline std::string make_pong(std::size_t classes) {
    return "{\"ok\":true,\"classes\":" + std::to_string(classes) + "}";
}

/// Parses one response line into (id, probs) and throws on anything else.
/// Error responses are mapped back to the exception the failure would have
/// raised locally: dimension_mismatch -> invalid_argument, everything else
/// -> ProtocolError.
inline std::pair<std::string, std::vector<double>> parse_probs_response(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ProtocolError("wire: unparseable response: " + line);
    const std::string id = j.value("id", std::string{});
    if (j.contains("error")) {
        const std::string err = j["error"].get<std::string>();
        if (err.rfind(kErrDimension, 0) == 0)
            throw std::invalid_argument("remote: " + err);
        throw ProtocolError("remote: " + err);
    }
    if (!j.contains("probs") || !j["probs"].is_array())
        throw ProtocolError("wire: response has no probs array: " + line);
    std::vector<double> probs;
    for (const auto& v : j["probs"]) {
        if (!v.is_number()) throw ProtocolError("wire: non-numeric probability");
        probs.push_back(v.get<double>());
    }
    return {id, std::move(probs)};
}

} // namespace dkd::wire
