#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "dkd/errors.hpp"
#include "dkd/hypothesis.hpp"
#include "dkd/wire.hpp"

namespace dkd {

/// Talks to a PredictionServer over the line protocol. One connection is
/// kept open and shared; concurrent callers serialize on it. Transport
/// failures reconnect and retry up to max_attempts before surfacing a
/// TransportError; protocol-level failures surface immediately.
class RemoteHypothesis final : public SourceHypothesis {
public:
    RemoteHypothesis(std::string host, int port, int max_attempts = 3)
        : host_(std::move(host)), port_(port), max_attempts_(max_attempts) {
        std::lock_guard lock(mu_);
        const std::string pong = roundtrip_locked(wire::make_ping());
        nlohmann::json j = nlohmann::json::parse(pong, nullptr, false);
        if (j.is_discarded() || j.value("ok", false) != true || !j.contains("classes"))
            throw ProtocolError("remote: bad ping response: " + pong);
        classes_ = j["classes"].get<std::size_t>();
        if (classes_ == 0) throw ProtocolError("remote: server reports zero classes");
    }

    ~RemoteHypothesis() override {
        if (fd_ >= 0) ::close(fd_);
    }

    RemoteHypothesis(const RemoteHypothesis&) = delete;
    RemoteHypothesis& operator=(const RemoteHypothesis&) = delete;

    ProbVector predict(std::span<const double> features) const override {
        std::lock_guard lock(mu_);
        const std::string id = std::to_string(next_id_++);
        const std::string reply = roundtrip_locked(wire::make_request(id, features), id);
        auto [got_id, probs] = wire::parse_probs_response(reply);
        if (got_id != id) throw ProtocolError("remote: correlation id mismatch");
        if (probs.size() != classes_)
            throw ProtocolError("remote: expected " + std::to_string(classes_) +
                                " probabilities, got " + std::to_string(probs.size()));
        // Validate without renormalizing: the payload already is the server's
        // exact distribution and must pass through bit-identically.
        double sum = 0.0;
        for (double p : probs) {
            if (!std::isfinite(p) || p < 0.0)
                throw ProtocolError("remote: invalid probability in response");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw ProtocolError("remote: probabilities sum to " + std::to_string(sum));
        return ProbVector::from_normalized(std::move(probs));
    }

    std::size_t num_classes() const override { return classes_; }

    std::string endpoint() const { return host_ + ":" + std::to_string(port_); }

private:
    void connect_locked() const {
        if (fd_ >= 0) return;
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw TransportError("remote: socket() failed", endpoint(), 1);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port_));
        if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
            ::close(fd_);
            fd_ = -1;
            throw TransportError("remote: bad address " + host_, endpoint(), 1);
        }
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            const std::string why = std::strerror(errno);
            ::close(fd_);
            fd_ = -1;
            throw TransportError("remote: connect failed: " + why, endpoint(), 1);
        }
        read_buf_.clear();
    }

    void drop_locked() const {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
        read_buf_.clear();
        pending_.clear();
    }

    bool send_locked(const std::string& line) const {
        std::string framed = line + "\n";
        std::size_t off = 0;
        while (off < framed.size()) {
            const ssize_t sent = ::send(fd_, framed.data() + off, framed.size() - off,
                                        MSG_NOSIGNAL);
            if (sent <= 0) return false;
            off += static_cast<std::size_t>(sent);
        }
        return true;
    }

    /// Reads whole lines until one matches wanted_id (or, with an empty id,
    /// returns the first line). Out-of-order responses are parked by id.
    std::string read_matching_locked(const std::string& wanted_id) const {
        while (true) {
            if (!wanted_id.empty()) {
                const auto it = pending_.find(wanted_id);
                if (it != pending_.end()) {
                    std::string line = it->second;
                    pending_.erase(it);
                    return line;
                }
            }
            const std::size_t nl = read_buf_.find('\n');
            if (nl != std::string::npos) {
                std::string line = read_buf_.substr(0, nl);
                read_buf_.erase(0, nl + 1);
                if (wanted_id.empty()) return line;
                nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
                const std::string id =
                    (!j.is_discarded() && j.is_object()) ? j.value("id", std::string{}) : "";
                if (id == wanted_id) return line;
                pending_[id] = line;
                continue;
            }
            char chunk[4096];
            const ssize_t got = ::recv(fd_, chunk, sizeof chunk, 0);
            if (got <= 0) throw TransportError("remote: connection lost mid-read", endpoint(), 1);
            read_buf_.append(chunk, static_cast<std::size_t>(got));
        }
    }

    std::string roundtrip_locked(const std::string& line,
                                 const std::string& wanted_id = "") const {
        int attempts = 0;
        while (true) {
            ++attempts;
            try {
                connect_locked();
                if (!send_locked(line)) {
                    drop_locked();
                    throw TransportError("remote: send failed", endpoint(), attempts);
                }
                return read_matching_locked(wanted_id);
            } catch (const TransportError&) {
                drop_locked();
                if (attempts >= max_attempts_)
                    throw TransportError("remote: giving up after " + std::to_string(attempts) +
                                             " attempts",
                                         endpoint(), attempts);
            }
        }
    }

    std::string host_;
    int port_;
    int max_attempts_;
    std::size_t classes_ = 0;
    mutable std::mutex mu_;
    mutable int fd_ = -1;
    mutable std::uint64_t next_id_ = 0;
    mutable std::string read_buf_;
    mutable std::map<std::string, std::string> pending_;
};

} // namespace dkd
