#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dkd/errors.hpp"
#include "dkd/hypothesis.hpp"
#include "dkd/model.hpp"
#include "dkd/wire.hpp"

namespace dkd {

/// Serves a checkpointed network over the line protocol in wire.hpp. The
/// process boundary realizes the black-box contract: the only queries the
/// protocol knows are ping and predict, so parameters stay on this side.
/// Connections are handled concurrently; every request is stateless.
class PredictionServer {
public:
    /// Binds immediately; port 0 picks an ephemeral port (see port()).
    PredictionServer(TargetNetwork net, const std::string& host = "127.0.0.1", int port = 0)
        : hypothesis_(std::move(net)), host_(host) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw TransportError("server: socket() failed", endpoint(port), 1);
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            ::close(listen_fd_);
            throw TransportError("server: bad bind address " + host, endpoint(port), 1);
        }
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
            ::listen(listen_fd_, 64) != 0) {
            const std::string why = std::strerror(errno);
            ::close(listen_fd_);
            throw TransportError("server: cannot bind " + endpoint(port) + ": " + why,
                                 endpoint(port), 1);
        }
        sockaddr_in bound{};
        socklen_t len = sizeof bound;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.sin_port);
    }

    PredictionServer(const PredictionServer&) = delete;
    PredictionServer& operator=(const PredictionServer&) = delete;

    ~PredictionServer() { stop(); }

    void start() {
        if (running_.exchange(true)) return;
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    void stop() {
        if (!running_.exchange(false)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        if (accept_thread_.joinable()) accept_thread_.join();
        // no new connections can appear past this point; unblock the live ones
        {
            std::lock_guard lock(clients_mu_);
            for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
        }
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        workers_.clear();
    }

    int port() const { return port_; }
    const std::string& host() const { return host_; }

    std::size_t requests_served() const { return requests_.load(); }

private:
    std::string endpoint(int port) const { return host_ + ":" + std::to_string(port); }

    void accept_loop() {
        while (running_) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) {
                if (!running_) break;
                continue;
            }
            {
                std::lock_guard lock(clients_mu_);
                client_fds_.push_back(fd);
            }
            workers_.emplace_back([this, fd] { serve_connection(fd); });
        }
    }

    void serve_connection(int fd) {
        std::string buffer;
        char chunk[4096];
        bool open = true;
        while (open) {
            const ssize_t got = ::recv(fd, chunk, sizeof chunk, 0);
            if (got <= 0) break;
            buffer.append(chunk, static_cast<std::size_t>(got));
            std::size_t nl;
            while ((nl = buffer.find('\n')) != std::string::npos) {
                const std::string line = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                if (line.empty()) continue;
                const std::string response = handle_line(line) + "\n";
                if (!send_all(fd, response)) {
                    open = false;
                    break;
                }
            }
        }
        {
            std::lock_guard lock(clients_mu_);
            std::erase(client_fds_, fd);
        }
        ::close(fd);
    }

    static bool send_all(int fd, const std::string& data) {
        std::size_t off = 0;
        while (off < data.size()) {
            const ssize_t sent =
                ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (sent <= 0) return false;
            off += static_cast<std::size_t>(sent);
        }
        return true;
    }

    std::string handle_line(const std::string& line) {
        requests_.fetch_add(1);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            return wire::make_error_response("", wire::kErrParse, "unparseable request line");
        if (j.contains("cmd")) {
            if (j["cmd"] == "ping") return wire::make_pong(hypothesis_.num_classes());
            return wire::make_error_response("", wire::kErrBadRequest,
                                             "unknown command; only ping and predict exist");
        }
        const std::string id = j.value("id", std::string{});
        if (!j.contains("features") || !j["features"].is_array())
            return wire::make_error_response(id, wire::kErrBadRequest, "missing features array");
        std::vector<double> x;
        x.reserve(j["features"].size());
        for (const auto& v : j["features"]) {
            if (!v.is_number())
                return wire::make_error_response(id, wire::kErrBadRequest,
                                                 "non-numeric feature");
            x.push_back(v.get<double>());
        }
        for (double v : x)
            if (!std::isfinite(v))
                return wire::make_error_response(id, wire::kErrBadRequest, "non-finite feature");
        try {
            const ProbVector p = hypothesis_.predict(x);
            return wire::make_probs_response(id, p.values());
        } catch (const std::invalid_argument& e) {
            return wire::make_error_response(id, wire::kErrDimension, e.what());
        } catch (const std::exception& e) {
            return wire::make_error_response(id, wire::kErrBadRequest, e.what());
        }
    }

    InProcessHypothesis hypothesis_;
    std::string host_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{false};
    std::atomic<std::size_t> requests_{0};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::mutex clients_mu_;
    std::vector<int> client_fds_;
};

} // namespace dkd
