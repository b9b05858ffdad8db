#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace mailrank::netexpert {

struct NetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per-term expert lists: (user, weight) sorted by weight descending; only
/// positive weights appear.
struct ExpertAnswer {
    std::map<std::string, std::vector<std::pair<std::string, double>>> per_term;

    std::optional<double> weight(const std::string& term, const std::string& user) const {
        auto it = per_term.find(term);
        if (it == per_term.end()) return std::nullopt;
        for (const auto& [u, w] : it->second)
            if (u == user) return w;
        return std::nullopt;
    }

    bool empty() const {
        for (const auto& [t, users] : per_term)
            if (!users.empty()) return false;
        return true;
    }
};

/// Server-side store: each network user's published term weights. Re-publish
/// replaces the user's previous profile.
class ExpertiseStore {
  public:
    /// Rejects negative weights; otherwise replaces the user's profile.
    bool publish(const std::string& user, const std::map<std::string, double>& terms) {
        for (const auto& [t, w] : terms)
            if (w < 0.0) return false;
        std::lock_guard lock(mu_);
        profiles_[user] = terms;
        return true;
    }

    ExpertAnswer experts(const std::vector<std::string>& terms) const {
        std::lock_guard lock(mu_);
        ExpertAnswer ans;
        for (const auto& t : terms) {
            auto& list = ans.per_term[t];
            for (const auto& [user, prof] : profiles_) {
                auto it = prof.find(t);
                if (it != prof.end() && it->second > 0.0)
                    list.emplace_back(user, it->second);
            }
            std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
        }
        return ans;
    }

    size_t user_count() const {
        std::lock_guard lock(mu_);
        return profiles_.size();
    }

    nlohmann::json to_json() const {
        std::lock_guard lock(mu_);
        nlohmann::json users = nlohmann::json::object();
        for (const auto& [user, prof] : profiles_) {
            nlohmann::json terms = nlohmann::json::object();
            for (const auto& [t, w] : prof) terms[t] = w;
            users[user] = terms;
        }
        return nlohmann::json{{"magic", "mailrank-experts"}, {"version", 1}, {"users", users}};
    }

    void save(const std::string& path) const {
        std::lock_guard save_lock(save_mu_);
        auto j = to_json();
        std::ofstream out(path);
        out << j.dump() << "\n";
    }

    void load(const std::string& path) {
        std::ifstream in(path);
        if (!in) return;
        nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || j.value("magic", "") != "mailrank-experts") return;
        std::lock_guard lock(mu_);
        profiles_.clear();
        for (const auto& [user, terms] : j.at("users").items())
            for (const auto& [t, w] : terms.items())
                profiles_[user][t] = w.get<double>();
    }

  private:
    mutable std::mutex mu_;
    mutable std::mutex save_mu_;
    std::map<std::string, std::map<std::string, double>> profiles_;
};

namespace detail {

inline nlohmann::json handle_request(ExpertiseStore& store, const nlohmann::json& req,
                                     const std::string& persist_path) {
    if (!req.is_object() || !req.contains("type"))
        return {{"type", "error"}, {"msg", "message must be an object with a type"}};
    const std::string type = req.value("type", "");
    if (type == "publish") {
        if (!req.contains("user") || !req.contains("terms") || !req["terms"].is_object())
            return {{"type", "error"}, {"msg", "publish needs user and terms"}};
        std::map<std::string, double> terms;
        for (const auto& [t, w] : req["terms"].items()) {
            if (!w.is_number())
                return {{"type", "error"}, {"msg", "term weight must be a number"}};
            terms[t] = w.get<double>();
        }
        if (!store.publish(req["user"].get<std::string>(), terms))
            return {{"type", "error"}, {"msg", "negative weight rejected"}};
        if (!persist_path.empty()) store.save(persist_path);
        return {{"type", "ack"}};
    }
    if (type == "experts") {
        if (!req.contains("terms") || !req["terms"].is_array())
            return {{"type", "error"}, {"msg", "experts needs a terms array"}};
        std::vector<std::string> terms;
        for (const auto& t : req["terms"]) terms.push_back(t.get<std::string>());
        auto ans = store.experts(terms);
        nlohmann::json per_term = nlohmann::json::object();
        for (const auto& [t, users] : ans.per_term) {
            nlohmann::json list = nlohmann::json::array();
            for (const auto& [u, w] : users) list.push_back({u, w});
            per_term[t] = list;
        }
        return {{"type", "answer"}, {"per_term", per_term}};
    }
    return {{"type", "error"}, {"msg", "unknown message type '" + type + "'"}};
}

inline bool send_all(int fd, const std::string& data) {
    size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) return false;
        off += static_cast<size_t>(n);
    }
    return true;
}

}  // namespace detail

/// Newline-delimited JSON over TCP. One request line yields one response
/// line; connections are reusable and a protocol error keeps them open.
class Server {
  public:
    explicit Server(std::string store_path = "") : store_path_(std::move(store_path)) {
        if (!store_path_.empty()) store_.load(store_path_);
    }

    ~Server() { stop(); }

    /// Binds and starts serving; port 0 picks an ephemeral port. Returns the
    /// bound port.
    int start(int port) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw NetError("socket() failed");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        addr.sin_port = htons(static_cast<uint16_t>(port));
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(listen_fd_);
            listen_fd_ = -1;
            throw NetError("cannot bind port " + std::to_string(port));
        }
        if (::listen(listen_fd_, 16) != 0) {
            ::close(listen_fd_);
            listen_fd_ = -1;
            throw NetError("listen() failed");
        }
        socklen_t len = sizeof addr;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
        return port_;
    }

    int port() const { return port_; }
    ExpertiseStore& store() { return store_; }

    void stop() {
        if (!running_.exchange(false)) return;
        if (accept_thread_.joinable()) accept_thread_.join();
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        workers_.clear();
        if (listen_fd_ >= 0) {
            ::close(listen_fd_);
            listen_fd_ = -1;
        }
    }

  private:
    void accept_loop() {
        while (running_) {
            pollfd pfd{listen_fd_, POLLIN, 0};
            int r = ::poll(&pfd, 1, 100);
            if (r <= 0) continue;
            int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) continue;
            workers_.emplace_back([this, fd] { serve_connection(fd); });
        }
    }

    void serve_connection(int fd) {
        std::string buf;
        char chunk[4096];
        while (running_) {
            pollfd pfd{fd, POLLIN, 0};
            int r = ::poll(&pfd, 1, 100);
            if (r == 0) continue;
            if (r < 0) break;
            ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
            if (n <= 0) break;
            buf.append(chunk, static_cast<size_t>(n));
            size_t nl;
            while ((nl = buf.find('\n')) != std::string::npos) {
                std::string line = buf.substr(0, nl);
                buf.erase(0, nl + 1);
                if (line.empty()) continue;
                nlohmann::json req = nlohmann::json::parse(line, nullptr, false);
                nlohmann::json resp =
                    req.is_discarded()
                        ? nlohmann::json{{"type", "error"}, {"msg", "malformed json"}}
                        : detail::handle_request(store_, req, store_path_);
                if (!detail::send_all(fd, resp.dump() + "\n")) break;
            }
        }
        ::close(fd);
    }

    std::string store_path_;
    ExpertiseStore store_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
};

/// Blocking line-oriented client for the server above.
class Client {
  public:
    Client(const std::string& host, int port) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
            throw NetError("cannot resolve " + host);
        fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
            ::freeaddrinfo(res);
            if (fd_ >= 0) ::close(fd_);
            fd_ = -1;
            throw NetError("cannot connect to " + host + ":" + std::to_string(port));
        }
        ::freeaddrinfo(res);
    }

    ~Client() {
        if (fd_ >= 0) ::close(fd_);
    }

    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    nlohmann::json request(const nlohmann::json& msg) {
        if (!detail::send_all(fd_, msg.dump() + "\n")) throw NetError("send failed");
        while (true) {
            size_t nl = buf_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                nlohmann::json resp = nlohmann::json::parse(line, nullptr, false);
                if (resp.is_discarded()) throw NetError("malformed reply");
                return resp;
            }
            char chunk[4096];
            ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n <= 0) throw NetError("connection closed");
            buf_.append(chunk, static_cast<size_t>(n));
        }
    }

    void publish(const std::string& user, const std::map<std::string, double>& terms) {
        nlohmann::json jt = nlohmann::json::object();
        for (const auto& [t, w] : terms) jt[t] = w;
        auto resp = request({{"type", "publish"}, {"user", user}, {"terms", jt}});
        if (resp.value("type", "") != "ack")
            throw NetError("publish rejected: " + resp.value("msg", "unknown error"));
    }

    ExpertAnswer query_experts(const std::vector<std::string>& terms) {
        auto resp = request({{"type", "experts"}, {"terms", terms}});
        if (resp.value("type", "") != "answer")
            throw NetError("experts query failed: " + resp.value("msg", "unknown error"));
        ExpertAnswer ans;
        for (const auto& [t, list] : resp.at("per_term").items()) {
            auto& users = ans.per_term[t];
            for (const auto& entry : list)
                users.emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<double>());
        }
        return ans;
    }

  private:
    int fd_ = -1;
    std::string buf_;
};

/// "host:port" / ":port" / "port" forms.
inline std::pair<std::string, int> parse_address(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos) return {"127.0.0.1", std::stoi(addr)};
    std::string host = addr.substr(0, colon);
    if (host.empty()) host = "127.0.0.1";
    return {host, std::stoi(addr.substr(colon + 1))};
}

struct Recommendation {
    std::string user;
    double combined_weight = 0.0;
};

/// Network users with positive weight on every query term, minus the local
/// contact list, ordered by combined weight.
inline std::vector<Recommendation> recommend(const ExpertAnswer& answer,
                                             const std::vector<std::string>& contacts) {
    std::set<std::string> known(contacts.begin(), contacts.end());
    std::map<std::string, std::pair<size_t, double>> tally;  // user -> (terms hit, sum)
    for (const auto& [t, users] : answer.per_term)
        for (const auto& [u, w] : users) {
            auto& e = tally[u];
            ++e.first;
            e.second += w;
        }
    std::vector<Recommendation> out;
    for (const auto& [u, e] : tally) {
        if (e.first != answer.per_term.size()) continue;  // must cover every term
        if (known.count(u)) continue;
        out.push_back({u, e.second});
    }
    std::sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
        if (a.combined_weight != b.combined_weight) return a.combined_weight > b.combined_weight;
        return a.user < b.user;
    });
    return out;
}

}  // namespace mailrank::netexpert
