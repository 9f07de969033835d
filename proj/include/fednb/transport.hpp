#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fednb/error.hpp"
#include "fednb/protocol.hpp"

namespace fednb {

// Deterministic in-process carrier. Delivery order is pinned: next_delivery()
// walks nodes round-robin in registration order and hands out the oldest
// pending message of the first non-empty inbox; messages between a fixed pair
// arrive in send order. Frames are delivered byte-identical.
class InProcessNetwork {
public:
    struct Delivery {
        std::string from;
        std::string to;
        std::vector<std::uint8_t> frame;
    };

    void register_node(const std::string& node_id);
    void ensure_node(const std::string& node_id);
    bool has_node(const std::string& node_id) const;

    // Throws Unreachable for an unknown destination, FrameTooLarge above the cap.
    void send(const std::string& from, const std::string& to, std::span<const std::uint8_t> frame);

    std::optional<Delivery> next_delivery();

private:
    struct Node {
        std::string id;
        std::deque<Delivery> inbox;
    };

    Node* find(const std::string& node_id);
    const Node* find(const std::string& node_id) const;

    std::vector<Node> nodes_;
    std::size_t cursor_ = 0;
};

// TCP deployment of the same protocol: the coordinator listens, every party
// connects, frames cross the wire exactly as the in-process carrier would
// deliver them. timeout_ms arguments bound each phase; <= 0 waits forever
// (the in-process carrier never times out).

class TcpCoordinatorServer {
public:
    // Binds and listens immediately (BindError on failure).
    TcpCoordinatorServer(const std::string& host, std::uint16_t port);
    ~TcpCoordinatorServer();
    TcpCoordinatorServer(const TcpCoordinatorServer&) = delete;
    TcpCoordinatorServer& operator=(const TcpCoordinatorServer&) = delete;

    std::uint16_t port() const { return port_; }

    // Accepts `expected_parties` connections, then drives the coordinator to
    // completion. Throws SessionError/TimeoutError on failure.
    GaussianNBModel run(Coordinator& coordinator, std::size_t expected_parties, int timeout_ms,
                        SessionTrace* trace = nullptr);

private:
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
};

// Connects to the coordinator and drives the party until it holds the model.
GaussianNBModel run_tcp_party(Party& party, const std::string& host, std::uint16_t port,
                              int timeout_ms = 30000);

}  // namespace fednb
