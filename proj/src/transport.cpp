#include "fednb/transport.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "fednb/message.hpp"

namespace fednb {

// --- InProcessNetwork ---

void InProcessNetwork::register_node(const std::string& node_id) {
    if (has_node(node_id)) throw Error("node '" + node_id + "' already registered");
    nodes_.push_back({node_id, {}});
}

void InProcessNetwork::ensure_node(const std::string& node_id) {
    if (!has_node(node_id)) nodes_.push_back({node_id, {}});
}

bool InProcessNetwork::has_node(const std::string& node_id) const { return find(node_id) != nullptr; }

InProcessNetwork::Node* InProcessNetwork::find(const std::string& node_id) {
    for (auto& node : nodes_)
        if (node.id == node_id) return &node;
    return nullptr;
}

const InProcessNetwork::Node* InProcessNetwork::find(const std::string& node_id) const {
    for (const auto& node : nodes_)
        if (node.id == node_id) return &node;
    return nullptr;
}

void InProcessNetwork::send(const std::string& from, const std::string& to,
                            std::span<const std::uint8_t> frame) {
    if (frame.size() > kMaxFrameBytes + 4)
        throw FrameTooLarge("frame of " + std::to_string(frame.size()) + " bytes");
    Node* destination = find(to);
    if (!destination) throw Unreachable("no node '" + to + "'");
    destination->inbox.push_back({from, to, {frame.begin(), frame.end()}});
}

std::optional<InProcessNetwork::Delivery> InProcessNetwork::next_delivery() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const std::size_t idx = (cursor_ + i) % nodes_.size();
        if (!nodes_[idx].inbox.empty()) {
            Delivery delivery = std::move(nodes_[idx].inbox.front());
            nodes_[idx].inbox.pop_front();
            cursor_ = (idx + 1) % nodes_.size();
            return delivery;
        }
    }
    return std::nullopt;
}

// --- TCP helpers ---

namespace {

void close_quietly(int fd) {
    if (fd >= 0) ::close(fd);
}

sockaddr_in make_address(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw ConnectError("bad IPv4 address '" + host + "'");
    return addr;
}

void send_all(int fd, std::span<const std::uint8_t> bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ConnectError(std::string("send: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

// One connected peer with its deframer.
struct Connection {
    int fd = -1;
    FrameDecoder decoder;
    bool open = true;
};

}  // namespace

// --- TcpCoordinatorServer ---

TcpCoordinatorServer::TcpCoordinatorServer(const std::string& host, std::uint16_t port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw BindError(std::string("socket: ") + std::strerror(errno));
    const int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr = make_address(host, port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        close_quietly(listen_fd_);
        throw BindError("bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    if (::listen(listen_fd_, 16) != 0) {
        close_quietly(listen_fd_);
        throw BindError(std::string("listen: ") + std::strerror(errno));
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

TcpCoordinatorServer::~TcpCoordinatorServer() { close_quietly(listen_fd_); }

GaussianNBModel TcpCoordinatorServer::run(Coordinator& coordinator, std::size_t expected_parties,
                                          int timeout_ms, SessionTrace* trace) {
    SessionTrace local_trace;
    if (!trace) trace = &local_trace;

    std::vector<Connection> connections;
    auto close_all = [&] {
        for (auto& c : connections) close_quietly(c.fd);
        connections.clear();
    };

    try {
        while (connections.size() < expected_parties) {
            pollfd pfd{listen_fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, timeout_ms > 0 ? timeout_ms : -1);
            if (rc == 0) throw TimeoutError("no party connected within the deadline");
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw BindError(std::string("poll: ") + std::strerror(errno));
            }
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) throw BindError(std::string("accept: ") + std::strerror(errno));
            connections.push_back({fd, {}, true});
        }

        // type-of-service: events are serialized into the single coordinator
        // machine in arrival order; per-connection byte order is TCP's.
        auto dispatch = [&](const std::vector<Outgoing>& outs) {
            for (const auto& out : outs) {
                const auto frame = encode_frame(out.msg);
                trace->emissions.push_back({coordinator_node_id(), frame});
                for (auto& connection : connections) {
                    if (!connection.open) continue;
                    trace->deliveries.push_back({coordinator_node_id(), "peer", frame});
                    try {
                        send_all(connection.fd, frame);
                    } catch (const ConnectError&) {
                        // a peer that hung up just stops receiving
                        connection.open = false;
                    }
                }
            }
        };
        // Site-addressed sends go to every live connection too: parties drop
        // foreign-session or out-of-roster traffic themselves, and the only
        // addressed messages the coordinator produces are broadcasts anyway.

        dispatch(coordinator.step(StartTrigger{}));

        std::vector<std::uint8_t> buffer(64 * 1024);
        while (coordinator.phase() != CoordinatorPhase::Done &&
               coordinator.phase() != CoordinatorPhase::Aborted) {
            std::vector<pollfd> pfds;
            for (const auto& connection : connections)
                if (connection.open) pfds.push_back({connection.fd, POLLIN, 0});
            if (pfds.empty()) throw TimeoutError("all connections closed before completion");

            const int rc = ::poll(pfds.data(), pfds.size(), timeout_ms > 0 ? timeout_ms : -1);
            if (rc == 0) {
                dispatch(coordinator.step(TimeoutEvent{}));
                break;
            }
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw BindError(std::string("poll: ") + std::strerror(errno));
            }

            std::size_t pfd_idx = 0;
            for (auto& connection : connections) {
                if (!connection.open) continue;
                const pollfd& pfd = pfds[pfd_idx++];
                if (!(pfd.revents & (POLLIN | POLLHUP | POLLERR))) continue;

                const ssize_t n = ::recv(connection.fd, buffer.data(), buffer.size(), 0);
                if (n < 0) {
                    if (errno == EINTR) continue;
                    connection.open = false;
                    continue;
                }
                if (n == 0) {
                    if (connection.decoder.pending_bytes() > 0)
                        throw FramingError("peer stream ended mid-frame");
                    connection.open = false;
                    continue;
                }
                connection.decoder.feed(std::span(buffer.data(), static_cast<std::size_t>(n)));
                while (auto payload = connection.decoder.next_payload()) {
                    const auto frame = wrap_frame(*payload);
                    trace->deliveries.push_back({"peer", coordinator_node_id(), frame});
                    dispatch(coordinator.step(MsgEvent{decode_frame(frame)}));
                    if (coordinator.phase() == CoordinatorPhase::Done ||
                        coordinator.phase() == CoordinatorPhase::Aborted)
                        break;
                }
                if (coordinator.phase() == CoordinatorPhase::Done ||
                    coordinator.phase() == CoordinatorPhase::Aborted)
                    break;
            }
        }
    } catch (...) {
        close_all();
        throw;
    }
    close_all();

    if (coordinator.phase() != CoordinatorPhase::Done)
        throw SessionError("session aborted: " + coordinator.abort_reason(), *trace);
    return *coordinator.model();
}

// --- party client ---

GaussianNBModel run_tcp_party(Party& party, const std::string& host, std::uint16_t port,
                              int timeout_ms) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConnectError(std::string("socket: ") + std::strerror(errno));
    sockaddr_in addr = make_address(host, port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        close_quietly(fd);
        throw ConnectError("connect " + host + ":" + std::to_string(port) + ": " +
                           std::strerror(errno));
    }

    try {
        FrameDecoder decoder;
        std::vector<std::uint8_t> buffer(64 * 1024);
        while (party.phase() != PartyPhase::HasModel && party.phase() != PartyPhase::Aborted) {
            pollfd pfd{fd, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, timeout_ms > 0 ? timeout_ms : -1);
            if (rc == 0) throw TimeoutError("no coordinator traffic within the deadline");
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw ConnectError(std::string("poll: ") + std::strerror(errno));
            }
            const ssize_t n = ::recv(fd, buffer.data(), buffer.size(), 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ConnectError(std::string("recv: ") + std::strerror(errno));
            }
            if (n == 0) {
                if (decoder.pending_bytes() > 0) throw FramingError("stream ended mid-frame");
                throw ConnectError("coordinator closed the connection");
            }
            decoder.feed(std::span(buffer.data(), static_cast<std::size_t>(n)));
            while (auto payload = decoder.next_payload()) {
                for (const auto& out : party.step(MsgEvent{decode_frame(wrap_frame(*payload))}))
                    send_all(fd, encode_frame(out.msg));
            }
        }
    } catch (...) {
        close_quietly(fd);
        throw;
    }
    close_quietly(fd);

    if (party.phase() != PartyPhase::HasModel)
        throw SessionError("party aborted: " + party.abort_reason(), {});
    return *party.model();
}

}  // namespace fednb
