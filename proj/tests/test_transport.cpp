#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "fednb/transport.hpp"
#include "testutil.hpp"

using namespace fednb;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

SessionConfig small_session(std::uint32_t min_sites, const std::string& scheme = kNullSchemeId) {
    SessionConfig config;
    config.session_id = "transport-test";
    config.min_sites = min_sites;
    config.split_plan.seed = 4;
    config.split_plan.repeats = 2;
    config.noise.mode = VarianceMode::ratio(0.25);
    config.noise.seed = 12;
    config.scheme_id = scheme;
    return config;
}

}  // namespace

TEST_CASE("in-process delivery is the identity and per-pair FIFO") {
    InProcessNetwork network;
    network.register_node("a");
    network.register_node("b");

    network.send("a", "b", bytes_of("first"));
    network.send("a", "b", bytes_of("second"));

    auto d1 = network.next_delivery();
    REQUIRE(d1.has_value());
    CHECK(d1->from == "a");
    CHECK(d1->to == "b");
    CHECK(d1->frame == bytes_of("first"));
    auto d2 = network.next_delivery();
    REQUIRE(d2.has_value());
    CHECK(d2->frame == bytes_of("second"));
    CHECK(!network.next_delivery().has_value());
}

TEST_CASE("unknown destinations are unreachable") {
    InProcessNetwork network;
    network.register_node("a");
    CHECK_THROWS_AS(network.send("a", "ghost", bytes_of("x")), Unreachable);
    CHECK_THROWS_AS(network.register_node("a"), Error);
}

TEST_CASE("round-robin order interleaves nodes deterministically") {
    InProcessNetwork network;
    for (const auto* node : {"a", "b", "c"}) network.register_node(node);
    // load b with two, c with one, a with one
    network.send("x", "b", bytes_of("b1"));
    network.send("x", "b", bytes_of("b2"));
    network.send("x", "c", bytes_of("c1"));
    network.send("x", "a", bytes_of("a1"));

    std::vector<std::string> order;
    while (auto d = network.next_delivery()) order.push_back(std::string(d->frame.begin(), d->frame.end()));
    CHECK(order == std::vector<std::string>{"a1", "b1", "c1", "b2"});
}

TEST_CASE("two identical in-process sessions produce identical traces") {
    const Table table = testutil::make_blob_table(70, 30, 4);
    const auto fragments = partition_vertical(table, 2);
    PartyOptions options;
    options.scheme_id = kNullSchemeId;

    auto run_once = [&] {
        std::vector<Party> parties;
        for (const auto& fragment : fragments) parties.emplace_back(fragment, options);
        Coordinator coordinator(small_session(2));
        InProcessNetwork network;
        SessionTrace trace;
        run_session(coordinator, parties, network, &trace);
        return trace;
    };

    const auto t1 = run_once();
    const auto t2 = run_once();
    REQUIRE(t1.deliveries.size() == t2.deliveries.size());
    for (std::size_t i = 0; i < t1.deliveries.size(); ++i) {
        CHECK(t1.deliveries[i].from == t2.deliveries[i].from);
        CHECK(t1.deliveries[i].to == t2.deliveries[i].to);
        CHECK(t1.deliveries[i].frame == t2.deliveries[i].frame);
    }
}

TEST_CASE("tcp loopback session matches the in-process model byte for byte") {
    const Table table = testutil::make_blob_table(71, 36, 4);
    const auto fragments = partition_vertical(table, 2);
    PartyOptions options;
    options.scheme_id = kNullSchemeId;

    // in-process
    std::vector<Party> in_proc_parties;
    for (const auto& fragment : fragments) in_proc_parties.emplace_back(fragment, options);
    Coordinator in_proc_coordinator(small_session(2));
    InProcessNetwork network;
    const auto in_proc_model = run_session(in_proc_coordinator, in_proc_parties, network);

    // tcp loopback
    std::vector<Party> tcp_parties;
    for (const auto& fragment : fragments) tcp_parties.emplace_back(fragment, options);
    Coordinator tcp_coordinator(small_session(2));
    TcpCoordinatorServer server("127.0.0.1", 0);
    std::vector<std::thread> threads;
    for (auto& party : tcp_parties)
        threads.emplace_back([&party, port = server.port()] {
            run_tcp_party(party, "127.0.0.1", port, 10000);
        });
    const auto tcp_model = server.run(tcp_coordinator, tcp_parties.size(), 10000);
    for (auto& t : threads) t.join();

    CHECK(tcp_model.to_canonical_json() == in_proc_model.to_canonical_json());
    for (const auto& party : tcp_parties)
        CHECK(party.model()->to_canonical_json() == in_proc_model.to_canonical_json());
}

TEST_CASE("connecting to a dead port raises ConnectError") {
    const Table table = testutil::make_blob_table(72, 10, 2);
    const auto fragments = partition_vertical(table, 1);
    PartyOptions options;
    options.scheme_id = kNullSchemeId;
    Party party(fragments[0], options);
    CHECK_THROWS_AS(run_tcp_party(party, "127.0.0.1", 1, 500), ConnectError);
}

TEST_CASE("coordinator times out when no party connects") {
    Coordinator coordinator(small_session(1));
    TcpCoordinatorServer server("127.0.0.1", 0);
    CHECK_THROWS_AS(server.run(coordinator, 1, 200), TimeoutError);
}

TEST_CASE("a stream truncated mid-frame raises FramingError") {
    // fake coordinator: accept one client, send half a frame, close
    const int listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(listen_fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = 0;
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::listen(listen_fd, 1) == 0);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
    const std::uint16_t port = ntohs(addr.sin_port);

    std::thread fake([
        listen_fd] {
        const int fd = ::accept(listen_fd, nullptr, nullptr);
        const auto frame = encode_frame(InitMsg{"s", 1, 1});
        ::send(fd, frame.data(), frame.size() / 2, MSG_NOSIGNAL);  // half a frame
        ::close(fd);
    });

    const Table table = testutil::make_blob_table(73, 10, 2);
    const auto fragments = partition_vertical(table, 1);
    PartyOptions options;
    options.scheme_id = kNullSchemeId;
    Party party(fragments[0], options);
    CHECK_THROWS_AS(run_tcp_party(party, "127.0.0.1", port, 2000), FramingError);
    fake.join();
    ::close(listen_fd);
}

TEST_CASE("oversize frames are refused before they are sent") {
    InProcessNetwork network;
    network.register_node("a");
    network.register_node("b");
    std::vector<std::uint8_t> huge(kMaxFrameBytes + 5, 0);
    CHECK_THROWS_AS(network.send("a", "b", huge), FrameTooLarge);
}
