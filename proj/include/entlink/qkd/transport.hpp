#pragma once

// Ordered, reliable duplex transports between the two protocol parties.

#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <vector>

#include "entlink/qkd/messages.hpp"

namespace entlink::qkd {

/// One endpoint of a duplex channel.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send(const ProtocolMessage& message) = 0;
    /// Blocks until a message arrives. Throws std::runtime_error if the peer
    /// is gone or, for the lock-step channel, nothing is pending.
    virtual ProtocolMessage receive() = 0;
};

/// A party that only ever reacts to incoming messages.
class Responder {
public:
    virtual ~Responder() = default;
    virtual std::vector<ProtocolMessage> handle(const ProtocolMessage& message) = 0;
    [[nodiscard]] virtual bool finished() const = 0;
};

/// Runs the responder against a channel until it reports finished.
void serve(Responder& responder, Channel& channel);

/// Same thread: each send runs the responder immediately and queues its
/// replies for receive().
class LockstepChannel final : public Channel {
public:
    explicit LockstepChannel(Responder& peer) : peer_(peer) {}
    void send(const ProtocolMessage& message) override;
    ProtocolMessage receive() override;

private:
    Responder& peer_;
    std::deque<ProtocolMessage> inbox_;
};

/// Blocking FIFO shared by two threads.
class MessageQueue {
public:
    void push(ProtocolMessage message);
    ProtocolMessage pop();
    void close();

private:
    std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<ProtocolMessage> items_;
    bool closed_ = false;
};

class QueueChannel final : public Channel {
public:
    QueueChannel(MessageQueue& inbox, MessageQueue& outbox) : inbox_(inbox), outbox_(outbox) {}
    void send(const ProtocolMessage& message) override { outbox_.push(message); }
    ProtocolMessage receive() override { return inbox_.pop(); }

private:
    MessageQueue& inbox_;
    MessageQueue& outbox_;
};

/// Length-prefixed frames over a stream socket or pipe pair. Does not own
/// the descriptors.
class FdChannel final : public Channel {
public:
    FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
    explicit FdChannel(int fd) : FdChannel(fd, fd) {}
    void send(const ProtocolMessage& message) override;
    ProtocolMessage receive() override;

private:
    int read_fd_;
    int write_fd_;
};

void write_all(int fd, std::string_view data);
/// Reads exactly n bytes; throws std::runtime_error on EOF or error.
std::string read_exact(int fd, std::size_t n);

/// Records every frame passing this endpoint as a transcript line.
class RecordingChannel final : public Channel {
public:
    RecordingChannel(Channel& inner, std::string local, std::string remote)
        : inner_(inner), local_(std::move(local)), remote_(std::move(remote)) {}
    void send(const ProtocolMessage& message) override;
    ProtocolMessage receive() override;
    [[nodiscard]] const std::vector<nlohmann::json>& transcript() const { return lines_; }
    [[nodiscard]] const std::vector<ProtocolMessage>& messages() const { return messages_; }

private:
    void record(const ProtocolMessage& message, const std::string& from, const std::string& to);

    Channel& inner_;
    std::string local_;
    std::string remote_;
    std::vector<nlohmann::json> lines_;
    std::vector<ProtocolMessage> messages_;
};

/// Lets a test rewrite incoming messages before the local party sees them.
class TamperingChannel final : public Channel {
public:
    TamperingChannel(Channel& inner, std::function<void(ProtocolMessage&)> edit)
        : inner_(inner), edit_(std::move(edit)) {}
    void send(const ProtocolMessage& message) override { inner_.send(message); }
    ProtocolMessage receive() override;

private:
    Channel& inner_;
    std::function<void(ProtocolMessage&)> edit_;
};

}  // namespace entlink::qkd
