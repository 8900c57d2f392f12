#include "entlink/qkd/transport.hpp"

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <unistd.h>

namespace entlink::qkd {

void serve(Responder& responder, Channel& channel) {
    while (!responder.finished()) {
        const ProtocolMessage incoming = channel.receive();
        for (const auto& reply : responder.handle(incoming)) {
            channel.send(reply);
        }
    }
}

void LockstepChannel::send(const ProtocolMessage& message) {
    for (auto& reply : peer_.handle(message)) {
        inbox_.push_back(std::move(reply));
    }
}

ProtocolMessage LockstepChannel::receive() {
    if (inbox_.empty()) {
        throw std::runtime_error("lock-step channel: no message pending");
    }
    ProtocolMessage m = std::move(inbox_.front());
    inbox_.pop_front();
    return m;
}

void MessageQueue::push(ProtocolMessage message) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) {
            throw std::runtime_error("message queue closed");
        }
        items_.push_back(std::move(message));
    }
    ready_.notify_one();
}

ProtocolMessage MessageQueue::pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) {
        throw std::runtime_error("message queue closed");
    }
    ProtocolMessage m = std::move(items_.front());
    items_.pop_front();
    return m;
}

void MessageQueue::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    ready_.notify_all();
}

void write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error(std::string("channel write failed: ") + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::string read_exact(int fd, std::size_t n) {
    std::string out(n, '\0');
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::read(fd, out.data() + got, n - got);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error(std::string("channel read failed: ") + std::strerror(errno));
        }
        if (r == 0) {
            throw std::runtime_error("channel closed by peer");
        }
        got += static_cast<std::size_t>(r);
    }
    return out;
}

void FdChannel::send(const ProtocolMessage& message) { write_all(write_fd_, encode_frame(message)); }

ProtocolMessage FdChannel::receive() {
    std::string frame = read_exact(read_fd_, 4);
    std::uint32_t len = 0;
    for (char c : frame) len = (len << 8) | static_cast<unsigned char>(c);
    frame += read_exact(read_fd_, len);
    return decode_frame(frame);
}

void RecordingChannel::record(const ProtocolMessage& message, const std::string& from,
                              const std::string& to) {
    nlohmann::json line = to_json(message);
    line["from"] = from;
    line["to"] = to;
    lines_.push_back(std::move(line));
    messages_.push_back(message);
}

void RecordingChannel::send(const ProtocolMessage& message) {
    record(message, local_, remote_);
    inner_.send(message);
}

ProtocolMessage RecordingChannel::receive() {
    ProtocolMessage m = inner_.receive();
    record(m, remote_, local_);
    return m;
}

ProtocolMessage TamperingChannel::receive() {
    ProtocolMessage m = inner_.receive();
    edit_(m);
    return m;
}

}  // namespace entlink::qkd
