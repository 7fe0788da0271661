#include "xadv/remote.hpp"

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "xadv/image_io.hpp"

namespace xadv {

namespace {

using nlohmann::json;

// A dead adapter must surface as an Error from write(), not as a fatal
// SIGPIPE; EPIPE is reported through the normal error path instead.
void ignore_sigpipe_once() {
    static const bool done = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

// One request line out, one response line back, over file descriptors.
class FdLineChannel {
public:
    FdLineChannel(int read_fd, int write_fd, double timeout_s)
        : read_fd_(read_fd), write_fd_(write_fd), timeout_ms_(static_cast<int>(timeout_s * 1000)) {
        ignore_sigpipe_once();
    }

    void write_line(const std::string& line) {
        std::string out = line;
        out.push_back('\n');
        std::size_t off = 0;
        while (off < out.size()) {
            const ssize_t n = ::write(write_fd_, out.data() + off, out.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(std::string("adapter write failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() {
        for (;;) {
            const auto nl = buf_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            struct pollfd pfd{read_fd_, POLLIN, 0};
            const int pr = ::poll(&pfd, 1, timeout_ms_);
            if (pr == 0) throw Error("adapter response timed out");
            if (pr < 0) {
                if (errno == EINTR) continue;
                throw Error(std::string("adapter poll failed: ") + std::strerror(errno));
            }
            char chunk[4096];
            const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(std::string("adapter read failed: ") + std::strerror(errno));
            }
            if (n == 0) throw Error("adapter closed the connection");
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int read_fd_;
    int write_fd_;
    int timeout_ms_;
    std::string buf_;
};

class StdioTransport : public AdapterTransport {
public:
    StdioTransport(const std::string& command, double timeout_s) {
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
            throw Error("adapter: pipe() failed");
        pid_ = ::fork();
        if (pid_ < 0) throw Error("adapter: fork() failed");
        if (pid_ == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
        channel_ = std::make_unique<FdLineChannel>(read_fd_, write_fd_, timeout_s);
    }

    ~StdioTransport() override {
        if (write_fd_ >= 0) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        if (pid_ > 0) {
            int status = 0;
            // Closing stdin asks the adapter to exit; reap it, escalating if
            // it lingers.
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(pid_, &status, WNOHANG) != 0) return;
                ::usleep(20000);
            }
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
        }
    }

    std::string roundtrip(const std::string& request_line) override {
        channel_->write_line(request_line);
        return channel_->read_line();
    }

private:
    pid_t pid_ = -1;
    int read_fd_ = -1;
    int write_fd_ = -1;
    std::unique_ptr<FdLineChannel> channel_;
};

class TcpTransport : public AdapterTransport {
public:
    TcpTransport(const std::string& host, int port, double timeout_s) {
        struct addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        struct addrinfo* res = nullptr;
        const std::string service = std::to_string(port);
        const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res);
        if (rc != 0)
            throw Error("adapter: cannot resolve " + host + ": " + gai_strerror(rc));
        int fd = -1;
        for (struct addrinfo* ai = res; ai; ai = ai->ai_next) {
            fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
            ::close(fd);
            fd = -1;
        }
        ::freeaddrinfo(res);
        if (fd < 0)
            throw Error("adapter: cannot connect to " + host + ":" + service);
        fd_ = fd;
        channel_ = std::make_unique<FdLineChannel>(fd_, fd_, timeout_s);
    }

    ~TcpTransport() override {
        if (fd_ >= 0) ::close(fd_);
    }

    std::string roundtrip(const std::string& request_line) override {
        channel_->write_line(request_line);
        return channel_->read_line();
    }

private:
    int fd_ = -1;
    std::unique_ptr<FdLineChannel> channel_;
};

std::string encode_image_b64(const ImageBuffer& image) {
    SidecarData data;
    data.height = static_cast<std::uint32_t>(image.height());
    data.width = static_cast<std::uint32_t>(image.width());
    data.channels = ImageBuffer::kChannels;
    data.values.assign(image.values().begin(), image.values().end());
    const auto bytes = encode_sidecar(data);
    return base64_encode(bytes.data(), bytes.size());
}

json parse_response(const std::string& line, const std::string& id) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error("adapter " + id + ": invalid response JSON: " + e.what());
    }
    if (j.contains("error"))
        throw Error("adapter " + id + ": " + j["error"].get<std::string>());
    return j;
}

}  // namespace

std::unique_ptr<AdapterTransport> make_stdio_transport(const std::string& command,
                                                       double timeout_s) {
    return std::make_unique<StdioTransport>(command, timeout_s);
}

std::unique_ptr<AdapterTransport> make_tcp_transport(const std::string& host, int port,
                                                     double timeout_s) {
    return std::make_unique<TcpTransport>(host, port, timeout_s);
}

std::shared_ptr<AdapterTransport> make_transport(const std::string& endpoint, double timeout_s) {
    if (endpoint.rfind("stdio:", 0) == 0)
        return make_stdio_transport(endpoint.substr(6), timeout_s);
    if (endpoint.rfind("tcp:", 0) == 0) {
        const std::string rest = endpoint.substr(4);
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos)
            throw Error("tcp endpoint must be tcp:<host>:<port>, got " + endpoint);
        const std::string host = rest.substr(0, colon);
        int port = 0;
        try {
            port = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error("tcp endpoint has an invalid port: " + endpoint);
        }
        return make_tcp_transport(host, port, timeout_s);
    }
    throw Error("unknown adapter endpoint (want stdio:<cmd> or tcp:<host>:<port>): " + endpoint);
}

RemoteSurrogate::RemoteSurrogate(std::shared_ptr<AdapterTransport> transport, std::string id)
    : transport_(std::move(transport)), id_(std::move(id)) {}

ObjectiveGrad RemoteSurrogate::objective_and_gradient(const ImageBuffer& image,
                                                      const std::string& prompt,
                                                      const std::string& target) {
    json req = {{"op", "grad"},
                {"image", encode_image_b64(image)},
                {"prompt", prompt},
                {"target", target}};
    const json resp = parse_response(transport_->roundtrip(req.dump()), id_);
    if (!resp.contains("value") || !resp.contains("gradient"))
        throw Error("adapter " + id_ + ": grad response missing value/gradient");

    ObjectiveGrad out;
    out.value = resp["value"].get<double>();
    const auto bytes = base64_decode(resp["gradient"].get<std::string>());
    const SidecarData grad = decode_sidecar(bytes.data(), bytes.size());
    if (grad.height != static_cast<std::uint32_t>(image.height()) ||
        grad.width != static_cast<std::uint32_t>(image.width()) ||
        grad.channels != ImageBuffer::kChannels)
        throw Error("adapter " + id_ + ": gradient shape does not match the image");
    out.gradient.assign(grad.values.begin(), grad.values.end());
    return out;
}

RemoteVictim::RemoteVictim(std::shared_ptr<AdapterTransport> transport, std::string id,
                           std::string encoder_tag)
    : transport_(std::move(transport)), id_(std::move(id)), encoder_tag_(std::move(encoder_tag)) {}

std::string RemoteVictim::generate(const ImageBuffer& image, const std::string& prompt) {
    json req = {{"op", "generate"}, {"image", encode_image_b64(image)}, {"prompt", prompt}};
    const json resp = parse_response(transport_->roundtrip(req.dump()), id_);
    if (!resp.contains("text")) throw Error("adapter " + id_ + ": generate response missing text");
    return resp["text"].get<std::string>();
}

RemoteScorer::RemoteScorer(std::shared_ptr<AdapterTransport> transport, std::string id)
    : transport_(std::move(transport)), id_(std::move(id)) {}

std::vector<double> RemoteScorer::embed_image(const ImageBuffer& image) {
    json req = {{"op", "embed_image"}, {"image", encode_image_b64(image)}};
    const json resp = parse_response(transport_->roundtrip(req.dump()), id_);
    if (!resp.contains("vector"))
        throw Error("adapter " + id_ + ": embed_image response missing vector");
    return resp["vector"].get<std::vector<double>>();
}

std::vector<double> RemoteScorer::embed_text(const std::string& text) {
    json req = {{"op", "embed_text"}, {"text", text}};
    const json resp = parse_response(transport_->roundtrip(req.dump()), id_);
    if (!resp.contains("vector"))
        throw Error("adapter " + id_ + ": embed_text response missing vector");
    return resp["vector"].get<std::vector<double>>();
}

}  // namespace xadv
