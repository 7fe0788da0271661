// Reference adapter process for the out-of-process model protocol, backed by
// the bundled toy stack. Speaks newline-delimited JSON: requests carry
// {"op": "grad" | "generate" | "embed_image" | "embed_text", ...} with images
// as base64 of the raw float sidecar format; responses carry
// {"value", "gradient"} / {"text"} / {"vector"}, or {"error": message}.
//
// By default the protocol runs over stdin/stdout. With --listen PORT the
// adapter serves TCP connections on 127.0.0.1 instead (one at a time),
// printing "listening on <port>" to stdout once the socket is bound so a
// parent process can discover an ephemeral port (--listen 0).

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "xadv/image_io.hpp"
#include "xadv/toy_models.hpp"

namespace {

using nlohmann::json;
using namespace xadv;

ImageBuffer decode_image(const json& request, const char* field) {
    if (!request.contains(field))
        throw Error(std::string("toy adapter: request is missing '") + field + "'");
    const auto bytes = base64_decode(request.at(field).get<std::string>());
    const SidecarData data = decode_sidecar(bytes.data(), bytes.size());
    if (data.channels != static_cast<std::uint32_t>(ImageBuffer::kChannels))
        throw Error("toy adapter: image must have " + std::to_string(ImageBuffer::kChannels) +
                    " channels, got " + std::to_string(data.channels));
    return ImageBuffer(static_cast<int>(data.height), static_cast<int>(data.width),
                       std::vector<float>(data.values));
}

std::string require_string(const json& request, const char* field) {
    if (!request.contains(field))
        throw Error(std::string("toy adapter: request is missing '") + field + "'");
    return request.at(field).get<std::string>();
}

class ToyAdapter {
public:
    ToyAdapter(std::uint64_t seed, const std::string& victim_kind) : stack_(make_toy_stack(seed)) {
        if (victim_kind == "shared")
            victim_ = stack_.victim_shared;
        else if (victim_kind == "independent")
            victim_ = stack_.victim_independent;
        else
            throw Error("toy adapter: unknown victim '" + victim_kind +
                        "' (want shared or independent)");
    }

    // One request line in, one response line out; never throws.
    std::string handle_line(const std::string& line) {
        json response;
        try {
            const json request = json::parse(line);
            const std::string op = require_string(request, "op");
            if (op == "grad") {
                const ImageBuffer image = decode_image(request, "image");
                const ObjectiveGrad out = stack_.surrogate->objective_and_gradient(
                    image, require_string(request, "prompt"), require_string(request, "target"));
                SidecarData grad;
                grad.height = static_cast<std::uint32_t>(image.height());
                grad.width = static_cast<std::uint32_t>(image.width());
                grad.channels = ImageBuffer::kChannels;
                grad.values.assign(out.gradient.begin(), out.gradient.end());
                const auto bytes = encode_sidecar(grad);
                response["value"] = out.value;
                response["gradient"] = base64_encode(bytes.data(), bytes.size());
            } else if (op == "generate") {
                const ImageBuffer image = decode_image(request, "image");
                response["text"] = victim_->generate(image, require_string(request, "prompt"));
            } else if (op == "embed_image") {
                response["vector"] = stack_.scorer->embed_image(decode_image(request, "image"));
            } else if (op == "embed_text") {
                response["vector"] = stack_.scorer->embed_text(require_string(request, "text"));
            } else {
                throw Error("toy adapter: unknown op '" + op + "'");
            }
        } catch (const json::exception& e) {
            response = json{{"error", std::string("toy adapter: bad request: ") + e.what()}};
        } catch (const std::exception& e) {
            response = json{{"error", e.what()}};
        }
        return response.dump();
    }

private:
    ToyStack stack_;
    std::shared_ptr<ToyVictim> victim_;
};

int serve_stdio(ToyAdapter& adapter) {
    std::string line;
    while (std::getline(std::cin, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::cout << adapter.handle_line(line) << '\n' << std::flush;
    }
    return 0;
}

// Serves connections sequentially; each connection is a stream of request
// lines answered in order until the peer closes it.
int serve_tcp(ToyAdapter& adapter, int port) {
    const int server = ::socket(AF_INET, SOCK_STREAM, 0);
    if (server < 0) {
        std::cerr << "toy adapter: socket() failed: " << std::strerror(errno) << '\n';
        return 1;
    }
    const int one = 1;
    ::setsockopt(server, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(server, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(server, 4) != 0) {
        std::cerr << "toy adapter: cannot listen on port " << port << ": "
                  << std::strerror(errno) << '\n';
        ::close(server);
        return 1;
    }
    socklen_t addr_len = sizeof addr;
    ::getsockname(server, reinterpret_cast<sockaddr*>(&addr), &addr_len);
    std::cout << "listening on " << ntohs(addr.sin_port) << '\n' << std::flush;

    for (;;) {
        const int conn = ::accept(server, nullptr, nullptr);
        if (conn < 0) {
            if (errno == EINTR) continue;
            std::cerr << "toy adapter: accept() failed: " << std::strerror(errno) << '\n';
            ::close(server);
            return 1;
        }
        std::string buf;
        char chunk[4096];
        for (;;) {
            const auto nl = buf.find('\n');
            if (nl != std::string::npos) {
                std::string line = buf.substr(0, nl);
                buf.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) continue;
                const std::string out = adapter.handle_line(line) + "\n";
                std::size_t off = 0;
                bool write_failed = false;
                while (off < out.size()) {
                    const ssize_t n = ::send(conn, out.data() + off, out.size() - off, 0);
                    if (n < 0) {
                        if (errno == EINTR) continue;
                        write_failed = true;
                        break;
                    }
                    off += static_cast<std::size_t>(n);
                }
                if (write_failed) break;
                continue;
            }
            const ssize_t n = ::recv(conn, chunk, sizeof chunk, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            buf.append(chunk, static_cast<std::size_t>(n));
        }
        ::close(conn);
    }
}

int usage(const char* argv0) {
    std::cerr << "usage: " << argv0
              << " [--seed N] [--victim shared|independent] [--listen PORT]\n"
                 "Serves the newline-delimited JSON model protocol over stdio (default)\n"
                 "or a 127.0.0.1 TCP port (--listen; 0 picks an ephemeral port).\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    std::uint64_t seed = kToyDefaultSeed;
    std::string victim = "shared";
    int listen_port = -1;

    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        const auto next = [&]() -> const char* {
            if (i + 1 >= argc) {
                std::cerr << "toy adapter: " << arg << " needs a value\n";
                std::exit(2);
            }
            return argv[++i];
        };
        try {
            if (arg == "--seed")
                seed = std::stoull(next());
            else if (arg == "--victim")
                victim = next();
            else if (arg == "--listen")
                listen_port = std::stoi(next());
            else if (arg == "--help" || arg == "-h")
                return usage(argv[0]);
            else {
                std::cerr << "toy adapter: unknown argument " << arg << '\n';
                return 2;
            }
        } catch (const std::exception&) {
            std::cerr << "toy adapter: invalid value for " << arg << '\n';
            return 2;
        }
    }

    try {
        ToyAdapter adapter(seed, victim);
        if (listen_port >= 0) return serve_tcp(adapter, listen_port);
        return serve_stdio(adapter);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
