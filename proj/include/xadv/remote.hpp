#pragma once

#include <memory>
#include <string>

#include "xadv/models.hpp"

namespace xadv {

// Newline-delimited JSON request/response channel to an adapter process.
// Requests: {"op":"grad","image":<b64 sidecar>,"prompt":...,"target":...}
//           {"op":"generate","image":...,"prompt":...}
//           {"op":"embed_image","image":...} / {"op":"embed_text","text":...}
// Responses carry {"value","gradient"} / {"text"} / {"vector"}, or
// {"error": msg}, which surfaces as an Error naming the adapter.
class AdapterTransport {
public:
    virtual ~AdapterTransport() = default;
    virtual std::string roundtrip(const std::string& request_line) = 0;
};

// Spawns `command` via /bin/sh and speaks the protocol over its stdio.
std::unique_ptr<AdapterTransport> make_stdio_transport(const std::string& command,
                                                       double timeout_s = 30.0);
// Connects to a local TCP endpoint speaking the same protocol.
std::unique_ptr<AdapterTransport> make_tcp_transport(const std::string& host, int port,
                                                     double timeout_s = 30.0);
// endpoint = "stdio:<command>" or "tcp:<host>:<port>".
std::shared_ptr<AdapterTransport> make_transport(const std::string& endpoint,
                                                 double timeout_s = 30.0);

class RemoteSurrogate : public SurrogateModel {
public:
    RemoteSurrogate(std::shared_ptr<AdapterTransport> transport, std::string id);
    std::string id() const override { return id_; }
    ObjectiveGrad objective_and_gradient(const ImageBuffer& image, const std::string& prompt,
                                         const std::string& target) override;

private:
    std::shared_ptr<AdapterTransport> transport_;
    std::string id_;
};

class RemoteVictim : public VictimModel {
public:
    RemoteVictim(std::shared_ptr<AdapterTransport> transport, std::string id,
                 std::string encoder_tag);
    std::string id() const override { return id_; }
    std::string vision_encoder_tag() const override { return encoder_tag_; }
    std::string generate(const ImageBuffer& image, const std::string& prompt) override;

private:
    std::shared_ptr<AdapterTransport> transport_;
    std::string id_;
    std::string encoder_tag_;
};

class RemoteScorer : public EmbeddingScorer {
public:
    RemoteScorer(std::shared_ptr<AdapterTransport> transport, std::string id);
    std::string id() const override { return id_; }
    std::vector<double> embed_image(const ImageBuffer& image) override;
    std::vector<double> embed_text(const std::string& text) override;

private:
    std::shared_ptr<AdapterTransport> transport_;
    std::string id_;
};

}  // namespace xadv
