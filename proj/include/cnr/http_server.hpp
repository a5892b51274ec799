#pragma once

// HTTP front end for a SessionManager.
//
//   GET    /maps                           registered map names
//   POST   /sessions                       {"map", ...session options} -> {"id"}
//   GET    /sessions/{id}                  latest state message
//   POST   /sessions/{id}/pause | resume | tick
//   POST   /sessions/{id}/answer           {"question_id", "answer": "yes" | "no"}
//   POST   /sessions/{id}/statement        {"polarity", "anchor", "relation"}
//   GET    /sessions/{id}/log              episode log, one JSON document per line
//   GET    /sessions/{id}/stream?from=k    server-sent events, one state message per tick
//   DELETE /sessions/{id}
//
// Errors come back as {"error": text} with 400 (bad request), 404 (unknown
// map or session) or 409 (input rejected by the episode).

#include "cnr/service.hpp"

#include <memory>
#include <string>

namespace cnr {

class HttpServer {
public:
    explicit HttpServer(SessionManager& sessions);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to the port (0 picks a free one) and returns it, or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind.
    bool serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace cnr
