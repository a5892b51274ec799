#include "cnr/http_server.hpp"

#include <httplib.h>

#include <atomic>

namespace cnr {

namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& what) { reply(res, status, {{"error", what}}); }

json body_of(const httplib::Request& req)
{
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
}

} // namespace

struct HttpServer::Impl {
    SessionManager& sessions;
    httplib::Server server;
    std::atomic<bool> stopping{false};

    explicit Impl(SessionManager& s) : sessions(s) { routes(); }

    // Runs a handler, mapping exceptions onto status codes.
    template <typename F>
    auto guarded(F f)
    {
        return [this, f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const UnknownSession& e) {
                error(res, 404, e.what());
            } catch (const InputRejected& e) {
                error(res, 409, e.what());
            } catch (const json::exception& e) {
                error(res, 400, std::string("bad JSON: ") + e.what());
            } catch (const std::invalid_argument& e) {
                error(res, 400, e.what());
            } catch (const std::exception& e) {
                error(res, 500, e.what());
            }
        };
    }

    std::shared_ptr<Session> session_of(const httplib::Request& req) { return sessions.session(req.matches[1]); }

    void routes()
    {
        server.Get("/maps", guarded([this](const httplib::Request&, httplib::Response& res) {
                       reply(res, 200, {{"maps", sessions.map_names()}});
                   }));

        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const json j = body_of(req);
                        if (!j.contains("map")) throw std::invalid_argument("request needs a \"map\"");
                        const std::string map = j.at("map").get<std::string>();
                        const auto names = sessions.map_names();
                        if (std::find(names.begin(), names.end(), map) == names.end())
                            return error(res, 404, "unknown map '" + map + "'");
                        const std::string id = sessions.create_session(map, session_options_from_json(j));
                        reply(res, 201, {{"id", id}, {"state", sessions.session(id)->snapshot()}});
                    }));

        server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       reply(res, 200, session_of(req)->snapshot());
                   }));

        server.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                          sessions.close_session(req.matches[1]);
                          reply(res, 200, {{"closed", std::string(req.matches[1])}});
                      }));

        server.Post(R"(/sessions/([^/]+)/(pause|resume|tick))",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto s = session_of(req);
                        const std::string what = req.matches[2];
                        if (what == "pause") s->pause();
                        else if (what == "resume") s->resume();
                        else s->tick();
                        reply(res, 200, s->snapshot());
                    }));

        server.Post(R"(/sessions/([^/]+)/answer)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto s = session_of(req);
                        const json j = body_of(req);
                        const int id = j.at("question_id").get<int>();
                        s->submit_answer(id, answer_from_string(j.at("answer").get<std::string>()));
                        reply(res, 202, {{"accepted", true}, {"question_id", id}});
                    }));

        server.Post(R"(/sessions/([^/]+)/statement)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto s = session_of(req);
                        const SemanticStatement st = statement_from_json(body_of(req));
                        s->submit_statement(st);
                        reply(res, 202, {{"accepted", true}, {"statement", statement_to_json(st)}});
                    }));

        server.Get(R"(/sessions/([^/]+)/log)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       res.set_content(session_of(req)->log_jsonl(), "application/x-ndjson");
                   }));

        server.Get(R"(/sessions/([^/]+)/stream)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto s = session_of(req);
                       std::size_t from = 0;
                       if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
                       res.set_header("Cache-Control", "no-cache");
                       res.set_chunked_content_provider(
                           "text/event-stream", [this, s, next = from](std::size_t, httplib::DataSink& sink) mutable {
                               while (!stopping) {
                                   const auto batch = s->wait_messages(next, std::chrono::milliseconds(200));
                                   for (const auto& m : batch) {
                                       const std::string ev = "event: state\ndata: " + m.dump() + "\n\n";
                                       if (!sink.write(ev.data(), ev.size())) return false;
                                       ++next;
                                   }
                                   if (batch.empty() && s->done()) {
                                       const std::string ev = "event: end\ndata: {}\n\n";
                                       sink.write(ev.data(), ev.size());
                                       sink.done();
                                       return true;
                                   }
                                   if (!batch.empty()) return true; // let httplib flush, then call again
                               }
                               sink.done();
                               return true;
                           });
                   }));
    }
};

HttpServer::HttpServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port)
{
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::serve() { return impl_->server.listen_after_bind(); }

void HttpServer::stop()
{
    impl_->stopping = true;
    impl_->server.stop();
}

} // namespace cnr
