// cnr: solve policies, run episodes (headless or live), batch experiments
// and log reports.

#include "cnr/http_server.hpp"
#include "cnr/service.hpp"
#include "cnr/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace cnr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Everything the run/batch/serve commands need about one map.
std::shared_ptr<const SolvedMap> load_solved(const std::string& map_path, const std::string& policies_path)
{
    MapConfig map = load_map(map_path);
    const Codebook cb(map);
    PolicyBundle b = bundle_from_json(json::parse(read_file(policies_path)), map, cb);
    return std::make_shared<SolvedMap>(std::move(map), std::move(b));
}

// Episode options shared by run and batch.
struct EpisodeFlags {
    std::string config;
    std::string condition = "both";
    std::uint64_t seed = 0;
    int questions = -1;
    int max_steps = -1;

    void add(CLI::App* app, bool with_condition)
    {
        app->add_option("--config", config, "episode config JSON; flags below override it")->check(CLI::ExistingFile);
        if (with_condition)
            app->add_option("--condition", condition, "no-human, push-only, pull-only or both")->capture_default_str();
        app->add_option("--seed", seed, "episode seed (batch: base seed)")->capture_default_str();
        app->add_option("-n,--questions", questions, "questions issued per tick (N)")->check(CLI::NonNegativeNumber);
        app->add_option("--max-steps", max_steps, "step limit per episode")->check(CLI::PositiveNumber);
    }

    EpisodeConfig build() const
    {
        EpisodeConfig c = config.empty() ? EpisodeConfig{} : episode_config_from_json(json::parse(read_file(config)));
        c.condition = condition_from_string(condition);
        c.seed = seed;
        if (questions >= 0) c.hierarchy.questions = static_cast<std::size_t>(questions);
        if (max_steps > 0) c.max_steps = max_steps;
        return c;
    }
};

void print_batch(const json& j)
{
    std::printf("%-10s %5s %9s %8s %8s %8s\n", "condition", "runs", "captured", "median", "q1", "q3");
    for (const auto& r : j.at("conditions"))
        std::printf("%-10s %5d %9d %8.1f %8.1f %8.1f\n", r.at("condition").get<std::string>().c_str(),
                    r.at("runs").get<int>(), r.at("captured").get<int>(), r.at("median").get<double>(),
                    r.at("q1").get<double>(), r.at("q3").get<double>());
}

// ---------------------------------------------------------------- solve

struct SolveCmd {
    std::string map, out;
    std::vector<std::string> rooms;
    BundleSolveOptions opts;

    void add(CLI::App& root)
    {
        auto* c = root.add_subcommand("solve", "build room and continuous policies for a map");
        c->add_option("--map", map, "map JSON")->required()->check(CLI::ExistingFile);
        c->add_option("-o,--out", out, "policy bundle output path")->required();
        c->add_option("--room", rooms, "room id to solve (repeatable; default all)");
        c->add_option("--iterations", opts.solver.iterations, "continuous value-iteration sweeps")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        c->add_option("--beliefs", opts.beliefs_per_room, "belief points per room")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        c->add_option("--alpha-cap", opts.solver.alpha_cap, "mixands per alpha function")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        c->add_option("--room-beliefs", opts.room_beliefs, "belief points for the room-level model")
            ->capture_default_str();
        c->add_option("--room-iterations", opts.room_iterations, "room-level PBVI sweeps")->capture_default_str();
        c->add_option("--seed", opts.seed, "belief-set seed")->capture_default_str();
        c->callback([this] { run(); });
    }

    void run()
    {
        const MapConfig m = load_map(map);
        const Codebook cb(m);
        opts.rooms = rooms;
        const auto t0 = std::chrono::steady_clock::now();
        opts.progress = [&](const std::string& stage) {
            std::fprintf(stderr, "[%6.1fs] solving %s\n", seconds_since(t0), stage.c_str());
        };
        const PolicyBundle b = solve_bundle(m, cb, opts);
        write_file(out, bundle_to_json(b).dump() + "\n");
        std::printf("wrote %s (%.1f s)\n", out.c_str(), seconds_since(t0));
    }
};

// ---------------------------------------------------------------- run

struct RunCmd {
    std::string map, policies, out = "out";
    EpisodeFlags ep;
    bool live = false, external = false, show_robber = false, replay = false;
    std::string host = "127.0.0.1";
    int port = 8080;
    int tick_ms = 1000;

    void add(CLI::App& root)
    {
        auto* c = root.add_subcommand("run", "run one episode, headless or live over HTTP");
        c->add_option("--map", map, "map JSON")->required()->check(CLI::ExistingFile);
        c->add_option("--policies", policies, "policy bundle from `cnr solve`")->required()->check(CLI::ExistingFile);
        c->add_option("-o,--out", out, "output directory for the episode log")->capture_default_str();
        ep.add(c, true);
        c->add_flag("--replay-check", replay, "re-fuse the written log and report the largest belief difference");
        c->add_flag("--live", live, "serve the episode over HTTP and tick on the wall clock");
        c->add_flag("--external", external, "live: answers and statements come from clients, not the simulated human");
        c->add_flag("--show-robber", show_robber, "live: include the robber position in state messages");
        c->add_option("--host", host, "live: bind address")->capture_default_str();
        c->add_option("--port", port, "live: port (0 picks one)")->capture_default_str();
        c->add_option("--tick-ms", tick_ms, "live: tick period in milliseconds")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        c->callback([this] { live ? run_live() : run_headless(); });
    }

    fs::path log_path(const EpisodeConfig& c) const
    {
        return fs::path(out) / ("episode_" + std::string(to_string(c.condition)) + "_" + std::to_string(c.seed) + ".jsonl");
    }

    void finish(const std::string& text, const EpisodeConfig& c, const SolvedMap& sm) const
    {
        const fs::path path = log_path(c);
        write_file(path, text);
        std::printf("log: %s\n", path.string().c_str());
        if (replay) std::printf("replay max difference: %.3g\n", replay_log(text, sm.map, sm.codebook));
    }

    void run_headless()
    {
        const auto sm = load_solved(map, policies);
        const EpisodeConfig c = ep.build();
        const EpisodeLog log = run_episode(sm->map, sm->codebook, sm->policies, c);
        if (log.catch_step)
            std::printf("%s seed %llu: caught at step %d\n", to_string(c.condition),
                        static_cast<unsigned long long>(c.seed), *log.catch_step);
        else
            std::printf("%s seed %llu: not caught in %d steps\n", to_string(c.condition),
                        static_cast<unsigned long long>(c.seed), c.max_steps);
        finish(to_jsonl(log), c, *sm);
    }

    void run_live()
    {
        const auto sm = load_solved(map, policies);
        SessionManager mgr;
        mgr.add_map(sm);
        SessionOptions so;
        so.episode = ep.build();
        so.episode.simulated_human = !external;
        so.show_robber = show_robber;
        so.tick_period = std::chrono::milliseconds(tick_ms);
        const std::string id = mgr.create_session(sm->map.name, so);
        const auto session = mgr.session(id);

        HttpServer server(mgr);
        const int bound = server.bind(host, port);
        if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
        std::thread serving([&] { server.serve(); });
        std::printf("session %s live at http://%s:%d/sessions/%s/stream\n", id.c_str(), host.c_str(), bound,
                    id.c_str());
        std::fflush(stdout);

        mgr.start_clock();
        session->resume();
        while (!session->done()) (void)session->wait_messages(session->messages(0).size(), std::chrono::seconds(1));
        mgr.stop_clock();
        server.stop();
        serving.join();

        const json last = session->snapshot();
        std::printf("ended: %s at tick %d\n", last.at("status").get<std::string>().c_str(), last.at("tick").get<int>());
        finish(session->log_jsonl(), so.episode, *sm);
    }
};

// ---------------------------------------------------------------- batch

struct BatchCmd {
    std::string map, policies, out = "out";
    std::vector<std::string> conditions{"no-human", "push-only", "pull-only", "both"};
    int runs = 20;
    EpisodeFlags ep;

    void add(CLI::App& root)
    {
        auto* c = root.add_subcommand("batch", "Monte Carlo catch-time comparison across conditions");
        c->add_option("--map", map, "map JSON")->required()->check(CLI::ExistingFile);
        c->add_option("--policies", policies, "policy bundle from `cnr solve`")->required()->check(CLI::ExistingFile);
        c->add_option("-o,--out", out, "output directory for summary.json")->capture_default_str();
        c->add_option("--runs", runs, "episodes per condition")->capture_default_str()->check(CLI::PositiveNumber);
        c->add_option("--conditions", conditions, "conditions to run")->capture_default_str();
        ep.add(c, false);
        c->callback([this] { run(); });
    }

    void run()
    {
        const auto sm = load_solved(map, policies);
        std::vector<Condition> conds;
        for (const auto& s : conditions) conds.push_back(condition_from_string(s));
        const EpisodeConfig base = ep.build();
        const auto t0 = std::chrono::steady_clock::now();
        const BatchSummary s = run_batch(sm->map, sm->codebook, sm->policies, conds, runs, ep.seed, base);
        json j = batch_to_json(s);
        j["map"] = sm->map.name;
        j["base_seed"] = ep.seed;
        j["runs_per_condition"] = runs;
        j["max_steps"] = base.max_steps;
        j["seconds"] = seconds_since(t0);
        const fs::path path = fs::path(out) / "summary.json";
        write_file(path, j.dump(2) + "\n");
        print_batch(j);
        std::printf("summary: %s (%.1f s)\n", path.string().c_str(), j["seconds"].get<double>());
    }
};

// ---------------------------------------------------------------- report

struct ReportCmd {
    std::string input, map;

    void add(CLI::App& root)
    {
        auto* c = root.add_subcommand("report", "summarize an episode log or a batch summary");
        c->add_option("input", input, "episode .jsonl log or batch summary.json")->required()->check(CLI::ExistingFile);
        c->add_option("--map", map, "map JSON; with an episode log, replays it and checks the beliefs")
            ->check(CLI::ExistingFile);
        c->callback([this] { run(); });
    }

    void run()
    {
        const std::string text = read_file(input);
        if (json::accept(text)) {
            print_batch(json::parse(text));
            return;
        }
        std::istringstream lines(text);
        std::string first;
        std::getline(lines, first);
        const json head = json::parse(first);
        if (head.value("kind", "") != "header") throw std::runtime_error(input + " is neither a log nor a summary");
        print_episode(head, lines);
        if (!map.empty()) {
            const MapConfig m = load_map(map);
            std::printf("replay max difference: %.3g\n", replay_log(text, m, Codebook(m)));
        }
    }

    static void print_episode(const json& head, std::istringstream& lines)
    {
        std::printf("map %s, condition %s, seed %llu\n", head.at("map").get<std::string>().c_str(),
                    head.at("condition").get<std::string>().c_str(), head.at("seed").get<unsigned long long>());
        int questions = 0, answered = 0, pushed = 0, detections = 0;
        json summary;
        for (std::string line; std::getline(lines, line);) {
            if (line.empty()) continue;
            const json r = json::parse(line);
            if (r.at("kind") == "summary") {
                summary = r;
                continue;
            }
            questions += static_cast<int>(r.at("questions").size());
            detections += r.at("detection") == "detection";
            for (const auto& e : r.at("fused")) {
                const std::string src = e.value("source", "");
                answered += src == "pull-answer";
                pushed += src == "push-statement";
            }
        }
        if (summary.is_null()) throw std::runtime_error("log has no summary record");
        std::printf("steps %d, ", summary.at("steps").get<int>());
        if (summary.at("catch_step").is_null()) std::printf("not caught\n");
        else std::printf("caught at step %d\n", summary.at("catch_step").get<int>());
        std::printf("questions issued %d, answers fused %d, statements fused %d, detections %d\n", questions, answered,
                    pushed, detections);
    }
};

// ---------------------------------------------------------------- serve

struct ServeCmd {
    std::vector<std::string> maps, policies;
    std::string host = "127.0.0.1";
    int port = 8080;

    void add(CLI::App& root)
    {
        auto* c = root.add_subcommand("serve", "session service: create and drive live episodes over HTTP");
        c->add_option("--map", maps, "map JSON (repeatable, paired with --policies)")->required();
        c->add_option("--policies", policies, "policy bundle for the map at the same position")->required();
        c->add_option("--host", host, "bind address")->capture_default_str();
        c->add_option("--port", port, "port (0 picks one)")->capture_default_str();
        c->callback([this] { run(); });
    }

    void run()
    {
        if (maps.size() != policies.size()) throw CLI::ValidationError("--map and --policies must pair up");
        SessionManager mgr;
        for (std::size_t i = 0; i < maps.size(); ++i) mgr.add_map(load_solved(maps[i], policies[i]));
        HttpServer server(mgr);
        const int bound = server.bind(host, port);
        if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
        mgr.start_clock();
        std::printf("serving on http://%s:%d\n", host.c_str(), bound);
        std::fflush(stdout);
        server.serve();
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cops and robbers target search with human queries"};
    app.require_subcommand(1);
    SolveCmd solve;
    RunCmd run;
    BatchCmd batch;
    ReportCmd report;
    ServeCmd serve;
    solve.add(app);
    run.add(app);
    batch.add(app);
    report.add(app);
    serve.add(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
