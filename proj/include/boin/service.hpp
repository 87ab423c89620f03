#pragma once

// Trial-conduct service. Each trial is an append-only JSON-lines log under the
// data directory: a "created" record followed by one "cohort" record per cohort.
// The in-memory state is always the replay of that log.
//
// Handlers return (status, body) pairs and are callable without HTTP; mount()
// binds them to a cpp-httplib server.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>

#include "boin/design.hpp"
#include "boin/drm.hpp"
#include "boin/json_io.hpp"
#include "boin/pava.hpp"
#include "boin/trial.hpp"

namespace boin {

struct Response {
    int status = 200;
    json body;
};

struct ServiceOptions {
    std::filesystem::path data_dir = "boin-data";
    bool verify_replay = false; ///< re-read and replay the log after every mutation
};

class ConductService {
public:
    explicit ConductService(ServiceOptions opt) : opt_(std::move(opt))
    {
        std::filesystem::create_directories(opt_.data_dir);
        load();
    }

    Response create_trial(const json& body, const std::string& idempotency_key = {})
    {
        if (!idempotency_key.empty()) {
            std::shared_lock lock(map_mutex_);
            if (auto it = by_key_.find(idempotency_key); it != by_key_.end()) return {201, describe(*sessions_.at(it->second), true)};
        }
        auto config = parse_config(body);
        if (!config.errors.empty()) return validation_error(std::move(config.errors));

        std::unique_lock lock(map_mutex_);
        if (!idempotency_key.empty()) {
            if (auto it = by_key_.find(idempotency_key); it != by_key_.end()) return {201, describe(*sessions_.at(it->second), true)};
        }
        std::string id;
        do {
            id = new_id();
        } while (sessions_.count(id) || std::filesystem::exists(log_path(id)));

        auto s = make_session(id, body, std::move(config));
        json created = {{"type", "created"}, {"schema_version", schema_version}, {"trial_id", id},
                        {"idempotency_key", idempotency_key}, {"request", body}};
        append_line(log_path(id), created);
        if (!idempotency_key.empty()) by_key_[idempotency_key] = id;
        s->idempotency_key = idempotency_key;
        auto& ref = *s;
        sessions_[id] = std::move(s);
        return {201, describe(ref, true)};
    }

    Response get_trial(const std::string& id) const
    {
        auto s = find(id);
        if (!s) return not_found(id);
        return {200, describe(*s, false)};
    }

    Response post_cohort(const std::string& id, const json& body)
    {
        auto s = find(id);
        if (!s) return not_found(id);
        if (!body.is_object()) return validation_error({{"body", "expected a JSON object"}});

        json errors = json::object();
        auto int_field = [&](const char* key, bool required) -> std::optional<long long> {
            if (!body.contains(key) || body[key].is_null()) {
                if (required) errors[key] = "required";
                return std::nullopt;
            }
            if (!body[key].is_number_integer()) {
                errors[key] = "must be an integer";
                return std::nullopt;
            }
            return body[key].get<long long>();
        };
        const auto level = int_field("dose_level", true);
        const auto n = int_field("n", true);
        const auto dlt = int_field("dlt", true);
        const auto index = int_field("cohort_index", false);
        if (!errors.empty()) return validation_error(std::move(errors));

        std::lock_guard lock(s->mutation);
        const auto cur = s->snapshot();
        if (cur->status != TrialStatus::Running)
            return conflict("trial is " + std::string(to_string(cur->status)) + "; no further cohorts accepted");
        if (*level != static_cast<long long>(cur->current_dose) + 1)
            return conflict("dose_level " + std::to_string(*level) + " is stale; current dose level is "
                            + std::to_string(cur->current_dose + 1));
        if (index && *index != cur->cohorts_done())
            return conflict("cohort_index " + std::to_string(*index) + " is stale; next cohort index is "
                            + std::to_string(cur->cohorts_done()));
        if (*n < 1 || *n > s->design.cohort_size)
            errors["n"] = "must be between 1 and " + std::to_string(s->design.cohort_size);
        if (*dlt < 0 || *dlt > *n) errors["dlt"] = "must satisfy 0 <= dlt <= n";
        if (!errors.empty()) return validation_error(std::move(errors));

        auto next = std::make_shared<TrialState>(*cur);
        const Decision d = apply_cohort(*next, s->design, static_cast<int>(*n), static_cast<int>(*dlt));
        json rec = to_json(next->events.back());
        rec["type"] = "cohort";
        append_line(log_path(id), rec);
        if (opt_.verify_replay) verify(*s, *next);
        s->publish(next);

        json out = {{"schema_version", schema_version},
                    {"trial_id", id},
                    {"cohort_index", next->events.back().cohort_index},
                    {"decision", std::string(to_string(d.action))},
                    {"next_dose", d.status == TrialStatus::StoppedAllEliminated ? json(nullptr) : json(d.next_dose + 1)},
                    {"eliminations", detail::levels(d.new_eliminations)},
                    {"status", std::string(to_string(d.status))}};
        return {200, std::move(out)};
    }

    /// @p method: empty (configured estimator), "pava", "drm" or "both".
    Response get_selection(const std::string& id, const std::string& method = {}) const
    {
        auto s = find(id);
        if (!s) return not_found(id);
        const std::string m = method.empty() ? s->method : method;
        if (m != "pava" && m != "drm" && m != "both") return validation_error({{"method", "expected pava, drm or both"}});
        if ((m == "drm" || m == "both") && !s->model)
            return validation_error({{"method", "trial has no dose-response prior configured"}});
        const auto st = s->snapshot();
        if (st->status == TrialStatus::Running) return conflict("trial is still running");

        const auto adm = final_admissible(*st, s->design);
        json out = {{"schema_version", schema_version},
                    {"trial_id", id},
                    {"status", std::string(to_string(st->status))},
                    {"method", m},
                    {"phi", s->design.phi},
                    {"admissible", json(std::vector<bool>(adm.begin(), adm.end()))}};
        const bool completed = st->status == TrialStatus::Completed;
        std::optional<std::size_t> pava_mtd;
        std::optional<std::size_t> drm_mtd;
        if (m == "pava" || m == "both") {
            const auto fit = fit_isotonic(*st, s->design);
            if (completed) pava_mtd = closest_to_target(fit.p_hat, fit.admissible, s->design.phi);
            json p = to_json(fit);
            p["mtd"] = detail::nullable_level(pava_mtd);
            out["pava"] = std::move(p);
        }
        if (m == "drm" || m == "both") {
            const auto summary = s->posterior().fit(DoseData::from(*st));
            const auto cand = candidate_doses(*st, s->design, s->candidates);
            if (completed) drm_mtd = select_mtd_drm(summary, s->design.phi, cand);
            json d = to_json(summary);
            d["candidates"] = json(std::vector<bool>(cand.begin(), cand.end()));
            d["link"] = std::string(to_string(s->model->link));
            d["mtd"] = detail::nullable_level(drm_mtd);
            out["drm"] = std::move(d);
        }
        const std::string primary = m == "both" ? s->method : m;
        out["mtd"] = detail::nullable_level(primary == "pava" ? pava_mtd : drm_mtd);
        return {200, std::move(out)};
    }

    Response get_events(const std::string& id) const
    {
        auto s = find(id);
        if (!s) return not_found(id);
        const auto st = s->snapshot();
        json events = json::array();
        for (const auto& e : st->events) events.push_back(to_json(e));
        return {200, {{"schema_version", schema_version}, {"trial_id", id}, {"num_doses", st->num_doses()}, {"events", std::move(events)}}};
    }

    [[nodiscard]] std::size_t size() const
    {
        std::shared_lock lock(map_mutex_);
        return sessions_.size();
    }

    [[nodiscard]] const ServiceOptions& options() const noexcept { return opt_; }

private:
    struct Config {
        json errors = json::object();
        std::vector<double> doses;
        std::size_t ref_level = 3;
        TrialDesign design;
        std::string method = "pava";
        std::optional<DoseResponseModel> model;
        CandidateSet candidates = CandidateSet::Treated;
    };

    struct Session {
        std::string id;
        std::string idempotency_key;
        json request;
        TrialDesign design;
        DoseGrid grid;
        std::string method;
        std::optional<DoseResponseModel> model;
        CandidateSet candidates = CandidateSet::Treated;
        std::mutex mutation;

        std::shared_ptr<const TrialState> snapshot() const
        {
            std::lock_guard lock(snap_mutex_);
            return state_;
        }
        void publish(std::shared_ptr<const TrialState> s)
        {
            std::lock_guard lock(snap_mutex_);
            state_ = std::move(s);
        }
        const GridPosterior& posterior() const
        {
            std::call_once(grid_once_, [&] { grid_ = std::make_unique<GridPosterior>(*model); });
            return *grid_;
        }

        Session(std::string id_, json req, TrialDesign d, DoseGrid g)
            : id(std::move(id_)), request(std::move(req)), design(d), grid(std::move(g))
        {
        }

    private:
        mutable std::mutex snap_mutex_;
        std::shared_ptr<const TrialState> state_;
        mutable std::once_flag grid_once_;
        mutable std::unique_ptr<GridPosterior> grid_;
    };

    static Config parse_config(const json& body)
    {
        Config c;
        auto& err = c.errors;
        if (!body.is_object()) {
            err["body"] = "expected a JSON object";
            return c;
        }
        auto number = [&](const char* key, double fallback) {
            if (!body.contains(key) || body[key].is_null()) return fallback;
            if (!body[key].is_number()) {
                err[key] = "must be a number";
                return fallback;
            }
            return body[key].get<double>();
        };
        auto integer = [&](const char* key, int fallback) {
            if (!body.contains(key) || body[key].is_null()) return fallback;
            if (!body[key].is_number_integer()) {
                err[key] = "must be an integer";
                return fallback;
            }
            return body[key].get<int>();
        };

        c.doses = {10, 20, 30, 45, 60, 80};
        if (body.contains("doses")) {
            try {
                c.doses = body["doses"].get<std::vector<double>>();
            } catch (const nlohmann::json::exception&) {
                err["doses"] = "must be an array of numbers";
            }
        }
        const int ref = integer("ref_index", 3);
        try {
            DoseGrid g(c.doses, static_cast<std::size_t>(std::max(ref, 0)));
        } catch (const Error& e) {
            err[ref < 1 || static_cast<std::size_t>(ref) > c.doses.size() ? "ref_index" : "doses"] = e.what();
        }
        c.ref_level = static_cast<std::size_t>(std::max(ref, 1));

        DesignParams p;
        p.phi = number("phi", 0.3);
        if (!(p.phi > 0.0 && p.phi < 1.0)) err["phi"] = "must lie in (0, 1)";
        const double phi1 = number("phi1", 0.6 * p.phi);
        const double phi2 = number("phi2", 1.4 * p.phi);
        if (!(phi1 > 0.0 && phi1 < p.phi)) err["phi1"] = "must satisfy 0 < phi1 < phi";
        if (!(phi2 > p.phi && phi2 < 1.0)) err["phi2"] = "must satisfy phi < phi2 < 1";
        p.phi1 = phi1;
        p.phi2 = phi2;
        p.cohort_size = integer("cohort_size", 3);
        if (p.cohort_size < 1) err["cohort_size"] = "must be >= 1";
        p.n_cohorts = integer("n_cohorts", 12);
        if (p.n_cohorts < 1) err["n_cohorts"] = "must be >= 1";
        p.elim_threshold = number("elim_threshold", 0.95);
        if (!(p.elim_threshold > 0.0 && p.elim_threshold < 1.0)) err["elim_threshold"] = "must lie in (0, 1)";
        p.elim_min_n = integer("elim_min_n", 3);
        if (p.elim_min_n < 1) err["elim_min_n"] = "must be >= 1";
        if (err.empty()) {
            try {
                c.design = TrialDesign::make(p);
            } catch (const Error& e) {
                err["design"] = e.what();
            }
        }

        if (body.contains("estimator")) {
            const auto& est = body["estimator"];
            if (!est.is_object()) {
                err["estimator"] = "must be an object";
                return c;
            }
            c.method = est.value("method", std::string("pava"));
            if (c.method != "pava" && c.method != "drm") err["estimator.method"] = "expected pava or drm";
            try {
                c.candidates = parse_candidate_set(est.value("candidates", std::string("treated")));
            } catch (const Error& e) {
                err["estimator.candidates"] = e.what();
            }
            if (est.contains("prior")) {
                std::optional<Link> link;
                try {
                    link = parse_link(est.value("link", std::string("logit")));
                } catch (const Error& e) {
                    err["estimator.link"] = e.what();
                }
                CoefficientPrior prior;
                try {
                    prior = prior_from_json(est["prior"]);
                } catch (const Error& e) {
                    err["estimator.prior"] = e.what();
                }
                if (err.empty()) c.model.emplace(*link, DoseGrid(c.doses, c.ref_level), prior);
            } else if (c.method == "drm") {
                err["estimator.prior"] = "required when method is drm";
            }
        }
        return c;
    }

    std::shared_ptr<Session> make_session(const std::string& id, const json& body, Config c) const
    {
        auto s = std::make_shared<Session>(id, body, c.design, DoseGrid(c.doses, c.ref_level));
        s->method = c.method;
        s->model = std::move(c.model);
        s->candidates = c.candidates;
        s->publish(std::make_shared<const TrialState>(s->grid.size()));
        return s;
    }

    json describe(const Session& s, bool with_rules) const
    {
        const auto st = s.snapshot();
        json doses = json::array();
        for (std::size_t j = 0; j < st->num_doses(); ++j)
            doses.push_back({{"level", j + 1},
                             {"dose", s.grid[j]},
                             {"n", st->n[j]},
                             {"m", st->m[j]},
                             {"eliminated", static_cast<bool>(st->eliminated[j])}});
        json est = {{"method", s.method}, {"candidates", std::string(to_string(s.candidates))}};
        if (s.model) est["model"] = to_json(*s.model);
        json out = {{"schema_version", schema_version},
                    {"trial_id", s.id},
                    {"status", std::string(to_string(st->status))},
                    {"current_dose", st->current_dose + 1},
                    {"cohorts_done", st->cohorts_done()},
                    {"design", to_json(s.design)},
                    {"boundaries", {{"lambda_e", s.design.lambda_e}, {"lambda_d", s.design.lambda_d}}},
                    {"ref_index", s.grid.ref_level()},
                    {"estimator", std::move(est)},
                    {"doses", std::move(doses)}};
        if (with_rules) out["decision_table"] = to_json(decision_table(s.design, s.design.max_patients()));
        return out;
    }

    std::shared_ptr<Session> find(const std::string& id) const
    {
        std::shared_lock lock(map_mutex_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    std::filesystem::path log_path(const std::string& id) const { return opt_.data_dir / (id + ".jsonl"); }

    static void append_line(const std::filesystem::path& path, const json& rec)
    {
        std::ofstream out(path, std::ios::app | std::ios::binary);
        out << rec.dump() << '\n';
        out.flush();
        if (!out) throw Error("cannot append to " + path.string());
    }

    static std::vector<json> read_log(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        std::vector<json> recs;
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) recs.push_back(json::parse(line));
        return recs;
    }

    static std::vector<CohortEvent> log_events(const std::vector<json>& recs, std::size_t J)
    {
        std::vector<CohortEvent> ev;
        for (std::size_t i = 1; i < recs.size(); ++i) {
            if (recs[i].value("type", "") != "cohort") throw StateError("unexpected record type in trial log");
            ev.push_back(cohort_event_from_json(recs[i], J));
        }
        return ev;
    }

    void verify(const Session& s, const TrialState& expected) const
    {
        const auto ev = log_events(read_log(log_path(s.id)), s.grid.size());
        if (!(replay(ev, s.design, s.grid.size()) == expected))
            throw StateError("trial " + s.id + ": log replay does not reproduce the in-memory state");
    }

    void load()
    {
        for (const auto& entry : std::filesystem::directory_iterator(opt_.data_dir)) {
            if (entry.path().extension() != ".jsonl") continue;
            try {
                const auto recs = read_log(entry.path());
                if (recs.empty() || recs[0].value("type", "") != "created") throw StateError("missing created record");
                const std::string id = recs[0].at("trial_id").get<std::string>();
                auto config = parse_config(recs[0].at("request"));
                if (!config.errors.empty()) throw StateError("stored request no longer validates");
                auto s = make_session(id, recs[0].at("request"), std::move(config));
                s->idempotency_key = recs[0].value("idempotency_key", "");
                s->publish(std::make_shared<const TrialState>(replay(log_events(recs, s->grid.size()), s->design, s->grid.size())));
                if (!s->idempotency_key.empty()) by_key_[s->idempotency_key] = id;
                sessions_[id] = std::move(s);
            } catch (const std::exception& e) {
                std::cerr << "boin: skipping " << entry.path().string() << ": " << e.what() << '\n';
            }
        }
    }

    std::string new_id()
    {
        std::lock_guard lock(id_mutex_);
        std::ostringstream ss;
        ss << "tr-" << std::hex << (id_rng_() & 0xFFFFFFFFFFFFULL);
        return ss.str();
    }

    static Response validation_error(json fields)
    {
        return {422, {{"schema_version", schema_version}, {"error", "validation"}, {"fields", std::move(fields)}}};
    }
    static Response conflict(const std::string& msg)
    {
        return {409, {{"schema_version", schema_version}, {"error", "conflict"}, {"message", msg}}};
    }
    static Response not_found(const std::string& id)
    {
        return {404, {{"schema_version", schema_version}, {"error", "not_found"}, {"message", "no trial " + id}}};
    }

    ServiceOptions opt_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::string> by_key_;
    std::mutex id_mutex_;
    std::mt19937_64 id_rng_{std::random_device{}()};
};

/// Routes the service endpoints (with permissive CORS for the browser client).
inline void mount(httplib::Server& server, ConductService& svc)
{
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type, Idempotency-Key"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    auto reply = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    auto parse = [](const httplib::Request& req, json& out) {
        try {
            out = req.body.empty() ? json::object() : json::parse(req.body);
            return true;
        } catch (const nlohmann::json::exception&) {
            return false;
        }
    };
    auto bad_json = Response{400, {{"schema_version", schema_version}, {"error", "bad_request"}, {"message", "body is not valid JSON"}}};

    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Post("/trials", [&, reply, parse, bad_json](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse(req, body)) return reply(res, bad_json);
        reply(res, svc.create_trial(body, req.get_header_value("Idempotency-Key")));
    });
    server.Get(R"(/trials/([A-Za-z0-9_-]+))", [&, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc.get_trial(req.matches[1]));
    });
    server.Post(R"(/trials/([A-Za-z0-9_-]+)/cohorts)", [&, reply, parse, bad_json](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (!parse(req, body)) return reply(res, bad_json);
        reply(res, svc.post_cohort(req.matches[1], body));
    });
    server.Get(R"(/trials/([A-Za-z0-9_-]+)/selection)", [&, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc.get_selection(req.matches[1], req.get_param_value("method")));
    });
    server.Get(R"(/trials/([A-Za-z0-9_-]+)/events)", [&, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc.get_events(req.matches[1]));
    });
    server.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string msg = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        reply(res, Response{500, {{"schema_version", schema_version}, {"error", "internal"}, {"message", msg}}});
    });
}

} // namespace boin
