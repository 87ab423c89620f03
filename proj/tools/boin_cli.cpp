// boin: command-line front end.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "boin/boin.hpp"
#include "boin/service.hpp"

namespace {

using boin::CsvTable;
using boin::json;

struct Global {
    std::uint64_t seed = 2025;
    std::string out;
    std::string format = "csv";
};

void emit(const Global& g, const std::string& content)
{
    if (g.out.empty() || g.out == "-") std::cout << content;
    else boin::atomic_write(g.out, content);
}

void emit(const Global& g, const json& j, const CsvTable& t)
{
    emit(g, g.format == "json" ? j.dump(2) + "\n" : t.str());
}

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError("list", "'" + item + "' is not a number");
        }
    }
    return v;
}

json load_json(const std::string& path)
{
    try {
        return json::parse(boin::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw boin::InvalidInput(path + ": " + e.what());
    }
}

struct DesignFlags {
    double phi = 0.3;
    std::optional<double> phi1;
    std::optional<double> phi2;
    int cohort = 3;
    int cohorts = 12;

    void add(CLI::App* app)
    {
        app->add_option("--phi", phi, "target DLT probability")->check(CLI::Range(0.0, 1.0));
        app->add_option("--phi1", phi1, "highest subtherapeutic DLT probability (default 0.6*phi)");
        app->add_option("--phi2", phi2, "lowest overly toxic DLT probability (default 1.4*phi)");
        app->add_option("--cohort", cohort, "cohort size")->check(CLI::PositiveNumber);
        app->add_option("--cohorts", cohorts, "number of cohorts")->check(CLI::PositiveNumber);
    }

    boin::TrialDesign make() const
    {
        boin::DesignParams p;
        p.phi = phi;
        p.phi1 = phi1;
        p.phi2 = phi2;
        p.cohort_size = cohort;
        p.n_cohorts = cohorts;
        try {
            return boin::TrialDesign::make(p);
        } catch (const boin::InvalidDesign& e) {
            throw CLI::ValidationError("design", e.what());
        }
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"BOIN dose-finding toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    app.add_option("--seed", g.seed, "master random seed");
    app.add_option("--out", g.out, "output file (default stdout); written atomically");
    app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv", "json"}));

    // boundaries
    auto* cb = app.add_subcommand("boundaries", "escalation/de-escalation rule table");
    DesignFlags bflags;
    bflags.add(cb);
    int max_n = 36;
    cb->add_option("--max-n", max_n, "largest patient count in the table")->check(CLI::PositiveNumber);

    // decide
    auto* cd = app.add_subcommand("decide", "decision for n patients with m DLTs at the current dose");
    DesignFlags dflags;
    dflags.add(cd);
    int dn = 0;
    int dm = 0;
    cd->add_option("--n", dn, "patients treated at the current dose")->required()->check(CLI::PositiveNumber);
    cd->add_option("--m", dm, "DLTs at the current dose")->required()->check(CLI::NonNegativeNumber);

    // elicit
    auto* ce = app.add_subcommand("elicit", "elicit a coefficient prior by quantile matching");
    std::string e_doses = "10,20,30,45,60,80";
    int e_ref = 3;
    double e_phi = 0.3;
    std::string e_link = "logit";
    double e_p1 = 0.05;
    double e_pj = 0.21;
    std::string e_levels = "0.025,0.5,0.975";
    int e_restarts = 20;
    double e_floor = 0.5;
    ce->add_option("--doses", e_doses, "comma-separated doses");
    ce->add_option("--ref-index", e_ref, "1-based reference dose level");
    ce->add_option("--phi", e_phi, "target DLT probability");
    ce->add_option("--link", e_link, "logit | loglog | cloglog");
    ce->add_option("--p1", e_p1, "P(pi(d_1) > phi)");
    ce->add_option("--pj", e_pj, "P(pi(d_J) <= phi)");
    ce->add_option("--levels", e_levels, "comma-separated quantile levels");
    ce->add_option("--restarts", e_restarts, "optimizer restarts")->check(CLI::PositiveNumber);
    ce->add_option("--variance-floor", e_floor, "lower bound on prior variances");

    // simulate
    auto* cs = app.add_subcommand("simulate", "operating characteristics from a JSON sweep config");
    std::string s_config;
    std::optional<std::size_t> s_reps;
    std::string s_summary;
    cs->add_option("config", s_config, "sweep config (JSON)")->required()->check(CLI::ExistingFile);
    cs->add_option("--reps", s_reps, "override replicate count");
    cs->add_option("--summary", s_summary, "also write the JSON summary here");

    // select
    auto* cl = app.add_subcommand("select", "terminal MTD selection on final trial data");
    DesignFlags lflags;
    lflags.add(cl);
    std::string l_method = "pava";
    std::string l_link;
    std::string l_prior;
    std::string l_data;
    std::string l_engine = "grid";
    std::string l_candidates = "treated";
    cl->add_option("--method", l_method)->check(CLI::IsMember({"pava", "drm"}));
    cl->add_option("--link", l_link, "override the prior's link");
    cl->add_option("--prior", l_prior, "prior JSON (required for drm)")->check(CLI::ExistingFile);
    cl->add_option("--data", l_data, "trial data JSON: {n, m} or an exported event log")->required()->check(CLI::ExistingFile);
    cl->add_option("--engine", l_engine)->check(CLI::IsMember({"grid", "mcmc"}));
    cl->add_option("--candidates", l_candidates, "doses the model may select: treated (n_j > 0) or admissible")
        ->check(CLI::IsMember({"treated", "admissible"}));

    // linkcurves
    auto* cc = app.add_subcommand("linkcurves", "dose-response curves for plotting");
    double c_beta0 = 0.0;
    double c_beta1 = 0.0;
    std::optional<double> c_pref;
    double c_ref = 30;
    double c_min = 1;
    double c_max = 100;
    int c_points = 100;
    std::vector<std::string> c_links = {"logit", "loglog", "cloglog"};
    cc->add_option("--beta0", c_beta0, "intercept (link scale at the reference dose)");
    cc->add_option("--p-ref", c_pref, "set beta0 = g(p) for each link instead of --beta0");
    cc->add_option("--beta1", c_beta1, "log slope");
    cc->add_option("--ref-dose", c_ref)->check(CLI::PositiveNumber);
    cc->add_option("--dose-min", c_min)->check(CLI::PositiveNumber);
    cc->add_option("--dose-max", c_max)->check(CLI::PositiveNumber);
    cc->add_option("--points", c_points)->check(CLI::Range(2, 100000));
    cc->add_option("--links", c_links)->delimiter(',');

    // serve
    auto* cv = app.add_subcommand("serve", "run the trial-conduct HTTP service");
    int v_port = 8080;
    std::string v_host = "127.0.0.1";
    std::string v_dir = "boin-data";
    cv->add_option("--port", v_port)->check(CLI::Range(1, 65535));
    cv->add_option("--host", v_host);
    cv->add_option("--data-dir", v_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cb) {
            const auto d = bflags.make();
            const auto rows = boin::decision_table(d, max_n);
            CsvTable t({"schema_version", "n", "escalate_if_dlt_le", "deescalate_if_dlt_ge", "lambda_e", "lambda_d"});
            for (const auto& r : rows)
                t.row({std::to_string(boin::schema_version), std::to_string(r.n), std::to_string(r.escalate_max),
                       std::to_string(r.deescalate_min), CsvTable::num(d.lambda_e), CsvTable::num(d.lambda_d)});
            json j = {{"schema_version", boin::schema_version}, {"boundaries", boin::to_json(boin::Boundaries{d.lambda_e, d.lambda_d})},
                      {"design", boin::to_json(d)}, {"rules", boin::to_json(rows)}};
            emit(g, j, t);
        } else if (*cd) {
            const auto d = dflags.make();
            if (dm > dn) throw CLI::ValidationError("--m", "must not exceed --n");
            const auto a = boin::decide(dn, dm, d);
            const bool elim = boin::check_elimination(dn, dm, d);
            CsvTable t({"schema_version", "n", "m", "decision", "eliminate"});
            t.row({std::to_string(boin::schema_version), std::to_string(dn), std::to_string(dm),
                   std::string(boin::to_string(a)), elim ? "true" : "false"});
            emit(g, {{"schema_version", boin::schema_version}, {"n", dn}, {"m", dm},
                     {"decision", std::string(boin::to_string(a))}, {"eliminate", elim},
                     {"prob_exceeds_phi", boin::prob_exceeds(dn, dm, d.phi)}}, t);
        } else if (*ce) {
            boin::ElicitationInput in;
            in.p1 = e_p1;
            in.pJ = e_pj;
            in.phi = e_phi;
            try {
                in.grid = boin::DoseGrid(parse_list(e_doses), static_cast<std::size_t>(e_ref));
                in.link = boin::parse_link(e_link);
                in.levels = parse_list(e_levels);
                in.validate();
            } catch (const boin::Error& e) {
                throw CLI::ValidationError("elicit", e.what());
            }
            boin::PriorOptimizerOptions po;
            po.seed = g.seed;
            po.restarts = e_restarts;
            po.variance_floor = e_floor;
            po.threads = boin::default_threads();
            const auto res = boin::elicit_prior(in, po);
            const boin::DoseResponseModel model(in.link, in.grid, res.fit.prior);
            const json j = boin::to_json(model, res, in, g.seed);
            // The prior file is always JSON; stdout carries the audit table in the chosen format.
            if (!g.out.empty()) boin::atomic_write(g.out, j.dump(2) + "\n");
            if (g.format == "json") {
                std::cout << j.dump(2) << '\n';
                return 0;
            }
            CsvTable t({"schema_version", "dose_level", "level", "target", "achieved"});
            for (std::size_t r = 0; r < in.grid.size(); ++r)
                for (std::size_t k = 0; k < in.levels.size(); ++k)
                    t.row({std::to_string(boin::schema_version), std::to_string(r + 1), CsvTable::num(in.levels[k]),
                           CsvTable::num(res.trace.targets.values[r][k]), CsvTable::num(res.fit.achieved[r][k])});
            std::cout << t.str();
        } else if (*cs) {
            const auto base = std::filesystem::path(s_config).parent_path();
            auto cfg = boin::sweep_from_json(load_json(s_config), base.empty() ? "." : base);
            if (s_reps) cfg.options.reps = *s_reps;
            if (app.get_option("--seed")->count()) cfg.options.master_seed = g.seed;
            std::vector<boin::SimulationReport> reports = boin::run_scenarios(cfg.design, cfg.scenarios, cfg.methods, cfg.options);
            json summary = {{"schema_version", boin::schema_version}, {"reports", json::array()}};
            for (const auto& r : reports) summary["reports"].push_back(boin::to_json(r));
            if (!s_summary.empty()) boin::atomic_write(s_summary, summary.dump(2) + "\n");
            emit(g, summary, boin::sweep_csv(reports));
        } else if (*cl) {
            const auto d = lflags.make();
            const json data = load_json(l_data);
            json out = {{"schema_version", boin::schema_version}, {"method", l_method}};
            CsvTable t({"schema_version", "method", "dose_level", "n", "m", "estimate", "admissible", "selected"});
            std::vector<double> est;
            boin::TrialState st;
            std::optional<std::size_t> mtd;
            std::vector<bool> adm;
            if (l_method == "pava") {
                const std::size_t J = data.contains("n") ? data["n"].size() : data.value("num_doses", std::size_t{6});
                st = boin::trial_data_from_json(data, d, J);
                const auto fit = boin::fit_isotonic(st, d);
                est = fit.p_hat;
                adm = fit.admissible;
                mtd = boin::closest_to_target(fit.p_hat, fit.admissible, d.phi);
                out["pava"] = boin::to_json(fit);
            } else {
                if (l_prior.empty()) throw CLI::ValidationError("--prior", "required for --method drm");
                json pj = load_json(l_prior);
                if (!l_link.empty()) pj["link"] = l_link;
                const auto model = boin::model_from_json(pj);
                st = boin::trial_data_from_json(data, d, model.grid.size());
                adm = boin::candidate_doses(st, d, boin::parse_candidate_set(l_candidates));
                boin::PosteriorSummary s;
                if (l_engine == "grid") {
                    s = boin::grid_posterior(model, boin::DoseData::from(st));
                } else {
                    boin::McmcOptions mo;
                    mo.seed = g.seed;
                    s = boin::mcmc_sample(model, boin::DoseData::from(st), mo).summary;
                }
                for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
                est = s.estimate;
                mtd = boin::select_mtd_drm(s, d.phi, adm);
                out["drm"] = boin::to_json(s);
                out["link"] = std::string(boin::to_string(model.link));
            }
            out["mtd"] = mtd ? json(*mtd + 1) : json(nullptr);
            out["admissible"] = json(adm);
            for (std::size_t j = 0; j < est.size(); ++j)
                t.row({std::to_string(boin::schema_version), l_method, std::to_string(j + 1), std::to_string(st.n[j]),
                       std::to_string(st.m[j]), std::isfinite(est[j]) ? CsvTable::num(est[j], 10) : "",
                       adm[j] ? "true" : "false", mtd && *mtd == j ? "true" : "false"});
            emit(g, out, t);
        } else if (*cc) {
            if (!(c_min < c_max)) throw CLI::ValidationError("--dose-min", "must be below --dose-max");
            CsvTable t({"schema_version", "link", "dose", "pi"});
            json curves = json::array();
            for (const auto& name : c_links) {
                const auto link = boin::parse_link(name);
                const double b0 = c_pref ? boin::link_forward(link, *c_pref) : c_beta0;
                json pts = json::array();
                for (int i = 0; i < c_points; ++i) {
                    const double dose = c_min + (c_max - c_min) * i / (c_points - 1);
                    const double p = boin::model_prob(b0, c_beta1, dose, c_ref, link);
                    t.row({std::to_string(boin::schema_version), std::string(boin::to_string(link)), CsvTable::num(dose, 10),
                           CsvTable::num(p, 10)});
                    pts.push_back({dose, p});
                }
                curves.push_back({{"link", std::string(boin::to_string(link))}, {"beta0", b0}, {"points", std::move(pts)}});
            }
            emit(g, {{"schema_version", boin::schema_version}, {"ref_dose", c_ref}, {"beta1", c_beta1}, {"curves", std::move(curves)}}, t);
        } else if (*cv) {
            boin::ConductService svc({v_dir, false});
            httplib::Server server;
            boin::mount(server, svc);
            std::cerr << "boin: serving " << svc.size() << " stored trial(s) from " << v_dir << " on http://" << v_host
                      << ":" << v_port << '\n';
            if (!server.listen(v_host, v_port)) {
                std::cerr << "boin: cannot listen on " << v_host << ":" << v_port << '\n';
                return 1;
            }
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const boin::Error& e) {
        std::cerr << "boin: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "boin: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
