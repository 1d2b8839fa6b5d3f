#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "sctflow/attack.hpp"
#include "sctflow/eco.hpp"
#include "sctflow/pipeline.hpp"
#include "sctflow/sim.hpp"

namespace fs = std::filesystem;
using namespace sctflow;

namespace {

enum Exit { kOk = 0, kFailure = 1, kValidation = 2, kInfeasible = 3, kAmbiguous = 4 };

struct Common {
    std::string config_path;
    int jobs = 0;
    std::uint64_t seed = 1;
};

// Noise and process defaults: built-ins, then the config file, then flags.
struct Defaults {
    TraceConfig trace;
    ProcessModel process;
};

Defaults load_defaults(const Common& c, Manifest& m) {
    Defaults d;
    std::string path = c.config_path;
    if (path.empty())
        if (const char* env = std::getenv("SCTFLOW_CONFIG")) path = env;
    if (path.empty()) return d;
    json j = read_json_file(path);
    m.input(path);
    try {
        if (j.contains("trace")) d.trace = TraceConfig::from_json(j.at("trace"));
        if (j.contains("process")) d.process = ProcessModel::from_json(j.at("process"));
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return d;
}

int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    if (const char* env = std::getenv("SCTFLOW_JOBS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

std::string manifest_path(const std::string& output) {
    if (fs::is_directory(output)) return (fs::path(output) / "manifest.json").string();
    return output + ".manifest.json";
}

void finish(Manifest& m, const std::string& output) { m.write(manifest_path(output)); }

void write_json(const std::string& path, const json& j, Manifest& m) {
    write_text_file(path, dump_json(j) + "\n");
    m.output(path);
}

void write_text(const std::string& path, const std::string& text, Manifest& m) {
    write_text_file(path, text);
    m.output(path);
}

PlacedDesign load_design(const std::string& path, Manifest& m) {
    m.input(path);
    return parse_design(path);
}

std::string ro_class_of(const std::string& design_name, const std::string& override_class) {
    if (!override_class.empty()) return override_class;
    try {
        return ro_class_for(design_name);
    } catch (const ValidationError&) {
        throw ValidationError("cannot infer the RO class from design '" + design_name + "'; pass --ro-class");
    }
}

KeyMode parse_key_mode(const std::string& s) {
    if (s == "oracle") return KeyMode::oracle;
    if (s == "heuristic") return KeyMode::heuristic;
    throw ValidationError("key mode must be oracle or heuristic");
}

TriggerHint parse_hint(const std::string& s) {
    if (s == "oracle") return TriggerHint::oracle;
    if (s == "edge") return TriggerHint::edge_detect;
    throw ValidationError("trigger hint must be oracle or edge");
}

void add_common(CLI::App* sub, Common& c, bool seeded, bool parallel) {
    sub->add_option("--config", c.config_path,
                    "JSON config with \"trace\" and \"process\" sections (default: $SCTFLOW_CONFIG)");
    if (seeded) sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    if (parallel) sub->add_option("-j,--jobs", c.jobs, "worker threads (default: $SCTFLOW_JOBS or 1)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sctflow: side-channel trojan insertion, simulation and attack flow"};
    app.require_subcommand(1);
    app.footer(
        "Exit codes: 0 ok, 2 validation or parse error, 3 infeasible design or insertion, 4 decode ambiguity.\n"
        "Environment: SCTFLOW_CONFIG (default --config), SCTFLOW_JOBS (default --jobs).\n"
        "Every command writes <output>.manifest.json (or manifest.json inside an output directory).");

    Common c;
    std::function<int()> run;

    // generate
    std::string preset, out;
    auto* gen = app.add_subcommand("generate", "Generate a placed target design from a preset");
    gen->add_option("--preset", preset, "preset name")->required();
    gen->add_option("-o,--output", out, "design JSON")->required();
    add_common(gen, c, true, false);
    gen->callback([&] {
        run = [&] {
            Manifest m("generate");
            m.config("preset", preset);
            m.seed("seed", c.seed);
            StageTimer t;
            PlacedDesign d = generate_target(preset_profile(preset), c.seed);
            m.stage("generate", t.seconds());
            write_text(out, d.serialize(), m);
            finish(m, out);
            return kOk;
        };
    });

    // analyze
    std::string design_path;
    double freq_mhz = 0, margin_ps = 20;
    int n_key = -1;
    auto* ana = app.add_subcommand("analyze", "Extract netlist, estimate frequency, report power");
    ana->add_option("design", design_path, "design JSON")->required();
    ana->add_option("-o,--output", out, "analysis report JSON")->required();
    ana->add_option("--freq", freq_mhz, "analysis frequency in MHz (default: estimated)");
    ana->add_option("--margin", margin_ps, "timing margin in ps")->capture_default_str();
    ana->add_option("--nkey", n_key, "key width to search for (default: from the design profile)");
    add_common(ana, c, false, false);
    ana->callback([&] {
        run = [&] {
            Manifest m("analyze");
            PlacedDesign d = load_design(design_path, m);
            int nk = n_key;
            if (nk < 0) nk = d.extra.contains("profile") ? d.extra["profile"].value("n_key", 0) : 0;
            AnalyzeReport r = analyze_design(d, nk, freq_mhz, margin_ps);
            m.config("freq_mhz", freq_mhz);
            m.config("margin_ps", margin_ps);
            for (const auto& [k, v] : r.stage_seconds) m.stage(k, v);
            write_json(out, r.to_json(false), m);
            finish(m, out);
            return kOk;
        };
    });

    // design-sct
    std::string report_path, ro_class, flavor;
    double fraction = 0.10, area_cap = 0, separation = 2.0, competing = 0;
    int n_leak = 2;
    bool allow_violation = false;
    auto* dsct = app.add_subcommand("design-sct", "Size the trojan ring and controller from an analysis report");
    dsct->add_option("report", report_path, "analysis report JSON")->required();
    dsct->add_option("-o,--output", out, "SCT blueprint JSON")->required();
    dsct->add_option("--fraction", fraction, "power budget fraction of leakage + clock tree")->capture_default_str();
    dsct->add_option("--nleak", n_leak, "bits leaked per step (1 or 2)")->capture_default_str();
    dsct->add_option("--nkey", n_key, "key width (default: from the report)");
    dsct->add_option("--ro-class", ro_class, "RO constant class (default: from the design name)");
    dsct->add_option("--flavor", flavor, "force a Vt flavor (LVT, SVT, HVT)");
    dsct->add_option("--area-cap", area_cap, "area cap in um^2 (default: none)");
    dsct->add_option("--separation", separation, "minimum step separation in uA")->capture_default_str();
    dsct->add_option("--competing-leakage", competing, "extra leakage sharing the supply, uW")->capture_default_str();
    dsct->add_flag("--allow-power-violation", allow_violation,
                   "when no ring meets the budget, return the smallest ring meeting the separation");
    add_common(dsct, c, false, false);
    dsct->callback([&] {
        run = [&] {
            Manifest m("design-sct");
            m.input(report_path);
            AnalyzeReport a = AnalyzeReport::from_json(read_json_file(report_path));
            SctRequest q;
            q.target = a.power;
            q.target_freq_mhz = a.analysis_mhz;
            q.n_key = n_key > 0 ? n_key : a.n_key;
            q.n_leak = n_leak;
            q.fraction = fraction;
            q.ro_class = ro_class_of(a.design, ro_class);
            q.flavor = flavor;
            if (area_cap > 0) q.area_cap_um2 = area_cap;
            q.step_separation_ua = separation;
            q.competing_leakage_uw = competing;
            m.config("request", {{"fraction", fraction}, {"n_leak", n_leak}, {"n_key", q.n_key}, {"ro_class", q.ro_class},
                                 {"area_cap_um2", area_cap}, {"separation_ua", separation},
                                 {"competing_leakage_uw", competing}, {"allow_power_violation", allow_violation}});
            StageTimer t;
            SctConfig cfg;
            try {
                cfg = design_sct(*default_library(), q);
            } catch (const InfeasibleError& e) {
                if (!allow_violation || e.constraint != "power") throw;
                std::cerr << "warning: " << e.what() << "; inserting the smallest separating ring\n";
                q.enforce_power = false;
                cfg = design_sct(*default_library(), q);
            }
            m.stage("design_sct", t.seconds());
            write_json(out, cfg.to_json(), m);
            finish(m, out);
            return kOk;
        };
    });

    // insert
    std::string sct_path, patch_path, key_mode = "heuristic", trigger;
    double signoff_margin = 20;
    auto* ins = app.add_subcommand("insert", "Place and route the trojan into filler gaps (ECO), then sign off");
    ins->add_option("design", design_path, "design JSON")->required();
    ins->add_option("sct", sct_path, "SCT blueprint JSON")->required();
    ins->add_option("-o,--output", out, "trojaned design JSON")->required();
    ins->add_option("--patch", patch_path, "ECO patch JSON")->required();
    ins->add_option("--key-mode", key_mode, "key register search: heuristic or oracle")->capture_default_str();
    ins->add_option("--trigger", trigger, "trigger net (default: the design's done tag)");
    ins->add_option("--signoff-margin", signoff_margin, "timing margin in ps")->capture_default_str();
    add_common(ins, c, false, false);
    ins->callback([&] {
        run = [&] {
            Manifest m("insert");
            PlacedDesign d = load_design(design_path, m);
            m.input(sct_path);
            SctConfig cfg = SctConfig::from_json(read_json_file(sct_path));
            InsertOptions io;
            io.key_mode = parse_key_mode(key_mode);
            io.trigger_net = trigger;
            m.config("key_mode", key_mode);
            m.config("signoff_margin_ps", signoff_margin);
            StageTimer t;
            EcoPatch p = make_patch(d, cfg, io);
            m.stage("patch", t.seconds());
            StageTimer t2;
            PlacedDesign tro = apply_eco(d, p);
            m.stage("apply", t2.seconds());
            StageTimer t3;
            SignoffReport s = signoff(tro, signoff_margin);
            m.stage("signoff", t3.seconds());
            write_json(patch_path, p.to_json(), m);
            write_text(out, tro.serialize(), m);
            finish(m, out);
            if (!s.ok) {
                std::cerr << "signoff failed: worst " << s.worst_endpoint << " victim slack " << s.victim_min_slack
                          << " ps, trojan slack " << s.sct_min_slack << " ps\n"
                          << s.remedy << "\n";
                return kInfeasible;
            }
            return kOk;
        };
    });

    // simulate
    std::string key_hex, trojan_path;
    int dies = 1, repeats = 1;
    double noise = -1;
    auto* sim = app.add_subcommand("simulate", "Simulate supply-current traces over process samples");
    sim->add_option("trojaned", trojan_path, "trojaned design JSON")->required();
    sim->add_option("--key", key_hex, "key in hex, most significant bit first")->required();
    sim->add_option("--dies", dies, "number of dies")->capture_default_str();
    sim->add_option("--repeats", repeats, "traces per die")->capture_default_str();
    sim->add_option("--noise", noise, "noise sigma in uA (default: config)");
    sim->add_option("-o,--output", out, "output directory")->required();
    add_common(sim, c, true, true);
    sim->callback([&] {
        run = [&] {
            Manifest m("simulate");
            Defaults df = load_defaults(c, m);
            if (noise >= 0) df.trace.noise_sigma_ua = noise;
            if (dies < 1 || repeats < 1) throw ValidationError("--dies and --repeats must be at least 1");
            PlacedDesign tro = load_design(trojan_path, m);
            SimContext ctx = SimContext::make(tro);
            std::vector<int> key = key_from_hex(key_hex, ctx.sct.n_key);
            df.trace.validate();
            m.config("trace", df.trace.to_json());
            m.config("process", df.process.to_json());
            m.config("dies", dies);
            m.config("repeats", repeats);
            m.seed("seed", c.seed);
            fs::create_directories(out);
            StageTimer t;
            const int jobs = resolve_jobs(c.jobs);
            const double w = tro.core_width_um(), h = tro.core_height_um();
            std::vector<PowerTrace> traces(static_cast<size_t>(dies * repeats));
            std::vector<std::array<double, 4>> amp(static_cast<size_t>(dies));
            auto work = [&](int t0, int nt) {
                for (int die = t0; die < dies; die += nt) {
                    ProcessSample p = draw_process(df.process, w, h, c.seed, static_cast<std::uint64_t>(die));
                    std::array<double, 4> sum{}, cnt{};
                    for (int rp = 0; rp < repeats; ++rp) {
                        PowerTrace tr = simulate_trace(
                            ctx, key, p, df.trace,
                            mix_seed(c.seed, static_cast<std::uint64_t>(die), static_cast<std::uint64_t>(rp) + 1));
                        auto a = measured_amplitudes(tr);
                        for (size_t v = 0; v < 4; ++v)
                            if (!std::isnan(a[v])) sum[v] += a[v], cnt[v] += 1;
                        traces[static_cast<size_t>(die * repeats + rp)] = std::move(tr);
                    }
                    for (size_t v = 0; v < 4; ++v)
                        amp[static_cast<size_t>(die)][v] = cnt[v] > 0 ? sum[v] / cnt[v] : std::nan("");
                }
            };
            std::vector<std::thread> pool;
            const int nt = std::clamp(jobs, 1, dies);
            for (int i = 0; i < nt; ++i) pool.emplace_back(work, i, nt);
            for (auto& th : pool) th.join();
            m.stage("simulate", t.seconds());
            json files = json::array();
            for (int die = 0; die < dies; ++die)
                for (int rp = 0; rp < repeats; ++rp) {
                    char stem[64];
                    std::snprintf(stem, sizeof stem, "die%03d_r%d", die, rp);
                    const auto& tr = traces[static_cast<size_t>(die * repeats + rp)];
                    std::string csv = (fs::path(out) / (std::string(stem) + ".csv")).string();
                    std::string ann = (fs::path(out) / (std::string(stem) + ".truth.json")).string();
                    write_text(csv, tr.to_csv(), m);
                    write_json(ann, tr.annotations->to_json(), m);
                    files.push_back({{"die", die}, {"repeat", rp}, {"trace", std::string(stem) + ".csv"},
                                     {"truth", std::string(stem) + ".truth.json"}});
                }
            json batch = {{"format", "sctflow-traces"},
                          {"design", tro.name},
                          {"n_key", ctx.sct.n_key},
                          {"n_leak", ctx.sct.n_leak},
                          {"key_hex", key_to_hex(key)},
                          {"trace", df.trace.to_json()},
                          {"traces", files},
                          {"separability", separability(amp, ctx.sct.n_leak).to_json()}};
            write_json((fs::path(out) / "batch.json").string(), batch, m);
            write_text((fs::path(out) / "ci.csv").string(), separability(amp, ctx.sct.n_leak).to_csv(), m);
            finish(m, out);
            return kOk;
        };
    });

    // attack
    std::string traces_dir, hint = "edge", runs_csv;
    bool score = false;
    auto* att = app.add_subcommand("attack", "Decode keys from a directory of traces");
    att->add_option("traces", traces_dir, "directory written by simulate")->required();
    att->add_option("-o,--output", out, "attack report JSON")->required();
    att->add_option("--hint", hint, "trigger location: edge (change-point detection) or oracle (truth files)")
        ->capture_default_str();
    att->add_flag("--score", score, "score each decode against the key recorded by simulate");
    att->add_option("--runs-csv", runs_csv, "per-trace CSV die,repeat,success,ber (needs --score)");
    add_common(att, c, false, true);
    att->callback([&] {
        run = [&] {
            Manifest m("attack");
            std::string batch_path = (fs::path(traces_dir) / "batch.json").string();
            m.input(batch_path);
            json batch = read_json_file(batch_path);
            if (batch.value("format", std::string()) != "sctflow-traces") throw ParseError("not an sctflow trace directory");
            DecodeOptions dopt;
            dopt.n_key = batch.at("n_key").get<int>();
            dopt.n_leak = batch.at("n_leak").get<int>();
            TraceConfig tc = TraceConfig::from_json(batch.at("trace"));
            dopt.step_s = tc.step_s;
            dopt.quantization_ua = tc.quantization_ua;
            dopt.hint = parse_hint(hint);
            m.config("hint", hint);
            std::vector<int> truth;
            if (score) truth = key_from_hex(batch.at("key_hex").get<std::string>(), dopt.n_key);
            const auto& files = batch.at("traces");
            const size_t n = files.size();
            std::vector<KeyRecoveryResult> res(n);
            std::vector<std::string> errors(n);
            StageTimer t;
            auto work = [&](size_t t0, size_t nt) {
                for (size_t i = t0; i < n; i += nt) {
                    const auto& f = files[i];
                    PowerTrace tr = PowerTrace::from_csv(read_text_file((fs::path(traces_dir) / f.at("trace").get<std::string>()).string()));
                    if (dopt.hint == TriggerHint::oracle)
                        tr.annotations = TraceAnnotations::from_json(
                            read_json_file((fs::path(traces_dir) / f.at("truth").get<std::string>()).string()));
                    try {
                        res[i] = decode_trace(tr, dopt, score ? &truth : nullptr);
                    } catch (const AmbiguityError& e) {
                        errors[i] = e.what();
                    }
                }
            };
            const size_t nt = std::clamp<size_t>(static_cast<size_t>(resolve_jobs(c.jobs)), 1, std::max<size_t>(1, n));
            std::vector<std::thread> pool;
            for (size_t i = 0; i < nt; ++i) pool.emplace_back(work, i, nt);
            for (auto& th : pool) th.join();
            m.stage("decode", t.seconds());
            json runs = json::array();
            int ambiguous = 0, ok = 0;
            double ber = 0;
            std::string csv = "die,repeat,success,ber\n";
            for (size_t i = 0; i < n; ++i) {
                m.input((fs::path(traces_dir) / files[i].at("trace").get<std::string>()).string());
                json r = {{"die", files[i].at("die")}, {"repeat", files[i].at("repeat")}};
                double b = 0.5;
                bool s = false;
                if (!errors[i].empty()) {
                    r["error"] = errors[i];
                    ++ambiguous;
                } else {
                    r.update(res[i].to_json());
                    ambiguous += res[i].ambiguous;
                    if (score) {
                        b = static_cast<double>(res[i].bit_errors) / dopt.n_key;
                        s = res[i].success;
                    }
                }
                if (score) {
                    ok += s;
                    ber += b;
                    char line[96];
                    std::snprintf(line, sizeof line, "%d,%d,%d,%.6f\n", files[i].at("die").get<int>(),
                                  files[i].at("repeat").get<int>(), s ? 1 : 0, round6(b));
                    csv += line;
                }
                runs.push_back(r);
            }
            json rep = {{"format", "sctflow-attack"}, {"design", batch.value("design", std::string())}, {"traces", n},
                        {"ambiguous", ambiguous}, {"runs", runs}};
            if (score && n > 0) {
                rep["success_rate"] = static_cast<double>(ok) / static_cast<double>(n);
                rep["bit_error_rate"] = ber / static_cast<double>(n);
            }
            write_json(out, rep, m);
            if (!runs_csv.empty()) {
                if (!score) throw ValidationError("--runs-csv needs --score");
                write_text(runs_csv, csv, m);
            }
            finish(m, out);
            return ambiguous > 0 ? kAmbiguous : kOk;
        };
    });

    // campaign
    std::string ci_csv;
    int n_dies = 25, camp_repeats = 3;
    auto* camp = app.add_subcommand("campaign", "Simulate and attack n dies x repeats with a random key per die");
    camp->add_option("trojaned", trojan_path, "trojaned design JSON")->required();
    camp->add_option("-o,--output", out, "campaign report JSON")->required();
    camp->add_option("--dies", n_dies, "number of dies")->capture_default_str();
    camp->add_option("--repeats", camp_repeats, "traces per die")->capture_default_str();
    camp->add_option("--noise", noise, "noise sigma in uA (default: config)");
    camp->add_option("--hint", hint, "trigger location: edge or oracle")->capture_default_str();
    camp->add_option("--runs-csv", runs_csv, "per-run CSV die,repeat,success,ber");
    camp->add_option("--ci-csv", ci_csv, "per-symbol confidence interval CSV");
    add_common(camp, c, true, true);
    camp->callback([&] {
        run = [&] {
            Manifest m("campaign");
            Defaults df = load_defaults(c, m);
            if (noise >= 0) df.trace.noise_sigma_ua = noise;
            PlacedDesign tro = load_design(trojan_path, m);
            CampaignOptions o;
            o.n_dies = n_dies;
            o.repeats = camp_repeats;
            o.seed = c.seed;
            o.trace = df.trace;
            o.process = df.process;
            o.hint = parse_hint(hint);
            o.threads = resolve_jobs(c.jobs);
            m.config("dies", o.n_dies);
            m.config("repeats", o.repeats);
            m.config("trace", o.trace.to_json());
            m.config("process", o.process.to_json());
            m.config("hint", hint);
            m.seed("seed", c.seed);
            CampaignReport r = campaign(tro, o);
            m.stage("campaign", r.runtime_s);
            json j = r.to_json();
            j.erase("runtime_s");
            j["format"] = "sctflow-campaign";
            write_json(out, j, m);
            if (!runs_csv.empty()) write_text(runs_csv, r.runs_csv(), m);
            if (!ci_csv.empty()) write_text(ci_csv, r.stats.to_csv(), m);
            finish(m, out);
            return kOk;
        };
    });

    // report
    std::string original_path, density_csv;
    double tile_um = 10;
    auto* rpt = app.add_subcommand("report", "Post-ECO metrics: density, routing by layer, signoff, spread");
    rpt->add_option("design", design_path, "original design JSON")->required();
    rpt->add_option("trojaned", trojan_path, "trojaned design JSON")->required();
    rpt->add_option("patch", patch_path, "ECO patch JSON")->required();
    rpt->add_option("-o,--output", out, "report JSON")->required();
    rpt->add_option("--density-csv", density_csv, "density map CSV of the trojaned design");
    rpt->add_option("--tile", tile_um, "density map tile in um")->capture_default_str();
    rpt->add_option("--signoff-margin", signoff_margin, "timing margin in ps")->capture_default_str();
    add_common(rpt, c, false, false);
    rpt->callback([&] {
        run = [&] {
            Manifest m("report");
            PlacedDesign d = load_design(design_path, m);
            PlacedDesign tro = load_design(trojan_path, m);
            m.input(patch_path);
            EcoPatch p = EcoPatch::from_json(read_json_file(patch_path));
            StageTimer t;
            PlacedDesign reverted = revert_eco(tro, p);
            const bool victim_untouched = same_design(reverted, d);
            RouteReport route = route_estimate(d, tro, p);
            SignoffReport s = signoff(tro, signoff_margin);
            const double f = 1e6 / d.clock_period_ps;
            json j = {{"format", "sctflow-report"},
                      {"design", d.name},
                      {"density_pre", round6(d.density())},
                      {"density_post", round6(tro.density())},
                      {"clock_tree_uw_pre", round6(clock_tree_power(d, f))},
                      {"clock_tree_uw_post", round6(clock_tree_power(tro, f))},
                      {"leakage_uw_pre", round6(static_power(d))},
                      {"leakage_uw_post", round6(static_power(tro))},
                      {"fillers_removed", p.removed_fillers.size()},
                      {"sct_cells", p.added_instances.size()},
                      {"spread_um", round6(p.spread_um)},
                      {"ro_spread_um", round6(p.ro_spread_um)},
                      {"patch_reverts_to_original", victim_untouched},
                      {"routing", route.to_json()},
                      {"signoff", s.to_json()}};
            m.stage("report", t.seconds());
            write_json(out, j, m);
            if (!density_csv.empty()) write_text(density_csv, density_map_csv(tro, tile_um), m);
            finish(m, out);
            return kOk;
        };
    });

    // mc
    int samples = 10000, bins = 50;
    std::string samples_csv, hist_csv;
    auto* mc = app.add_subcommand("mc", "Monte-Carlo static power over process samples");
    mc->add_option("design", design_path, "design JSON")->required();
    mc->add_option("-o,--output", out, "summary JSON")->required();
    mc->add_option("--samples", samples, "number of dies")->capture_default_str();
    mc->add_option("--bins", bins, "histogram bins")->capture_default_str();
    mc->add_option("--csv", samples_csv, "per-sample static power CSV");
    mc->add_option("--hist-csv", hist_csv, "histogram CSV power_uW,count");
    add_common(mc, c, true, true);
    mc->callback([&] {
        run = [&] {
            Manifest m("mc");
            Defaults df = load_defaults(c, m);
            PlacedDesign d = load_design(design_path, m);
            m.config("samples", samples);
            m.config("process", df.process.to_json());
            m.seed("seed", c.seed);
            StageTimer t;
            McSummary s = monte_carlo_static(d, samples, c.seed, df.process, bins, resolve_jobs(c.jobs));
            m.stage("monte_carlo", t.seconds());
            write_json(out, s.to_json(), m);
            if (!samples_csv.empty()) write_text(samples_csv, s.samples_csv(), m);
            if (!hist_csv.empty()) write_text(hist_csv, s.histogram.to_csv("power_uW"), m);
            finish(m, out);
            return kOk;
        };
    });

    // timing
    double corner = 0;
    auto* tim = app.add_subcommand("timing", "Static timing of a design at its clock or a given frequency");
    tim->add_option("design", design_path, "design JSON")->required();
    tim->add_option("-o,--output", out, "timing report JSON")->required();
    tim->add_option("--freq", freq_mhz, "clock in MHz (default: the design's clock)");
    tim->add_option("--margin", margin_ps, "timing margin in ps")->capture_default_str();
    tim->add_option("--corner", corner, "global delay corner in process sigmas (positive = fast)")->capture_default_str();
    tim->add_option("--bins", bins, "slack histogram bins")->capture_default_str();
    add_common(tim, c, false, false);
    tim->callback([&] {
        run = [&] {
            Manifest m("timing");
            Defaults df = load_defaults(c, m);
            PlacedDesign d = load_design(design_path, m);
            Netlist n = design_netlist(d);
            TimingOptions to;
            to.clock_period_ps = freq_mhz > 0 ? 1e6 / freq_mhz : d.clock_period_ps;
            to.margin_ps = margin_ps;
            to.global_delay_mult = ProcessSample::corner(df.process, corner).global_delay;
            m.config("period_ps", to.clock_period_ps);
            m.config("margin_ps", margin_ps);
            m.config("corner_sigma", corner);
            StageTimer t;
            TimingReport r;
            if (d.extra.contains("sct")) {
                // trojan endpoints are captured on the divided clock, as in sign-off
                d.clock_period_ps = to.clock_period_ps;
                SignoffReport s = signoff(d, margin_ps, to.global_delay_mult);
                r = s.victim;
                for (const auto& e : s.sct.endpoints) {
                    r.endpoints.push_back(e);
                    r.slack_per_endpoint[e.name] = e.slack;
                }
            } else {
                r = analyze_timing(n, to);
            }
            m.stage("sta", t.seconds());
            json j = r.to_json();
            Histogram h = slack_histogram(r, bins);
            j["slack_histogram"] = {{"lower_ps", h.lower}, {"width_ps", h.width}, {"counts", h.counts}};
            write_json(out, j, m);
            finish(m, out);
            return r.min_slack() >= 0 ? kOk : kInfeasible;
        };
    });

    // calibrate
    std::string include_out;
    double tolerance = 0.10;
    auto* cal = app.add_subcommand("calibrate", "Fit RO delay and energy constants to the anchor table");
    cal->add_option("-o,--output", out, "calibration JSON")->required();
    cal->add_option("--include", include_out, "also write the frozen-constant C++ include");
    cal->add_option("--tolerance", tolerance, "maximum relative residual")->capture_default_str();
    cal->add_flag("--testchip", score, "also evaluate the test-chip adjustment (written into the output)");
    add_common(cal, c, false, false);
    cal->callback([&] {
        run = [&] {
            Manifest m("calibrate");
            m.config("tolerance", tolerance);
            StageTimer t;
            CalibrationResult r = calibrate_ro_constants(ro_table_anchors(), make_default_library(), tolerance);
            m.stage("calibrate", t.seconds());
            json j = r.to_json();
            if (score) {
                StageTimer t2;
                j["testchip"] = testchip_to_json(testchip_adjustment());
                m.stage("testchip", t2.seconds());
            }
            write_json(out, j, m);
            if (!include_out.empty()) write_text(include_out, r.to_include(), m);
            finish(m, out);
            if (!r.ok()) {
                std::cerr << "calibration residual " << r.max_residual << " above tolerance " << tolerance << "\n";
                return kInfeasible;
            }
            return kOk;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }
    try {
        return run ? run() : kOk;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible (" << e.constraint << "): " << e.what() << "\n";
        return kInfeasible;
    } catch (const AmbiguityError& e) {
        std::cerr << "ambiguous: " << e.what() << "\n";
        return kAmbiguous;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kValidation;
    } catch (const ValidationError& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}
