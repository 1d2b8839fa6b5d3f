#include "sctflow/pipeline.hpp"

#include <filesystem>

namespace sctflow {

json AnalyzeReport::to_json(bool with_timings) const {
    json j = {{"format", "sctflow-analysis"},
              {"design", design},
              {"estimated_mhz", estimated_mhz},
              {"analysis_mhz", analysis_mhz},
              {"power", power.to_json()},
              {"density", density},
              {"instances", instances},
              {"n_key", n_key},
              {"key_registers", key_registers},
              {"key_confidence", key_confidence}};
    if (with_timings) j["stage_seconds"] = stage_seconds;
    return j;
}

AnalyzeReport AnalyzeReport::from_json(const json& j) {
    try {
        if (j.value("format", std::string()) != "sctflow-analysis") throw ParseError("not an sctflow analysis report");
        AnalyzeReport r;
        r.design = j.at("design").get<std::string>();
        r.estimated_mhz = j.at("estimated_mhz").get<double>();
        r.analysis_mhz = j.at("analysis_mhz").get<double>();
        r.power = PowerReport::from_json(j.at("power"));
        r.density = j.at("density").get<double>();
        r.instances = j.value("instances", 0);
        r.n_key = j.at("n_key").get<int>();
        r.key_registers = j.value("key_registers", std::vector<std::string>{});
        r.key_confidence = j.value("key_confidence", 0.0);
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("analysis report: ") + e.what());
    }
}

AnalyzeReport analyze_design(const PlacedDesign& d, int n_key, double freq_mhz, double margin_ps) {
    AnalyzeReport r;
    r.design = d.name;
    StageTimer t;
    Netlist n = extract_netlist(d, ExtractMode::attacker);
    r.stage_seconds["netlist_extraction"] = t.seconds();
    if (n.instances.empty()) throw ValidationError("design has no logic instances");
    StageTimer t2;
    r.estimated_mhz = estimate_frequency(n, margin_ps);
    r.stage_seconds["frequency_estimation"] = t2.seconds();
    StageTimer t3;
    r.analysis_mhz = freq_mhz > 0 ? freq_mhz : r.estimated_mhz;
    r.power = power_report(d, r.analysis_mhz);
    r.density = d.density();
    r.stage_seconds["power_analysis"] = t3.seconds();
    for (const auto& i : n.instances)
        if (!n.kind_of(static_cast<int>(&i - n.instances.data())).is_port) ++r.instances;
    r.n_key = n_key;
    if (n_key > 0) {
        StageTimer t4;
        auto groups = rank_register_groups(n, n_key);
        if (!groups.empty()) {
            Netlist named = design_netlist(d);
            for (int idx : groups.front().registers) r.key_registers.push_back(named.instances[static_cast<size_t>(idx)].id);
            r.key_confidence = groups.front().confidence;
        }
        r.stage_seconds["key_register_search"] = t4.seconds();
    }
    return r;
}

PresetRun run_preset(const std::string& preset, const PresetRunOptions& opt) {
    PresetRun r;
    r.profile = preset_profile(preset);
    r.design = generate_target(r.profile, opt.seed);
    AnalyzeReport a = analyze_design(r.design, r.profile.n_key);
    r.report = a.power;
    SctRequest q;
    q.target = a.power;
    q.target_freq_mhz = a.analysis_mhz;
    q.n_key = r.profile.n_key;
    q.n_leak = opt.n_leak;
    q.fraction = opt.fraction;
    q.ro_class = ro_class_for(preset);
    try {
        r.sct = design_sct(*r.design.library, q);
    } catch (const InfeasibleError& e) {
        if (!opt.allow_power_violation || e.constraint != "power") throw;
        q.enforce_power = false;
        r.sct = design_sct(*r.design.library, q);
    }
    InsertOptions io;
    io.key_mode = opt.key_mode;
    r.patch = make_patch(r.design, r.sct, io);
    r.sct = SctConfig::from_json(r.patch.sct);
    r.trojaned = apply_eco(r.design, r.patch);
    return r;
}

std::vector<TestchipRow> testchip_adjustment(std::uint64_t seed, double fraction) {
    std::vector<TestchipRow> rows;
    for (const auto& preset : testchip_presets()) {
        TargetProfile prof = preset_profile(preset);
        PlacedDesign d = generate_target(prof, seed);
        AnalyzeReport a = analyze_design(d, prof.n_key);
        SctRequest q;
        q.target = a.power;
        q.target_freq_mhz = a.analysis_mhz;
        q.n_key = prof.n_key;
        q.fraction = fraction;
        q.ro_class = ro_class_for(preset);
        q.competing_leakage_uw = testchip_competing_leakage_uw(preset);
        std::string err;
        SctConfig cfg;
        try {
            cfg = design_sct(*d.library, q);
        } catch (const InfeasibleError& e) {
            err = e.what();
        }
        for (const auto& an : testchip_ro_anchors()) {
            if (an.ro_class != q.ro_class) continue;
            TestchipRow r;
            r.preset = preset;
            r.expected_ro = an.ro_name;
            r.symbol = an.symbol;
            r.expected_power_uw = an.power_uw;
            r.expected_freq_mhz = an.freq_mhz;
            r.error = err;
            if (err.empty()) {
                r.ro_name = cfg.ro.name();
                r.power_uw = cfg.symbol_power_uw[static_cast<size_t>(an.symbol)];
                r.freq_mhz = cfg.symbol_freq_mhz[static_cast<size_t>(an.symbol)];
                r.power_err = r.power_uw / an.power_uw - 1;
                r.freq_err = r.freq_mhz / an.freq_mhz - 1;
            }
            rows.push_back(r);
        }
    }
    return rows;
}

json testchip_to_json(const std::vector<TestchipRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json j = {{"preset", r.preset}, {"expected_ro", r.expected_ro}, {"symbol", r.symbol},
                  {"expected_power_uw", r.expected_power_uw}, {"expected_freq_mhz", r.expected_freq_mhz}};
        if (r.error.empty()) {
            j["ro"] = r.ro_name;
            j["power_uw"] = round6(r.power_uw);
            j["freq_mhz"] = round6(r.freq_mhz);
            j["power_err"] = round6(r.power_err);
            j["freq_err"] = round6(r.freq_err);
        } else {
            j["error"] = r.error;
        }
        out.push_back(j);
    }
    return out;
}

Manifest::Manifest(std::string command) : command_(std::move(command)) {}

void Manifest::input(const std::string& path) { inputs_[path] = sha256_hex(read_text_file(path)); }

void Manifest::input_text(const std::string& label, const std::string& content) { inputs_[label] = sha256_hex(content); }

void Manifest::output(const std::string& path) { outputs_.push_back(path); }

void Manifest::config(const std::string& key, json value) { config_[key] = std::move(value); }

void Manifest::seed(const std::string& key, std::uint64_t value) { seeds_[key] = value; }

void Manifest::stage(const std::string& name, double seconds) { stages_[name] = seconds; }

json Manifest::to_json() const {
    json out = json::array();
    for (const auto& p : outputs_) {
        std::string path = p.get<std::string>();
        std::error_code ec;
        if (std::filesystem::is_regular_file(path, ec))
            out.push_back({{"path", path}, {"sha256", sha256_hex(read_text_file(path))}});
        else
            out.push_back({{"path", path}});
    }
    return {{"format", "sctflow-manifest"},
            {"command", command_},
            {"inputs", inputs_},
            {"outputs", out},
            {"config", config_},
            {"seeds", seeds_},
            {"stage_seconds", stages_}};
}

void Manifest::write(const std::string& path) const { write_text_file(path, dump_json(to_json()) + "\n"); }

}  // namespace sctflow
