#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sctflow/attack.hpp"
#include "sctflow/pipeline.hpp"

namespace py = pybind11;
using namespace sctflow;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.loads/dumps.
std::string dump(const json& j) { return j.dump(); }

std::string generate(const std::string& preset, std::uint64_t seed) {
    return generate_target(preset_profile(preset), seed).serialize();
}

std::string analyze(const std::string& design, int n_key, double freq_mhz) {
    PlacedDesign d = parse_design_text(design);
    return dump(analyze_design(d, n_key, freq_mhz).to_json(false));
}

std::string design(const std::string& report, const std::string& ro_class, double fraction, int n_leak,
                   double competing_leakage_uw, bool allow_power_violation) {
    AnalyzeReport a = AnalyzeReport::from_json(json::parse(report));
    SctRequest q;
    q.target = a.power;
    q.target_freq_mhz = a.analysis_mhz;
    q.n_key = a.n_key;
    q.n_leak = n_leak;
    q.fraction = fraction;
    q.competing_leakage_uw = competing_leakage_uw;
    q.ro_class = ro_class.empty() ? ro_class_for(a.design) : ro_class;
    try {
        return dump(design_sct(*default_library(), q).to_json());
    } catch (const InfeasibleError& e) {
        if (!allow_power_violation || e.constraint != "power") throw;
        q.enforce_power = false;
        return dump(design_sct(*default_library(), q).to_json());
    }
}

py::tuple insert(const std::string& design, const std::string& sct) {
    PlacedDesign d = parse_design_text(design);
    EcoPatch p = make_patch(d, SctConfig::from_json(json::parse(sct)));
    PlacedDesign t = apply_eco(d, p);
    SignoffReport s = signoff(t);
    return py::make_tuple(t.serialize(), dump(p.to_json()), dump(s.to_json()));
}

std::string revert(const std::string& trojaned, const std::string& patch) {
    return revert_eco(parse_design_text(trojaned), EcoPatch::from_json(json::parse(patch))).serialize();
}

py::dict simulate(const std::string& trojaned, const std::string& key_hex, std::uint64_t seed, std::uint64_t die,
                  double noise_sigma_ua) {
    PlacedDesign t = parse_design_text(trojaned);
    SctConfig cfg = SctConfig::from_json(t.extra.at("sct"));
    TraceConfig tc;
    if (noise_sigma_ua >= 0) tc.noise_sigma_ua = noise_sigma_ua;
    ProcessSample p = draw_process(ProcessModel{}, t.core_width_um(), t.core_height_um(), seed, die);
    PowerTrace tr = simulate_trace(t, key_from_hex(key_hex, cfg.n_key), p, tc, seed ^ (die + 1));
    py::dict out;
    out["samples_ua"] = tr.samples;
    out["dt_s"] = tr.dt;
    out["step_s"] = tc.step_s;
    out["n_key"] = cfg.n_key;
    out["n_leak"] = cfg.n_leak;
    return out;
}

std::string decode(const std::vector<double>& samples, double dt_s, int n_key, int n_leak, double step_s) {
    PowerTrace t;
    t.samples = samples;
    t.dt = dt_s;
    DecodeOptions o;
    o.n_key = n_key;
    o.n_leak = n_leak;
    o.step_s = step_s;
    return dump(decode_trace(t, o).to_json());
}

std::string run_campaign(const std::string& trojaned, int dies, int repeats, std::uint64_t seed, int threads) {
    PlacedDesign t = parse_design_text(trojaned);
    CampaignOptions o;
    o.n_dies = dies;
    o.repeats = repeats;
    o.seed = seed;
    o.threads = threads;
    json j = campaign(t, o).to_json();
    j.erase("runtime_s");
    return dump(j);
}

std::string monte_carlo(const std::string& design, int samples, std::uint64_t seed, int threads) {
    return dump(monte_carlo_static(parse_design_text(design), samples, seed, ProcessModel{}, 50, threads).to_json());
}

std::string calibrate() { return dump(calibrate_ro_constants(ro_table_anchors(), make_default_library()).to_json()); }

double ro_freq(const std::string& ro_class, std::array<int, 4> n_d, int n_i, int s0, int s1) {
    RoDesign r{n_d, n_i, ro_class, default_class_flavor(ro_class)};
    r.validate();
    return ro_frequency_mhz(*default_library(), r, s0, s1);
}

double ro_pow(const std::string& ro_class, std::array<int, 4> n_d, int n_i, int s0, int s1) {
    RoDesign r{n_d, n_i, ro_class, default_class_flavor(ro_class)};
    r.validate();
    return ro_power_uw(*default_library(), r, s0, s1);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    auto infeasible = py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
    py::register_exception<AmbiguityError>(m, "AmbiguityError", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", validation.ptr());
    (void)validation;
    (void)infeasible;

    m.def("presets", &preset_names);
    m.def("generate", &generate, py::arg("preset"), py::arg("seed") = 1);
    m.def("analyze", &analyze, py::arg("design"), py::arg("n_key"), py::arg("freq_mhz") = 0.0);
    m.def("design_sct", &design, py::arg("report"), py::arg("ro_class") = "", py::arg("fraction") = 0.10,
          py::arg("n_leak") = 2, py::arg("competing_leakage_uw") = 0.0, py::arg("allow_power_violation") = false);
    m.def("insert", &insert, py::arg("design"), py::arg("sct"));
    m.def("revert", &revert, py::arg("trojaned"), py::arg("patch"));
    m.def("simulate", &simulate, py::arg("trojaned"), py::arg("key_hex"), py::arg("seed") = 1, py::arg("die") = 0,
          py::arg("noise_sigma_ua") = -1.0);
    m.def("decode", &decode, py::arg("samples_ua"), py::arg("dt_s"), py::arg("n_key"), py::arg("n_leak") = 2,
          py::arg("step_s") = 1e-3);
    m.def("campaign", &run_campaign, py::arg("trojaned"), py::arg("dies") = 25, py::arg("repeats") = 3,
          py::arg("seed") = 1, py::arg("threads") = 1);
    m.def("monte_carlo", &monte_carlo, py::arg("design"), py::arg("samples") = 10000, py::arg("seed") = 1,
          py::arg("threads") = 1);
    m.def("calibrate", &calibrate);
    m.def("ro_frequency_mhz", &ro_freq, py::arg("ro_class"), py::arg("n_d"), py::arg("n_i"), py::arg("s0"), py::arg("s1"));
    m.def("ro_power_uw", &ro_pow, py::arg("ro_class"), py::arg("n_d"), py::arg("n_i"), py::arg("s0"), py::arg("s1"));
}
