#include "sctflow/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace sctflow {

std::vector<Window> segment_trace(const PowerTrace& t, long p, int n_steps, TriggerHint hint) {
    if (p < 1 || n_steps < 1) throw ValidationError("segment_trace: step length and count must be positive");
    if (hint == TriggerHint::oracle) {
        if (!t.annotations) throw TriggerNotFound("trigger not found: trace has no annotations (oracle mode)");
        std::vector<Window> w;
        for (const auto& [b, e] : t.annotations->steps) w.push_back({b, e});
        if (static_cast<int>(w.size()) != n_steps)
            throw ValidationError("annotations hold " + std::to_string(w.size()) + " steps, expected " + std::to_string(n_steps));
        return w;
    }
    const long n = static_cast<long>(t.samples.size());
    const long span = static_cast<long>(n_steps) * p;
    if (n < span + 2 * p) throw ValidationError("trace shorter than one leak sequence plus guard segments");
    std::vector<double> s1(static_cast<size_t>(n + 1), 0.0), s2(static_cast<size_t>(n + 1), 0.0);
    double shift = t.samples.front();  // improves conditioning of the running sums
    for (long i = 0; i < n; ++i) {
        double x = t.samples[static_cast<size_t>(i)] - shift;
        s1[static_cast<size_t>(i + 1)] = s1[static_cast<size_t>(i)] + x;
        s2[static_cast<size_t>(i + 1)] = s2[static_cast<size_t>(i)] + x * x;
    }
    auto sse = [&](long a, long b) {
        double m = s1[static_cast<size_t>(b)] - s1[static_cast<size_t>(a)];
        double q = s2[static_cast<size_t>(b)] - s2[static_cast<size_t>(a)];
        return std::max(0.0, q - m * m / static_cast<double>(b - a));
    };
    // The samples after the sequence form one constant idle segment; every step sits above it.
    std::vector<std::pair<double, long>> cand;
    for (long s = p; s + span + p <= n; ++s) {
        double c = sse(s - p, s) + sse(s + span, n);
        for (int k = 0; k < n_steps; ++k) c += sse(s + k * p, s + (k + 1) * p);
        cand.push_back({c, s});
    }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    auto mean = [&](long a, long b) { return (s1[static_cast<size_t>(b)] - s1[static_cast<size_t>(a)]) / static_cast<double>(b - a); };
    const double used = static_cast<double>(n);
    long best_s = -1;
    for (const auto& [c, s] : cand) {
        const double dof = used - (n_steps + 2);
        const double sigma = dof > 0 ? std::sqrt(c / dof) : 0.0;
        const double se = sigma / std::sqrt(static_cast<double>(p));
        const double tail = mean(s + span, n);
        double lowest = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n_steps; ++k) lowest = std::min(lowest, mean(s + k * p, s + (k + 1) * p) - tail);
        if (lowest > 6 * se && lowest > 1e-9) {
            best_s = s;
            break;
        }
    }
    if (best_s < 0) throw TriggerNotFound("trigger not found: no RO steps stand out of the trace");
    std::vector<Window> w;
    for (int k = 0; k < n_steps; ++k) w.push_back({best_s + k * p, best_s + (k + 1) * p});
    return w;
}

std::vector<double> window_means(const PowerTrace& t, const std::vector<Window>& ws, double trim) {
    std::vector<double> m;
    for (const auto& w : ws) {
        long len = w.end - w.begin;
        long cut = static_cast<long>(std::floor(len * trim));
        if (len - 2 * cut < 1) cut = 0;
        double s = 0;
        for (long i = w.begin + cut; i < w.end - cut; ++i) s += t.samples[static_cast<size_t>(i)];
        m.push_back(s / static_cast<double>(len - 2 * cut));
    }
    return m;
}

QuantizeResult quantize_symbols(const std::vector<double>& means, int n_levels, const QuantizeOptions& opt) {
    if (n_levels < 2) throw ValidationError("need at least two levels");
    QuantizeResult r;
    const size_t n = means.size();
    r.ranks.assign(n, 0);
    r.confidence.assign(n, 0.5);
    if (n == 0) {
        r.ambiguous = true;
        r.message = "no windows";
        return r;
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return means[a] > means[b]; });
    // gaps[k] between sorted k and k+1
    std::vector<std::pair<double, size_t>> gaps;
    for (size_t k = 0; k + 1 < n; ++k) gaps.push_back({means[order[k]] - means[order[k + 1]], k});
    std::stable_sort(gaps.begin(), gaps.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const size_t cuts_wanted = static_cast<size_t>(n_levels - 1);
    const size_t cuts = std::min(cuts_wanted, gaps.size());
    std::vector<size_t> cut_at;
    for (size_t k = 0; k < cuts; ++k) cut_at.push_back(gaps[k].second);
    std::sort(cut_at.begin(), cut_at.end());
    double min_sel = cuts ? gaps[cuts - 1].first : 0.0;
    double max_unsel = gaps.size() > cuts ? gaps[cuts].first : 0.0;
    // without a noise estimate, a real split must clearly dominate the spread inside clusters
    double thresh = std::max({opt.noise_se_ua > 0 ? max_unsel : 2 * max_unsel, 0.5 * opt.quantization_ua, 1e-9});
    if (cuts < cuts_wanted) {
        r.ambiguous = true;
        r.message = "fewer windows than levels";
    } else if (min_sel <= thresh) {
        r.ambiguous = true;
        char buf[200];
        std::snprintf(buf, sizeof buf, "ambiguous levels: weakest split %.4f uA is not above %.4f uA (fewer distinct clusters than levels)",
                      min_sel, thresh);
        r.message = buf;
    }
    // assign ranks
    std::vector<double> sum(static_cast<size_t>(n_levels), 0.0);
    std::vector<int> cnt(static_cast<size_t>(n_levels), 0);
    int rank = 0;
    size_t ci = 0;
    for (size_t k = 0; k < n; ++k) {
        r.ranks[order[k]] = rank;
        sum[static_cast<size_t>(rank)] += means[order[k]];
        ++cnt[static_cast<size_t>(rank)];
        if (ci < cut_at.size() && cut_at[ci] == k) {
            ++rank;
            ++ci;
        }
    }
    for (int l = 0; l < n_levels; ++l)
        r.levels_ua.push_back(cnt[static_cast<size_t>(l)] ? sum[static_cast<size_t>(l)] / cnt[static_cast<size_t>(l)]
                                                          : std::numeric_limits<double>::quiet_NaN());
    // distinct clusters: every window's 95 % interval stays on its side of the midpoint boundary
    if (!r.ambiguous && opt.noise_se_ua > 0) {
        double closest = std::numeric_limits<double>::infinity();
        for (int l = 0; l + 1 < n_levels; ++l)
            closest = std::min(closest, r.levels_ua[static_cast<size_t>(l)] - r.levels_ua[static_cast<size_t>(l + 1)]);
        if (closest <= 2 * 1.96 * opt.noise_se_ua) {
            r.ambiguous = true;
            char buf[200];
            std::snprintf(buf, sizeof buf, "ambiguous levels: closest levels %.4f uA apart, not above %.4f uA (2 x 1.96 standard errors)",
                          closest, 2 * 1.96 * opt.noise_se_ua);
            r.message = buf;
        }
    }
    // confidence from the distance to the nearest decision boundary (midpoint between levels)
    for (size_t i = 0; i < n; ++i) {
        int l = r.ranks[i];
        double d = std::numeric_limits<double>::infinity();
        if (l > 0 && !std::isnan(r.levels_ua[static_cast<size_t>(l - 1)]))
            d = std::min(d, 0.5 * (r.levels_ua[static_cast<size_t>(l - 1)] + r.levels_ua[static_cast<size_t>(l)]) - means[i]);
        if (l + 1 < n_levels && !std::isnan(r.levels_ua[static_cast<size_t>(l + 1)]))
            d = std::min(d, means[i] - 0.5 * (r.levels_ua[static_cast<size_t>(l)] + r.levels_ua[static_cast<size_t>(l + 1)]));
        if (opt.noise_se_ua > 0 && std::isfinite(d))
            r.confidence[i] = 0.5 * std::erfc(-d / (opt.noise_se_ua * std::sqrt(2.0)));
        else
            r.confidence[i] = d > 0 ? 1.0 : 0.5;
    }
    return r;
}

std::vector<int> recover_key(const std::vector<int>& ranks, int n_leak) {
    if (n_leak < 1 || n_leak > 2) throw ValidationError("n_leak must be 1 or 2");
    std::vector<int> bits;
    for (int r : ranks) {
        if (r < 0 || r >= (1 << n_leak)) throw ValidationError("symbol rank out of range");
        for (int b = n_leak - 1; b >= 0; --b) bits.push_back((r >> b) & 1);
    }
    return bits;
}

json KeyRecoveryResult::to_json() const {
    json w = json::array();
    for (const auto& x : windows) w.push_back({x.begin, x.end});
    json j = {{"key_hex", key_to_hex(bits)},
              {"bits", bits.size()},
              {"levels_ua", levels_ua},
              {"symbol_confidences", symbol_confidences},
              {"windows", w},
              {"ambiguous", ambiguous},
              {"message", message}};
    if (has_truth) {
        j["success"] = success;
        j["bit_errors"] = bit_errors;
    }
    return j;
}

KeyRecoveryResult decode_trace(const PowerTrace& t, const DecodeOptions& opt, const std::vector<int>* truth) {
    if (opt.n_key <= 0 || opt.n_key % opt.n_leak) throw ValidationError("n_key must be a positive multiple of n_leak");
    if (!(t.dt > 0)) throw ValidationError("trace has no sample interval");
    const long p = std::lround(opt.step_s / t.dt);
    const int n_steps = opt.n_key / opt.n_leak;
    KeyRecoveryResult r;
    r.windows = segment_trace(t, p, n_steps, opt.hint);
    const auto means = window_means(t, r.windows);
    // per-window noise from the within-window scatter
    double ss = 0;
    long dof = 0;
    for (size_t k = 0; k < r.windows.size(); ++k) {
        const auto& w = r.windows[k];
        long cut = static_cast<long>(std::floor((w.end - w.begin) * 0.1));
        long len = w.end - w.begin - 2 * cut;
        for (long i = w.begin + cut; i < w.end - cut; ++i) {
            double d = t.samples[static_cast<size_t>(i)] - means[k];
            ss += d * d;
        }
        dof += len - 1;
    }
    const double sigma = dof > 0 ? std::sqrt(ss / static_cast<double>(dof)) : 0.0;
    const double len = static_cast<double>(p - 2 * static_cast<long>(std::floor(p * 0.1)));
    QuantizeOptions qo;
    qo.noise_se_ua = sigma / std::sqrt(std::max(1.0, len));
    qo.quantization_ua = opt.quantization_ua;
    QuantizeResult q = quantize_symbols(means, 1 << opt.n_leak, qo);
    r.bits = recover_key(q.ranks, opt.n_leak);
    r.symbol_confidences = q.confidence;
    r.levels_ua = q.levels_ua;
    r.ambiguous = q.ambiguous;
    r.message = q.message;
    if (truth) {
        if (truth->size() != r.bits.size()) throw ValidationError("reference key length mismatch");
        r.has_truth = true;
        for (size_t i = 0; i < r.bits.size(); ++i) r.bit_errors += r.bits[i] != (*truth)[i];
        r.success = r.bit_errors == 0 && !r.ambiguous;
    }
    return r;
}

std::vector<int> random_key(int n_bits, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x6b6579));
    std::vector<int> k(static_cast<size_t>(n_bits));
    for (auto& b : k) b = static_cast<int>(rng() & 1u);
    return k;
}

json CampaignReport::to_json() const {
    return {{"design", design},
            {"dies", n_dies},
            {"repeats", repeats},
            {"runs", runs.size()},
            {"success_rate", success_rate},
            {"bit_error_rate", ber},
            {"window_mismatches", window_mismatches},
            {"windows_total", windows_total},
            {"separability", stats.to_json()},
            {"runtime_s", runtime_s}};
}

std::string CampaignReport::runs_csv() const {
    std::string s = "die,repeat,success,ber\n";
    char buf[96];
    for (const auto& r : runs) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.6f\n", r.die, r.repeat, r.success ? 1 : 0, round6(r.ber));
        s += buf;
    }
    return s;
}

CampaignReport campaign(const PlacedDesign& trojaned, const CampaignOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    CampaignReport rep;
    rep.design = trojaned.name;
    rep.n_dies = std::max(0, opt.n_dies);
    rep.repeats = std::max(0, opt.repeats);
    if (rep.n_dies == 0 || rep.repeats == 0) return rep;
    SimContext ctx = SimContext::make(trojaned);
    opt.trace.validate();
    if (!opt.key.empty() && static_cast<int>(opt.key.size()) != ctx.sct.n_key)
        throw ValidationError("campaign key length does not match n_key");
    DecodeOptions dopt;
    dopt.n_key = ctx.sct.n_key;
    dopt.n_leak = ctx.sct.n_leak;
    dopt.step_s = opt.trace.step_s;
    dopt.hint = opt.hint;
    dopt.quantization_ua = opt.trace.quantization_ua;
    const double w = trojaned.core_width_um(), h = trojaned.core_height_um();
    const int total = rep.n_dies * rep.repeats;
    rep.runs.resize(static_cast<size_t>(total));
    std::vector<std::array<double, 4>> amp(static_cast<size_t>(rep.n_dies));
    std::vector<int> mism(static_cast<size_t>(total), 0), wins(static_cast<size_t>(total), 0);
    std::vector<std::vector<std::array<double, 4>>> per_run(static_cast<size_t>(rep.n_dies),
                                                           std::vector<std::array<double, 4>>(static_cast<size_t>(rep.repeats)));
    auto work = [&](int t0i, int nt) {
        for (int die = t0i; die < rep.n_dies; die += nt) {
            ProcessSample p = draw_process(opt.process, w, h, opt.seed, static_cast<std::uint64_t>(die));
            std::vector<int> key = opt.key.empty() ? random_key(ctx.sct.n_key, mix_seed(opt.seed, static_cast<std::uint64_t>(die)))
                                                   : opt.key;
            for (int rp = 0; rp < rep.repeats; ++rp) {
                PowerTrace tr = simulate_trace(ctx, key, p, opt.trace,
                                               mix_seed(opt.seed, static_cast<std::uint64_t>(die), static_cast<std::uint64_t>(rp) + 1));
                size_t idx = static_cast<size_t>(die * rep.repeats + rp);
                per_run[static_cast<size_t>(die)][static_cast<size_t>(rp)] = measured_amplitudes(tr);
                CampaignRun run;
                run.die = die;
                run.repeat = rp;
                try {
                    KeyRecoveryResult kr = decode_trace(tr.attacker_view(), dopt, &key);
                    run.success = kr.success;
                    run.ambiguous = kr.ambiguous;
                    run.ber = static_cast<double>(kr.bit_errors) / static_cast<double>(key.size());
                    const auto& ann = tr.annotations->steps;
                    wins[idx] = static_cast<int>(ann.size());
                    for (size_t k = 0; k < ann.size(); ++k)
                        if (kr.windows[k].begin != ann[k].first || kr.windows[k].end != ann[k].second) ++mism[idx];
                } catch (const AmbiguityError&) {
                    run.success = false;
                    run.ambiguous = true;
                    run.ber = 0.5;
                    wins[idx] = mism[idx] = static_cast<int>(tr.annotations->steps.size());
                }
                rep.runs[idx] = run;
            }
        }
    };
    int threads = std::clamp(opt.threads, 1, rep.n_dies);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }
    int ok = 0;
    double ber = 0;
    for (const auto& r : rep.runs) {
        ok += r.success;
        ber += r.ber;
    }
    for (int i = 0; i < total; ++i) {
        rep.window_mismatches += mism[static_cast<size_t>(i)];
        rep.windows_total += wins[static_cast<size_t>(i)];
    }
    rep.success_rate = static_cast<double>(ok) / total;
    rep.ber = ber / total;
    // per-die amplitude: mean over repeats
    for (int d = 0; d < rep.n_dies; ++d) {
        for (int v = 0; v < 4; ++v) {
            double s = 0;
            int c = 0;
            for (const auto& a : per_run[static_cast<size_t>(d)]) {
                if (std::isnan(a[static_cast<size_t>(v)])) continue;
                s += a[static_cast<size_t>(v)];
                ++c;
            }
            amp[static_cast<size_t>(d)][static_cast<size_t>(v)] = c ? s / c : std::numeric_limits<double>::quiet_NaN();
        }
    }
    rep.stats = separability(amp, ctx.sct.n_leak);
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace sctflow
