#include "cobm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cobm {

using nlohmann::json;

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
}

double snr_from_json(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw ConfigError("config: snr_db must be a number or \"inf\"");
    }
    return v.get<double>();
}

json snr_to_json(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

}  // namespace

void ExperimentConfig::validate() const {
    dsp.validate();
    channel.validate();
    loop.validate();
    if (layout.total() != layout.n_pre_a + layout.n_pre_b + layout.n_payload + layout.n_pilot)
        throw ConfigError("config: frame layout accounting broken");
    if (method != "mmse" && method != "zf")
        throw ConfigError("config: method must be 'mmse' or 'zf'");
    if (seeds.empty()) throw ConfigError("config: at least one seed required");
    if (burst_gains_db.empty()) throw ConfigError("config: at least one burst required");
    if (ber_threshold <= 0 || ber_threshold >= 1)
        throw ConfigError("config: ber_threshold must be in (0, 1)");
    if (!sweep_variable.empty()) {
        static const std::set<std::string> vars{"snr_db", "l_b", "delta_f", "tau"};
        if (!vars.count(sweep_variable))
            throw ConfigError("config: sweep variable must be one of snr_db, l_b, delta_f, tau");
        if (sweep_values.empty()) throw ConfigError("config: sweep values must be non-empty");
    }
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["dsp"] = {{"rs", dsp.rs},
                {"k_os", dsp.k_os},
                {"n_dft", dsp.n_dft},
                {"rolloff", dsp.rolloff},
                {"rrc_span", dsp.rrc_span}};
    j["layout"] = json::parse(layout.to_json());
    j["channel"] = {{"alpha", channel.alpha},
                    {"theta", channel.theta},
                    {"delta_f", channel.delta_f},
                    {"tau", channel.tau},
                    {"fiber_km", channel.fiber_km},
                    {"disp_ps_nm_km", channel.disp_ps_nm_km},
                    {"lambda_nm", channel.lambda_nm},
                    {"linewidth_hz", channel.linewidth_hz},
                    {"snr_db", snr_to_json(channel.snr_db)},
                    {"guard_ns", channel.guard_ns},
                    {"burst_gains_db", burst_gains_db}};
    j["loop"] = {{"beat_symbols", loop.beat_symbols},
                 {"tr_delay_beats", loop.tr_delay_beats},
                 {"eq_delay_beats", loop.eq_delay_beats},
                 {"tr_kp", loop.tr_kp},
                 {"tr_ki", loop.tr_ki},
                 {"ddlms_mu", loop.ddlms_mu},
                 {"timing_loop", loop.timing_loop},
                 {"ddlms", loop.ddlms}};
    j["method"] = method;
    j["seeds"] = seeds;
    j["ber_threshold"] = ber_threshold;
    j["converter_fs_hz"] = converter_fs_hz;
    j["out_dir"] = out_dir;
    if (!sweep_variable.empty()) {
        j["sweep"] = {{"variable", sweep_variable}, {"values", sweep_values}};
    }
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    ExperimentConfig c;
    require_keys(j, {"dsp", "layout", "channel", "loop", "method", "seeds", "ber_threshold",
                     "converter_fs_hz", "out_dir", "sweep"},
                 "top level");
    if (j.contains("dsp")) {
        const auto& d = j["dsp"];
        require_keys(d, {"rs", "k_os", "n_dft", "rolloff", "rrc_span"}, "dsp");
        if (d.contains("rs")) c.dsp.rs = d["rs"].get<double>();
        if (d.contains("k_os")) c.dsp.k_os = d["k_os"].get<double>();
        if (d.contains("n_dft")) c.dsp.n_dft = d["n_dft"].get<int>();
        if (d.contains("rolloff")) c.dsp.rolloff = d["rolloff"].get<double>();
        if (d.contains("rrc_span")) c.dsp.rrc_span = d["rrc_span"].get<int>();
    }
    if (j.contains("layout")) c.layout = FrameLayout::from_json(j["layout"].dump());
    if (j.contains("channel")) {
        const auto& ch = j["channel"];
        require_keys(ch,
                     {"alpha", "theta", "delta_f", "tau", "fiber_km", "disp_ps_nm_km", "lambda_nm",
                      "linewidth_hz", "snr_db", "guard_ns", "burst_gains_db"},
                     "channel");
        if (ch.contains("alpha")) c.channel.alpha = ch["alpha"].get<double>();
        if (ch.contains("theta")) c.channel.theta = ch["theta"].get<double>();
        if (ch.contains("delta_f")) c.channel.delta_f = ch["delta_f"].get<double>();
        if (ch.contains("tau")) c.channel.tau = ch["tau"].get<double>();
        if (ch.contains("fiber_km")) c.channel.fiber_km = ch["fiber_km"].get<double>();
        if (ch.contains("disp_ps_nm_km")) c.channel.disp_ps_nm_km = ch["disp_ps_nm_km"].get<double>();
        if (ch.contains("lambda_nm")) c.channel.lambda_nm = ch["lambda_nm"].get<double>();
        if (ch.contains("linewidth_hz")) c.channel.linewidth_hz = ch["linewidth_hz"].get<double>();
        if (ch.contains("snr_db")) c.channel.snr_db = snr_from_json(ch["snr_db"]);
        if (ch.contains("guard_ns")) c.channel.guard_ns = ch["guard_ns"].get<double>();
        if (ch.contains("burst_gains_db"))
            c.burst_gains_db = ch["burst_gains_db"].get<std::vector<double>>();
    }
    if (j.contains("loop")) {
        const auto& l = j["loop"];
        require_keys(l,
                     {"beat_symbols", "tr_delay_beats", "eq_delay_beats", "tr_kp", "tr_ki",
                      "ddlms_mu", "timing_loop", "ddlms"},
                     "loop");
        if (l.contains("beat_symbols")) c.loop.beat_symbols = l["beat_symbols"].get<int>();
        if (l.contains("tr_delay_beats")) c.loop.tr_delay_beats = l["tr_delay_beats"].get<int>();
        if (l.contains("eq_delay_beats")) c.loop.eq_delay_beats = l["eq_delay_beats"].get<int>();
        if (l.contains("tr_kp")) c.loop.tr_kp = l["tr_kp"].get<double>();
        if (l.contains("tr_ki")) c.loop.tr_ki = l["tr_ki"].get<double>();
        if (l.contains("ddlms_mu")) c.loop.ddlms_mu = l["ddlms_mu"].get<double>();
        if (l.contains("timing_loop")) c.loop.timing_loop = l["timing_loop"].get<bool>();
        if (l.contains("ddlms")) c.loop.ddlms = l["ddlms"].get<bool>();
    }
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<uint64_t>>();
    if (j.contains("ber_threshold")) c.ber_threshold = j["ber_threshold"].get<double>();
    if (j.contains("converter_fs_hz")) c.converter_fs_hz = j["converter_fs_hz"].get<double>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        require_keys(s, {"variable", "values"}, "sweep");
        c.sweep_variable = s.at("variable").get<std::string>();
        c.sweep_values = s.at("values").get<std::vector<double>>();
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

ExperimentConfig ExperimentConfig::defaults() {
    // mirrors the two-burst experiment: 32 GBaud, roll-off 0.1, 20 km,
    // 45 ns guard, full impairment set at a workable SNR
    ExperimentConfig c;
    c.channel.alpha = 0.3;
    c.channel.theta = 1.0;
    c.channel.delta_f = 1e9;
    c.channel.tau = 0.2;
    c.channel.fiber_km = 20.0;
    c.channel.linewidth_hz = 200e3;
    c.channel.snr_db = 17.0;
    c.burst_gains_db = {0.0, -3.0};
    return c;
}

UplinkScene scene_from_config(const ExperimentConfig& cfg, uint64_t seed) {
    const QamGrid grid = QamGrid::qam16();
    std::vector<TxFrame> frames;
    std::vector<ChannelConfig> configs;
    for (int b = 0; b < cfg.n_bursts(); ++b) {
        frames.push_back(random_frame(seed * 1315423911ULL + b + 1, grid, cfg.layout));
        ChannelConfig ch = cfg.channel;
        ch.gain_db = cfg.burst_gains_db[b];
        configs.push_back(ch);
    }
    return assemble_uplink(frames, configs, cfg.dsp, seed, cfg.converter_fs_hz);
}

RxOptions rx_options_from_config(const ExperimentConfig& cfg) {
    RxOptions o;
    o.method = (cfg.method == "zf") ? ChanEstimate::Method::ZF : ChanEstimate::Method::MMSE;
    return o;
}

}  // namespace cobm
