#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dtmnav/format.hpp"
#include "dtmnav/simulation.hpp"
#include "dtmnav/solver.hpp"
#include "dtmnav/terrain.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using namespace dtmnav;

namespace {

constexpr const char* kVersion = "1.0.0";

enum ExitCode { kOk = 0, kDataError = 1, kUsageError = 2, kEstimationFailure = 3 };

/// Wraps a run: collects paths and writes the manifest next to the outputs.
struct Manifest {
    explicit Manifest(std::string cmd, std::uint64_t run_seed = 0) : command(std::move(cmd)), seed(run_seed) {}

    std::string command;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    /// Replays with `dtmnav --config <manifest> <command>`; the [run]
    /// section is ignored on replay.
    void write(const CLI::App& sub, const fs::path& path) const {
        std::string text = "# dtmnav run manifest\n[" + sub.get_name() + "]\n";
        text += sub.config_to_str(true, false);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        text += "\n[run]\n";
        text += "command=\"" + command + "\"\n";
        text += "version=\"" + std::string(kVersion) + "\"\n";
        text += "seed=" + std::to_string(seed) + "\n";
        text += "inputs=" + list(inputs) + "\n";
        text += "outputs=" + list(outputs) + "\n";
        text += "duration_sec=" + format_double(std::round(elapsed * 1e3) / 1e3) + "\n";
        write_text_file(path, text);
    }

    static std::string list(const std::vector<std::string>& items) {
        std::string s = "[";
        for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ", \"" : "\"") + items[i] + "\"";
        return s + "]";
    }
};

fs::path sidecar(const fs::path& out, const std::string& suffix) {
    fs::path p = out;
    p += suffix;
    return p;
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw NavError(ErrorCode::IoError, "cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) ensure_directory(file.parent_path());
}

// ---------------------------------------------------------------------------
// Solver flags shared by simulate and solve

struct SolverFlags {
    SolverConfig cfg;
    std::string jacobian = "analytic";

    void add(CLI::App& app) {
        app.add_option("--max-iterations", cfg.max_iterations, "Gauss-Newton iteration cap")->group("Solver");
        app.add_option("--huber-k", cfg.huber_k, "Huber threshold on residual norms (0: plain least squares)")
            ->group("Solver");
        app.add_flag("--relinearize,!--no-relinearize", cfg.relinearize,
                     "Refresh tangent planes at every iteration")
            ->default_val(cfg.relinearize)
            ->group("Solver");
        app.add_option("--jacobian", jacobian, "Jacobian evaluation")
            ->check(CLI::IsMember({"analytic", "numeric"}))
            ->group("Solver");
        app.add_option("--min-features", cfg.min_features, "Minimum usable features")->group("Solver");
        app.add_option("--step-tolerance", cfg.step_tolerance, "Max-abs step convergence threshold")
            ->group("Solver");
        app.add_option("--residual-tolerance", cfg.residual_tolerance, "Residual RMS convergence threshold")
            ->group("Solver");
        app.add_option("--initial-damping", cfg.initial_damping, "Initial Levenberg-Marquardt damping")
            ->group("Solver");
    }

    SolverConfig resolved() const {
        SolverConfig out = cfg;
        out.jacobian = jacobian == "numeric" ? JacobianMode::Numeric : JacobianMode::Analytic;
        validate(out);
        return out;
    }
};

// ---------------------------------------------------------------------------
// gen-terrain

struct TerrainFlags {
    std::string kind = "fractal";
    int ncols = 950;
    int nrows = 1150;
    double cellsize = 1.0;
    double relief = 320.0;
    std::uint64_t seed = 0;
    int octaves = 5;
    double persistence = 0.5;
    double wavelength = 0.25;
    double height_noise = 0.0;
    std::string out;
};

int run_gen_terrain(const CLI::App& sub, const TerrainFlags& f) {
    Manifest m("gen-terrain", f.seed);
    DtmGrid dtm;
    if (f.kind == "mountainside") {
        dtm = generate_mountainside_terrain(f.seed, f.ncols, f.nrows, f.cellsize);
    } else {
        FractalOptions opt;
        opt.octaves = f.octaves;
        opt.persistence = f.persistence;
        opt.base_wavelength_fraction = f.wavelength;
        dtm = generate_fractal_terrain(f.seed, f.ncols, f.nrows, f.cellsize, f.relief, opt);
    }
    if (f.height_noise < 0.0) throw NavError(ErrorCode::InvalidArgument, "height noise must be non-negative");
    if (f.height_noise > 0.0) dtm = with_height_noise(dtm, f.height_noise, Rng::mix(f.seed, 1));
    ensure_parent(f.out);
    save_dtm(dtm, f.out);
    m.outputs = {f.out};
    m.write(sub, sidecar(f.out, ".manifest.ini"));
    return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
    std::string scenario = "reference";
    std::string dtm;
    std::string rig;
    std::uint64_t seed = 0;
    std::size_t seeds = 1;
    unsigned jobs = 1;
    std::size_t cameras = 0;
    double drift_pos = 1.0;
    double drift_rot = 0.7;
    bool random_walk = false;
    double rate = 1.0;
    double baseline = 20.0;
    std::size_t features = 100;
    double noise = 2e-4;
    double height_noise = 0.0;
    std::optional<double> duration;
    bool dump_corrections = false;
    std::string out;
    SolverFlags solver;
};

std::string corrections_csv(const MissionResult& r) {
    std::string s =
        "t_sec,t_prev_sec,ok,failure,synthesized,used,iterations,termination,final_rms,huber_k,condition,rank,"
        "rank_deficient,ill_conditioned,pos_err_before,pos_err_after,ang_err_before_deg,ang_err_after_deg\n";
    for (const CorrectionRecord& c : r.corrections) {
        const std::string failure = c.failure_code ? std::string(to_string(*c.failure_code)) : "";
        s += format_double(c.t) + "," + format_double(c.t_previous) + "," + (c.ok ? "1" : "0") + "," + failure +
             "," + std::to_string(c.synthesized) + "," + std::to_string(c.report.used_features) + "," +
             std::to_string(c.report.iterations) + "," + c.report.termination + "," +
             format_double(c.report.final_rms) + "," + format_double(c.huber_k) + "," +
             format_double(c.report.condition) + "," + std::to_string(c.report.rank) + "," +
             (c.report.rank_deficient ? "1" : "0") + "," + (c.report.ill_conditioned ? "1" : "0") + "," +
             format_double(c.position_error_before) + "," + format_double(c.position_error_after) + "," +
             format_double(c.angle_error_before_deg) + "," + format_double(c.angle_error_after_deg) + "\n";
    }
    return s;
}

std::string summary_header() {
    return "seed,corrections,solved,improved,mean_error_after,max_corrected_error,final_drifted_error,"
           "final_corrected_error,last_condition,last_rank_deficient\n";
}

std::string summary_row(std::uint64_t seed, const MissionResult& r) {
    const MissionSummary s = summarize(r);
    const CorrectionRecord* last = r.corrections.empty() ? nullptr : &r.corrections.back();
    return std::to_string(seed) + "," + std::to_string(s.corrections) + "," + std::to_string(s.solved) + "," +
           std::to_string(s.improved) + "," + format_double(s.mean_error_after) + "," +
           format_double(s.max_corrected_error) + "," + format_double(s.final_drifted_error) + "," +
           format_double(s.final_corrected_error) + "," + format_double(last ? last->report.condition : 0.0) + "," +
           (last && last->report.rank_deficient ? "1" : "0") + "\n";
}

Scenario build_scenario(const SimulateFlags& f, std::uint64_t seed, const DtmGrid* dtm_override,
                        const MultiCameraRig* rig_override) {
    Scenario sc;
    if (f.scenario == "mountainside") {
        sc = mountainside_scenario(seed);
    } else {
        sc = reference_scenario(seed);
    }
    MissionConfig& m = sc.mission;
    if (dtm_override) {
        sc.dtm = *dtm_override;
        m.dtm_path = f.dtm;
    }
    if (rig_override) m.camera = *rig_override;
    if (f.cameras > 0) {
        m.active_cameras.clear();
        for (std::size_t c = 0; c < f.cameras; ++c) m.active_cameras.push_back(c);
    }
    m.drift.position_rate = f.drift_pos;
    m.drift.orientation_rate_deg = f.drift_rot;
    m.drift.random_walk = f.random_walk;
    m.correction_rate = f.rate;
    m.baseline = f.baseline;
    m.features_per_camera = f.features;
    m.direction_noise = f.noise;
    m.dtm_height_noise = f.height_noise;
    if (f.duration) m.trajectory.duration = *f.duration;
    m.solver = f.solver.resolved();
    m.keep_correspondences = f.dump_corrections;
    validate(m);
    return sc;
}

void write_mission(const MissionResult& r, const fs::path& dir, bool dump, std::vector<std::string>& outputs) {
    ensure_directory(dir);
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text_file(dir / name, text);
        outputs.push_back((dir / name).string());
    };
    emit("truth.csv", format_trajectory_csv(r.truth));
    emit("drifted.csv", format_trajectory_csv(r.drifted));
    emit("corrected.csv", format_trajectory_csv(r.corrected));
    emit("errors.csv", format_error_csv({r.drifted_errors, r.corrected_errors}));
    emit("corrections.csv", corrections_csv(r));
    if (!dump) return;
    for (std::size_t j = 0; j < r.corrections.size(); ++j) {
        const CorrectionRecord& c = r.corrections[j];
        const std::string stem = "correction_" + std::to_string(j);
        emit(stem + "_correspondences.csv", format_correspondences(c.features));
        emit(stem + "_truth.txt", format_state(c.truth));
        emit(stem + "_initial.txt", format_state(c.initial));
    }
}

int run_simulate(const CLI::App& sub, const SimulateFlags& f) {
    if (f.seeds == 0) throw NavError(ErrorCode::InvalidArgument, "--seeds must be positive");
    if (f.jobs == 0) throw NavError(ErrorCode::InvalidArgument, "--jobs must be positive");
    Manifest m("simulate", f.seed);

    std::optional<DtmGrid> dtm;
    std::optional<MultiCameraRig> rig;
    if (!f.dtm.empty()) {
        dtm = load_dtm(f.dtm);
        m.inputs.push_back(f.dtm);
    }
    if (!f.rig.empty()) {
        rig = load_rig(f.rig);
        m.inputs.push_back(f.rig);
    }
    // configuration errors surface before any mission runs
    build_scenario(f, f.seed, dtm ? &*dtm : nullptr, rig ? &*rig : nullptr);

    const fs::path out = f.out;
    ensure_directory(out);
    const bool multi = f.seeds > 1;

    std::vector<std::string> rows(f.seeds);
    std::vector<std::vector<std::string>> outputs(f.seeds);
    std::vector<std::exception_ptr> errors(f.seeds);
    std::size_t next = 0;
    std::mutex lock;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> g(lock);
                if (next >= f.seeds) return;
                i = next++;
            }
            try {
                const std::uint64_t seed = f.seed + i;
                const Scenario sc = build_scenario(f, seed, dtm ? &*dtm : nullptr, rig ? &*rig : nullptr);
                const MissionResult r = run_mission(sc.mission, sc.dtm);
                const fs::path dir = multi ? out / ("seed_" + std::to_string(seed)) : out;
                write_mission(r, dir, f.dump_corrections, outputs[i]);
                rows[i] = summary_row(seed, r);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(f.jobs, f.seeds));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    for (const auto& o : outputs) m.outputs.insert(m.outputs.end(), o.begin(), o.end());
    std::string summary = summary_header();
    for (const std::string& r : rows) summary += r;
    write_text_file(out / "summary.csv", summary);
    m.outputs.push_back((out / "summary.csv").string());
    m.write(sub, out / "manifest.ini");
    return kOk;
}

// ---------------------------------------------------------------------------
// solve

struct SolveFlags {
    std::string correspondences;
    std::string dtm;
    std::string initial;
    std::string out;
    std::string report;
    SolverFlags solver;
};

int run_solve(const CLI::App& sub, const SolveFlags& f) {
    Manifest m("solve");
    m.inputs = {f.correspondences, f.dtm, f.initial};
    const SolverConfig cfg = f.solver.resolved();
    const std::vector<FeatureCorrespondence> features = parse_correspondences(read_text_file(f.correspondences));
    const DtmGrid dtm = load_dtm(f.dtm);
    const NavState initial = parse_state(read_text_file(f.initial));

    const fs::path report_path = f.report.empty() ? sidecar(f.out, ".report") : fs::path(f.report);
    ensure_parent(f.out);
    ensure_parent(report_path);
    int code = kOk;
    try {
        const SolveResult res = solve(features, dtm, initial, cfg);
        write_text_file(f.out, format_state(res.state));
        write_text_file(report_path, format_report(res.report, "ok"));
        m.outputs = {f.out, report_path.string()};
    } catch (const EstimationError& e) {
        write_text_file(report_path, format_report(e.report(), std::string(to_string(e.code()))));
        m.outputs = {report_path.string()};
        std::cerr << "dtmnav solve: " << e.what() << "\n";
        code = kEstimationFailure;
    }
    m.write(sub, sidecar(f.out, ".manifest.ini"));
    return code;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateFlags {
    std::string truth;
    std::string drifted;
    std::string corrected;
    std::string estimate;
    std::string out;
};

int run_evaluate(const CLI::App& sub, const EvaluateFlags& f) {
    Manifest m("evaluate");
    const Trajectory truth = load_trajectory(f.truth);
    m.inputs.push_back(f.truth);
    std::vector<ErrorCurve> curves;
    const std::pair<const std::string*, const char*> variants[] = {
        {&f.drifted, "drifted"}, {&f.corrected, "corrected"}, {&f.estimate, "estimate"}};
    for (const auto& [path, name] : variants) {
        if (path->empty()) continue;
        curves.push_back(error_metrics(truth, load_trajectory(*path), name));
        m.inputs.push_back(*path);
    }
    if (curves.empty()) {
        throw CLI::ValidationError("evaluate", "need at least one of --drifted, --corrected, --estimate");
    }
    ensure_parent(f.out);
    write_text_file(f.out, format_error_csv(curves));
    m.outputs = {f.out};
    m.write(sub, sidecar(f.out, ".manifest.ini"));
    return kOk;
}

// ---------------------------------------------------------------------------
// plot

struct PlotFlags {
    std::vector<std::string> errors;
    std::vector<std::string> trajectories;
    std::string title = "Pose error";
    std::string out;
};

struct Style {
    std::string color;
    bool dashed;
};

Style style_for(const std::string& variant, std::size_t index) {
    if (variant.find("drifted") != std::string::npos) return {"#000000", true};
    if (variant.find("corrected") != std::string::npos) return {"#d62728", false};
    if (variant.find("truth") != std::string::npos) return {"#1f77b4", false};
    static const char* palette[] = {"#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    return {palette[index % 5], false};
}

int run_plot(const CLI::App& sub, const PlotFlags& f) {
    Manifest m("plot");
    if (f.errors.empty() == f.trajectories.empty()) {
        throw CLI::ValidationError("plot", "give either --errors or --trajectories");
    }
    std::vector<cli::Panel> panels;
    if (!f.errors.empty()) {
        cli::Panel pos{"Position error", "time [s]", "position error [mm]", {}};
        cli::Panel ang{"Orientation error", "time [s]", "orientation error [deg]", {}};
        std::size_t index = 0;
        for (const std::string& path : f.errors) {
            m.inputs.push_back(path);
            const std::string prefix = f.errors.size() > 1 ? fs::path(path).parent_path().filename().string() : "";
            for (const ErrorCurve& c : parse_error_csv(read_text_file(path))) {
                const Style st = style_for(c.variant, index++);
                const std::string label = prefix.empty() ? c.variant : prefix + " " + c.variant;
                cli::Series sp{label, {}, {}, st.color, st.dashed};
                cli::Series sa = sp;
                for (const ErrorSample& s : c.samples) {
                    sp.x.push_back(s.t);
                    sp.y.push_back(s.position);
                    sa.x.push_back(s.t);
                    sa.y.push_back(s.angle_deg);
                }
                pos.series.push_back(std::move(sp));
                ang.series.push_back(std::move(sa));
            }
        }
        panels = {std::move(pos), std::move(ang)};
    } else {
        cli::Panel top{"Trajectory (top view)", "x [mm]", "y [mm]", {}, true};
        cli::Panel alt{"Altitude", "time [s]", "z [mm]", {}};
        std::size_t index = 0;
        for (const std::string& path : f.trajectories) {
            m.inputs.push_back(path);
            const std::string name = fs::path(path).stem().string();
            const Style st = style_for(name, index++);
            cli::Series xy{name, {}, {}, st.color, st.dashed};
            cli::Series tz = xy;
            for (const TimedPose& s : load_trajectory(path)) {
                xy.x.push_back(s.pose.p.x());
                xy.y.push_back(s.pose.p.y());
                tz.x.push_back(s.t);
                tz.y.push_back(s.pose.p.z());
            }
            top.series.push_back(std::move(xy));
            alt.series.push_back(std::move(tz));
        }
        panels = {std::move(top), std::move(alt)};
    }
    ensure_parent(f.out);
    write_text_file(f.out, cli::render_svg(f.title, panels));
    m.outputs = {f.out};
    m.write(sub, sidecar(f.out, ".manifest.ini"));
    return kOk;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
            return kUsageError;
        case ErrorCode::RankDeficient:
        case ErrorCode::TooFewFeatures:
        case ErrorCode::DivergenceDetected:
        case ErrorCode::AllFeaturesRejected:
            return kEstimationFailure;
        default:
            return kDataError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Terrain-referenced pose and ego-motion estimation from non-central optical flow", "dtmnav"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "Config file with one [command] section; flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::ignore);

    TerrainFlags tf;
    CLI::App* gen = app.add_subcommand("gen-terrain", "Generate a synthetic DTM as an ESRI ASCII grid");
    gen->add_option("--kind", tf.kind, "Terrain family")->check(CLI::IsMember({"fractal", "mountainside"}));
    gen->add_option("--ncols", tf.ncols, "Grid columns");
    gen->add_option("--nrows", tf.nrows, "Grid rows");
    gen->add_option("--cellsize", tf.cellsize, "Cell size [mm]");
    gen->add_option("--relief", tf.relief, "Height range of the fractal [mm]");
    gen->add_option("--seed", tf.seed, "Random seed");
    gen->add_option("--octaves", tf.octaves, "Fractal octaves");
    gen->add_option("--persistence", tf.persistence, "Amplitude ratio between octaves");
    gen->add_option("--wavelength", tf.wavelength, "Longest wavelength as a fraction of the grid side");
    gen->add_option("--height-noise", tf.height_noise, "Per-sample height noise sigma [mm]");
    gen->add_option("--out", tf.out, "Output grid path")->required();

    SimulateFlags sf;
    CLI::App* sim = app.add_subcommand("simulate", "Run drift-correction missions");
    sim->add_option("--scenario", sf.scenario, "Built-in scenario")
        ->check(CLI::IsMember({"reference", "mountainside"}));
    sim->add_option("--dtm", sf.dtm, "Replace the scenario terrain with this grid");
    sim->add_option("--rig", sf.rig, "Replace the scenario rig with this rig file");
    sim->add_option("--seed", sf.seed, "First seed");
    sim->add_option("--seeds", sf.seeds, "Number of consecutive seeds");
    sim->add_option("--jobs", sf.jobs, "Missions run in parallel");
    sim->add_option("--cameras", sf.cameras, "Use the first N rig cameras (0: all)");
    sim->add_option("--drift-pos", sf.drift_pos, "Position drift rate [mm/s]");
    sim->add_option("--drift-rot", sf.drift_rot, "Orientation drift rate [deg/s]");
    sim->add_flag("--random-walk", sf.random_walk, "Random-walk drift directions");
    sim->add_option("--rate", sf.rate, "Correction rate [Hz]");
    sim->add_option("--baseline", sf.baseline, "Distance between the two views [mm]");
    sim->add_option("--features", sf.features, "Features per camera of the full rig");
    sim->add_option("--noise", sf.noise, "Direction noise sigma [rad]");
    sim->add_option("--height-noise", sf.height_noise, "DTM height noise seen by the solver [mm]");
    sim->add_option("--duration", sf.duration, "Mission duration [s] (default: scenario)");
    sim->add_flag("--dump-corrections", sf.dump_corrections, "Write each correction's inputs");
    sim->add_option("--out", sf.out, "Output directory")->required();
    sf.solver.add(*sim);

    SolveFlags vf;
    CLI::App* slv = app.add_subcommand("solve", "Estimate pose and ego-motion from one correspondence set");
    slv->add_option("--correspondences", vf.correspondences, "Correspondence CSV")->required();
    slv->add_option("--dtm", vf.dtm, "DTM grid")->required();
    slv->add_option("--initial", vf.initial, "Initial state (key-value)")->required();
    slv->add_option("--out", vf.out, "Estimated state output")->required();
    slv->add_option("--report", vf.report, "Solver report output (default: <out>.report)");
    vf.solver.add(*slv);

    EvaluateFlags ef;
    CLI::App* ev = app.add_subcommand("evaluate", "Compare trajectories against the truth");
    ev->add_option("--truth", ef.truth, "True trajectory CSV")->required();
    ev->add_option("--drifted", ef.drifted, "Uncorrected trajectory CSV");
    ev->add_option("--corrected", ef.corrected, "Corrected trajectory CSV");
    ev->add_option("--estimate", ef.estimate, "Any other estimated trajectory CSV");
    ev->add_option("--out", ef.out, "Error curve CSV output")->required();

    PlotFlags pf;
    CLI::App* plt = app.add_subcommand("plot", "Render error curves or trajectories as SVG");
    plt->add_option("--errors", pf.errors, "Error curve CSVs");
    plt->add_option("--trajectories", pf.trajectories, "Trajectory CSVs (top view)");
    plt->add_option("--title", pf.title, "Figure title");
    plt->add_option("--out", pf.out, "SVG output")->required();


    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (*gen) return run_gen_terrain(*gen, tf);
        if (*sim) return run_simulate(*sim, sf);
        if (*slv) return run_solve(*slv, vf);
        if (*ev) return run_evaluate(*ev, ef);
        if (*plt) return run_plot(*plt, pf);
    } catch (const CLI::Error& e) {
        std::cerr << "dtmnav: " << e.what() << "\n";
        return kUsageError;
    } catch (const NavError& e) {
        std::cerr << "dtmnav: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "dtmnav: " << e.what() << "\n";
        return kDataError;
    }
    return kUsageError;
}
