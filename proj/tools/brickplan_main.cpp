#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "brickplan/camera.hpp"
#include "brickplan/detector.hpp"
#include "brickplan/error.hpp"
#include "brickplan/exec.hpp"
#include "brickplan/image.hpp"
#include "brickplan/infer.hpp"
#include "brickplan/json_io.hpp"
#include "brickplan/mangen.hpp"
#include "brickplan/rng.hpp"
#include "brickplan/world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace brickplan;

namespace {

// Shared flag bundles -------------------------------------------------------

struct DetectorFlags {
    std::string kind = "oracle";  // oracle | noisy | file
    double kp_sigma = 0.0;
    double kp_truncate = 0.0;
    double flip_prob = 0.0;
    int morph_radius = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--detector", kind, "Observation source: oracle, noisy or file")
            ->check(CLI::IsMember({"oracle", "noisy", "file"}))
            ->capture_default_str();
        cmd->add_option("--noise-kp-sigma", kp_sigma,
                        "Gaussian keypoint noise sigma in pixels (noisy detector)")
            ->capture_default_str();
        cmd->add_option("--noise-kp-truncate", kp_truncate,
                        "Redraw keypoint noise above this radius; 0 disables")
            ->capture_default_str();
        cmd->add_option("--noise-flip", flip_prob, "Rotation class flip probability")
            ->capture_default_str();
        cmd->add_option("--noise-morph", morph_radius, "Mask dilate/erode radius in pixels")
            ->capture_default_str();
    }

    NoiseSpec noise_for_step(std::uint64_t seed, int image_index) const {
        NoiseSpec spec;
        spec.keypoint_sigma = kp_sigma;
        spec.keypoint_truncate = kp_truncate;
        spec.rotation_flip_prob = flip_prob;
        spec.mask_morph_radius = morph_radius;
        spec.seed = Rng::derive_seed(seed, "noise_" + std::to_string(image_index));
        return spec;
    }
};

struct SolverFlags {
    bool no_mask_verify = false;
    bool random_rotation = false;
    double tau_factor = 0.35;

    void attach(CLI::App* cmd) {
        cmd->add_flag("--no-mask-verify", no_mask_verify,
                      "Rank candidates by votes only (skip render-and-compare)");
        cmd->add_flag("--random-rotation", random_rotation,
                      "Ablation: draw submodule rotations uniformly instead of by synthesis");
        cmd->add_option("--tau", tau_factor, "Connector matching tolerance as a factor of scale")
            ->capture_default_str();
    }

    InferOptions options() const {
        InferOptions opts;
        opts.verify_with_mask = !no_mask_verify;
        opts.tau_factor = tau_factor;
        opts.rotation_mode = random_rotation ? InferOptions::RotationMode::RandomBaseline
                                             : InferOptions::RotationMode::Synthesis;
        return opts;
    }
};

Catalog load_catalog_arg(const std::string& path) {
    if (!fs::exists(path))
        throw ValidationError("catalog file not found: " + path +
                              " (pass --catalog or set BRICKPLAN_CATALOG)");
    return Catalog::load(path);
}

LoadedPlan load_set_plan(const std::string& set_dir, const Catalog& catalog) {
    return plan_from_json(load_json_file((fs::path(set_dir) / "plan.json").string()), catalog);
}

// Walks all plan sequences in tree order with a ground-truth base world.
template <typename F>
void for_each_step(const AssemblyPlan& plan, const Catalog& catalog, F&& fn) {
    auto run = [&](const std::vector<StepSpec>& steps, const std::string& scope) {
        VoxelWorld base(catalog, plan.world_dims);
        for (const StepSpec& step : steps) {
            fn(step, scope, base);
            for (const PlannedComponent& a : step.additions)
                base.place(a.component, a.pose, a.type_key);
        }
    };
    for (const SubmoduleDef& def : plan.submodules) run(def.steps, def.key);
    run(plan.steps, "");
}

StepObservation observation_for(const StepSpec& step, const VoxelWorld& gt_base,
                                const std::string& set_dir, const DetectorFlags& detector,
                                std::uint64_t seed) {
    if (detector.kind == "file") {
        const fs::path path =
            fs::path(set_dir) / "steps" / (std::to_string(step.image_index) + ".obs.json");
        return observation_from_json(load_json_file(path.string()));
    }
    std::vector<StepAddition> additions;
    for (const PlannedComponent& a : step.additions)
        additions.push_back({a.type_key, a.component, a.pose});
    StepObservation obs = oracle_detect(gt_base, additions, step.camera);
    if (detector.kind == "noisy")
        obs = noisy_detect(obs, detector.noise_for_step(seed, step.image_index));
    return obs;
}

// Subcommands ---------------------------------------------------------------

int cmd_gen(const std::string& out_dir, int sets, std::uint64_t seed, const std::string& catalog_path,
            const std::string& config_path, int jobs) {
    const Catalog catalog = load_catalog_arg(catalog_path);
    GenConfig cfg;
    if (!config_path.empty()) cfg = gen_config_from_json(load_json_file(config_path));
    cfg.seed = seed;
    const DatasetResult result = emit_dataset(cfg, sets, catalog, out_dir, jobs);

    int failed = 0;
    for (const SetResult& r : result.sets)
        if (!r.error.empty()) ++failed;
    json out = {{"schema", 1},
                {"manifest", result.manifest_path},
                {"sets", static_cast<int>(result.sets.size())},
                {"failed", failed}};
    std::cout << dump_json(out);
    return 0;
}

int cmd_infer(const std::string& set_dir, const std::string& catalog_path, std::uint64_t seed,
              const DetectorFlags& detector, const SolverFlags& solver, std::string out_path) {
    const Catalog catalog = load_catalog_arg(catalog_path);
    const LoadedPlan loaded = load_set_plan(set_dir, catalog);

    json steps = json::array();
    for_each_step(loaded.plan, catalog, [&](const StepSpec& step, const std::string& scope,
                                            const VoxelWorld& base) {
        if (std::getenv("BRICKPLAN_TRACE"))
            std::fprintf(stderr, "== step %d scope '%s'\n", step.image_index, scope.c_str());
        const StepObservation obs = observation_for(step, base, set_dir, detector, seed);
        InferOptions opts = solver.options();
        opts.random_rotation_seed =
            Rng::derive_seed(seed, "rotation_" + std::to_string(step.image_index));
        const StepInferenceResult result =
            infer_step(obs, step_component_specs(step), base, step.camera, opts);
        json entry = step_inference_to_json(result);
        entry["image_index"] = step.image_index;
        entry["scope"] = scope;
        steps.push_back(std::move(entry));
    });

    const json report = {{"schema", 1}, {"steps", std::move(steps)}};
    if (out_path.empty()) out_path = (fs::path(set_dir) / "inference.json").string();
    write_json_file(out_path, report);
    std::cout << dump_json(json{{"schema", 1}, {"written", out_path}});
    return 0;
}

int cmd_exec(const std::string& set_dir, const std::string& catalog_path, std::uint64_t seed,
             const std::string& mode, const std::string& source, const DetectorFlags& detector,
             const SolverFlags& solver, int chamfer_points, std::string out_path) {
    const Catalog catalog = load_catalog_arg(catalog_path);
    const LoadedPlan loaded = load_set_plan(set_dir, catalog);

    ExecOptions opts;
    opts.source = source == "gt" ? ExecOptions::Source::GroundTruth : ExecOptions::Source::Pipeline;
    opts.teacher_forced = mode == "teacher";
    opts.infer = solver.options();
    opts.seed = seed;
    opts.chamfer.n_points = chamfer_points;
    opts.chamfer.seed = Rng::derive_seed(seed, "chamfer");
    if (detector.kind == "noisy") {
        NoiseSpec noise;
        noise.keypoint_sigma = detector.kp_sigma;
        noise.keypoint_truncate = detector.kp_truncate;
        noise.rotation_flip_prob = detector.flip_prob;
        noise.mask_morph_radius = detector.morph_radius;
        opts.noise = noise;  // per-step seeds derive inside execute_plan
    }

    ObservationProvider provider;
    if (detector.kind == "file") {
        provider = [&](const StepSpec& step, const VoxelWorld&) {
            const fs::path path =
                fs::path(set_dir) / "steps" / (std::to_string(step.image_index) + ".obs.json");
            return observation_from_json(load_json_file(path.string()));
        };
    }

    const ExecutionReport report = execute_plan(loaded.plan, catalog, opts, provider);

    json steps = json::array();
    for (const StepReport& s : report.steps) {
        json e = {{"image_index", s.image_index},
                  {"scope", s.scope},
                  {"components", s.components},
                  {"correct", s.correct},
                  {"all_correct", s.all_correct}};
        if (!s.failures.empty()) e["failures"] = s.failures;
        steps.push_back(std::move(e));
    }
    json out = {{"schema", 1},
                {"mode", mode},
                {"source", source},
                {"componentwise", report.componentwise},
                {"stepwise", report.stepwise},
                {"mtc", report.mtc},
                {"total_components", report.total_components},
                {"correct_components", report.correct_components},
                {"steps", std::move(steps)}};
    if (report.chamfer_error.empty()) {
        out["chamfer"] = report.chamfer_raw;
        out["chamfer_x1e5"] = report.chamfer_scaled;
    } else {
        out["chamfer_error"] = report.chamfer_error;
    }
    if (out_path.empty()) out_path = (fs::path(set_dir) / "exec.json").string();
    write_json_file(out_path, out);
    std::cout << dump_json(out);
    return 0;
}

json eval_one_set(const std::string& set_dir, const Catalog& catalog, const std::string& pred_name) {
    const LoadedPlan loaded = load_set_plan(set_dir, catalog);
    const json pred = load_json_file((fs::path(set_dir) / pred_name).string());
    if (!pred.contains("steps") || !pred["steps"].is_array())
        throw ValidationError(pred_name + ": missing steps array");

    std::map<int, const json*> by_index;
    for (const json& s : pred["steps"]) by_index.emplace(s.at("image_index").get<int>(), &s);

    int total = 0, correct = 0, steps_total = 0, steps_correct = 0;
    for_each_step(loaded.plan, catalog, [&](const StepSpec& step, const std::string&,
                                            const VoxelWorld&) {
        auto it = by_index.find(step.image_index);
        if (it == by_index.end())
            throw ValidationError(pred_name + ": no entry for step " +
                                  std::to_string(step.image_index));
        std::vector<PosedComponent> gt_list, pred_list;
        for (const PlannedComponent& a : step.additions) gt_list.push_back({a.component, a.pose});
        for (const json& d : it->second->at("detections")) {
            const std::string key = d.at("type").get<std::string>();
            const Component comp = component_from_key(key, catalog, loaded.submodule_defs);
            Pose pose{kUnplacedTranslation, Rotation{0}};
            if (!d.at("pose").is_null()) pose = pose_from_json(d.at("pose"));
            pred_list.push_back({comp, pose});
        }
        const AccuracyResult acc = pose_accuracy(catalog, pred_list, gt_list);
        total += acc.total;
        correct += acc.correct;
        ++steps_total;
        if (acc.all_correct) ++steps_correct;
    });

    return {{"set", fs::path(set_dir).filename().string()},
            {"components", total},
            {"correct", correct},
            {"componentwise", total == 0 ? 1.0 : static_cast<double>(correct) / total},
            {"steps", steps_total},
            {"stepwise", steps_total == 0 ? 1.0 : static_cast<double>(steps_correct) / steps_total}};
}

int cmd_eval(const std::string& set_dir, const std::string& dataset_dir,
             const std::string& catalog_path, const std::string& pred_name) {
    const Catalog catalog = load_catalog_arg(catalog_path);
    json sets = json::array();
    if (!set_dir.empty()) {
        sets.push_back(eval_one_set(set_dir, catalog, pred_name));
    } else {
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(dataset_dir))
            if (entry.is_directory() && entry.path().filename().string().rfind("set_", 0) == 0)
                dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
        for (const fs::path& dir : dirs)
            if (fs::exists(dir / pred_name)) sets.push_back(eval_one_set(dir.string(), catalog, pred_name));
        if (sets.empty()) throw ValidationError("no sets with " + pred_name + " under " + dataset_dir);
    }

    long long total = 0, correct = 0, steps_total = 0, steps_correct = 0;
    for (const json& s : sets) {
        total += s.at("components").get<long long>();
        correct += s.at("correct").get<long long>();
        steps_total += s.at("steps").get<long long>();
        steps_correct += static_cast<long long>(
            std::llround(s.at("stepwise").get<double>() * s.at("steps").get<long long>()));
    }
    const json out = {
        {"schema", 1},
        {"componentwise", total == 0 ? 1.0 : static_cast<double>(correct) / total},
        {"stepwise", steps_total == 0 ? 1.0 : static_cast<double>(steps_correct) / steps_total},
        {"components", total},
        {"steps", steps_total},
        {"sets", std::move(sets)}};
    std::cout << dump_json(out);
    return 0;
}

int cmd_render(const std::string& world_path, const std::string& camera_path,
               const std::string& catalog_path, const std::string& out_png,
               const std::string& out_mask) {
    const Catalog catalog = load_catalog_arg(catalog_path);
    const VoxelWorld world = world_from_json(load_json_file(world_path), catalog);
    const CameraParams cam = camera_from_json(load_json_file(camera_path));
    write_png_rgb8(out_png, render_manual(cam, world, {}));
    if (!out_mask.empty()) {
        const Raster raster = rasterize(cam, world);
        write_pgm16(out_mask, raster.width, raster.height, id_mask16(raster));
    }
    std::cout << dump_json(json{{"schema", 1}, {"written", out_png}});
    return 0;
}

void print_error(const std::string& type, const std::string& message) {
    std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic assembly-manual dataset generation, pose inference and evaluation"};
    app.require_subcommand(1);

    std::string catalog_path = "data/catalog.json";
    std::uint64_t seed = 0;
    app.add_option("--catalog", catalog_path, "Brick catalog JSON")
        ->envname("BRICKPLAN_CATALOG")
        ->capture_default_str();
    app.add_option("--seed", seed, "Master seed; all randomness derives from it")
        ->envname("BRICKPLAN_SEED")
        ->capture_default_str();

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic manual dataset");
    std::string gen_out = "dataset";
    int gen_sets = 1, gen_jobs = 1;
    std::string gen_config;
    gen->add_option("--out", gen_out, "Output directory")->capture_default_str();
    gen->add_option("--sets", gen_sets, "Number of sets")->capture_default_str();
    gen->add_option("--config", gen_config, "Generator config JSON (flags override its seed)");
    gen->add_option("--jobs", gen_jobs, "Parallel set generation")
        ->envname("BRICKPLAN_JOBS")
        ->capture_default_str();

    // infer
    auto* infer = app.add_subcommand("infer", "Infer component poses for every step of a set");
    std::string infer_set, infer_out;
    DetectorFlags infer_detector;
    SolverFlags infer_solver;
    infer->add_option("--set", infer_set, "Set directory (contains plan.json)")->required();
    infer->add_option("--out", infer_out, "Report path (default <set>/inference.json)");
    infer_detector.attach(infer);
    infer_solver.attach(infer);

    // exec
    auto* exec = app.add_subcommand("exec", "Execute a plan and score it");
    std::string exec_set, exec_out, exec_mode = "autoregressive", exec_source = "pipeline";
    int exec_chamfer_points = 10000;
    DetectorFlags exec_detector;
    SolverFlags exec_solver;
    exec->add_option("--set", exec_set, "Set directory (contains plan.json)")->required();
    exec->add_option("--mode", exec_mode, "autoregressive or teacher")
        ->check(CLI::IsMember({"autoregressive", "teacher"}))
        ->capture_default_str();
    exec->add_option("--source", exec_source, "Pose source: pipeline or gt")
        ->check(CLI::IsMember({"pipeline", "gt"}))
        ->capture_default_str();
    exec->add_option("--chamfer-points", exec_chamfer_points, "Surface samples per shape")
        ->capture_default_str();
    exec->add_option("--out", exec_out, "Report path (default <set>/exec.json)");
    exec_detector.attach(exec);
    exec_solver.attach(exec);

    // eval
    auto* eval = app.add_subcommand("eval", "Score an inference report against ground truth");
    std::string eval_set, eval_dataset, eval_pred = "inference.json";
    eval->add_option("--set", eval_set, "Single set directory");
    eval->add_option("--dataset", eval_dataset, "Dataset directory (aggregates set_*)");
    eval->add_option("--pred-name", eval_pred, "Report file name inside each set")
        ->capture_default_str();

    // render
    auto* render = app.add_subcommand("render", "Render a world snapshot");
    std::string render_world, render_camera, render_out = "render.png", render_mask;
    render->add_option("--world", render_world, "World JSON")->required();
    render->add_option("--camera", render_camera, "Camera JSON")->required();
    render->add_option("--out", render_out, "Output PNG")->capture_default_str();
    render->add_option("--mask", render_mask, "Optional 16-bit instance-id mask (PGM)");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen(gen_out, gen_sets, seed, catalog_path, gen_config, gen_jobs);
        if (infer->parsed())
            return cmd_infer(infer_set, catalog_path, seed, infer_detector, infer_solver, infer_out);
        if (exec->parsed())
            return cmd_exec(exec_set, catalog_path, seed, exec_mode, exec_source, exec_detector,
                            exec_solver, exec_chamfer_points, exec_out);
        if (eval->parsed()) {
            if (eval_set.empty() == eval_dataset.empty()) {
                print_error("usage", "eval needs exactly one of --set or --dataset");
                return 2;
            }
            return cmd_eval(eval_set, eval_dataset, catalog_path, eval_pred);
        }
        if (render->parsed())
            return cmd_render(render_world, render_camera, catalog_path, render_out, render_mask);
        print_error("usage", "missing subcommand");
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    } catch (const ValidationError& e) {
        print_error(e.type(), e.what());
        return 3;
    } catch (const Error& e) {
        print_error(e.type(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("runtime", e.what());
        return 1;
    }
}
