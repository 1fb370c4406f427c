// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/cli.hpp"

#include <CLI11/CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "scorefusion/checkpoint.hpp"
#include "scorefusion/config.hpp"
#include "scorefusion/errors.hpp"
#include "scorefusion/metrics.hpp"
#include "scorefusion/phantom.hpp"
#include "scorefusion/sample.hpp"
#include "scorefusion/train.hpp"
#include "scorefusion/volume_io.hpp"

namespace scorefusion::cli {
namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error("usage", what) {}
};

class MissingFileError : public Error {
public:
    explicit MissingFileError(const fs::path& p) : Error("missing_file", "no such file: " + p.string()) {}
};

const fs::path& require_file(const fs::path& p) {
    if (p.empty() || !fs::exists(p)) throw MissingFileError(p);
    return p;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
    }
    return out;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

int report_error(std::ostream& err, int code, const std::string& kind, const std::string& msg) {
    err << "error: code=" << code << " kind=" << kind << " msg=\"" << escape(msg) << "\"\n";
    return code;
}

// ---------------------------------------------------------------------------
// Configuration views

Task task_of(const Config& c) { return parse_task(c.str("task")); }

NoiseSchedule schedule_of(const Config& c) {
    return make_linear_schedule(static_cast<int>(c.integer("schedule.steps")), c.real("schedule.beta_start"),
                                c.real("schedule.beta_end"));
}

DegradationOperator op_of(const Config& c) {
    const long long f = c.integer("degrade.factor");
    if (f < 1) throw ConfigError("degrade.factor must be positive");
    return DegradationOperator::avg_pool(static_cast<std::size_t>(f));
}

Dims dims_of(const Config& c, const std::string& key) {
    const auto v = c.int_list(key);
    if (v.size() != 3 || v[0] < 1 || v[1] < 1 || v[2] < 1) throw ConfigError(key + " needs three positive sizes");
    return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])};
}

Net2DConfig net2d_config(const Config& c, int conditions) {
    const std::string& preset = c.str("net2d.preset");
    Net2DConfig n;
    if (preset == "desk") {
        n = Net2DConfig::desk(conditions);
    } else if (preset == "reference") {
        n = Net2DConfig::reference(conditions);
    } else {
        throw ConfigError("net2d.preset must be desk or reference, got '" + preset + "'");
    }
    if (!c.str("net2d.channels").empty()) n.channels = c.int_list("net2d.channels");
    if (c.integer("net2d.time_embed_dim") > 0) n.time_embed_dim = static_cast<int>(c.integer("net2d.time_embed_dim"));
    if (c.integer("net2d.norm_groups") > 0) n.norm_groups = static_cast<int>(c.integer("net2d.norm_groups"));
    return n;
}

Net3DConfig net3d_config(const Config& c, int conditions, const Net2DConfig& branch, int k) {
    const std::string& preset = c.str("net3d.preset");
    const Net3DVariant v = parse_net3d_variant(c.str("net3d.variant"));
    Net3DConfig n;
    if (preset == "desk") {
        n = Net3DConfig::desk(v, conditions, branch, k);
    } else if (preset == "reference") {
        n = Net3DConfig::reference(v, conditions, k);
    } else {
        throw ConfigError("net3d.preset must be desk or reference, got '" + preset + "'");
    }
    n.branch_channels = branch.channels;
    n.lambda = c.real("net3d.lambda");
    const std::string& inj = c.str("net3d.injection");
    if (inj != "auto") n.feature_injection = c.boolean("net3d.injection");
    if (!c.str("net3d.channels").empty()) n.channels = c.int_list("net3d.channels");
    if (c.integer("net3d.time_embed_dim") > 0) n.time_embed_dim = static_cast<int>(c.integer("net3d.time_embed_dim"));
    if (c.integer("net3d.norm_groups") > 0) n.norm_groups = static_cast<int>(c.integer("net3d.norm_groups"));
    n.validate();
    return n;
}

TrainConfig train_config(const Config& c) {
    TrainConfig t;
    t.lr = c.real("train.lr");
    t.batch = static_cast<int>(c.integer("train.batch"));
    t.steps = c.integer("train.steps");
    t.seed = static_cast<std::uint64_t>(c.integer("seed"));
    t.workers = static_cast<int>(c.integer("workers"));
    t.log_every = c.integer("train.log_every");
    const Dims p = dims_of(c, "train3d.patch");
    t.patch = {p.d1, p.d2, p.d3};
    t.finetune = c.boolean("train3d.finetune");
    t.finetune_steps = c.integer("train3d.finetune_steps");
    if (t.steps < 0 || t.finetune_steps < 0) throw ConfigError("step counts must be non-negative");
    if (t.workers < 1) throw ConfigError("workers must be at least 1");
    return t;
}

Config config_from_echo(const std::map<std::string, std::string>& echo) {
    Config c(default_config());
    for (const auto& [k, v] : echo) c.set(k, v);
    return c;
}

Manifest manifest_of(const Config& c) {
    const std::string& m = c.str("data.manifest");
    if (m.empty()) throw UsageError("a dataset manifest is required (--manifest)");
    return read_manifest(require_file(m));
}

// ---------------------------------------------------------------------------
// Frozen branches

struct LoadedBranch {
    Net2D net;
    SliceAxis axis = SliceAxis::axis1;
    std::vector<int> conditions;
    Net2DConfig config;
};

std::vector<int> map_conditions(Task run, Task branch) {
    if (run == branch) {
        std::vector<int> all(static_cast<std::size_t>(condition_count(run)));
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    if (run == Task::both && branch == Task::sr) return {0};
    if (run == Task::both && branch == Task::mt) return {1};
    throw ConfigError("a branch trained for task " + to_string(branch) + " cannot serve task " + to_string(run));
}

void require_same(const Config& run, const Config& other, const std::string& key, const std::string& who) {
    if (run.str(key) != other.str(key)) {
        throw ConfigError("config conflict on " + key + ": " + who + " has '" + other.str(key) + "', run has '" +
                          run.str(key) + "'");
    }
}

std::vector<LoadedBranch> load_branches(const Config& c) {
    const auto paths = split_list(c.str("branches"));
    if (paths.size() < 2) throw UsageError("at least two 2D branch checkpoints are required (--branches a,b)");
    const Task run = task_of(c);
    std::vector<LoadedBranch> out;
    out.reserve(paths.size());
    for (const auto& p : paths) {
        const Checkpoint ck = load_checkpoint(require_file(p));
        if (ck.kind != "net2d") throw CheckpointError(p + " is a " + ck.kind + " checkpoint, expected net2d");
        const Config bc = config_from_echo(ck.config);
        for (const char* k : {"schedule.steps", "schedule.beta_start", "schedule.beta_end", "degrade.factor"}) {
            require_same(c, bc, k, p);
        }
        const Task bt = task_of(bc);
        LoadedBranch b;
        b.config = net2d_config(bc, condition_count(bt));
        b.net = Net2D(b.config, 0);
        b.net.params() = ck.flat_params(b.net.layout());
        b.axis = parse_slice_axis(static_cast<int>(bc.integer("train2d.axis")));
        b.conditions = map_conditions(run, bt);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<Branch> branch_views(const std::vector<LoadedBranch>& loaded) {
    std::vector<Branch> v;
    for (const auto& b : loaded) v.push_back({&b.net, b.axis, b.conditions});
    return v;
}

// ---------------------------------------------------------------------------
// Run context

struct Run {
    Config config{default_config()};
    fs::path dir;
    std::ostream* out = nullptr;

    void begin() {
        fs::create_directories(dir);
        std::ofstream(dir / "config.txt") << config.echo();
    }
};

fs::path default_run_dir(const std::string& command) {
    const char* root = std::getenv("SCOREFUSION_RUN_DIR");
    return fs::path(root && *root ? root : "runs") / command;
}

class Telemetry {
public:
    explicit Telemetry(const fs::path& file, bool append) : f_(file, append ? std::ios::app : std::ios::trunc) {
        if (!f_) throw IoError("cannot write " + file.string());
        if (!append) f_ << "step,loss,lr,wall_ms\n";
    }
    void operator()(const TelemetryRecord& r) { f_ << format_telemetry(r) << '\n' << std::flush; }

private:
    std::ofstream f_;
};

// Shared step loop for both trainers: telemetry every log_every steps and an
// optional numbered checkpoint every checkpoint_every steps.
template <class Trainer>
void train_loop(Run& run, Trainer& tr, const Dataset& data, std::int64_t total, double lr) {
    const auto& c = run.config;
    const std::int64_t log_every = std::max<long long>(c.integer("train.log_every"), 1);
    const std::int64_t ck_every = c.integer("train.checkpoint_every");
    Telemetry tel(run.dir / "telemetry.csv", tr.steps_done() > 0);
    const auto start = std::chrono::steady_clock::now();
    while (tr.steps_done() < total) {
        const double loss = tr.step(data);
        const std::int64_t s = tr.steps_done();
        if (s % log_every == 0 || s == total) {
            tel({s, loss, lr, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()});
        }
        if (ck_every > 0 && s % ck_every == 0 && s != total) {
            save_checkpoint(tr.checkpoint(c.values()), run.dir / ("checkpoint_" + std::to_string(s) + ".sfck"));
        }
    }
    save_checkpoint(tr.checkpoint(c.values()), run.dir / "checkpoint.sfck");
}

// ---------------------------------------------------------------------------
// Commands

int cmd_phantom(Run& run) {
    const auto& c = run.config;
    PhantomSpec spec;
    spec.dims = dims_of(c, "phantom.dims");
    spec.seed = static_cast<std::uint64_t>(c.integer("seed"));
    spec.smoothness = c.real("phantom.smoothness");
    spec.noise_amplitude = c.real("phantom.noise");
    spec.factor = static_cast<std::size_t>(c.integer("degrade.factor"));
    const long long count = c.integer("phantom.count");
    if (count < 1) throw ConfigError("phantom.count must be positive");
    run.begin();
    const Manifest m = build_dataset(spec, static_cast<std::size_t>(count), c.real("phantom.split"), run.dir);
    std::size_t n_train = m.subset(Split::train).size();
    *run.out << "phantom: " << m.records.size() << " volumes (" << n_train << " train, " << m.records.size() - n_train
             << " val) -> " << (run.dir / kManifestName).string() << '\n';
    return kOk;
}

int cmd_train2d(Run& run) {
    const auto& c = run.config;
    const Task task = task_of(c);
    const Manifest m = manifest_of(c);
    const SliceAxis axis = parse_slice_axis(static_cast<int>(c.integer("train2d.axis")));
    const TrainConfig tc = train_config(c);
    const Dataset data = load_dataset(m, Split::train, task, op_of(c));
    Net2D net(net2d_config(c, condition_count(task)), derive_seed(tc.seed, 0x2d0 + static_cast<int>(axis)));
    Trainer2D tr(std::move(net), axis, schedule_of(c), tc);
    if (!c.str("train.resume").empty()) tr.restore(load_checkpoint(require_file(c.str("train.resume"))));
    run.begin();
    train_loop(run, tr, data, tc.steps, tc.lr);
    *run.out << "train2d: axis " << static_cast<int>(axis) << ", " << tr.steps_done() << " steps, "
             << tr.net().parameter_count() << " parameters -> " << (run.dir / "checkpoint.sfck").string() << '\n';
    return kOk;
}

int cmd_train3d(Run& run) {
    const auto& c = run.config;
    const Task task = task_of(c);
    const Manifest m = manifest_of(c);
    const TrainConfig tc = train_config(c);
    const auto loaded = load_branches(c);
    const Net3DConfig n3 = net3d_config(c, condition_count(task), loaded.front().config, static_cast<int>(loaded.size()));
    const Dataset data = load_dataset(m, Split::train, task, op_of(c));
    Trainer3D tr(Net3D(n3, derive_seed(tc.seed, 0x3d0)), branch_views(loaded), schedule_of(c), tc);
    if (!c.str("train.resume").empty()) tr.restore(load_checkpoint(require_file(c.str("train.resume"))));
    run.begin();
    train_loop(run, tr, data, tr.total_steps(), tc.lr);
    *run.out << "train3d: " << to_string(n3.variant) << ", " << loaded.size() << " branches, " << tr.steps_done()
             << " steps, " << tr.net().parameter_count() << " parameters -> "
             << (run.dir / "checkpoint.sfck").string() << '\n';
    return kOk;
}

Volume to_metric(const Volume& v) {
    Volume out = denormalize(v, kMetricRange, kModelRange);
    for (auto& x : out.storage()) x = std::clamp(x, kMetricRange.lo, kMetricRange.hi);
    return out;
}

int cmd_sample(Run& run) {
    const auto& c = run.config;
    const Task task = task_of(c);
    const Manifest m = manifest_of(c);
    const NoiseSchedule schedule = schedule_of(c);
    const DegradationOperator op = op_of(c);
    const auto loaded = load_branches(c);
    const auto branches = branch_views(loaded);
    const int conditions = condition_count(task);

    SampleConfig sc;
    sc.fusion = parse_fusion_mode(c.str("sample.fusion"));
    sc.plan = make_step_plan(schedule, parse_sampler_mode(c.str("sample.mode")), static_cast<int>(c.integer("sample.steps")));
    const std::string& cons = c.str("sample.consistency");
    sc.consistency = cons == "auto" ? task != Task::mt : c.boolean("sample.consistency");
    if (sc.consistency && task == Task::mt) throw ConfigError("consistency projection needs a pooled condition (task sr or both)");
    sc.op = op;
    sc.runs = static_cast<int>(c.integer("sample.runs"));
    if (sc.runs < 1) throw ConfigError("sample.runs must be at least 1");
    sc.fresh_noise = c.boolean("sample.fresh_noise");
    sc.workers = static_cast<int>(c.integer("workers"));

    Net3D fusion;
    if (sc.fusion == FusionMode::learned) {
        const std::string& path = c.str("fusion.checkpoint");
        if (path.empty()) throw UsageError("learned fusion needs a 3D checkpoint (--fusion-checkpoint)");
        const Checkpoint ck = load_checkpoint(require_file(path));
        if (ck.kind != "net3d") throw CheckpointError(path + " is a " + ck.kind + " checkpoint, expected net3d");
        const Config fc = config_from_echo(ck.config);
        for (const char* k : {"task", "schedule.steps", "schedule.beta_start", "schedule.beta_end"}) {
            require_same(c, fc, k, path);
        }
        fusion = Net3D(net3d_config(fc, conditions, loaded.front().config, static_cast<int>(loaded.size())), 0);
        fusion.params() = ck.flat_params(fusion.layout());
    }
    const SamplerModels models{branches, sc.fusion == FusionMode::learned ? &fusion : nullptr, &schedule};
    const bool multi = conditions > 1 && branches.size() == 2 * static_cast<std::size_t>(conditions);

    const Split split = c.str("sample.split") == "train" ? Split::train : Split::val;
    const long long limit = c.integer("sample.limit");
    run.begin();
    const std::uint64_t seed = static_cast<std::uint64_t>(c.integer("seed"));
    long long done = 0;
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const auto& r = m.records[i];
        if (r.split != split) continue;
        if (limit > 0 && done >= limit) break;
        const PhantomPair pair{load_volume(require_file(r.path_a)), load_volume(require_file(r.path_b))};
        const TaskInputs in = to_model_range(make_task_inputs(pair, task, op));
        SampleConfig vc = sc;
        vc.seed = derive_seed(seed, i);
        const fs::path dir = run.dir / r.id;
        fs::create_directories(dir);
        if (vc.runs >= 2) {
            const UncertainSample u = sample_with_uncertainty(models, in.x, vc);
            save_volume(to_metric(u.point), dir / "pred.sfv");
            save_volume(to_metric(u.stats.mean), dir / "mean.sfv");
            Volume sd = u.stats.std;
            for (auto& x : sd.storage()) x *= 0.5f;  // model range spans 2, metric range 1
            save_volume(sd, dir / "std.sfv");
        } else {
            const Volume y = multi ? fuse_multimodality(models, in.x, vc) : sample_volume(models, in.x, vc);
            save_volume(to_metric(y), dir / "pred.sfv");
        }
        ++done;
        *run.out << "sample: " << r.id << " -> " << (dir / "pred.sfv").string() << '\n';
    }
    if (done == 0) throw UsageError("no volumes in the selected split");
    return kOk;
}

struct Stat {
    double mean = 0.0, std = 0.0;
};

Stat stat_of(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        for (double x : v) s.std += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(s.std / static_cast<double>(v.size() - 1));
    }
    return s;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

int cmd_eval(Run& run) {
    const auto& c = run.config;
    const Manifest m = manifest_of(c);
    const std::string& pred_dir = c.str("eval.pred");
    if (pred_dir.empty()) throw UsageError("eval needs a prediction directory (--pred)");
    require_file(pred_dir);
    const auto names = split_list(c.str("eval.metrics"));
    std::map<std::string, bool> want{{"psnr", false}, {"ssim", false}, {"mmd", false}, {"fid", false}, {"mace", false}};
    for (const auto& n : names) {
        if (!want.count(n)) throw ConfigError("unknown metric '" + n + "' (known: psnr,ssim,mmd,fid,mace)");
        want[n] = true;
    }
    std::vector<std::string> per_volume;
    for (const char* n : {"psnr", "ssim", "mace"}) {
        if (want[n]) per_volume.push_back(n);
    }

    const Split split = c.str("eval.split") == "train" ? Split::train : Split::val;
    std::vector<std::string> ids;
    std::vector<Volume> preds, gts;
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : m.records) {
        if (r.split != split) continue;
        const fs::path dir = fs::path(pred_dir) / r.id;
        if (!fs::exists(dir / "pred.sfv")) continue;
        Volume gt = load_volume(require_file(r.path_a));
        Volume pred = load_volume(dir / "pred.sfv");
        if (want["psnr"]) values["psnr"].push_back(psnr(pred, gt));
        if (want["ssim"]) values["ssim"].push_back(ssim3d(pred, gt));
        if (want["mace"]) {
            if (!fs::exists(dir / "mean.sfv") || !fs::exists(dir / "std.sfv")) {
                throw MissingFileError(dir / "std.sfv");
            }
            values["mace"].push_back(mace(load_volume(dir / "mean.sfv"), load_volume(dir / "std.sfv"), gt));
        }
        ids.push_back(r.id);
        preds.push_back(std::move(pred));
        gts.push_back(std::move(gt));
    }
    if (ids.empty()) throw MissingFileError(fs::path(pred_dir) / "<id>" / "pred.sfv");
    run.begin();

    std::ofstream csv(run.dir / "report.csv");
    csv << "id";
    for (const auto& n : per_volume) csv << ',' << n;
    csv << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
        csv << ids[i];
        for (const auto& n : per_volume) csv << ',' << num(values[n][i]);
        csv << '\n';
    }
    nlohmann::json summary;
    summary["count"] = ids.size();
    summary["split"] = to_string(split);
    for (const char* agg : {"mean", "std"}) {
        csv << agg;
        for (const auto& n : per_volume) {
            const Stat s = stat_of(values[n]);
            csv << ',' << num(agg[0] == 'm' ? s.mean : s.std);
        }
        csv << '\n';
    }
    for (const auto& n : per_volume) {
        const Stat s = stat_of(values[n]);
        // Infinite PSNR (exact match) serializes as null.
        summary["metrics"][n] = {{"mean", std::isfinite(s.mean) ? nlohmann::json(s.mean) : nlohmann::json()},
                                 {"std", std::isfinite(s.std) ? nlohmann::json(s.std) : nlohmann::json()}};
    }
    if (want["mmd"] || want["fid"]) {
        const FeatureExtractor fx;
        const FeatureSet fp = extract_features(fx, preds), fg = extract_features(fx, gts);
        if (want["mmd"]) summary["metrics"]["mmd"] = mmd(fp, fg);
        if (want["fid"]) summary["metrics"]["fid"] = fid(fp, fg);
    }
    std::ofstream(run.dir / "summary.json") << summary.dump(2) << '\n';
    *run.out << "eval: " << ids.size() << " volumes";
    for (const auto& [k, v] : summary["metrics"].items()) {
        *run.out << ", " << k << '=' << (v.is_object() ? v["mean"].dump() : v.dump());
    }
    *run.out << " -> " << (run.dir / "report.csv").string() << '\n';
    return kOk;
}

}  // namespace

std::map<std::string, std::string> default_config() {
    return {
        {"seed", "0"},
        {"workers", "1"},
        {"task", "sr"},
        {"data.manifest", ""},
        {"degrade.factor", "4"},
        {"schedule.steps", "1000"},
        {"schedule.beta_start", "0.0001"},
        {"schedule.beta_end", "0.02"},
        {"phantom.count", "200"},
        {"phantom.dims", "32,32,24"},
        {"phantom.split", "0.8"},
        {"phantom.smoothness", "1.0"},
        {"phantom.noise", "0.08"},
        {"net2d.preset", "desk"},
        {"net2d.channels", ""},
        {"net2d.time_embed_dim", "0"},
        {"net2d.norm_groups", "0"},
        {"net3d.preset", "desk"},
        {"net3d.variant", "full"},
        {"net3d.lambda", "1.0"},
        {"net3d.injection", "auto"},
        {"net3d.channels", ""},
        {"net3d.time_embed_dim", "0"},
        {"net3d.norm_groups", "0"},
        {"train2d.axis", "1"},
        {"train.lr", "5e-5"},
        {"train.batch", "4"},
        {"train.steps", "1000"},
        {"train.log_every", "50"},
        {"train.checkpoint_every", "0"},
        {"train.resume", ""},
        {"train3d.patch", "16,16,16"},
        {"train3d.finetune", "on"},
        {"train3d.finetune_steps", "0"},
        {"branches", ""},
        {"fusion.checkpoint", ""},
        {"sample.steps", "50"},
        {"sample.mode", "ddim"},
        {"sample.consistency", "auto"},
        {"sample.runs", "1"},
        {"sample.fusion", "learned"},
        {"sample.fresh_noise", "on"},
        {"sample.split", "val"},
        {"sample.limit", "0"},
        {"eval.pred", ""},
        {"eval.metrics", "psnr,ssim,mmd,fid,mace"},
        {"eval.split", "val"},
    };
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Volume-to-volume translation with fused perpendicular 2D diffusion scores.", "scorefusion"};
    app.require_subcommand(1, 1);

    std::string config_file, out_dir;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;

    struct Command {
        const char* name;
        const char* help;
        std::function<int(Run&)> fn;
    };
    const std::vector<Command> commands{
        {"phantom", "Generate a synthetic paired phantom dataset", cmd_phantom},
        {"train2d", "Train a 2D slice denoiser along one axis", cmd_train2d},
        {"train3d", "Train the 3D fusion network on frozen 2D branches", cmd_train3d},
        {"sample", "Translate volumes with the fused sampler", cmd_sample},
        {"eval", "Score predictions against ground truth", cmd_eval},
    };

    auto flag = [&flags](CLI::App* s, const std::string& name, const std::string& key, const std::string& help) {
        s->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };

    std::map<std::string, CLI::App*> subs;
    for (const auto& cmd : commands) {
        CLI::App* s = app.add_subcommand(cmd.name, cmd.help);
        subs[cmd.name] = s;
        s->add_option("--config", config_file, "Flat key = value config file");
        s->add_option("--set", sets, "Override one config key (key=value); repeatable");
        s->add_option("--out", out_dir, "Run directory (default $SCOREFUSION_RUN_DIR/<command>)");
        flag(s, "--seed", "seed", "Random seed");
        flag(s, "--workers", "workers", "Worker threads; 1 guarantees bit-determinism");
        const std::string name = cmd.name;
        if (name != "phantom") flag(s, "--manifest", "data.manifest", "Dataset manifest");
        if (name != "phantom" && name != "eval") flag(s, "--task", "task", "sr, mt or both");
        if (name == "phantom") {
            flag(s, "--count", "phantom.count", "Number of phantoms");
            flag(s, "--dims", "phantom.dims", "Volume dims, e.g. 32,32,24");
        }
        if (name == "train2d" || name == "train3d") {
            flag(s, "--steps", "train.steps", "Training steps");
            flag(s, "--resume", "train.resume", "Checkpoint to resume from");
        }
        if (name == "train2d") flag(s, "--axis", "train2d.axis", "Slice axis (1 or 2)");
        if (name == "train3d" || name == "sample") flag(s, "--branches", "branches", "Comma-separated 2D checkpoints");
        if (name == "train3d") flag(s, "--variant", "net3d.variant", "full or small");
        if (name == "sample") {
            flag(s, "--steps", "sample.steps", "Inference steps");
            flag(s, "--consistency", "sample.consistency", "on, off or auto");
            flag(s, "--runs", "sample.runs", "Runs per volume (>= 2 adds mean/std)");
            flag(s, "--fusion", "sample.fusion", "learned or average");
            flag(s, "--fusion-checkpoint", "fusion.checkpoint", "3D fusion checkpoint");
            flag(s, "--limit", "sample.limit", "Sample at most N volumes (0 = all)");
        }
        if (name == "eval") {
            flag(s, "--pred", "eval.pred", "Directory written by sample");
            flag(s, "--metrics", "eval.metrics", "Subset of psnr,ssim,mmd,fid,mace");
        }
    }

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::ParseError& e) {
        return report_error(err, kUsage, "usage", e.what());
    }

    std::string name;
    for (const auto& [n, s] : subs) {
        if (s->parsed()) name = n;
    }
    const auto it = std::find_if(commands.begin(), commands.end(), [&](const Command& c) { return name == c.name; });

    try {
        Run run;
        run.out = &out;
        if (!config_file.empty()) run.config.merge_file(require_file(config_file));
        for (const auto& s : sets) {
            run.config.merge_assignment(s);
            std::string key = s.substr(0, s.find('='));
            key.erase(key.find_last_not_of(" \t") + 1);
            const auto f = flags.find(key);
            if (f != flags.end() && run.config.str(key) != f->second) {
                throw ConfigError("config conflict on " + key + ": --set gives '" + run.config.str(key) +
                                  "', flag gives '" + f->second + "'");
            }
        }
        for (const auto& [k, v] : flags) run.config.set(k, v);
        run.dir = out_dir.empty() ? default_run_dir(name) : fs::path(out_dir);
        return it->fn(run);
    } catch (const MissingFileError& e) {
        return report_error(err, kMissingFile, e.kind(), e.what());
    } catch (const UsageError& e) {
        return report_error(err, kUsage, e.kind(), e.what());
    } catch (const ConfigError& e) {
        return report_error(err, kConfigConflict, e.kind(), e.what());
    } catch (const Error& e) {
        return report_error(err, kFailure, e.kind(), e.what());
    } catch (const std::exception& e) {
        return report_error(err, kFailure, "internal", e.what());
    }
}

}  // namespace scorefusion::cli
