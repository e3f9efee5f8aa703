// signet: traffic-sign deepfake crafting and detection toolkit.
//
// Subcommands cover the full pipeline: synthetic dataset generation,
// ingestion, balancing, splitting, WGAN-GP training, latent-vector attacks,
// classifier/detector training, evaluation, and report emission. Every run
// is deterministic given its seed and writes a resolved-config snapshot
// alongside its outputs.

#include <CLI11.hpp>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "signet/checkpoint.hpp"
#include "signet/data.hpp"
#include "signet/gan.hpp"
#include "signet/metrics.hpp"
#include "signet/models.hpp"
#include "signet/optim.hpp"
#include "signet/png_io.hpp"
#include "signet/train.hpp"

namespace fs = std::filesystem;
using namespace signet;

namespace {

// ---------------------------------------------------------------------------
// Run-directory plumbing: output root env var, lock file, resolved config.
// ---------------------------------------------------------------------------

fs::path resolve_out(const std::string& out) {
    fs::path p(out);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("SIGNET_OUT_ROOT")) return fs::path(root) / p;
    return p;
}

/// One run per output directory: an exclusive lock file, removed on exit.
class RunLock {
public:
    explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
        fs::create_directories(dir);
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw std::runtime_error("output directory " + dir.string() +
                                     " is locked by another run (found " + path_.string() + ")");
        ::close(fd);
    }
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
};

/// Snapshot of the options that produced a run, written next to its outputs.
void write_resolved_config(const fs::path& where, const CLI::App* cmd) {
    std::ofstream out(where);
    out << "# resolved configuration\n";
    out << "format_version = 1\n";
    out << "subcommand = " << cmd->get_name() << "\n";
    std::vector<std::string> lines;
    for (const auto* opt : cmd->get_options()) {
        if (opt->get_name() == "--help" || opt->get_name() == "--config") continue;
        std::string value = opt->count() ? opt->results().front() : opt->get_default_str();
        if (value.empty()) continue;
        std::string name = opt->get_name();
        while (!name.empty() && name.front() == '-') name.erase(name.begin());
        lines.push_back(name + " = " + value);
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) out << l << "\n";
}

std::vector<Sample> detector_samples(const DatasetManifest& m, const std::string& cls) {
    std::vector<Sample> out;
    for (const auto& r : m.records) {
        if (r.class_label != cls) continue;
        Sample s;
        s.features = r.pixels;
        s.label = r.provenance == Provenance::Fake ? 1 : 0;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> classifier_samples(const DatasetManifest& m,
                                       const std::vector<std::string>& classes) {
    std::vector<Sample> out;
    for (const auto& r : m.records) {
        Sample s;
        s.features = r.pixels;
        s.label = static_cast<std::size_t>(
            std::find(classes.begin(), classes.end(), r.class_label) - classes.begin());
        out.push_back(std::move(s));
    }
    return out;
}

DatasetManifest load_dataset_arg(const std::string& in) {
    fs::path p(in);
    if (fs::is_directory(p)) return ingest(p);
    return load_tensors(p);
}

void print_counts(const DatasetManifest& m, const std::string& title) {
    std::cout << title << "\n";
    for (const auto& [cls, rc] : m.class_counts())
        std::cout << "  " << cls << ": " << rc.first << " real, " << rc.second << " fake\n";
}

void save_history(const fs::path& path, const std::string& csv) {
    std::ofstream out(path);
    out << csv;
    if (!out.good()) throw std::runtime_error("cannot write " + path.string());
}

// GAN optimizer state rides in a checkpoint-shaped store so runs can resume.
ParamStore adam_to_store(const AdamState& st, const std::string& prefix) {
    ParamStore store;
    store.add(prefix + ".step", Tensor::scalar(static_cast<float>(st.step)), false);
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        Tensor m = Tensor::zeros({st.m[i].size()});
        Tensor v = Tensor::zeros({st.v[i].size()});
        for (std::size_t j = 0; j < st.m[i].size(); ++j) {
            m.data()[j] = static_cast<float>(st.m[i][j]);
            v.data()[j] = static_cast<float>(st.v[i][j]);
        }
        store.add(prefix + ".m." + std::to_string(i), std::move(m), false);
        store.add(prefix + ".v." + std::to_string(i), std::move(v), false);
    }
    return store;
}

void adam_from_store(AdamState& st, ParamStore& store, const std::string& prefix) {
    st.step = static_cast<std::size_t>(store.get(prefix + ".step").item());
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        const Tensor& m = store.get(prefix + ".m." + std::to_string(i));
        const Tensor& v = store.get(prefix + ".v." + std::to_string(i));
        for (std::size_t j = 0; j < st.m[i].size(); ++j) {
            st.m[i][j] = static_cast<double>(m.at(j));
            st.v[i][j] = static_cast<double>(v.at(j));
        }
    }
}

struct BankInfo {
    std::string kind;  // classical | hybrid
    std::size_t depth = 1;
    std::vector<std::string> classes;
};

void save_bank_info(const fs::path& dir, const BankInfo& info) {
    nlohmann::json j;
    j["kind"] = info.kind;
    j["depth"] = info.depth;
    j["classes"] = info.classes;
    std::ofstream out(dir / "bank.json");
    out << j.dump(2) << "\n";
}

BankInfo load_bank_info(const fs::path& dir) {
    std::ifstream in(dir / "bank.json");
    if (!in.good()) throw std::runtime_error("no detector bank at " + dir.string());
    nlohmann::json j = nlohmann::json::parse(in);
    BankInfo info;
    info.kind = j.at("kind").get<std::string>();
    info.depth = j.value("depth", std::size_t(1));
    info.classes = j.at("classes").get<std::vector<std::string>>();
    return info;
}

DetectorModel load_detector(const fs::path& base, const BankInfo& info, std::uint64_t seed) {
    if (info.kind == "hybrid") {
        HybridModel m = build_hybrid(seed);
        load_checkpoint(base, m.params);
        return m;
    }
    ClassicalModel m = build_classical_cnn(info.depth, seed);
    load_checkpoint(base, m.params);
    return m;
}

std::vector<std::string> load_class_list(const fs::path& file) {
    std::ifstream in(file);
    if (!in.good()) throw std::runtime_error("cannot open class list " + file.string());
    std::vector<std::string> classes;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) classes.push_back(line);
    return classes;
}

Report table_param_report() {
    Report r;
    for (std::size_t d = 1; d <= 5; ++d) {
        ClassicalModel m = build_classical_cnn(d, 0);
        r.params.push_back({"classical-cnn-" + std::to_string(d), count_params(m.params)});
    }
    HybridModel h = build_hybrid(0);
    r.params.push_back({"hybrid-quantum-classical", count_params(h.params)});
    return r;
}

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

struct DatasetArgs {
    std::string in, out;
    std::size_t classes = 10, per_class = 60;
    double fake_ratio = 0.9;
    std::uint64_t seed = 0;
};

int run_synth(const DatasetArgs& a, const CLI::App* cmd) {
    fs::path out = resolve_out(a.out);
    RunLock lock(out);
    SynthConfig cfg;
    cfg.classes = default_class_list(a.classes);
    cfg.per_class = a.per_class;
    cfg.fake_ratio = a.fake_ratio;
    cfg.seed = a.seed;
    synth_signs(cfg, out);
    write_resolved_config(out / "config.resolved", cmd);
    print_counts(ingest(out), "rendered dataset");
    return 0;
}

int run_ingest(const DatasetArgs& a, const CLI::App* cmd) {
    IngestStats stats;
    DatasetManifest m = ingest(resolve_out(a.in), &stats);
    fs::path out = resolve_out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_tensors(m, out);
    write_resolved_config(out.string() + ".config", cmd);
    print_counts(m, "ingested dataset (" + std::to_string(stats.skipped) + " skipped)");
    return 0;
}

int run_balance(const DatasetArgs& a, const CLI::App* cmd) {
    DatasetManifest m = load_dataset_arg(resolve_out(a.in).string());
    print_counts(m, "before balancing");
    DatasetManifest b = balance(m, a.seed);
    print_counts(b, "after balancing");
    fs::path out = resolve_out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_tensors(b, out);
    write_resolved_config(out.string() + ".config", cmd);
    return 0;
}

int run_split(const DatasetArgs& a, const CLI::App* cmd) {
    DatasetManifest m = load_dataset_arg(resolve_out(a.in).string());
    SplitSpec spec;
    spec.seed = a.seed;
    SplitResult r = split(m, spec);
    fs::path out = resolve_out(a.out);
    RunLock lock(out);
    save_tensors(r.train, out / "train.sgds");
    save_tensors(r.validation, out / "validation.sgds");
    save_tensors(r.test, out / "test.sgds");
    write_resolved_config(out / "config.resolved", cmd);
    std::cout << "train " << r.train.records.size() << " / validation "
              << r.validation.records.size() << " / test " << r.test.records.size() << "\n";
    return 0;
}

struct GanArgs {
    std::string data, out, resume, loss = "canonical";
    std::size_t steps = 200, batch = 16, critic_steps = 5;
    double lr = 1e-4, lambda = 10.0;
    std::uint64_t seed = 0;
};

int run_train_gan(const GanArgs& a, const CLI::App* cmd) {
    DatasetManifest m = load_dataset_arg(resolve_out(a.data).string());
    std::vector<std::vector<float>> real;
    for (const auto& r : m.records)
        if (r.provenance == Provenance::Real) real.push_back(r.pixels);
    if (real.empty()) throw std::runtime_error("train-gan: dataset has no real images");

    fs::path out = resolve_out(a.out);
    RunLock lock(out);

    bool literal = a.loss == "paper_literal";
    if (!literal && a.loss != "canonical")
        throw std::runtime_error("train-gan: loss mode must be canonical or paper_literal");
    ClassicalModel gen = build_generator(a.seed);
    ClassicalModel critic = build_critic(a.seed + 1, /*sigmoid_head=*/literal);

    GanTrainConfig cfg;
    cfg.lambda = a.lambda;
    cfg.critic_steps = a.critic_steps;
    cfg.learning_rate = a.lr;
    cfg.batch_size = a.batch;
    cfg.generator_steps = a.steps;
    cfg.seed = a.seed;
    cfg.mode = literal ? GanLossMode::PaperLiteral : GanLossMode::Canonical;

    AdamConfig opt{cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8};
    AdamState gen_state = AdamState::make(gen.params, opt);
    AdamState critic_state = AdamState::make(critic.params, opt);
    if (!a.resume.empty()) {
        fs::path prev = resolve_out(a.resume);
        load_checkpoint(prev / "generator", gen.params);
        load_checkpoint(prev / "critic", critic.params);
        ParamStore opt_store = adam_to_store(gen_state, "gen");
        ParamStore critic_opt = adam_to_store(critic_state, "critic");
        for (auto& e : critic_opt.entries()) opt_store.add(e.name, e.tensor, e.trainable);
        load_checkpoint(prev / "optim", opt_store);
        adam_from_store(gen_state, opt_store, "gen");
        adam_from_store(critic_state, opt_store, "critic");
    }

    GanHistory history =
        train_wgan_gp(gen, critic, real, {3, 32, 32}, cfg, gen_state, critic_state);

    save_checkpoint(out / "generator", gen.params);
    save_checkpoint(out / "critic", critic.params);
    ParamStore opt_store = adam_to_store(gen_state, "gen");
    ParamStore critic_opt = adam_to_store(critic_state, "critic");
    for (auto& e : critic_opt.entries()) opt_store.add(e.name, e.tensor, e.trainable);
    save_checkpoint(out / "optim", opt_store);
    save_history(out / "history.csv", history.to_csv());
    write_resolved_config(out / "config.resolved", cmd);
    std::cout << "trained " << a.steps << " generator steps; checkpoints in " << out.string() << "\n";
    return 0;
}

struct AttackArgs {
    std::string generator, data, out;
    std::size_t count = 5, restarts = 8, steps = 50;
    double step_size = 0.05;
    std::uint64_t seed = 0;
};

int run_attack(const AttackArgs& a, const CLI::App* cmd) {
    fs::path gen_base = resolve_out(a.generator);
    ClassicalModel gen = build_generator(0);
    load_checkpoint(gen_base, gen.params);

    DatasetManifest m = load_dataset_arg(resolve_out(a.data).string());
    fs::path out = resolve_out(a.out);
    RunLock lock(out);

    AttackConfig cfg;
    cfg.restarts = a.restarts;
    cfg.steps = a.steps;
    cfg.step_size = a.step_size;
    cfg.seed = a.seed;

    std::ofstream log(out / "attack_log.csv");
    log << "input,objective,z_file,fake_file\n";
    std::size_t done = 0;
    for (const auto& r : m.records) {
        if (r.provenance != Provenance::Real) continue;
        if (done >= a.count) break;
        AttackResult res = attack(r.pixels, gen, cfg);
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%04zu", done);
        fs::path zfile = out / (std::string("z_") + stem + ".txt");
        {
            std::ofstream z(zfile);
            for (float v : res.z_star) z << v << "\n";
        }
        fs::path fake_png = out / (std::string("fake_") + stem + ".png");
        Rgb8Image img;
        img.width = img.height = 32;
        img.pixels.resize(32 * 32 * 3);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 1024; ++i) {
                float v = (res.fake[c * 1024 + i] + 1.0f) * 127.5f;
                img.pixels[i * 3 + c] =
                    static_cast<unsigned char>(std::clamp(v, 0.0f, 255.0f));
            }
        write_png_rgb8(fake_png, img);
        char obj[32];
        std::snprintf(obj, sizeof(obj), "%.6f", res.objective);
        log << r.source_id << "," << obj << "," << zfile.filename().string() << ","
            << fake_png.filename().string() << "\n";
        ++done;
    }
    if (done == 0) throw std::runtime_error("attack: dataset holds no real images");
    write_resolved_config(out / "config.resolved", cmd);
    std::cout << "attacked " << done << " images; results in " << out.string() << "\n";
    return 0;
}

struct TrainArgs {
    std::string data, out, kind = "classical";
    std::size_t depth = 1, epochs = 50, batch = 16, width_divisor = 1;
    double lr = 1e-3, stop_acc = 0.0;
    std::uint64_t seed = 0;
};

int run_train_classifier(const TrainArgs& a, const CLI::App* cmd) {
    fs::path data = resolve_out(a.data);
    DatasetManifest train_m = load_tensors(data / "train.sgds");
    DatasetManifest val_m = load_tensors(data / "validation.sgds");
    auto classes = train_m.class_names();

    fs::path out = resolve_out(a.out);
    RunLock lock(out);

    ClassicalModel model = build_resnet9(classes.size(), a.seed, a.width_divisor);
    std::cout << "classifier parameters: " << count_params(model.params) << "\n";

    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.seed = a.seed;
    cfg.input_shape = {3, 32, 32};
    cfg.classes = classes.size();
    cfg.stop_at_train_accuracy = a.stop_acc;
    TrainHistory h = train(model, classifier_samples(train_m, classes),
                           classifier_samples(val_m, classes), cfg);

    save_checkpoint(out / "classifier", model.params);
    save_history(out / "history.csv", h.to_csv());
    {
        std::ofstream cls(out / "classes.txt");
        for (const auto& c : classes) cls << c << "\n";
    }
    write_resolved_config(out / "config.resolved", cmd);
    std::cout << "classifier checkpoint in " << out.string() << "\n";
    return 0;
}

int run_train_detector(const TrainArgs& a, const CLI::App* cmd) {
    if (a.kind != "classical" && a.kind != "hybrid")
        throw std::runtime_error("train-detector: kind must be classical or hybrid");
    fs::path data = resolve_out(a.data);
    DatasetManifest train_m = load_tensors(data / "train.sgds");
    DatasetManifest val_m = load_tensors(data / "validation.sgds");
    auto classes = train_m.class_names();

    if (a.kind == "classical") {
        ClassicalModel probe = build_classical_cnn(a.depth, 0);
        std::cout << "detector parameters (classical depth " << a.depth
                  << "): " << count_params(probe.params) << "\n";
    } else {
        HybridModel probe = build_hybrid(0);
        std::cout << "detector parameters (hybrid): 32 circuits x 57 + 4,202 = "
                  << count_params(probe.params)
                  << " (the published table lists 5,425, which cannot be split across 32 "
                     "identical circuits; 5,425 - 4,202 = 1,223 is prime)\n";
    }

    fs::path out = resolve_out(a.out);
    RunLock lock(out);

    BankInfo info;
    info.kind = a.kind;
    info.depth = a.depth;
    info.classes = classes;

    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        const auto& cls = classes[ci];
        auto train_set = detector_samples(train_m, cls);
        auto val_set = detector_samples(val_m, cls);
        if (train_set.size() < 2 || val_set.empty())
            throw std::runtime_error("train-detector: class '" + cls +
                                     "' is below the minimum trainable size");
        TrainConfig cfg;
        cfg.epochs = a.epochs;
        cfg.batch_size = a.batch;
        cfg.learning_rate = a.lr;
        cfg.seed = a.seed + ci;
        cfg.input_shape = {3, 32, 32};
        cfg.classes = 2;
        cfg.stop_at_train_accuracy = a.stop_acc;

        TrainHistory h;
        if (a.kind == "classical") {
            ClassicalModel model = build_classical_cnn(a.depth, a.seed + ci);
            h = train(model, train_set, val_set, cfg);
            save_checkpoint(out / cls, model.params);
        } else {
            HybridModel model = build_hybrid(a.seed + ci);
            h = train(model, train_set, val_set, cfg);
            save_checkpoint(out / cls, model.params);
        }
        save_history(out / ("history_" + cls + ".csv"), h.to_csv());
        double final_train_acc = 0.0;
        for (const auto& row : h.rows)
            if (row.split == "train" && row.accuracy) final_train_acc = *row.accuracy;
        std::cout << "  " << cls << ": train accuracy " << final_train_acc << "\n";
    }
    save_bank_info(out, info);
    write_resolved_config(out / "config.resolved", cmd);
    std::cout << "detector bank in " << out.string() << "\n";
    return 0;
}

struct EvalArgs {
    std::string data, classifier, detectors, out;
    std::uint64_t seed = 0;
};

int run_evaluate(const EvalArgs& a, const CLI::App* cmd) {
    fs::path data = resolve_out(a.data);
    DatasetManifest test_m = load_tensors(data / "test.sgds");

    fs::path cls_dir = resolve_out(a.classifier);
    auto classes = load_class_list(cls_dir / "classes.txt");
    ClassicalModel classifier = build_resnet9(classes.size(), 0);
    load_checkpoint(cls_dir / "classifier", classifier.params);

    fs::path det_dir = resolve_out(a.detectors);
    BankInfo info = load_bank_info(det_dir);
    DetectorBank bank;
    for (const auto& cls : classes) {
        if (std::find(info.classes.begin(), info.classes.end(), cls) == info.classes.end())
            throw std::runtime_error("evaluate: detector bank is missing class '" + cls + "'");
        bank.by_class.emplace(cls, load_detector(det_dir / cls, info, 0));
    }

    fs::path out = resolve_out(a.out);
    RunLock lock(out);

    // two-stage pipeline over the test split
    std::vector<std::size_t> stage_pred, stage_true;
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> per_class;
    std::size_t class_hits = 0;
    for (const auto& r : test_m.records) {
        Tensor img = Tensor::from({kImagePixels}, r.pixels);
        TwoStageResult res = two_stage_detect(img, classifier, classes, bank);
        std::size_t truth = r.provenance == Provenance::Fake ? 1 : 0;
        stage_pred.push_back(static_cast<std::size_t>(res.provenance));
        stage_true.push_back(truth);
        auto& pc = per_class[r.class_label];
        pc.first.push_back(static_cast<std::size_t>(res.provenance));
        pc.second.push_back(truth);
        if (res.sign_class == r.class_label) ++class_hits;
    }

    Report report = table_param_report();
    std::string model_name = info.kind == "hybrid" ? "two-stage-hybrid"
                                                   : "two-stage-classical-" + std::to_string(info.depth);
    for (const auto& [cls, pc] : per_class)
        report.metrics.push_back({model_name, cls, metrics(confusion(pc.first, pc.second, 2))});
    report.metrics.push_back({model_name, "(all)", metrics(confusion(stage_pred, stage_true, 2))});
    emit_report(report, out);
    write_resolved_config(out / "config.resolved", cmd);

    double cls_acc = static_cast<double>(class_hits) / static_cast<double>(test_m.records.size());
    std::cout << "classifier accuracy on test split: " << cls_acc << "\n";
    std::cout << "reports in " << out.string() << "\n";
    return 0;
}

int run_report(const std::string& out_arg, const CLI::App* cmd) {
    fs::path out = resolve_out(out_arg);
    RunLock lock(out);
    emit_report(table_param_report(), out);
    write_resolved_config(out / "config.resolved", cmd);
    std::cout << "parameter/memory report in " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"traffic-sign deepfake crafting and detection toolkit"};
    app.set_config("--config", "", "flat key-value config file with subcommand sections");
    app.require_subcommand(1);

    DatasetArgs ds;
    GanArgs ga;
    AttackArgs at;
    TrainArgs tc, td;
    EvalArgs ev;
    std::string report_out;

    auto* dataset = app.add_subcommand("dataset", "dataset preparation");
    dataset->require_subcommand(1);
    auto* synth = dataset->add_subcommand("synth", "render a synthetic sign dataset");
    synth->add_option("--classes", ds.classes, "number of sign archetypes")->default_val(10);
    synth->add_option("--per-class", ds.per_class, "real images per class")->default_val(60);
    synth->add_option("--fake-ratio", ds.fake_ratio, "fakes per real, pre-balance")->default_val(0.9);
    synth->add_option("--seed", ds.seed, "render seed")->default_val(0);
    synth->add_option("--out", ds.out, "output dataset directory")->required();

    auto* ingest_cmd = dataset->add_subcommand("ingest", "decode a PNG tree into a dataset file");
    ingest_cmd->add_option("--in", ds.in, "dataset directory root")->required();
    ingest_cmd->add_option("--out", ds.out, "output .sgds file")->required();

    auto* balance_cmd = dataset->add_subcommand("balance", "undersample the majority provenance");
    balance_cmd->add_option("--in", ds.in, "dataset file or directory")->required();
    balance_cmd->add_option("--seed", ds.seed, "undersampling seed")->default_val(0);
    balance_cmd->add_option("--out", ds.out, "output .sgds file")->required();

    auto* split_cmd = dataset->add_subcommand("split", "60/20/20 stratified split");
    split_cmd->add_option("--in", ds.in, "dataset file or directory")->required();
    split_cmd->add_option("--seed", ds.seed, "shuffle seed")->default_val(0);
    split_cmd->add_option("--out", ds.out, "output directory for the three split files")->required();

    auto* gan_cmd = app.add_subcommand("train-gan", "train generator and critic in tandem");
    gan_cmd->add_option("--data", ga.data, "dataset file or directory (real images)")->required();
    gan_cmd->add_option("--out", ga.out, "run directory")->required();
    gan_cmd->add_option("--steps", ga.steps, "generator steps")->default_val(200);
    gan_cmd->add_option("--batch", ga.batch, "batch size")->default_val(16);
    gan_cmd->add_option("--critic-steps", ga.critic_steps, "critic steps per generator step")
        ->default_val(5);
    gan_cmd->add_option("--lr", ga.lr, "Adam learning rate")->default_val(1e-4);
    gan_cmd->add_option("--lambda", ga.lambda, "gradient penalty weight")->default_val(10.0);
    gan_cmd->add_option("--loss", ga.loss, "canonical | paper_literal")->default_val("canonical");
    gan_cmd->add_option("--resume", ga.resume, "previous run directory to continue from");
    gan_cmd->add_option("--seed", ga.seed, "training seed")->default_val(0);

    auto* attack_cmd = app.add_subcommand("attack", "latent-vector attack on real images");
    attack_cmd->add_option("--generator", at.generator, "generator checkpoint base (run dir + /generator)")
        ->required();
    attack_cmd->add_option("--data", at.data, "dataset file or directory of targets")->required();
    attack_cmd->add_option("--out", at.out, "run directory")->required();
    attack_cmd->add_option("--count", at.count, "number of images to attack")->default_val(5);
    attack_cmd->add_option("--restarts", at.restarts, "random restarts")->default_val(8);
    attack_cmd->add_option("--steps", at.steps, "ascent steps per restart")->default_val(50);
    attack_cmd->add_option("--step-size", at.step_size, "ascent step size")->default_val(0.05);
    attack_cmd->add_option("--seed", at.seed, "restart seed")->default_val(0);

    auto* cls_cmd = app.add_subcommand("train-classifier", "train the sign-type classifier");
    cls_cmd->add_option("--data", tc.data, "split directory (train/validation .sgds)")->required();
    cls_cmd->add_option("--out", tc.out, "run directory")->required();
    cls_cmd->add_option("--epochs", tc.epochs, "training epochs")->default_val(10);
    cls_cmd->add_option("--batch", tc.batch, "batch size")->default_val(16);
    cls_cmd->add_option("--lr", tc.lr, "Adam learning rate")->default_val(1e-3);
    cls_cmd->add_option("--width-divisor", tc.width_divisor, "channel plan divisor")->default_val(1);
    cls_cmd->add_option("--stop-acc", tc.stop_acc, "early stop at this train accuracy")->default_val(0.0);
    cls_cmd->add_option("--seed", tc.seed, "training seed")->default_val(0);

    auto* det_cmd = app.add_subcommand("train-detector", "train one detector per sign class");
    det_cmd->add_option("--kind", td.kind, "classical | hybrid")->default_val("classical");
    det_cmd->add_option("--depth", td.depth, "classical depth in [1,5]")->default_val(1);
    det_cmd->add_option("--data", td.data, "split directory (train/validation .sgds)")->required();
    det_cmd->add_option("--out", td.out, "bank directory")->required();
    det_cmd->add_option("--epochs", td.epochs, "training epochs")->default_val(30);
    det_cmd->add_option("--batch", td.batch, "batch size")->default_val(16);
    det_cmd->add_option("--lr", td.lr, "Adam learning rate")->default_val(1e-3);
    det_cmd->add_option("--stop-acc", td.stop_acc, "early stop at this train accuracy")->default_val(0.0);
    det_cmd->add_option("--seed", td.seed, "training seed")->default_val(0);

    auto* eval_cmd = app.add_subcommand("evaluate", "two-stage detection over the test split");
    eval_cmd->add_option("--data", ev.data, "split directory (test.sgds)")->required();
    eval_cmd->add_option("--classifier", ev.classifier, "classifier run directory")->required();
    eval_cmd->add_option("--detectors", ev.detectors, "detector bank directory")->required();
    eval_cmd->add_option("--out", ev.out, "report directory")->required();

    auto* report_cmd = app.add_subcommand("report", "emit the parameter/memory report");
    report_cmd->add_option("--out", report_out, "report directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(ds, synth);
        if (ingest_cmd->parsed()) return run_ingest(ds, ingest_cmd);
        if (balance_cmd->parsed()) return run_balance(ds, balance_cmd);
        if (split_cmd->parsed()) return run_split(ds, split_cmd);
        if (gan_cmd->parsed()) return run_train_gan(ga, gan_cmd);
        if (attack_cmd->parsed()) return run_attack(at, attack_cmd);
        if (cls_cmd->parsed()) return run_train_classifier(tc, cls_cmd);
        if (det_cmd->parsed()) return run_train_detector(td, det_cmd);
        if (eval_cmd->parsed()) return run_evaluate(ev, eval_cmd);
        if (report_cmd->parsed()) return run_report(report_out, report_cmd);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
