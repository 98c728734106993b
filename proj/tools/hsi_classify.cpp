// Command-line front end: run the pipeline, reclassify from a saved model,
// or write a synthetic scene to play with.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "hsi/pipeline.hpp"
#include "hsi/synthetic.hpp"

namespace {

struct RunFlags {
    std::string config;
    std::optional<std::string> cube, labels, scheme, window, num_filters, variance_fraction, out, features, removed_bands;
    std::optional<std::uint64_t> runs, seed;
    std::optional<int> threads;
    bool save_profile = false;
    bool quiet = false;
};

hsi::RawSettings flag_settings(const RunFlags &f) {
    hsi::RawSettings s;
    auto put = [&](const char *key, const auto &value) {
        if (value) {
            std::ostringstream v;
            v << *value;
            s[key] = hsi::RawSetting{v.str(), 0};
        }
    };
    put("cube", f.cube);
    put("labels", f.labels);
    put("scheme", f.scheme);
    put("window_c", f.window);
    put("num_filters", f.num_filters);
    put("variance_fraction", f.variance_fraction);
    put("out", f.out);
    put("features", f.features);
    put("removed_bands", f.removed_bands);
    put("runs", f.runs);
    put("seed", f.seed);
    put("threads", f.threads);
    if (f.save_profile) s["save_profile"] = {"true", 0};
    return s;
}

int run(const RunFlags &f) {
    const hsi::RawSettings overrides = flag_settings(f);
    const hsi::PipelineConfig cfg = f.config.empty() ? hsi::normalize_config(overrides) : hsi::validate_config(f.config, overrides);
    const auto res = hsi::run_pipeline(cfg, f.quiet ? nullptr : &std::cerr);
    std::ifstream table(cfg.out / "metrics.txt");
    std::cout << table.rdbuf();
    (void)res;
    return 0;
}

struct ClassifyFlags {
    std::string model, profile, out = "classmap.ppm";
    std::optional<std::string> mask;
};

int classify(const ClassifyFlags &f) {
    const hsi::SvmModel model = hsi::load_model(f.model);
    const hsi::FeatureMatrix raw = hsi::read_profile(f.profile);
    if (raw.dim() != model.dim())
        throw hsi::Error(hsi::ErrorKind::invalid_argument, "cli",
                         "profile has " + std::to_string(raw.dim()) + " features, model expects " + std::to_string(model.dim()));
    const hsi::LabelMap mask = f.mask ? hsi::load_labels(*f.mask, raw.rows, raw.cols)
                                      : hsi::LabelMap(raw.rows, raw.cols, std::vector<int>(raw.pixels(), 1), 1);
    const hsi::LabelMap map = hsi::classify_map(model, hsi::apply_scaling(model.scaling, raw), mask);
    hsi::write_class_map(map, hsi::default_palette(map.num_classes()), f.out);
    std::cout << "wrote " << f.out << '\n';
    return 0;
}

int synthesize(const hsi::SceneSpec &spec, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir);
    const hsi::Scene scene = hsi::make_textured_scene(spec);
    hsi::CubeHeader layout;
    layout.type = hsi::SampleType::float32;
    hsi::write_cube(scene.cube, dir / "scene.raw", layout);
    hsi::write_labels_pgm(scene.labels, dir / "labels.pgm");
    std::ofstream cfg(dir / "scene.cfg");
    cfg << "# synthetic scene: " << spec.rows << "x" << spec.cols << "x" << spec.bands << ", " << spec.classes << " classes\n"
        << "cube = scene.raw\nlabels = labels.pgm\nwindow_c = 7\nscheme = 5%\nruns = 5\nseed = 0\nout = out\n";
    std::cout << "wrote " << (dir / "scene.raw").string() << ", " << (dir / "labels.pgm").string() << ", "
              << (dir / "scene.cfg").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Energy-profile hyperspectral classification"};
    app.require_subcommand(0, 1);

    RunFlags rf;
    app.add_option("--config", rf.config, "key=value configuration file");
    app.add_option("--cube", rf.cube, "cube data file (header at <cube>.hdr)");
    app.add_option("--labels", rf.labels, "ground truth (.pgm, or raw with labels_header)");
    app.add_option("--scheme", rf.scheme, "training proportion: a|b|c|d, N% or a fraction");
    app.add_option("--runs", rf.runs, "Monte Carlo runs");
    app.add_option("--window", rf.window, "odd filter window c");
    app.add_option("--num-filters", rf.num_filters, "filters per component, or 'auto'");
    app.add_option("--variance-fraction", rf.variance_fraction, "spectral variance kept by PCA");
    app.add_option("--removed-bands", rf.removed_bands, "1-based band ranges to drop, e.g. 104-108,150-163,220");
    app.add_option("--features", rf.features, "energy | pca");
    app.add_option("--seed", rf.seed, "base seed; run i uses seed + i");
    app.add_option("--threads", rf.threads, "worker threads");
    app.add_option("--out", rf.out, "output directory");
    app.add_flag("--save-profile", rf.save_profile, "also write profile.bin");
    app.add_flag("-q,--quiet", rf.quiet, "no progress log");

    ClassifyFlags cf;
    auto *cls = app.add_subcommand("classify", "classify a saved profile with a saved model");
    cls->add_option("--model", cf.model, "model.bin")->required()->check(CLI::ExistingFile);
    cls->add_option("--profile", cf.profile, "profile.bin")->required()->check(CLI::ExistingFile);
    cls->add_option("--mask", cf.mask, "label map; only its nonzero pixels are classified");
    cls->add_option("--out", cf.out, "class map (PPM)");

    hsi::SceneSpec spec;
    std::string synth_dir = "synthetic";
    auto *syn = app.add_subcommand("synth", "write a synthetic textured scene and a matching config");
    syn->add_option("--out", synth_dir, "output directory");
    syn->add_option("--rows", spec.rows);
    syn->add_option("--cols", spec.cols);
    syn->add_option("--bands", spec.bands);
    syn->add_option("--classes", spec.classes)->check(CLI::Range(2, 255));
    syn->add_option("--tile", spec.tile, "block edge in pixels");
    syn->add_option("--clutter", spec.clutter);
    syn->add_option("--noise", spec.noise);
    syn->add_option("--seed", spec.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }
    try {
        if (cls->parsed()) return classify(cf);
        if (syn->parsed()) return synthesize(spec, synth_dir);
        return run(rf);
    } catch (const hsi::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return hsi::exit_code_for(e.kind());
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
