#pragma once

// End-to-end run: load -> drop bands -> spectral PCA -> filter design on the
// first component -> energy profile -> repeated {draw, scale, train,
// classify, score}.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hsi/datacube.hpp"
#include "hsi/energy_profile.hpp"
#include "hsi/error.hpp"
#include "hsi/evaluation.hpp"
#include "hsi/filter_design.hpp"
#include "hsi/spectral_reduction.hpp"
#include "hsi/svm.hpp"

namespace hsi {

enum class FeatureMode {
    energy_profile,  ///< filter responses over the retained components
    components       ///< raw component values only (spectral baseline)
};

struct PipelineConfig {
    std::filesystem::path cube;
    std::optional<std::filesystem::path> cube_header;  ///< default "<cube>.hdr"
    std::filesystem::path labels;
    std::optional<std::filesystem::path> labels_header;  ///< raw label rasters only; default "<labels>.hdr"
    std::vector<std::size_t> removed_bands;              ///< 0-based
    double variance_fraction = 0.90;
    std::size_t window_c = 35;
    FilterSelection filter_selection;
    bool per_component_filters = false;
    bool append_components = false;
    FeatureMode features = FeatureMode::energy_profile;
    KernelParams kernel;
    SolverOptions solver;
    double proportion = 0.10;
    std::size_t min_per_class = 3;
    std::size_t runs = 50;
    std::uint64_t seed = 0;
    int threads = 1;
    std::filesystem::path out = "out";
    bool save_profile = false;
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io: return 2;
        case ErrorKind::config:
        case ErrorKind::invalid_argument: return 3;
        case ErrorKind::numerical: return 4;
        case ErrorKind::degenerate: return 5;
    }
    return 1;
}

/// One key=value setting and where it came from (line 0: command line).
struct RawSetting {
    std::string value;
    std::size_t line = 0;
};
using RawSettings = std::map<std::string, RawSetting>;

/// Reads a flat key=value file; '#' starts a comment. Malformed lines are
/// reported with their line number.
inline RawSettings read_settings(std::istream &in) {
    RawSettings out;
    std::vector<std::string> problems;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(line_no) + ": expected key=value");
            continue;
        }
        std::string key = detail::lower(detail::trim(t.substr(0, eq)));
        std::string value = detail::trim(t.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        out[key] = RawSetting{value, line_no};
    }
    if (!problems.empty()) {
        std::string msg;
        for (const auto &p : problems) msg += (msg.empty() ? "" : "; ") + p;
        throw Error(ErrorKind::config, "cli", msg);
    }
    return out;
}

/// Training proportion from "a".."d", "5%" or "0.05".
inline std::optional<double> parse_scheme(const std::string &text) {
    const std::string v = detail::lower(detail::trim(text));
    if (v == "a") return 0.01;
    if (v == "b") return 0.05;
    if (v == "c") return 0.10;
    if (v == "d") return 0.125;
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos < v.size() && v.substr(pos) == "%") return x / 100.0;
        if (pos != v.size()) return std::nullopt;
        return x;
    } catch (const std::exception &) {
        return std::nullopt;
    }
}

/// Turns raw settings into a validated configuration. Relative paths resolve
/// against `base_dir`. Every violation is collected and reported together,
/// each with its key and line.
inline PipelineConfig normalize_config(const RawSettings &settings, const std::filesystem::path &base_dir = {}) {
    PipelineConfig cfg;
    std::vector<std::string> problems;
    auto where = [](const std::string &key, const RawSetting &s) {
        return (s.line ? "line " + std::to_string(s.line) + ": " : std::string("flag: ")) + key;
    };
    auto fail = [&](const std::string &key, const RawSetting &s, const std::string &msg) {
        problems.push_back(where(key, s) + ": " + msg);
    };
    // file values are relative to the file, command-line values to the cwd
    auto path_of = [&](const RawSetting &s) {
        std::filesystem::path p(s.value);
        return (s.line && p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
    };
    auto as_double = [&](const std::string &key, const RawSetting &s) -> std::optional<double> {
        try {
            std::size_t pos = 0;
            double x = std::stod(s.value, &pos);
            if (pos == s.value.size()) return x;
        } catch (const std::exception &) {
        }
        fail(key, s, key + " must be a number, got '" + s.value + "'");
        return std::nullopt;
    };
    auto as_count = [&](const std::string &key, const RawSetting &s) -> std::optional<std::uint64_t> {
        try {
            std::size_t pos = 0;
            if (!s.value.empty() && s.value[0] != '-') {
                unsigned long long x = std::stoull(s.value, &pos);
                if (pos == s.value.size()) return x;
            }
        } catch (const std::exception &) {
        }
        fail(key, s, key + " must be a nonnegative integer, got '" + s.value + "'");
        return std::nullopt;
    };
    auto as_bool = [&](const std::string &key, const RawSetting &s) -> std::optional<bool> {
        const std::string v = detail::lower(s.value);
        if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
        if (v == "0" || v == "false" || v == "no" || v == "off") return false;
        fail(key, s, key + " must be true or false");
        return std::nullopt;
    };

    for (const auto &[key, s] : settings) {
        if (key == "cube") {
            cfg.cube = path_of(s);
        } else if (key == "cube_header") {
            cfg.cube_header = path_of(s);
        } else if (key == "labels") {
            cfg.labels = path_of(s);
        } else if (key == "labels_header") {
            cfg.labels_header = path_of(s);
        } else if (key == "removed_bands") {
            try {
                cfg.removed_bands = parse_band_ranges(s.value);
            } catch (const Error &e) {
                fail(key, s, e.what());
            }
        } else if (key == "variance_fraction") {
            if (auto v = as_double(key, s)) {
                if (!(*v > 0.0 && *v <= 1.0)) fail(key, s, "variance_fraction must lie in (0, 1]");
                else cfg.variance_fraction = *v;
            }
        } else if (key == "window_c") {
            if (auto v = as_count(key, s)) {
                if (*v == 0 || *v % 2 == 0) fail(key, s, "window_c must be odd");
                else cfg.window_c = static_cast<std::size_t>(*v);
            }
        } else if (key == "num_filters") {
            if (detail::lower(s.value) == "auto") continue;
            if (auto v = as_count(key, s)) {
                if (*v == 0) fail(key, s, "num_filters must be positive or 'auto'");
                else cfg.filter_selection.count = static_cast<std::size_t>(*v);
            }
        } else if (key == "filter_energy_fraction") {
            if (auto v = as_double(key, s)) {
                if (!(*v > 0.0 && *v <= 1.0)) fail(key, s, "filter_energy_fraction must lie in (0, 1]");
                else cfg.filter_selection.energy_fraction = *v;
            }
        } else if (key == "per_component_filters") {
            if (auto v = as_bool(key, s)) cfg.per_component_filters = *v;
        } else if (key == "append_components") {
            if (auto v = as_bool(key, s)) cfg.append_components = *v;
        } else if (key == "features") {
            const std::string v = detail::lower(s.value);
            if (v == "energy" || v == "energy_profile") cfg.features = FeatureMode::energy_profile;
            else if (v == "pca" || v == "components") cfg.features = FeatureMode::components;
            else fail(key, s, "features must be 'energy' or 'pca'");
        } else if (key == "degree") {
            if (auto v = as_count(key, s)) {
                if (*v < 1) fail(key, s, "degree must be >= 1");
                else cfg.kernel.degree = static_cast<int>(*v);
            }
        } else if (key == "gamma") {
            if (detail::lower(s.value) == "auto") continue;
            if (auto v = as_double(key, s)) {
                if (!(*v > 0.0)) fail(key, s, "gamma must be positive or 'auto'");
                else cfg.kernel.gamma = *v;
            }
        } else if (key == "coef0") {
            if (auto v = as_double(key, s)) cfg.kernel.coef0 = *v;
        } else if (key == "penalty_c") {
            if (auto v = as_double(key, s)) {
                if (!(*v > 0.0)) fail(key, s, "penalty_c must be positive");
                else cfg.kernel.penalty_c = *v;
            }
        } else if (key == "tolerance") {
            if (auto v = as_double(key, s)) {
                if (!(*v > 0.0)) fail(key, s, "tolerance must be positive");
                else cfg.solver.tolerance = *v;
            }
        } else if (key == "cache_mb") {
            if (auto v = as_double(key, s)) {
                if (!(*v > 0.0)) fail(key, s, "cache_mb must be positive");
                else cfg.solver.cache_mb = *v;
            }
        } else if (key == "scheme" || key == "proportion") {
            auto v = parse_scheme(s.value);
            if (!v) fail(key, s, key + " must be a-d, a percentage or a fraction");
            else if (!(*v > 0.0 && *v <= 1.0)) fail(key, s, "training proportion must lie in (0, 1]");
            else cfg.proportion = *v;
        } else if (key == "min_per_class") {
            if (auto v = as_count(key, s)) {
                if (*v < 1) fail(key, s, "min_per_class must be >= 1");
                else cfg.min_per_class = static_cast<std::size_t>(*v);
            }
        } else if (key == "runs") {
            if (auto v = as_count(key, s)) {
                if (*v < 1) fail(key, s, "runs must be >= 1");
                else cfg.runs = static_cast<std::size_t>(*v);
            }
        } else if (key == "seed") {
            if (auto v = as_count(key, s)) cfg.seed = *v;
        } else if (key == "threads") {
            if (auto v = as_count(key, s)) {
                if (*v < 1 || *v > 4096) fail(key, s, "threads must lie in [1, 4096]");
                else cfg.threads = static_cast<int>(*v);
            }
        } else if (key == "out") {
            cfg.out = path_of(s);
        } else if (key == "save_profile") {
            if (auto v = as_bool(key, s)) cfg.save_profile = *v;
        } else {
            fail(key, s, "unknown key '" + key + "'");
        }
    }
    if (cfg.filter_selection.count && *cfg.filter_selection.count > cfg.window_c * cfg.window_c)
        problems.push_back("num_filters: num_filters exceeds window_c^2 = " + std::to_string(cfg.window_c * cfg.window_c));
    if (cfg.cube.empty()) problems.push_back("cube: cube is required");
    if (cfg.labels.empty()) problems.push_back("labels: labels is required");
    if (!problems.empty()) {
        std::string msg;
        for (const auto &p : problems) msg += (msg.empty() ? "" : "; ") + p;
        throw Error(ErrorKind::config, "cli", msg);
    }
    return cfg;
}

/// Parses and validates a configuration file; `overrides` (from the command
/// line) replace file values.
inline PipelineConfig validate_config(const std::filesystem::path &path, const RawSettings &overrides = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cli", "cannot open config '" + path.string() + "'");
    RawSettings settings = read_settings(in);
    for (const auto &[k, v] : overrides) settings[k] = RawSetting{v.value, 0};
    return normalize_config(settings, path.parent_path());
}

/// Features of every pixel plus the intermediate products that produced them.
struct FeatureStage {
    PcaModel pca;
    std::size_t components = 0;
    std::vector<FilterSet> filter_sets;  ///< empty in component mode
    FeatureMatrix features;
};

inline FeatureStage compute_features(const HyperCube &cube, const PipelineConfig &cfg) {
    FeatureStage st;
    st.pca = fit_spectral_pca(cube);
    st.components = select_components(st.pca, cfg.variance_fraction);
    const PcStack pcs = project(cube, st.pca, st.components, cfg.threads);
    if (cfg.features == FeatureMode::components) {
        st.features = component_features(pcs);
        return st;
    }
    if (cfg.window_c > std::min(cube.rows(), cube.cols()))
        throw Error(ErrorKind::config, "cli",
                    "window_c " + std::to_string(cfg.window_c) + " exceeds the image extent " + std::to_string(cube.rows()) + "x" +
                        std::to_string(cube.cols()));
    if (cfg.per_component_filters) {
        // every set must have the same size so the profile stays rectangular
        FilterSet first = design_filter_set(pcs.planes[0], cfg.window_c, cfg.filter_selection, cfg.threads);
        FilterSelection fixed = cfg.filter_selection;
        fixed.count = first.size();
        st.filter_sets.push_back(std::move(first));
        for (std::size_t p = 1; p < pcs.k(); ++p)
            st.filter_sets.push_back(design_filter_set(pcs.planes[p], cfg.window_c, fixed, cfg.threads));
    } else {
        st.filter_sets.assign(pcs.k(), design_filter_set(pcs.planes[0], cfg.window_c, cfg.filter_selection, cfg.threads));
    }
    EnergyProfile profile = build_profile(pcs, std::span<const FilterSet>(st.filter_sets), cfg.threads);
    st.features = cfg.append_components ? concatenate(profile.features, component_features(pcs)) : std::move(profile.features);
    return st;
}

/// Products of the last Monte Carlo run.
struct FinalRun {
    SvmModel model;
    LabelMap prediction;
};

/// One draw -> scale -> train -> classify -> score cycle.
inline RunMetrics run_once(const FeatureMatrix &features, const LabelMap &labels, const PipelineConfig &cfg, std::uint64_t seed,
                           int threads, FinalRun *keep = nullptr) {
    const TrainTestSplit split = draw_training_set(labels, SamplingScheme{cfg.proportion, cfg.min_per_class, seed});
    const ScaledFeatures scaled = fit_feature_scaling(features, split.train);
    SvmModel model = train_multiclass(scaled, labels, split.train, cfg.kernel, cfg.solver, threads);
    LabelMap prediction = classify_map(model, scaled.features, labels, threads);
    std::vector<int> classes;
    for (int c = 1; c <= labels.num_classes(); ++c) classes.push_back(c);
    RunMetrics m = score(confusion(prediction, labels, split.test, classes));
    m.seed = seed;
    m.train_count = split.train.size();
    if (keep) *keep = FinalRun{std::move(model), std::move(prediction)};
    return m;
}

struct ExperimentResult {
    FeatureStage stage;
    MetricsReport report;
    FinalRun final_run;
};

/// Monte Carlo experiment on in-memory data.
inline ExperimentResult run_experiment(const HyperCube &cube, const LabelMap &labels, const PipelineConfig &cfg) {
    if (labels.rows() != cube.rows() || labels.cols() != cube.cols())
        throw Error(ErrorKind::io, "cli", "label raster and cube differ in size");
    ExperimentResult res;
    res.stage = compute_features(cube, cfg);
    // parallelism goes to whichever level has more independent work
    const int run_threads = cfg.runs > 1 ? cfg.threads : 1;
    const int inner_threads = cfg.runs > 1 ? 1 : cfg.threads;
    const std::uint64_t last_seed = cfg.seed + cfg.runs - 1;
    res.report = monte_carlo(
        [&](std::uint64_t seed) {
            return run_once(res.stage.features, labels, cfg, seed, inner_threads, seed == last_seed ? &res.final_run : nullptr);
        },
        cfg.runs, cfg.seed, run_threads);
    return res;
}

inline std::ofstream open_artifact(const std::filesystem::path &dir, const std::string &name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cli", "cannot write '" + (dir / name).string() + "'");
    return out;
}

/// Loads inputs, runs the experiment and writes metrics.txt, metrics.csv,
/// classmap.ppm, eigenspectrum.txt, filters.txt, model.bin (and profile.bin
/// when requested) under cfg.out.
inline ExperimentResult run_pipeline(const PipelineConfig &cfg, std::ostream *log = nullptr) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    auto note = [&](const std::string &msg) {
        if (!log) return;
        const double s = std::chrono::duration<double>(clock::now() - t0).count();
        char buf[32];
        std::snprintf(buf, sizeof buf, "[%8.2fs] ", s);
        *log << buf << msg << std::endl;
    };

    const auto header_path = cfg.cube_header.value_or(header_path_for(cfg.cube));
    if (!std::filesystem::exists(cfg.cube)) throw Error(ErrorKind::io, "datacube", "cube file '" + cfg.cube.string() + "' does not exist");
    if (!std::filesystem::exists(header_path))
        throw Error(ErrorKind::io, "datacube", "cube header '" + header_path.string() + "' does not exist");
    HyperCube cube = load_cube(cfg.cube, read_header(header_path));
    note("loaded cube " + std::to_string(cube.rows()) + "x" + std::to_string(cube.cols()) + "x" + std::to_string(cube.bands()));
    for (std::size_t b : cfg.removed_bands)
        if (b >= cube.bands())
            throw Error(ErrorKind::config, "cli",
                        "removed_bands: band " + std::to_string(b + 1) + " exceeds the cube's " + std::to_string(cube.bands()) + " bands");
    if (!cfg.removed_bands.empty()) {
        cube = remove_bands(cube, cfg.removed_bands);
        note("removed " + std::to_string(cfg.removed_bands.size()) + " bands, " + std::to_string(cube.bands()) + " remain");
    }

    LabelMap labels;
    if (cfg.labels_header && detail::lower(cfg.labels.extension().string()) != ".pgm") {
        const CubeHeader lh = read_header(*cfg.labels_header);
        if (lh.rows != cube.rows() || lh.cols != cube.cols())
            throw Error(ErrorKind::io, "datacube", "label raster dimensions do not match the cube");
        if (lh.bands != 1 || (lh.type != SampleType::uint8 && lh.type != SampleType::uint16))
            throw Error(ErrorKind::io, "datacube", "label raster must be a single 8- or 16-bit unsigned band");
        const HyperCube raw = load_cube(cfg.labels, lh);
        std::vector<int> v(raw.pixels());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(raw.values()[i]);
        labels = LabelMap(lh.rows, lh.cols, std::move(v));
    } else {
        labels = load_labels(cfg.labels, cube.rows(), cube.cols());
    }
    note("loaded labels: " + std::to_string(labels.num_classes()) + " classes, " + std::to_string(labels.labeled_count()) +
         " labeled pixels");

    std::filesystem::create_directories(cfg.out);
    ExperimentResult res = run_experiment(cube, labels, cfg);
    note("finished " + std::to_string(cfg.runs) + " run(s), mean OA " + std::to_string(res.report.oa));

    {
        auto out = open_artifact(cfg.out, "eigenspectrum.txt");
        write_eigenspectrum(out, res.stage.pca, res.stage.components);
    }
    if (!res.stage.filter_sets.empty()) {
        auto out = open_artifact(cfg.out, "filters.txt");
        for (std::size_t p = 0; p < res.stage.filter_sets.size(); ++p) {
            if (!cfg.per_component_filters && p > 0) break;
            if (cfg.per_component_filters) out << "# component " << p + 1 << '\n';
            write_filter_set(out, res.stage.filter_sets[p]);
            out << '\n';
        }
    }
    {
        auto out = open_artifact(cfg.out, "metrics.txt");
        std::string name = cfg.features == FeatureMode::components ? "PCA" : "Energy profile";
        if (cfg.features == FeatureMode::energy_profile && cfg.append_components) name += "+PCA";
        out << "Components retained: " << res.stage.components << " (variance fraction " << cfg.variance_fraction << ")\n";
        if (!res.stage.filter_sets.empty())
            out << "Filters: " << res.stage.filter_sets.front().size() << " of window " << cfg.window_c << "x" << cfg.window_c << "\n";
        out << "Feature dimension: " << res.stage.features.dim() << "\n";
        write_metrics_table(out, res.report, name, cfg.proportion);
    }
    {
        auto out = open_artifact(cfg.out, "metrics.csv");
        write_metrics_csv(out, res.report);
    }
    write_class_map(res.final_run.prediction, default_palette(labels.num_classes()), cfg.out / "classmap.ppm");
    save_model(res.final_run.model, cfg.out / "model.bin");
    if (cfg.save_profile) write_profile(res.stage.features, cfg.out / "profile.bin");
    note("artifacts written to " + cfg.out.string());
    return res;
}

}  // namespace hsi
