#include "spectex/cli.hpp"

#include "spectex/errors.hpp"
#include "spectex/file_util.hpp"
#include "spectex/image_io.hpp"
#include "spectex/pipeline.hpp"

#include <CLI11.hpp>

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <ostream>

namespace spectex {

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::string current;
    for (char ch : text) {
        if (ch == ',') {
            if (!current.empty()) items.push_back(current);
            current.clear();
        } else if (ch != ' ') {
            current += ch;
        }
    }
    if (!current.empty()) items.push_back(current);
    return items;
}

std::filesystem::path intermediate_path(const std::filesystem::path& out, std::size_t iteration) {
    std::filesystem::path p = out;
    p.replace_extension();
    p += ".iter" + std::to_string(iteration) + out.extension().string();
    return p;
}

struct SynthFlags {
    std::string exemplar;
    std::string weights;
    std::string out;
    double beta = 1e5;
    std::string layer_weight = "1e9";
    std::string layers = "conv1_1,pool1,pool2,pool3,pool4";
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;
    std::size_t scale = 256;
    bool no_spectrum = false;
    std::string loss_log;
    std::size_t save_every = 0;
    int threads = 0;
    bool f64 = false;
    std::string phase_rule = "joint";
    bool unit_noise = false;
};

struct AnalyzeFlags {
    std::string image;
    std::string out;
    std::string radial;
    std::size_t scale = 0;
    int threads = 0;
};

// Turns flags into a config; ConfigError here counts as a usage error.
SynthesisConfig resolve_config(const SynthFlags& f) {
    SynthesisConfig config;
    config.layers = split_list(f.layers);
    config.layer_weights.clear();
    for (const auto& w : split_list(f.layer_weight)) {
        try {
            std::size_t used = 0;
            config.layer_weights.push_back(std::stod(w, &used));
            if (used != w.size()) throw std::invalid_argument(w);
        } catch (const std::exception&) {
            throw ConfigError("--layer-weight: '" + w + "' is not a number");
        }
    }
    if (config.layer_weights.empty()) throw ConfigError("--layer-weight needs a value");
    config.beta = f.beta;
    config.iterations = f.iterations;
    config.seed = f.seed;
    config.scale = f.scale;
    config.spectrum = !f.no_spectrum;
    config.phase_rule = f.phase_rule == "gray" ? PhaseRule::gray : PhaseRule::joint;
    config.unit_noise = f.unit_noise;
    config.validate();
    deepest_conv_for(config.layers); // rejects unknown layer names
    for (auto& name : config.layers) name = canonical_layer_name(name);
    return config;
}

void apply_threads(int flag_value) {
    const int n = resolve_thread_count(flag_value);
    if (n > 0) omp_set_num_threads(n);
}

template <typename T>
int run_synth(const SynthFlags& flags, const SynthesisConfig& config, std::ostream& out) {
    const auto started = std::chrono::steady_clock::now();
    const WeightSet weights = load_weights(flags.weights);
    const RgbImage exemplar = read_png(flags.exemplar);
    const std::filesystem::path out_path = flags.out;

    ProgressCallback progress;
    if (flags.save_every > 0) {
        progress = [&](const LossRecord& rec, const Tensor<double>& image) {
            if (rec.iteration > 0 && rec.iteration % flags.save_every == 0) {
                const std::array<double, 3> means{weights.channel_means[0], weights.channel_means[1],
                                                  weights.channel_means[2]};
                write_png(intermediate_path(out_path, rec.iteration), postprocess(image, means));
            }
        };
    }

    const SynthesisResult result = synthesize<T>(exemplar, config, weights, progress);
    write_png(out_path, result.output);
    if (!flags.loss_log.empty()) write_file_atomic(flags.loss_log, format_loss_csv(result.evaluations));

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const LossRecord& last = result.history.back();
    out << std::setprecision(6);
    out << "output       " << out_path.string() << " (" << result.output.width << "x"
        << result.output.height << ")\n";
    out << "iterations   " << result.report.iterations << " (" << result.report.evaluations
        << " evaluations, " << to_string(result.report.reason) << ")\n";
    out << "loss         total " << last.total << "  cnn " << last.cnn << "  beta*spectrum "
        << last.spectrum << "\n";
    out << "wall time    " << seconds << " s\n";
    return 0;
}

int run_analyze(const AnalyzeFlags& flags, std::ostream& out) {
    const RgbImage image = read_png(flags.image);
    Tensor<double> t = image_to_tensor(image);
    if (flags.scale != 0) {
        const auto [w, h] = rescaled_size(image.width, image.height, flags.scale);
        t = resize_bilinear(t, h, w);
    }
    write_png(flags.out, log_magnitude_image(t));
    const auto profile = radial_spectrum_profile(t);
    if (!flags.radial.empty()) write_file_atomic(flags.radial, format_radial_csv(profile));
    out << "magnitude    " << flags.out << " (" << t.width() << "x" << t.height() << ")\n";
    out << "peak radius  " << dominant_radius(profile) << "\n";
    return 0;
}

} // namespace

int resolve_thread_count(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SPECTEX_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return 0;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Texture synthesis with CNN feature statistics and a Fourier spectrum constraint",
                 "spectex"};
    app.require_subcommand(1);

    SynthFlags synth;
    auto* synth_cmd = app.add_subcommand("synth", "synthesize a texture from an exemplar");
    synth_cmd->add_option("--exemplar", synth.exemplar, "exemplar PNG")->required();
    synth_cmd->add_option("--weights", synth.weights, "VGGW weight file")->required();
    synth_cmd->add_option("--out", synth.out, "output PNG")->required();
    synth_cmd->add_option("--beta", synth.beta, "spectrum weight")->check(CLI::NonNegativeNumber)->capture_default_str();
    synth_cmd->add_option("--layer-weight", synth.layer_weight, "Gram layer weight, one value or a comma list")
        ->capture_default_str();
    synth_cmd->add_option("--layers", synth.layers, "comma-separated capture layers")->capture_default_str();
    synth_cmd->add_option("--iterations", synth.iterations, "L-BFGS iterations")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "noise seed")->capture_default_str();
    synth_cmd->add_option("--scale", synth.scale, "longest side after rescaling, 0 keeps the size")
        ->capture_default_str();
    synth_cmd->add_flag("--no-spectrum", synth.no_spectrum, "drop the spectrum constraint");
    synth_cmd->add_option("--loss-log", synth.loss_log, "CSV of every loss evaluation");
    synth_cmd->add_option("--save-every", synth.save_every, "write out.iterK.png every K iterations");
    synth_cmd->add_option("--threads", synth.threads, "thread cap (falls back to SPECTEX_THREADS)")
        ->check(CLI::NonNegativeNumber);
    synth_cmd->add_flag("--f64", synth.f64, "run the network in double precision");
    synth_cmd->add_option("--phase-rule", synth.phase_rule, "spectrum phase rule")
        ->check(CLI::IsMember({"joint", "gray"}))
        ->capture_default_str();
    synth_cmd->add_flag("--unit-noise", synth.unit_noise, "start from unit-variance noise");

    AnalyzeFlags analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "write the centred log-magnitude DFT of an image");
    analyze_cmd->add_option("--image", analyze.image, "input PNG")->required();
    analyze_cmd->add_option("--out", analyze.out, "magnitude PNG")->required();
    analyze_cmd->add_option("--radial", analyze.radial, "radial power profile CSV");
    analyze_cmd->add_option("--scale", analyze.scale, "rescale longest side first, 0 keeps the size")
        ->capture_default_str();
    analyze_cmd->add_option("--threads", analyze.threads, "thread cap")->check(CLI::NonNegativeNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (synth_cmd->parsed()) {
            SynthesisConfig config;
            try {
                config = resolve_config(synth);
            } catch (const ConfigError& e) {
                err << "error: " << e.what() << "\n\n" << synth_cmd->help();
                return 2;
            }
            apply_threads(synth.threads);
            return synth.f64 ? run_synth<double>(synth, config, out) : run_synth<float>(synth, config, out);
        }
        apply_threads(analyze.threads);
        return run_analyze(analyze, out);
    } catch (const OptimizerAbort& e) {
        err << "error: optimizer aborted after " << e.report().iterations << " iterations: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace spectex
