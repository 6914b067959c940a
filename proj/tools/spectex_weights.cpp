// Utility for VGGW files: random weight sets for smoke tests, engine-side
// manifests, and verification of an exporter's manifest.

#include "spectex/errors.hpp"
#include "spectex/file_util.hpp"
#include "spectex/image_io.hpp"
#include "spectex/reference.hpp"
#include "spectex/weights_io.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace spectex;

int main(int argc, char** argv) {
    CLI::App app{"VGGW weight file utility", "spectex_weights"};
    app.require_subcommand(1);

    std::string out;
    std::uint64_t seed = 0;
    std::string last_conv = "conv4_4";
    std::uint32_t width = 0;
    auto* random_cmd = app.add_subcommand("random", "write a He-initialised random weight set");
    random_cmd->add_option("--out", out, "output VGGW path")->required();
    random_cmd->add_option("--seed", seed)->capture_default_str();
    random_cmd->add_option("--last-conv", last_conv, "deepest conv layer to include")->capture_default_str();
    random_cmd->add_option("--width", width, "use this channel count for every layer (0 = VGG-19 widths)")
        ->capture_default_str();

    std::string weights_path;
    std::string manifest_path;
    std::string reference_image;
    auto* manifest_cmd = app.add_subcommand("manifest", "write checksums and engine reference activations");
    manifest_cmd->add_option("--weights", weights_path)->required();
    manifest_cmd->add_option("--out", manifest_path)->required();
    manifest_cmd->add_option("--reference-image", reference_image);

    auto* verify_cmd = app.add_subcommand("verify", "check a weight file against an exporter manifest");
    verify_cmd->add_option("--weights", weights_path)->required();
    verify_cmd->add_option("--manifest", manifest_path)->required();
    verify_cmd->add_option("--reference-image", reference_image);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (random_cmd->parsed()) {
            auto layers = vgg19_expected_layers(last_conv);
            if (width > 0) layers = narrowed_layers(layers, width);
            save_weights(out, make_random_weights(layers, seed));
            std::cout << "wrote " << layers.size() << " records to " << out << "\n";
            return 0;
        }
        const WeightSet weights = load_weights(weights_path);
        const RgbImage image = reference_image.empty() ? reference_test_image() : read_png(reference_image);
        if (manifest_cmd->parsed()) {
            const auto m = make_manifest(weights, image, reference_image.empty() ? "builtin" : reference_image);
            write_file_atomic(manifest_path, format_manifest(m));
            std::cout << "wrote " << manifest_path << "\n";
            return 0;
        }
        const Manifest manifest = load_manifest(manifest_path);
        verify_manifest_checksums(weights, manifest);
        validate_against(weights, vgg19_expected_layers());
        bool ok = true;
        for (const auto& c : check_reference_activations(weights, manifest, image)) {
            std::cout << (c.passed ? "PASS " : "FAIL ") << c.capture << " l2 expected " << c.expected_l2
                      << " got " << c.actual_l2 << " rel.err " << c.relative_error << "\n";
            ok = ok && c.passed;
        }
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
