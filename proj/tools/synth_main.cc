// Writes the deterministic synthetic camouflage suite.
#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "synthetic/synthetic.h"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic camouflage suite"};
  std::string out;
  greencod::synthetic::SuiteOptions options;
  app.add_option("output", out, "Output directory")->required();
  app.add_option("--images", options.num_images, "Number of images")->check(CLI::PositiveNumber);
  app.add_option("--mask-size", options.mask_size, "Mask side in pixels")->check(CLI::PositiveNumber);
  app.add_option("--seed", options.seed, "Suite seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto manifest = greencod::synthetic::generate_suite(out, options);
    std::printf("%s\n", manifest.string().c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "greencod_synth: %s\n", e.what());
    return 1;
  }
  return 0;
}
