// Writes a synthetic polygon dataset in the training layout:
// <out>/<split>/images/*.png and <out>/<split>/gt/*.png.
#include <iostream>

#include "CLI11.hpp"

#include "smoe/errors.hpp"
#include "smoe/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate anti-aliased polygon scenes with one-pixel boundary ground truth", "make_synthetic"};
  std::string out;
  std::size_t train = 8, val = 2, test = 10, size = 64;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "Dataset root")->required();
  app.add_option("--train", train, "Training images")->capture_default_str();
  app.add_option("--val", val, "Validation images")->capture_default_str();
  app.add_option("--test", test, "Test images")->capture_default_str();
  app.add_option("--size", size, "Image height and width")->check(CLI::Range(8, 4096))->capture_default_str();
  app.add_option("--seed", seed, "Seed of the first training image")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  smoe::SyntheticOptions opt;
  opt.height = opt.width = size;
  try {
    // Splits draw from disjoint seed ranges.
    smoe::write_synthetic_split(out, "train", train, seed, opt);
    smoe::write_synthetic_split(out, "val", val, seed + 100000, opt);
    smoe::write_synthetic_split(out, "test", test, seed + 200000, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cout << "wrote " << train << "/" << val << "/" << test << " images to " << out << "\n";
  return 0;
}
