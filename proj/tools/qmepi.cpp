// Command-line front end for the qmepi solvers.
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "qmepi/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Minimum-error qubit discrimination with and without post-measurement information"};
  std::string command;
  std::string format = "json";
  qmepi::RunConfig cfg;
  double tol_class = 0, tol_value = 0;
  std::uint64_t seed = 0;

  app.add_option("command", command, "solve-me | solve-mepi | classify | verify | oracle | geometry")
      ->required()
      ->check(CLI::IsMember({"solve-me", "solve-mepi", "classify", "verify", "oracle", "geometry"}));
  app.add_option("--input,-i", cfg.input_path, "input JSON file")->required();
  auto* out_opt = app.add_option("--output,-o", "output file (default: standard output)");
  auto* tc = app.add_option("--tol-class", tol_class, "tolerance for classification comparisons");
  auto* tv = app.add_option("--tol-value", tol_value, "value tolerance of the minimax oracle");
  auto* sd = app.add_option("--seed", seed, "seed of the oracle restarts");
  app.add_option("--format", format, "json or csv (csv: geometry only)")->check(CLI::IsMember({"json", "csv"}));
  app.add_flag("--uncertified", cfg.uncertified, "print results even when certification fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : qmepi::kExitValidation;
  }
  cfg.command = qmepi::command_from_string(command);
  cfg.format = qmepi::format_from_string(format);
  if (*out_opt) cfg.output_path = out_opt->as<std::string>();
  if (*tc) cfg.tol_class = tol_class;
  if (*tv) cfg.tol_value = tol_value;
  if (*sd) cfg.seed = seed;
  return qmepi::run(cfg, std::cout, std::cerr);
}
