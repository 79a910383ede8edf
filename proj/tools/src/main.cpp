#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "common.hpp"

int main(int argc, char** argv) {
  using namespace ewcft::cli;
  CLI::App app{"Continual fine-tuning with elastic weight consolidation on synthetic biased corpora", "ewcft"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", "ewcft 0.1.0");
  add_gen_data(app);
  add_train(app);
  add_finetune(app);
  add_sweep(app);
  add_ablate(app);
  add_pareto(app);
  add_report(app);
  add_reproduce(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    for (const auto* sub : app.get_subcommands()) std::cerr << sub->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
