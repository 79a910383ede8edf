#pragma once

namespace CLI {
class App;
}

namespace ewcft::cli {

// Each function registers one subcommand whose callback does the work.
void add_gen_data(CLI::App& app);
void add_train(CLI::App& app);
void add_finetune(CLI::App& app);
void add_sweep(CLI::App& app);
void add_ablate(CLI::App& app);
void add_pareto(CLI::App& app);
void add_report(CLI::App& app);
void add_reproduce(CLI::App& app);

}  // namespace ewcft::cli
