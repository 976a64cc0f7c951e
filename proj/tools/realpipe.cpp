#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <realpipe/realpipe.hpp>

int main(int argc, char** argv) {
    CLI::App cli{"realpipe: fit explainable pipelines, produce explanations, "
                 "validate transform routes and benchmark overhead"};
    cli.require_subcommand(1);

    std::string fit_config;
    std::string fit_out = "app.json";
    auto* fit = cli.add_subcommand("fit",
                                   "fit the pipeline and model from a project "
                                   "config, write an app bundle");
    fit->add_option("config", fit_config, "project config JSON")->required();
    fit->add_option("-o,--output", fit_out, "bundle output path");

    std::string produce_kind;
    std::string produce_app;
    std::optional<std::string> produce_input;
    std::size_t produce_k = 5;
    std::string produce_out = "explanation.json";
    std::string produce_format = "json";
    auto* produce = cli.add_subcommand(
        "produce", "produce an interpretable explanation from an app bundle");
    produce
        ->add_option("kind", produce_kind,
                     "one of: contributions, importance, examples")
        ->required()
        ->check(CLI::IsMember({"contributions", "importance", "examples"}));
    produce->add_option("app", produce_app, "app bundle JSON")->required();
    produce->add_option("-i,--input", produce_input,
                        "input rows CSV (contributions and examples)");
    produce->add_option("-k", produce_k, "neighbors per row (examples)");
    produce->add_option("-o,--output", produce_out, "explanation output path");
    produce->add_option("--format", produce_format, "output format")
        ->check(CLI::IsMember({"json", "table"}));

    std::string validate_config;
    auto* validate = cli.add_subcommand(
        "validate", "fit from a project config and report per-route health");
    validate->add_option("config", validate_config, "project config JSON")
        ->required();

    std::string bench_config;
    std::string bench_out = "bench.json";
    auto* bench = cli.add_subcommand(
        "bench", "run the explanation overhead benchmark, write a report");
    bench->add_option("config", bench_config, "bench config JSON")->required();
    bench->add_option("-o,--output", bench_out, "report output path");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = cli.exit(e);
        return code == 0 ? 0 : realpipe::kExitConfig;
    }

    realpipe::CommandStreams streams{std::cout, std::cerr};
    if (fit->parsed())
        return realpipe::cmd_fit(fit_config, fit_out, streams);
    if (produce->parsed())
        return realpipe::cmd_produce(produce_kind, produce_app, produce_input,
                                     produce_k, produce_out, produce_format,
                                     streams);
    if (validate->parsed())
        return realpipe::cmd_validate(validate_config, streams);
    return realpipe::cmd_bench(bench_config, bench_out, streams);
}
