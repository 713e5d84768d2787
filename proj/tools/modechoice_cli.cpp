// Command-line front end for the transport-mode recommendation pipeline:
//   generate  synthetic city + trip tables
//   train     featurize, resample, boost, persist the model bundle
//   predict   score new sessions with a trained bundle
//   evaluate  weighted-F1 report for a predictions file
//   mnl       multinomial logit comparison + coefficient tables
//   eda       dataset summaries (mode speed/price, label mix, OD cells)
//
// Exit codes: 0 ok, 2 config error, 3 data/schema error, 4 numeric failure.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modechoice/pipeline.hpp"

namespace {

using modechoice::pipeline::PipelineConfig;

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string data_dir;
    std::string out_dir;
    std::int64_t seed = -1;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_file, "flat key=value config file");
    cmd->add_option("-s,--set", opts.overrides, "config override key=value (repeatable)");
    cmd->add_option("-d,--data-dir", opts.data_dir, "dataset directory");
    cmd->add_option("-o,--out-dir", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "global seed (derives all stage seeds)");
    cmd->add_option("--threads", opts.threads, "worker threads (0 = default)");
}

PipelineConfig make_config(const CommonOpts& opts) {
    PipelineConfig cfg;
    if (!opts.config_file.empty()) modechoice::pipeline::load_config_file(cfg, opts.config_file);
    for (const auto& kv : opts.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw modechoice::ConfigError("override must be key=value: " + kv);
        modechoice::pipeline::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opts.data_dir.empty()) cfg.data_dir = opts.data_dir;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.threads > 0) cfg.threads = opts.threads;
    cfg.finalize();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"context-aware multi-modal transport mode recommendation toolkit"};
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, predict_opts, eval_opts, mnl_opts, eda_opts;

    CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset with planted choice behavior");
    add_common(gen, gen_opts);

    CLI::App* train = app.add_subcommand("train", "train the boosted-tree recommender");
    add_common(train, train_opts);

    CLI::App* predict = app.add_subcommand("predict", "score sessions with a trained model bundle");
    add_common(predict, predict_opts);
    std::string model_dir = "out";
    std::string predictions_out = "predictions.csv";
    predict->add_option("-m,--model-dir", model_dir, "directory holding model.txt + feature_artifacts.txt");
    predict->add_option("-p,--predictions", predictions_out, "output predictions CSV");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score a predictions file against click labels");
    add_common(evaluate, eval_opts);
    std::string predictions_in = "predictions.csv";
    std::string report_out;
    evaluate->add_option("-p,--predictions", predictions_in, "predictions CSV to score");
    evaluate->add_option("-r,--report", report_out, "output report CSV (default <out_dir>/eval_report.csv)");

    CLI::App* mnl = app.add_subcommand("mnl", "fit the multinomial logit comparison ladder");
    add_common(mnl, mnl_opts);

    CLI::App* eda = app.add_subcommand("eda", "write dataset summary tables");
    add_common(eda, eda_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            modechoice::pipeline::cmd_generate(make_config(gen_opts));
        } else if (train->parsed()) {
            modechoice::pipeline::cmd_train(make_config(train_opts));
        } else if (predict->parsed()) {
            const PipelineConfig cfg = make_config(predict_opts);
            modechoice::pipeline::cmd_predict(cfg, model_dir, predictions_out);
        } else if (evaluate->parsed()) {
            const PipelineConfig cfg = make_config(eval_opts);
            modechoice::pipeline::cmd_evaluate(cfg, predictions_in,
                                               report_out.empty() ? cfg.out("eval_report.csv") : report_out);
        } else if (mnl->parsed()) {
            modechoice::pipeline::cmd_mnl(make_config(mnl_opts));
        } else if (eda->parsed()) {
            modechoice::pipeline::cmd_eda(make_config(eda_opts));
        }
    } catch (const modechoice::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const modechoice::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const modechoice::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
