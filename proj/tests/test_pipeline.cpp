#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "modechoice/pipeline.hpp"
#include "test_util.hpp"

using namespace modechoice;
using pipeline::PipelineConfig;
using testutil::TempDir;

namespace {

PipelineConfig small_config(const std::string& data_dir, const std::string& out_dir) {
    PipelineConfig cfg;
    cfg.data_dir = data_dir;
    cfg.out_dir = out_dir;
    cfg.seed = 21;
    cfg.synth.n_sessions = 800;
    cfg.gbdt.max_rounds = 15;
    cfg.gbdt.early_stopping_patience = 15;
    cfg.gbdt.min_child_samples = 10;
    cfg.resample.strategy = resample::ResampleConfig::Strategy::smote;
    cfg.finalize();
    return cfg;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MODECHOICE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("generate/train/predict/evaluate round trip") {
    TempDir data{"pipe_data"}, out{"pipe_out"};
    PipelineConfig cfg = small_config(data.str(), out.str());

    pipeline::cmd_generate(cfg);
    REQUIRE(std::filesystem::exists(data.file("queries.csv")));
    REQUIRE(std::filesystem::exists(data.file("stations.csv")));

    pipeline::cmd_train(cfg);
    for (const char* name : {"model.txt", "feature_artifacts.txt", "training_log.csv", "importance.csv",
                             "validation_report.csv", "feature_schema.csv"}) {
        CAPTURE(name);
        REQUIRE(std::filesystem::exists(out.file(name)));
    }

    const std::string pred_path = out.file("predictions.csv");
    pipeline::cmd_predict(cfg, out.str(), pred_path);
    const auto preds = read_csv(pred_path);
    REQUIRE(preds.rows.size() == 800);
    REQUIRE(preds.header[0] == "session_id");

    // probabilities sum to one per row
    for (std::size_t r = 0; r < 50; ++r) {
        double sum = 0.0;
        for (int c = 0; c < kNumClasses; ++c) {
            sum += parse_double(preds.rows[r][2 + static_cast<std::size_t>(c)], "p");
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    }

    pipeline::cmd_evaluate(cfg, pred_path, out.file("eval_report.csv"));
    const auto report = read_csv(out.file("eval_report.csv"));
    REQUIRE(report.rows.size() == kNumClasses + 1);
    REQUIRE(report.rows.back()[0] == "weighted_f1");

    // prediction on the training data reproduces the training-time scores
    const auto sessions = load_dataset(cfg.queries(), cfg.plans(), cfg.clicks(), cfg.profiles());
    const auto [train_s, valid_s] = split_by_time(sessions, cfg.split_cutoff);
    const auto artifacts = pipeline::load_feature_artifacts(out.file("feature_artifacts.txt"),
                                                            cfg.stations(), cfg.poi());
    const auto valid_table = features::build_feature_table(valid_s, artifacts);
    const auto ens = gbdt::load_model(out.file("model.txt"));
    const auto labels = gbdt::predict_label(ens, valid_table);
    std::size_t checked = 0;
    for (std::size_t r = 0; r < preds.rows.size(); ++r) {
        for (std::size_t v = 0; v < valid_table.n_rows; ++v) {
            if (preds.rows[r][0] == valid_table.session_ids[v]) {
                REQUIRE(parse_int(preds.rows[r][1], "pred") == labels[v]);
                ++checked;
            }
        }
    }
    REQUIRE(checked == valid_table.n_rows);
}

TEST_CASE("end-to-end reruns are byte-identical") {
    TempDir data{"det_data"}, out1{"det_out1"}, out2{"det_out2"};
    PipelineConfig cfg = small_config(data.str(), out1.str());
    cfg.synth.n_sessions = 500;
    cfg.gbdt.max_rounds = 8;

    pipeline::cmd_generate(cfg);
    pipeline::cmd_train(cfg);
    cfg.out_dir = out2.str();
    pipeline::cmd_train(cfg);

    for (const char* name : {"model.txt", "training_log.csv", "validation_report.csv", "importance.csv",
                             "feature_artifacts.txt", "feature_schema.csv"}) {
        CAPTURE(name);
        REQUIRE(testutil::read_file(out1.file(name)) == testutil::read_file(out2.file(name)));
        REQUIRE(!testutil::read_file(out1.file(name)).empty());
    }

    // predictions rerun identically too
    pipeline::cmd_predict(cfg, out2.str(), out2.file("p1.csv"));
    pipeline::cmd_predict(cfg, out2.str(), out2.file("p2.csv"));
    REQUIRE(testutil::read_file(out2.file("p1.csv")) == testutil::read_file(out2.file("p2.csv")));
}

TEST_CASE("mnl and eda subcommands write their tables") {
    TempDir data{"mnl_data"}, out{"mnl_out"};
    PipelineConfig cfg = small_config(data.str(), out.str());
    cfg.synth.n_sessions = 1500;
    pipeline::cmd_generate(cfg);

    pipeline::cmd_mnl(cfg);
    const auto comparison = read_csv(out.file("mnl_comparison.csv"));
    REQUIRE(comparison.rows.size() == 8);

    // the null row carries sum of ln(1/m_i)
    const auto sessions = load_dataset(cfg.queries(), cfg.plans(), cfg.clicks(), cfg.profiles());
    const double expected_null = mnl::null_log_likelihood(sessions);
    bool found_null = false;
    double best_ll = -1e300;
    std::vector<std::pair<std::string, double>> lls;
    for (const auto& row : comparison.rows) {
        if (row[0] == "null") {
            found_null = true;
            REQUIRE(parse_double(row[2], "ll") == Catch::Approx(expected_null).epsilon(1e-9));
        }
        lls.push_back({row[0], parse_double(row[2], "ll")});
        best_ll = std::max(best_ll, lls.back().second);
    }
    REQUIRE(found_null);

    // nested-likelihood monotonicity over the ladder
    auto ll_of = [&](const std::string& name) {
        for (const auto& [n, v] : lls) {
            if (n == name) return v;
        }
        FAIL("missing " + name);
        return 0.0;
    };
    REQUIRE(ll_of("intercepts_only") >= ll_of("null") - 1e-6);
    REQUIRE(ll_of("intercepts_distance_cost") >= ll_of("intercepts_distance") - 1e-6);
    REQUIRE(ll_of("intercepts_distance_cost") >= ll_of("distance_cost") - 1e-6);

    const auto coeffs = read_csv(out.file("mnl_coefficients.csv"));
    REQUIRE(coeffs.rows.size() == 13);  // 11 parameters + LL + null rows

    pipeline::cmd_eda(cfg);
    const auto labels = read_csv(out.file("eda_label_frequency.csv"));
    double ratio_sum = 0.0;
    for (const auto& row : labels.rows) ratio_sum += parse_double(row[3], "ratio");
    REQUIRE(ratio_sum == Catch::Approx(1.0).margin(1e-9));

    const auto mode_summary = read_csv(out.file("eda_mode_summary.csv"));
    const auto expected = synthgen::mode_speed_price_summary(sessions);
    REQUIRE(mode_summary.rows.size() == expected.size());
    for (const auto& row : mode_summary.rows) {
        const int mode = static_cast<int>(parse_int(row[0], "mode"));
        REQUIRE(parse_double(row[4], "speed") ==
                Catch::Approx(expected.at(mode).mean_speed_mps).epsilon(1e-12));
    }
}

TEST_CASE("config file parsing and overrides") {
    TempDir dir{"cfg"};
    testutil::write_file(dir.file("run.cfg"),
                         "# comment line\n"
                         "seed = 99\n"
                         "gbdt.num_leaves=31\n"
                         "resample.strategy=random\n"
                         "synth.n_sessions=42\n"
                         "\n");
    PipelineConfig cfg;
    pipeline::load_config_file(cfg, dir.file("run.cfg"));
    REQUIRE(cfg.seed == 99);
    REQUIRE(cfg.gbdt.num_leaves == 31);
    REQUIRE(cfg.resample.strategy == resample::ResampleConfig::Strategy::random);
    REQUIRE(cfg.synth.n_sessions == 42);

    REQUIRE_THROWS_AS(pipeline::apply_config_entry(cfg, "no_such_key", "1"), ConfigError);
    REQUIRE_THROWS_AS(pipeline::apply_config_entry(cfg, "gbdt.num_leaves", "x"), ConfigError);

    // stage seeds derive from the global seed
    cfg.finalize();
    REQUIRE(cfg.synth.seed == derive_seed(99, pipeline::kStageSynthgen));
    REQUIRE(cfg.resample.seed == derive_seed(99, pipeline::kStageResample));
    REQUIRE(cfg.gbdt.seed == derive_seed(99, pipeline::kStageGbdt));
}

TEST_CASE("cli exit codes") {
    TempDir data{"cli_data"}, out{"cli_out"};

    // config error
    REQUIRE(run_cli("train --set nonsense=1 -d " + data.str() + " -o " + out.str()) == 2);

    // data error: directory has no dataset
    REQUIRE(run_cli("train -d " + data.str() + " -o " + out.str()) == 3);

    // a small end-to-end run succeeds
    REQUIRE(run_cli("generate -d " + data.str() + " --seed 5 --set synth.n_sessions=300") == 0);
    REQUIRE(run_cli("train -d " + data.str() + " -o " + out.str() +
                    " --seed 5 --set gbdt.max_rounds=3 --set resample.strategy=none") == 0);
    REQUIRE(std::filesystem::exists(out.file("model.txt")));
    REQUIRE(run_cli("predict -d " + data.str() + " -m " + out.str() + " -p " + out.file("preds.csv")) == 0);
    REQUIRE(run_cli("evaluate -d " + data.str() + " -o " + out.str() + " -p " + out.file("preds.csv")) == 0);
    REQUIRE(run_cli("eda -d " + data.str() + " -o " + out.str()) == 0);

    // schema mismatch: model trained on different profile width
    REQUIRE(run_cli("generate -d " + data.str() + " --seed 6 --set synth.n_sessions=300" +
                    " --set synth.profile_dim=10") == 0);
    REQUIRE(run_cli("predict -d " + data.str() + " -m " + out.str() + " -p " + out.file("p2.csv")) == 3);
}
