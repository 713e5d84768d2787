// Acceptance suite. Each criterion runs end to end at its stated tolerance
// and prints one [PASS]/[FAIL] line; the exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "modechoice/pipeline.hpp"

using namespace modechoice;

namespace {

struct Criterion {
    std::string name;
    std::function<bool(std::string&)> run;
};

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string temp_dir(const std::string& tag) {
    const auto p = std::filesystem::temp_directory_path() / ("modechoice_accept_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// 1. metric oracle: weighted F1 vs a direct transcription of the metric
//    definition, 1000 random label vectors, exact to 1e-12, < 10 s
// ---------------------------------------------------------------------------

double brute_force_weighted_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
    double total = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
        long tp = 0, fp = 0, fn = 0, support = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == c) ++support;
            if (predicted[i] == c && truth[i] == c) ++tp;
            if (predicted[i] == c && truth[i] != c) ++fp;
            if (predicted[i] != c && truth[i] == c) ++fn;
        }
        const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        total += static_cast<double>(support) / static_cast<double>(truth.size()) * f1;
    }
    return total;
}

bool metric_oracle(std::string& detail) {
    const double t0 = now_s();
    Rng rng(2024);
    for (int round = 0; round < 1000; ++round) {
        const std::size_t n = 1 + rng.uniform_index(500);
        std::vector<int> truth(n), predicted(n);
        for (auto& v : truth) v = static_cast<int>(rng.uniform_index(kNumClasses));
        for (auto& v : predicted) v = static_cast<int>(rng.uniform_index(kNumClasses));
        const double lib = eval::weighted_f1(truth, predicted);
        const double oracle = brute_force_weighted_f1(truth, predicted);
        if (std::abs(lib - oracle) > 1e-12) {
            detail = "mismatch " + format_double(lib) + " vs " + format_double(oracle);
            return false;
        }
    }
    const double dt = now_s() - t0;
    detail = "1000 vectors exact to 1e-12 in " + format_double(dt) + "s";
    return dt < 10.0;
}

// ---------------------------------------------------------------------------
// 2. MNL correctness: derivative oracles + coefficient recovery on 50k
//    planted sessions, < 60 s
// ---------------------------------------------------------------------------

bool mnl_correctness(std::string& detail) {
    const double t0 = now_s();
    const auto spec = mnl::spec_by_name("distance_cost");
    const std::size_t np = spec.n_params();

    synthgen::SynthConfig small_cfg;
    small_cfg.n_sessions = 1000;
    small_cfg.seed = 501;
    const auto small = synthgen::generate(small_cfg).sessions;

    Rng rng(640);
    for (int point = 0; point < 20; ++point) {
        std::vector<double> beta(np);
        for (std::size_t i = 0; i + 1 < np; ++i) beta[i] = rng.uniform(-2e-4, 1e-4);
        beta[np - 1] = rng.uniform(-1e-3, 0.0);
        const auto like = mnl::log_likelihood(spec, beta, small, true);

        double grad_scale = 1.0;
        for (Eigen::Index i = 0; i < like.gradient.size(); ++i) {
            grad_scale = std::max(grad_scale, std::abs(like.gradient[i]));
        }
        for (std::size_t i = 0; i < np; ++i) {
            const double h = 1e-9 * (1.0 + 1e4 * std::abs(beta[i]));
            auto plus = beta, minus = beta;
            plus[i] += h;
            minus[i] -= h;
            const double fd = (mnl::log_likelihood(spec, plus, small, false).ll -
                               mnl::log_likelihood(spec, minus, small, false).ll) /
                              (2.0 * h);
            if (std::abs(fd - like.gradient[static_cast<Eigen::Index>(i)]) > 1e-6 * grad_scale) {
                detail = "gradient FD mismatch at point " + format_int(point);
                return false;
            }
        }

        double hess_scale = 1.0;
        for (Eigen::Index i = 0; i < like.hessian.size(); ++i) {
            hess_scale = std::max(hess_scale, std::abs(like.hessian.data()[i]));
        }
        for (std::size_t j = 0; j < np; ++j) {
            const double h = 1e-8 * (1.0 + 1e4 * std::abs(beta[j]));
            auto plus = beta, minus = beta;
            plus[j] += h;
            minus[j] -= h;
            const Eigen::VectorXd fd = (mnl::log_likelihood(spec, plus, small, true).gradient -
                                        mnl::log_likelihood(spec, minus, small, true).gradient) /
                                       (2.0 * h);
            for (std::size_t i = 0; i < np; ++i) {
                if (std::abs(fd[static_cast<Eigen::Index>(i)] -
                             like.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) >
                    1e-5 * hess_scale) {
                    detail = "Hessian FD mismatch at point " + format_int(point);
                    return false;
                }
            }
        }
    }

    synthgen::SynthConfig cfg;
    cfg.n_sessions = 50000;
    cfg.seed = 502;
    const auto ds = synthgen::generate(cfg);
    const auto model = mnl::fit(spec, ds.sessions);
    if (!model.converged) {
        detail = "Newton did not converge";
        return false;
    }
    const auto truth = cfg.true_beta();
    for (std::size_t i = 0; i < np; ++i) {
        if (std::abs(model.beta[i] - truth[i]) > 3.0 * model.std_errors[i]) {
            detail = model.parameter_names[i] + " outside 3 SE";
            return false;
        }
    }
    // qualitative sign pattern: cost hurts every mode, metro distance helps
    if (!(model.beta.back() < 0.0)) {
        detail = "cost coefficient not negative";
        return false;
    }
    if (!(model.beta[1] > 0.0) || truth[1] <= 0.0) {
        detail = "metro distance coefficient sign not recovered";
        return false;
    }
    const double dt = now_s() - t0;
    detail = "20 FD points + 11/11 coefficients within 3 SE in " + format_double(dt) + "s";
    return dt < 60.0;
}

// ---------------------------------------------------------------------------
// 3. nested-LL monotonicity across the comparison ladder
// ---------------------------------------------------------------------------

bool nested_ll(std::string& detail) {
    synthgen::SynthConfig cfg;
    cfg.n_sessions = 8000;
    cfg.seed = 503;
    const auto sessions = synthgen::generate(cfg).sessions;
    const auto rows = mnl::compare_models(mnl::standard_specs(), sessions);

    auto ll = [&](const char* name) {
        for (const auto& r : rows) {
            if (r.name == name) return r.log_likelihood;
        }
        return std::numeric_limits<double>::quiet_NaN();
    };
    const std::pair<const char*, const char*> nested[] = {
        {"null", "intercepts_only"},
        {"null", "distance_cost"},
        {"intercepts_only", "intercepts_time"},
        {"intercepts_only", "intercepts_distance"},
        {"intercepts_only", "intercepts_cost"},
        {"intercepts_time", "intercepts_time_cost"},
        {"intercepts_cost", "intercepts_time_cost"},
        {"intercepts_distance", "intercepts_distance_cost"},
        {"intercepts_cost", "intercepts_distance_cost"},
        {"distance_cost", "intercepts_distance_cost"},
    };
    for (const auto& [small, large] : nested) {
        if (!(ll(large) >= ll(small) - 1e-6)) {
            detail = std::string(large) + " lost likelihood against " + small;
            return false;
        }
    }
    detail = "10 nested pairs hold within 1e-6";
    return true;
}

// ---------------------------------------------------------------------------
// 4. GBDT sanity on a deterministic cost rule, < 5 min
// ---------------------------------------------------------------------------

bool gbdt_rule(std::string& detail) {
    const double t0 = now_s();
    synthgen::SynthConfig cfg;
    cfg.n_sessions = 20000;
    cfg.seed = 504;
    cfg.no_click_rate = 0.0;
    auto ds = synthgen::generate(cfg);
    for (auto& s : ds.sessions) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : s.plans) {
            const double cost = p.price_cent + 0.2 * p.eta_s;
            if (cost < best) {
                best = cost;
                s.label = p.mode;
            }
        }
    }

    features::FeatureArtifacts artifacts;
    for (const auto& p : ds.bus_stations) artifacts.stations.add(features::Network::bus, p);
    for (const auto& p : ds.metro_stations) artifacts.stations.add(features::Network::metro, p);
    for (const auto& [cell, counts] : ds.poi_counts) {
        auto& slot = artifacts.poi.cells[cell];
        for (int c = 0; c < features::kNumPoiCategories; ++c) slot[static_cast<std::size_t>(c)] = counts[static_cast<std::size_t>(c)];
    }
    artifacts.landmarks = cfg.landmarks;
    artifacts.profile_dim = cfg.profile_dim;

    const auto [train_s, valid_s] = split_by_time(ds.sessions, 1542988800);
    artifacts.frequency = features::VisitFrequency::build(train_s, artifacts.geohash_precision);
    const auto train_table = features::build_feature_table(train_s, artifacts);
    const auto valid_table = features::build_feature_table(valid_s, artifacts);

    gbdt::GbdtConfig gc;  // the stated hyperparameters
    gc.num_leaves = 40;
    gc.max_depth = 8;
    gc.learning_rate = 0.1;
    gc.subsample = 0.8;
    gc.feature_fraction = 0.8;
    gc.min_child_samples = 60;
    gc.max_rounds = 400;
    gc.early_stopping_patience = 50;
    gc.seed = 17;
    const auto ens = gbdt::train(train_table, valid_table, gc);

    const auto predicted = gbdt::predict_label(ens, valid_table);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < valid_table.n_rows; ++r) {
        correct += predicted[r] == valid_table.labels[r] ? 1 : 0;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(valid_table.n_rows);

    // full batch: the multiclass log-loss may never increase
    gbdt::GbdtConfig full = gc;
    full.subsample = 1.0;
    full.feature_fraction = 1.0;
    full.max_rounds = 60;
    features::FeatureTable head = train_table;
    head.n_rows = 5000;
    head.values.resize(head.n_rows * head.n_cols);
    head.labels.resize(head.n_rows);
    head.session_ids.resize(head.n_rows);
    const auto full_ens = gbdt::train(head, features::FeatureTable{}, full);
    for (std::size_t r = 1; r < full_ens.training_log.size(); ++r) {
        if (full_ens.training_log[r].train_logloss > full_ens.training_log[r - 1].train_logloss + 1e-12) {
            detail = "training log-loss increased at round " + format_int(static_cast<std::int64_t>(r));
            return false;
        }
    }

    const double dt = now_s() - t0;
    detail = "held-out accuracy " + format_double(accuracy) + " (" + format_int(ens.best_round) +
             " rounds), loss monotone, " + format_double(dt) + "s";
    return accuracy >= 0.95 && dt < 300.0;
}

// ---------------------------------------------------------------------------
// 5. SMOTE geometry + the resampling ordering on an imbalanced task
// ---------------------------------------------------------------------------

features::FeatureTable blob_table(std::size_t n_major, std::size_t n_minor, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    auto emit = [&](int label, double cx, double cy, double sigma, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            rows.push_back({cx + sigma * rng.normal(), cy + sigma * rng.normal(), rng.uniform(),
                            rng.uniform(), rng.uniform()});
            labels.push_back(label);
        }
    };
    emit(2, 0.0, 0.0, 2.2, n_major);
    emit(4, 2.5, 2.5, 0.8, n_minor);
    emit(6, -2.5, 2.5, 0.8, n_minor);
    emit(8, 0.0, -3.0, 0.8, n_minor);
    features::FeatureTable t;
    t.column_names = {"x", "y", "u1", "u2", "u3"};
    t.column_families.assign(5, "test");
    t.n_cols = 5;
    t.n_rows = rows.size();
    t.labels = labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        t.session_ids.push_back("b" + format_int(static_cast<std::int64_t>(r)));
        for (const double v : rows[r]) t.values.push_back(v);
    }
    return t;
}

bool smote_geometry(std::string& detail) {
    // convex-combination check over every synthetic sample
    Rng rng(77);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 400; ++i) {
        rows.push_back({rng.normal(), rng.normal(), rng.normal(), rng.uniform()});
        labels.push_back(1);
    }
    std::vector<std::size_t> minority;
    for (int i = 0; i < 25; ++i) {
        rows.push_back({rng.normal(), rng.normal(),
                        i % 4 == 0 ? features::missing_value() : rng.normal(), rng.uniform()});
        minority.push_back(rows.size() - 1);
        labels.push_back(5);
    }
    features::FeatureTable table;
    table.column_names = {"a", "b", "c", "d"};
    table.column_families.assign(4, "test");
    table.n_cols = 4;
    table.n_rows = rows.size();
    table.labels = labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        table.session_ids.push_back("s" + format_int(static_cast<std::int64_t>(r)));
        for (const double v : rows[r]) table.values.push_back(v);
    }
    resample::ResampleConfig rc;
    rc.strategy = resample::ResampleConfig::Strategy::smote;
    rc.target_ratio = 1.0;
    rc.seed = 31;
    const auto smoted = resample::smote_oversample(table, rc);

    std::size_t synthetic = 0;
    for (std::size_t r = table.n_rows; r < smoted.n_rows; ++r) {
        ++synthetic;
        bool ok = false;
        for (const std::size_t a : minority) {
            for (const std::size_t b : minority) {
                if (a == b) continue;
                bool feasible = true, pinned = false;
                double lambda = 0.0;
                for (std::size_t c = 0; c < table.n_cols && feasible; ++c) {
                    const double xs = smoted.at(r, c), xa = table.at(a, c), xb = table.at(b, c);
                    if (features::is_missing(xa) || features::is_missing(xb)) {
                        feasible = features::is_missing(xs) ? features::is_missing(xa) : xs == xa;
                        continue;
                    }
                    if (xa == xb) {
                        feasible = xs == xa;
                        continue;
                    }
                    const double l = (xs - xa) / (xb - xa);
                    if (l < -1e-9 || l > 1.0 + 1e-9) feasible = false;
                    else if (!pinned) {
                        lambda = l;
                        pinned = true;
                    } else if (std::abs(l - lambda) > 1e-9) {
                        feasible = false;
                    }
                }
                if (feasible) {
                    ok = true;
                    break;
                }
            }
            if (ok) break;
        }
        if (!ok) {
            detail = "synthetic row " + format_int(static_cast<std::int64_t>(r)) + " is not a convex combination";
            return false;
        }
    }

    // 20:1 imbalanced task: smote lifts minority recall over no resampling,
    // and random duplication does not beat smote on weighted F1
    const auto train = blob_table(4000, 200, 91);
    const auto test = blob_table(2000, 100, 92);

    gbdt::GbdtConfig gc;
    gc.num_leaves = 40;
    gc.max_depth = 8;
    gc.learning_rate = 0.1;
    gc.min_child_samples = 60;
    gc.subsample = 0.8;
    gc.feature_fraction = 1.0;
    gc.max_rounds = 60;
    gc.seed = 7;

    resample::ResampleConfig base;
    base.seed = 13;
    base.k_neighbors = 5;
    base.target_ratio = 0.5;

    auto run = [&](resample::ResampleConfig::Strategy strategy) {
        resample::ResampleConfig cfg = base;
        cfg.strategy = strategy;
        const auto resampled = resample::apply(train, cfg);
        const auto ens = gbdt::train(resampled, features::FeatureTable{}, gc);
        return eval::evaluate(test.labels, gbdt::predict_label(ens, test));
    };
    const auto none_report = run(resample::ResampleConfig::Strategy::none);
    const auto smote_report = run(resample::ResampleConfig::Strategy::smote);
    const auto random_report = run(resample::ResampleConfig::Strategy::random);

    const std::vector<int> minority_classes{4, 6, 8};
    const double none_recall = eval::mean_recall(none_report, minority_classes);
    const double smote_recall = eval::mean_recall(smote_report, minority_classes);

    detail = format_int(static_cast<std::int64_t>(synthetic)) + " samples convex; minority recall none=" +
             format_double(none_recall) + " smote=" + format_double(smote_recall) + "; wF1 smote=" +
             format_double(smote_report.weighted_f1) + " random=" + format_double(random_report.weighted_f1);
    return smote_recall > none_recall && random_report.weighted_f1 <= smote_report.weighted_f1;
}

// ---------------------------------------------------------------------------
// 6. feature correctness: geohash vectors, station oracle, no leakage
// ---------------------------------------------------------------------------

bool feature_correctness(std::string& detail) {
    struct Vector {
        double lng, lat;
        const char* codes[8];
    };
    const Vector vectors[] = {
        {116.3883, 39.9289, {"w", "wx", "wx4", "wx4g", "wx4g0", "wx4g0k", "wx4g0kz", "wx4g0kz6"}},
        {10.40744, 57.64911, {"u", "u4", "u4p", "u4pr", "u4pru", "u4pruy", "u4pruyd", "u4pruydq"}},
        {-5.603, 42.605, {"e", "ez", "ezs", "ezs4", "ezs42", "ezs42s", "ezs42s0", "ezs42s00"}},
        {0.0, 0.0, {"s", "s0", "s00", "s000", "s0000", "s00000", "s000000", "s0000000"}},
        {151.2093, -33.8688, {"r", "r3", "r3g", "r3gx", "r3gx2", "r3gx2f", "r3gx2f7", "r3gx2f77"}},
        {-74.0445, 40.6892, {"d", "dr", "dr5", "dr5r", "dr5r7", "dr5r7p", "dr5r7p4", "dr5r7p4r"}},
        {-43.2105, -22.9519, {"7", "75", "75c", "75cm", "75cm2", "75cm2t", "75cm2tx", "75cm2txp"}},
        {180.0, 90.0, {"z", "zz", "zzz", "zzzz", "zzzzz", "zzzzzz", "zzzzzzz", "zzzzzzzz"}},
        {-180.0, -90.0, {"0", "00", "000", "0000", "00000", "000000", "0000000", "00000000"}},
        {-0.1246, 51.5007, {"g", "gc", "gcp", "gcpu", "gcpuv", "gcpuvp", "gcpuvpm", "gcpuvpmm"}},
    };
    for (const auto& v : vectors) {
        for (int p = 1; p <= 8; ++p) {
            if (geohash_encode(v.lng, v.lat, p) != v.codes[p - 1]) {
                detail = "geohash mismatch at " + format_double(v.lng) + "," + format_double(v.lat);
                return false;
            }
        }
    }

    // station features against an exhaustive scan over 1000 stations
    Rng rng(608);
    features::StationIndex idx;
    std::vector<GeoPoint> pts;
    for (int i = 0; i < 1000; ++i) {
        const GeoPoint p{rng.uniform(116.1, 116.7), rng.uniform(39.7, 40.2)};
        pts.push_back(p);
        idx.add(features::Network::bus, p);
        idx.add(features::Network::metro, p);
    }
    for (int trial = 0; trial < 200; ++trial) {
        const GeoPoint q{rng.uniform(116.1, 116.7), rng.uniform(39.7, 40.2)};
        std::vector<double> all;
        for (const auto& p : pts) all.push_back(haversine_m(q, p));
        std::sort(all.begin(), all.end());
        const auto got = idx.k_nearest(features::Network::bus, q, 5);
        for (int i = 0; i < 5; ++i) {
            if (got[static_cast<std::size_t>(i)] != all[static_cast<std::size_t>(i)]) {
                detail = "k-nearest differs from the exhaustive scan";
                return false;
            }
        }
        std::size_t count = 0;
        for (const double d : all) count += d <= 1500.0 ? 1 : 0;
        if (idx.count_within(features::Network::bus, q, 1500.0) != count) {
            detail = "radius count differs from the exhaustive scan";
            return false;
        }
    }

    // no leakage: features of the training fold ignore validation sessions
    synthgen::SynthConfig cfg;
    cfg.n_sessions = 600;
    cfg.seed = 506;
    const auto ds = synthgen::generate(cfg);
    const auto [train_s, valid_s] = split_by_time(ds.sessions, 1542988800);
    features::FeatureArtifacts artifacts;
    for (const auto& p : ds.bus_stations) artifacts.stations.add(features::Network::bus, p);
    for (const auto& p : ds.metro_stations) artifacts.stations.add(features::Network::metro, p);
    artifacts.landmarks = cfg.landmarks;
    artifacts.profile_dim = cfg.profile_dim;
    artifacts.frequency = features::VisitFrequency::build(train_s, artifacts.geohash_precision);
    const auto base_table = features::build_feature_table(train_s, artifacts);

    auto permuted = valid_s;
    std::reverse(permuted.begin(), permuted.end());
    features::FeatureArtifacts again;
    again.stations = artifacts.stations;
    again.poi = artifacts.poi;
    again.landmarks = artifacts.landmarks;
    again.profile_dim = artifacts.profile_dim;
    again.frequency = features::VisitFrequency::build(train_s, again.geohash_precision);
    const auto table2 = features::build_feature_table(train_s, again);
    for (std::size_t i = 0; i < base_table.values.size(); ++i) {
        const double a = base_table.values[i], b = table2.values[i];
        if (!((features::is_missing(a) && features::is_missing(b)) || a == b)) {
            detail = "training features changed when validation sessions were permuted";
            return false;
        }
    }

    detail = "10 geohash vectors, 200 station queries vs 1000-station scan, no leakage";
    return true;
}

// ---------------------------------------------------------------------------
// 7. reproducibility: two end-to-end training runs, byte-identical outputs
// ---------------------------------------------------------------------------

bool reproducibility(std::string& detail) {
    const std::string data = temp_dir("repro_data");
    const std::string out1 = temp_dir("repro_out1");
    const std::string out2 = temp_dir("repro_out2");

    pipeline::PipelineConfig cfg;
    cfg.data_dir = data;
    cfg.out_dir = out1;
    cfg.seed = 404;
    cfg.synth.n_sessions = 2000;
    cfg.gbdt.max_rounds = 20;
    cfg.gbdt.min_child_samples = 20;
    cfg.finalize();

    pipeline::cmd_generate(cfg);
    pipeline::cmd_train(cfg);
    cfg.out_dir = out2;
    pipeline::cmd_train(cfg);

    for (const char* name : {"model.txt", "training_log.csv", "validation_report.csv", "importance.csv",
                             "feature_artifacts.txt", "feature_schema.csv"}) {
        const auto a = slurp(out1 + "/" + name);
        const auto b = slurp(out2 + "/" + name);
        if (a.empty() || a != b) {
            detail = std::string(name) + " differs between reruns";
            return false;
        }
    }
    std::filesystem::remove_all(data);
    std::filesystem::remove_all(out1);
    std::filesystem::remove_all(out2);
    detail = "model file and all reports byte-identical across reruns";
    return true;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"metric-oracle", metric_oracle},
        {"mnl-correctness", mnl_correctness},
        {"nested-ll-monotonicity", nested_ll},
        {"gbdt-rule-sanity", gbdt_rule},
        {"smote-geometry", smote_geometry},
        {"feature-correctness", feature_correctness},
        {"reproducibility", reproducibility},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", c.name.c_str(), detail.c_str());
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    return failures;
}
