#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "modechoice/csv.hpp"
#include "modechoice/datamodel.hpp"
#include "modechoice/errors.hpp"
#include "modechoice/eval.hpp"
#include "modechoice/features.hpp"
#include "modechoice/gbdt.hpp"
#include "modechoice/mnl.hpp"
#include "modechoice/resample.hpp"
#include "modechoice/rng.hpp"
#include "modechoice/synthgen.hpp"

namespace modechoice::pipeline {

// Stage ids of the seed derivation scheme: every stochastic stage runs on
// derive_seed(global_seed, stage_id).
inline constexpr std::uint64_t kStageSynthgen = 1;
inline constexpr std::uint64_t kStageResample = 2;
inline constexpr std::uint64_t kStageGbdt = 3;

struct PipelineConfig {
    std::string data_dir = "data";
    std::string out_dir = "out";
    // empty = <data_dir>/<name>.csv
    std::string queries_path, plans_path, clicks_path, profiles_path, stations_path, poi_path;

    std::int64_t split_cutoff = 1542988800;  // last week of the window held out
    int geohash_precision = 6;
    int utc_offset_s = 8 * 3600;
    std::vector<NamedPlace> landmarks = synthgen::SynthConfig{}.landmarks;

    resample::ResampleConfig resample;
    gbdt::GbdtConfig gbdt;
    std::string mnl_spec = "distance_cost";
    bool eval_exclude_no_click = false;

    std::uint64_t seed = 7;
    int threads = 0;  // 0 = library default
    synthgen::SynthConfig synth;

    std::string path(const std::string& explicit_path, const char* name) const {
        if (!explicit_path.empty()) return explicit_path;
        return data_dir + "/" + name;
    }
    std::string queries() const { return path(queries_path, "queries.csv"); }
    std::string plans() const { return path(plans_path, "plans.csv"); }
    std::string clicks() const { return path(clicks_path, "clicks.csv"); }
    std::string profiles() const { return path(profiles_path, "profiles.csv"); }
    std::string stations() const { return path(stations_path, "stations.csv"); }
    std::string poi() const { return path(poi_path, "poi.csv"); }
    std::string out(const char* name) const { return out_dir + "/" + name; }

    /// Propagates the global seed and thread count to every stage.
    void finalize() {
        synth.seed = derive_seed(seed, kStageSynthgen);
        resample.seed = derive_seed(seed, kStageResample);
        gbdt.seed = derive_seed(seed, kStageGbdt);
#ifdef _OPENMP
        if (threads > 0) omp_set_num_threads(threads);
#endif
    }
};

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    const std::string ctx = "config key '" + key + "'";
    auto as_int = [&](const std::string& v) {
        try {
            return parse_int(v, ctx);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    };
    auto as_double = [&](const std::string& v) {
        try {
            return parse_double(v, ctx);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    };

    if (key == "data_dir") cfg.data_dir = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "queries") cfg.queries_path = value;
    else if (key == "plans") cfg.plans_path = value;
    else if (key == "clicks") cfg.clicks_path = value;
    else if (key == "profiles") cfg.profiles_path = value;
    else if (key == "stations") cfg.stations_path = value;
    else if (key == "poi") cfg.poi_path = value;
    else if (key == "split_cutoff") cfg.split_cutoff = as_int(value);
    else if (key == "geohash_precision") cfg.geohash_precision = static_cast<int>(as_int(value));
    else if (key == "utc_offset_s") cfg.utc_offset_s = static_cast<int>(as_int(value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int(value));
    else if (key == "threads") cfg.threads = static_cast<int>(as_int(value));
    else if (key == "mnl_spec") cfg.mnl_spec = value;
    else if (key == "eval_exclude_no_click") cfg.eval_exclude_no_click = as_int(value) != 0;
    else if (key == "landmarks") {
        cfg.landmarks.clear();
        for (const auto& item : split(value, ';')) {
            if (item.empty()) continue;
            const auto f = split(item, ':');
            if (f.size() != 3) throw ConfigError(ctx + ": expected name:lng:lat entries");
            cfg.landmarks.push_back({f[0], {as_double(f[1]), as_double(f[2])}});
        }
        cfg.synth.landmarks = cfg.landmarks;
    } else if (key == "resample.strategy") cfg.resample.strategy = resample::ResampleConfig::parse_strategy(value);
    else if (key == "resample.k_neighbors") cfg.resample.k_neighbors = static_cast<int>(as_int(value));
    else if (key == "resample.target_ratio") cfg.resample.target_ratio = as_double(value);
    else if (key == "gbdt.num_leaves") cfg.gbdt.num_leaves = static_cast<int>(as_int(value));
    else if (key == "gbdt.max_depth") cfg.gbdt.max_depth = static_cast<int>(as_int(value));
    else if (key == "gbdt.learning_rate") cfg.gbdt.learning_rate = as_double(value);
    else if (key == "gbdt.subsample") cfg.gbdt.subsample = as_double(value);
    else if (key == "gbdt.feature_fraction") cfg.gbdt.feature_fraction = as_double(value);
    else if (key == "gbdt.min_child_samples") cfg.gbdt.min_child_samples = static_cast<int>(as_int(value));
    else if (key == "gbdt.l2_lambda") cfg.gbdt.l2_lambda = as_double(value);
    else if (key == "gbdt.max_bins") cfg.gbdt.max_bins = static_cast<int>(as_int(value));
    else if (key == "gbdt.max_rounds") cfg.gbdt.max_rounds = static_cast<int>(as_int(value));
    else if (key == "gbdt.early_stopping_patience") cfg.gbdt.early_stopping_patience = static_cast<int>(as_int(value));
    else if (key.rfind("synth.", 0) == 0) {
        synthgen::apply_config_entry(cfg.synth, key.substr(6), value);
        if (key == "synth.landmarks") cfg.landmarks = cfg.synth.landmarks;
    } else throw ConfigError("unknown config key '" + key + "'");
}

/// Flat key=value file; blank lines and '#' comments ignored.
inline void load_config_file(PipelineConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        const std::size_t eq = line.find('=', start);
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) +
                              ": expected key=value");
        }
        std::string key = line.substr(start, eq - start);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        while (!value.empty() && (value.front() == ' ' || value.front() == '\t')) value.erase(0, 1);
        while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();
        apply_config_entry(cfg, key, value);
    }
}

namespace detail {

// Stage wrapper: errors keep their type but name the failing stage.
template <class F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("[") + name + "] " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string("[") + name + "] " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(std::string("[") + name + "] " + e.what());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// feature artifact persistence (everything prediction-time featurization
// needs beyond the GIS sidecars: geometry options plus the train-only
// visit-frequency table)
// ---------------------------------------------------------------------------

inline void save_feature_artifacts(const features::FeatureArtifacts& a, const std::string& path) {
    const auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open artifacts file for writing: " + path);
    out << "modechoice_features 1\n";
    out << "geohash_precision " << a.geohash_precision << "\n";
    out << "utc_offset_s " << a.utc_offset_s << "\n";
    out << "profile_dim " << a.profile_dim << "\n";
    for (const auto& lm : a.landmarks) {
        out << "landmark " << lm.name << " " << format_double(lm.pos.lng) << " " << format_double(lm.pos.lat)
            << "\n";
    }
    const std::map<std::string, double> origins(a.frequency.origin_counts.begin(), a.frequency.origin_counts.end());
    for (const auto& [cell, count] : origins) out << "freq_origin " << cell << " " << format_double(count) << "\n";
    const std::map<std::string, double> dests(a.frequency.dest_counts.begin(), a.frequency.dest_counts.end());
    for (const auto& [cell, count] : dests) out << "freq_dest " << cell << " " << format_double(count) << "\n";
    out << "end\n";
    out.close();
    if (out.fail()) throw DataError("write failed: " + path);
}

inline features::FeatureArtifacts load_feature_artifacts(const std::string& path,
                                                         const std::string& stations_path,
                                                         const std::string& poi_path) {
    features::FeatureArtifacts a;
    a.stations = features::StationIndex::load_csv(stations_path);
    a.poi = features::PoiTable::load_csv(poi_path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open artifacts file: " + path);
    std::string line;
    bool ended = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string ctx = path + ":" + format_int(static_cast<std::int64_t>(line_no));
        const auto t = split(line, ' ');
        if (t.empty()) continue;
        if (t[0] == "modechoice_features") {
            if (t.size() != 2 || t[1] != "1") throw DataError(ctx + ": unsupported artifacts version");
        } else if (t[0] == "geohash_precision") a.geohash_precision = static_cast<int>(parse_int(t.at(1), ctx));
        else if (t[0] == "utc_offset_s") a.utc_offset_s = static_cast<int>(parse_int(t.at(1), ctx));
        else if (t[0] == "profile_dim") a.profile_dim = static_cast<std::size_t>(parse_int(t.at(1), ctx));
        else if (t[0] == "landmark") a.landmarks.push_back({t.at(1), {parse_double(t.at(2), ctx), parse_double(t.at(3), ctx)}});
        else if (t[0] == "freq_origin") a.frequency.origin_counts[t.at(1)] = parse_double(t.at(2), ctx);
        else if (t[0] == "freq_dest") a.frequency.dest_counts[t.at(1)] = parse_double(t.at(2), ctx);
        else if (t[0] == "end") ended = true;
        else throw DataError(ctx + ": unknown artifacts record '" + t[0] + "'");
    }
    if (!ended) throw DataError(path + ": truncated artifacts file");
    a.frequency.precision = a.geohash_precision;
    return a;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

inline void cmd_generate(const PipelineConfig& cfg) {
    const synthgen::SynthDataset ds = detail::stage("generate", [&] { return synthgen::generate(cfg.synth); });
    detail::stage("write", [&] {
        synthgen::write(ds, synthgen::OutputPaths::in_dir(cfg.data_dir));
        return 0;
    });
    std::cout << "generated " << ds.sessions.size() << " sessions into " << cfg.data_dir << "\n";
}

namespace detail {

inline features::FeatureArtifacts build_artifacts(const PipelineConfig& cfg,
                                                  const std::vector<TripSession>& train_sessions) {
    features::FeatureArtifacts a;
    a.stations = features::StationIndex::load_csv(cfg.stations());
    a.poi = features::PoiTable::load_csv(cfg.poi());
    a.frequency = features::VisitFrequency::build(train_sessions, cfg.geohash_precision);
    a.landmarks = cfg.landmarks;
    a.geohash_precision = cfg.geohash_precision;
    a.utc_offset_s = cfg.utc_offset_s;
    a.profile_dim = 0;
    for (const auto& s : train_sessions) {
        if (s.profile) {
            a.profile_dim = s.profile->attributes.size();
            break;
        }
    }
    if (a.profile_dim == 0) a.profile_dim = cfg.synth.profile_dim;
    return a;
}

inline void write_training_log(const gbdt::BoostedEnsemble& ens, const std::string& path) {
    CsvWriter out(path);
    out.raw_line("round,train_logloss,valid_weighted_f1");
    for (std::size_t r = 0; r < ens.training_log.size(); ++r) {
        const auto& log = ens.training_log[r];
        out.row({format_int(static_cast<std::int64_t>(r)), format_double(log.train_logloss),
                 std::isnan(log.valid_weighted_f1) ? std::string() : format_double(log.valid_weighted_f1)});
    }
    out.close();
}

inline void write_importance(const gbdt::BoostedEnsemble& ens, const std::string& path) {
    CsvWriter out(path);
    out.raw_line("rank,name,split_count,total_gain");
    const auto entries = gbdt::feature_importance(ens, ens.schema.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        out.row({format_int(static_cast<std::int64_t>(i) + 1), entries[i].name,
                 format_int(entries[i].split_count), format_double(entries[i].total_gain)});
    }
    out.close();
}

} // namespace detail

/// load -> split -> artifacts(train) -> featurize -> resample(train) ->
/// boost -> persist model, log, importance and the validation report.
inline void cmd_train(const PipelineConfig& cfg) {
    const auto sessions = detail::stage("load", [&] {
        return load_dataset(cfg.queries(), cfg.plans(), cfg.clicks(), cfg.profiles());
    });
    const auto [train_sessions, valid_sessions] =
        detail::stage("split", [&] { return split_by_time(sessions, cfg.split_cutoff); });
    const auto artifacts = detail::stage("artifacts", [&] { return detail::build_artifacts(cfg, train_sessions); });
    const auto train_table =
        detail::stage("featurize", [&] { return features::build_feature_table(train_sessions, artifacts); });
    const auto valid_table =
        detail::stage("featurize", [&] { return features::build_feature_table(valid_sessions, artifacts); });
    const auto resampled = detail::stage("resample", [&] { return resample::apply(train_table, cfg.resample); });
    const auto ens = detail::stage("train", [&] { return gbdt::train(resampled, valid_table, cfg.gbdt); });

    detail::stage("persist", [&] {
        gbdt::save_model(ens, cfg.out("model.txt"));
        save_feature_artifacts(artifacts, cfg.out("feature_artifacts.txt"));
        detail::write_training_log(ens, cfg.out("training_log.csv"));
        detail::write_importance(ens, cfg.out("importance.csv"));
        CsvWriter schema(cfg.out("feature_schema.csv"));
        schema.raw_line("index,name,family");
        for (std::size_t c = 0; c < train_table.n_cols; ++c) {
            schema.row({format_int(static_cast<std::int64_t>(c)), train_table.column_names[c],
                        train_table.column_families[c]});
        }
        schema.close();
        return 0;
    });

    if (valid_table.n_rows > 0) {
        const auto report = detail::stage("evaluate", [&] {
            return eval::evaluate(valid_table.labels, gbdt::predict_label(ens, valid_table),
                                  cfg.eval_exclude_no_click);
        });
        eval::write_report(report, cfg.out("validation_report.csv"));
        std::cout << "validation weighted F1: " << format_double(report.weighted_f1) << " (" << ens.best_round
                  << " rounds kept)\n";
    } else {
        std::cout << "trained " << ens.best_round << " rounds (no validation split)\n";
    }
}

/// Predictions as session_id, argmax label, and the 12 class probabilities.
inline void cmd_predict(const PipelineConfig& cfg, const std::string& model_dir,
                        const std::string& out_path) {
    const auto ens = detail::stage("load_model", [&] { return gbdt::load_model(model_dir + "/model.txt"); });
    const auto artifacts = detail::stage("load_model", [&] {
        return load_feature_artifacts(model_dir + "/feature_artifacts.txt", cfg.stations(), cfg.poi());
    });
    const auto sessions = detail::stage("load", [&] {
        const std::string clicks = std::filesystem::exists(cfg.clicks()) ? cfg.clicks() : std::string();
        return load_dataset(cfg.queries(), cfg.plans(), clicks, cfg.profiles());
    });
    const auto table =
        detail::stage("featurize", [&] { return features::build_feature_table(sessions, artifacts); });
    const auto probs = detail::stage("predict", [&] { return gbdt::predict_proba(ens, table); });

    detail::stage("persist", [&] {
        CsvWriter out(out_path);
        std::string header = "session_id,predicted";
        for (int c = 0; c < kNumClasses; ++c) header += ",p" + format_int(c);
        out.raw_line(header);
        for (std::size_t r = 0; r < table.n_rows; ++r) {
            const double* row = probs.data() + r * kNumClasses;
            int best = 0;
            for (int c = 1; c < kNumClasses; ++c) {
                if (row[c] > row[best]) best = c;
            }
            std::vector<std::string> fields{table.session_ids[r], format_int(best)};
            for (int c = 0; c < kNumClasses; ++c) fields.push_back(format_double(row[c]));
            out.row(fields);
        }
        out.close();
        return 0;
    });
    std::cout << "wrote predictions for " << table.n_rows << " sessions to " << out_path << "\n";
}

/// Scores a predictions file against the click labels of a dataset.
inline void cmd_evaluate(const PipelineConfig& cfg, const std::string& predictions_path,
                         const std::string& out_path) {
    const auto sessions = detail::stage("load", [&] {
        return load_dataset(cfg.queries(), cfg.plans(), cfg.clicks(), cfg.profiles());
    });
    const CsvTable preds = detail::stage("load", [&] { return read_csv(predictions_path); });
    const auto report = detail::stage("evaluate", [&] {
        const auto c_sid = static_cast<std::size_t>(preds.require_column("session_id"));
        const auto c_pred = static_cast<std::size_t>(preds.require_column("predicted"));
        std::unordered_map<std::string, int> by_session;
        for (std::size_t r = 0; r < preds.rows.size(); ++r) {
            by_session[preds.rows[r][c_sid]] =
                static_cast<int>(parse_int(preds.rows[r][c_pred], preds.context(r, c_pred)));
        }
        std::vector<int> truth, predicted;
        for (const auto& s : sessions) {
            auto it = by_session.find(s.query.session_id);
            if (it == by_session.end()) {
                throw DataError("predictions file has no row for session '" + s.query.session_id + "'");
            }
            truth.push_back(s.label);
            predicted.push_back(it->second);
        }
        return eval::evaluate(truth, predicted, cfg.eval_exclude_no_click);
    });
    eval::write_report(report, out_path);
    std::cout << "weighted F1: " << format_double(report.weighted_f1) << "\n";
}

/// Model-comparison table over the standard variable sets plus the
/// coefficient table of the selected spec.
inline void cmd_mnl(const PipelineConfig& cfg) {
    const auto sessions = detail::stage("load", [&] {
        return load_dataset(cfg.queries(), cfg.plans(), cfg.clicks(), cfg.profiles());
    });
    const auto specs = mnl::standard_specs();
    std::vector<mnl::MnlModel> fitted;
    const auto rows = detail::stage("fit", [&] { return mnl::compare_models(specs, sessions, &fitted); });

    detail::stage("persist", [&] {
        CsvWriter out(cfg.out("mnl_comparison.csv"));
        out.raw_line("spec,n_params,log_likelihood,converged,best");
        for (const auto& row : rows) {
            out.row({row.name, format_int(static_cast<std::int64_t>(row.n_params)),
                     row.failed ? std::string("failed") : format_double(row.log_likelihood),
                     row.converged ? "1" : "0", row.best ? "1" : "0"});
        }
        out.close();
        return 0;
    });

    const auto final_model =
        detail::stage("fit", [&] { return mnl::fit(mnl::spec_by_name(cfg.mnl_spec), sessions); });
    detail::stage("persist", [&] {
        CsvWriter out(cfg.out("mnl_coefficients.csv"));
        out.raw_line("variable,coefficient,std_err,z,p_value");
        for (std::size_t i = 0; i < final_model.parameter_names.size(); ++i) {
            out.row({final_model.parameter_names[i], format_double(final_model.beta[i]),
                     format_double(final_model.std_errors[i]), format_double(final_model.z_values[i]),
                     format_double(final_model.p_values[i])});
        }
        out.row({"log_likelihood", format_double(final_model.log_likelihood), "", "", ""});
        out.row({"ll_null", format_double(final_model.ll_null), "", "", ""});
        out.close();
        return 0;
    });
    std::cout << "fitted '" << cfg.mnl_spec << "' (LL " << format_double(final_model.log_likelihood)
              << ", null " << format_double(final_model.ll_null) << ")\n";
}

/// Mode speed/price summary, label frequencies, and OD geohash-cell counts.
inline void cmd_eda(const PipelineConfig& cfg) {
    const auto sessions = detail::stage("load", [&] {
        return load_dataset(cfg.queries(), cfg.plans(), cfg.clicks(), cfg.profiles());
    });

    detail::stage("persist", [&] {
        const auto summary = synthgen::mode_speed_price_summary(sessions);
        CsvWriter modes(cfg.out("eda_mode_summary.csv"));
        modes.raw_line("mode,mode_name,n_plans,mean_price_cent,mean_speed_mps");
        for (const auto& [mode, m] : summary) {
            modes.row({format_int(mode), ModeCatalog::name(mode), format_int(static_cast<std::int64_t>(m.n_plans)),
                       format_double(m.mean_price_cent), format_double(m.mean_speed_mps)});
        }
        modes.close();

        const auto dist = class_distribution(sessions);
        CsvWriter labels(cfg.out("eda_label_frequency.csv"));
        labels.raw_line("label,mode_name,count,ratio");
        for (const auto& [label, st] : dist) {
            labels.row({format_int(label), ModeCatalog::name(label), format_int(static_cast<std::int64_t>(st.count)),
                        format_double(st.ratio)});
        }
        labels.close();

        std::map<std::string, std::pair<std::int64_t, std::int64_t>> cells;
        for (const auto& s : sessions) {
            cells[geohash_encode(s.query.origin.lng, s.query.origin.lat, cfg.geohash_precision)].first += 1;
            cells[geohash_encode(s.query.destination.lng, s.query.destination.lat, cfg.geohash_precision)].second += 1;
        }
        CsvWriter od(cfg.out("eda_od_cells.csv"));
        od.raw_line("cell,origin_count,dest_count");
        for (const auto& [cell, counts] : cells) {
            od.row({cell, format_int(counts.first), format_int(counts.second)});
        }
        od.close();
        return 0;
    });
    std::cout << "wrote EDA summaries for " << sessions.size() << " sessions to " << cfg.out_dir << "\n";
}

} // namespace modechoice::pipeline
