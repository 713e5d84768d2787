#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "modechoice/datamodel.hpp"
#include "modechoice/errors.hpp"

namespace modechoice::mnl {

enum class PlanVar { distance, eta, price };

inline double plan_var(const PlanOption& p, PlanVar v) {
    switch (v) {
        case PlanVar::distance: return p.distance_m;
        case PlanVar::eta: return p.eta_s;
        case PlanVar::price: return p.price_cent;
    }
    throw ConfigError("unknown plan variable");
}

/// One linear utility term. shared = a single coefficient across all modes
/// it applies to (identified because the variable varies over alternatives);
/// otherwise one coefficient per mode, with the baseline mode's coefficient
/// fixed at zero.
struct UtilityTerm {
    std::string label;       // parameter name stem, e.g. "Distance"
    PlanVar var = PlanVar::distance;
    bool shared = false;
    std::vector<int> modes;  // empty = all modes 1..11
};

struct UtilitySpec {
    std::string name;
    std::vector<int> intercept_modes;  // modes with alternative-specific constants
    std::vector<UtilityTerm> terms;
    int baseline_mode = 8;  // bus+taxi

    static std::vector<int> all_modes() {
        std::vector<int> m(kNumModes);
        for (int i = 0; i < kNumModes; ++i) m[i] = i + 1;
        return m;
    }

    std::vector<std::string> parameter_names() const {
        std::vector<std::string> names;
        std::vector<int> im = intercept_modes;
        std::sort(im.begin(), im.end());
        for (int m : im) {
            if (m == baseline_mode) continue;
            names.push_back(std::string("ASC_") + ModeCatalog::name(m));
        }
        for (const auto& t : terms) {
            if (t.shared) {
                names.push_back(t.label);
            } else {
                std::vector<int> tm = t.modes.empty() ? all_modes() : t.modes;
                std::sort(tm.begin(), tm.end());
                for (int m : tm) {
                    if (m == baseline_mode) continue;
                    names.push_back(t.label + "_" + ModeCatalog::name(m));
                }
            }
        }
        return names;
    }

    std::size_t n_params() const { return parameter_names().size(); }
};

namespace detail {

// Per-mode parameter slots, resolved once per fit.
struct CompiledSpec {
    std::size_t n_params = 0;
    // for mode 1..11: intercept slot (-1 = none) and (slot, variable) pairs
    std::array<int, kNumModes + 1> intercept_slot{};
    std::array<std::vector<std::pair<int, PlanVar>>, kNumModes + 1> var_slots;

    explicit CompiledSpec(const UtilitySpec& spec) {
        if (spec.baseline_mode < 1 || spec.baseline_mode > kNumModes) {
            throw ConfigError("baseline mode must be in 1..11");
        }
        intercept_slot.fill(-1);
        int next = 0;
        std::vector<int> im = spec.intercept_modes;
        std::sort(im.begin(), im.end());
        if (std::adjacent_find(im.begin(), im.end()) != im.end()) {
            throw ConfigError("duplicate intercept mode in utility spec");
        }
        for (int m : im) {
            if (m < 1 || m > kNumModes) throw ConfigError("intercept mode out of range 1..11");
            if (m == spec.baseline_mode) continue;
            intercept_slot[static_cast<std::size_t>(m)] = next++;
        }
        for (const auto& t : spec.terms) {
            std::vector<int> tm = t.modes.empty() ? UtilitySpec::all_modes() : t.modes;
            std::sort(tm.begin(), tm.end());
            if (std::adjacent_find(tm.begin(), tm.end()) != tm.end()) {
                throw ConfigError("duplicate mode in utility term '" + t.label + "'");
            }
            if (t.shared) {
                const int slot = next++;
                for (int m : tm) {
                    if (m < 1 || m > kNumModes) throw ConfigError("term mode out of range 1..11");
                    var_slots[static_cast<std::size_t>(m)].push_back({slot, t.var});
                }
            } else {
                for (int m : tm) {
                    if (m < 1 || m > kNumModes) throw ConfigError("term mode out of range 1..11");
                    if (m == spec.baseline_mode) continue;
                    var_slots[static_cast<std::size_t>(m)].push_back({next++, t.var});
                }
            }
        }
        n_params = static_cast<std::size_t>(next);
    }

    void features(const PlanOption& plan, Eigen::VectorXd& x) const {
        x.setZero();
        const auto m = static_cast<std::size_t>(plan.mode);
        if (intercept_slot[m] >= 0) x[intercept_slot[m]] = 1.0;
        for (const auto& [slot, var] : var_slots[m]) x[slot] += plan_var(plan, var);
    }
};

} // namespace detail

/// Linear utility of every displayed mode, in plan-list order.
inline std::vector<double> utilities(const UtilitySpec& spec, const std::vector<double>& beta,
                                     const TripSession& session) {
    const detail::CompiledSpec cs(spec);
    if (beta.size() != cs.n_params) {
        throw ConfigError("beta length " + format_int(static_cast<std::int64_t>(beta.size())) +
                          " does not match spec parameter count " +
                          format_int(static_cast<std::int64_t>(cs.n_params)));
    }
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    Eigen::VectorXd x(static_cast<Eigen::Index>(cs.n_params));
    std::vector<double> out;
    out.reserve(session.plans.size());
    for (const auto& p : session.plans) {
        cs.features(p, x);
        out.push_back(cs.n_params ? b.dot(x) : 0.0);
    }
    return out;
}

/// Softmax over the displayed modes; stabilized, sums to 1.
inline std::vector<double> choice_probabilities(const UtilitySpec& spec, const std::vector<double>& beta,
                                                const TripSession& session) {
    if (session.plans.empty()) throw DataError("choice_probabilities: empty choice set");
    std::vector<double> u = utilities(spec, beta, session);
    const double m = *std::max_element(u.begin(), u.end());
    double z = 0.0;
    for (double& v : u) {
        v = std::exp(v - m);
        z += v;
    }
    for (double& v : u) v /= z;
    return u;
}

struct Likelihood {
    double ll = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

namespace detail {

// Sessions usable for estimation: a click happened and (by the loader's
// invariant) the clicked mode is displayed.
inline bool estimable(const TripSession& s) { return s.label != 0 && !s.plans.empty(); }

struct Accum {
    double ll = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    // scratch
    std::vector<Eigen::VectorXd> xbuf;
    std::vector<double> ubuf;
    Eigen::VectorXd xbar, diff;
};

inline void accumulate_session(const CompiledSpec& cs, const Eigen::VectorXd& beta,
                               const TripSession& s, bool want_derivs, Accum& acc) {
    const std::size_t m = s.plans.size();
    if (acc.xbuf.size() < m) acc.xbuf.resize(m, Eigen::VectorXd(beta.size()));
    acc.ubuf.resize(m);
    int chosen = -1;
    for (std::size_t j = 0; j < m; ++j) {
        cs.features(s.plans[j], acc.xbuf[j]);
        acc.ubuf[j] = beta.size() ? beta.dot(acc.xbuf[j]) : 0.0;
        if (s.plans[j].mode == s.label) chosen = static_cast<int>(j);
    }
    if (chosen < 0) throw DataError("session '" + s.query.session_id + "': label not in choice set");
    const double umax = *std::max_element(acc.ubuf.begin(), acc.ubuf.begin() + static_cast<long>(m));
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(acc.ubuf[j] - umax);
    const double logz = umax + std::log(z);
    acc.ll += acc.ubuf[static_cast<std::size_t>(chosen)] - logz;
    if (!want_derivs || beta.size() == 0) return;

    acc.xbar.setZero();
    for (std::size_t j = 0; j < m; ++j) {
        const double p = std::exp(acc.ubuf[j] - logz);
        acc.ubuf[j] = p;  // reuse as probability
        acc.xbar.noalias() += p * acc.xbuf[j];
    }
    acc.grad.noalias() += acc.xbuf[static_cast<std::size_t>(chosen)] - acc.xbar;
    for (std::size_t j = 0; j < m; ++j) {
        acc.diff = acc.xbuf[j] - acc.xbar;
        acc.hess.selfadjointView<Eigen::Lower>().rankUpdate(acc.diff, -acc.ubuf[j]);
    }
}

} // namespace detail

/// Log-likelihood with analytic gradient and Hessian over the estimable
/// (clicked) sessions. No-click sessions are skipped.
inline Likelihood log_likelihood(const UtilitySpec& spec, const std::vector<double>& beta,
                                 const std::vector<TripSession>& sessions, bool want_derivs = true) {
    const detail::CompiledSpec cs(spec);
    if (beta.size() != cs.n_params) throw ConfigError("beta length does not match spec parameter count");
    const auto np = static_cast<Eigen::Index>(cs.n_params);
    Eigen::VectorXd b = np ? Eigen::Map<const Eigen::VectorXd>(beta.data(), np) : Eigen::VectorXd(0);

    detail::Accum acc;
    acc.grad = Eigen::VectorXd::Zero(np);
    acc.hess = Eigen::MatrixXd::Zero(np, np);
    acc.xbar.resize(np);
    acc.diff.resize(np);
    for (const auto& s : sessions) {
        if (!detail::estimable(s)) continue;
        detail::accumulate_session(cs, b, s, want_derivs, acc);
    }
    acc.hess.triangularView<Eigen::StrictlyUpper>() = acc.hess.transpose();
    Likelihood out;
    out.ll = acc.ll;
    out.gradient = std::move(acc.grad);
    out.hessian = std::move(acc.hess);
    return out;
}

/// LL of the coefficient-free model: sum of ln(1/m_i) over clicked sessions.
inline double null_log_likelihood(const std::vector<TripSession>& sessions) {
    double ll = 0.0;
    for (const auto& s : sessions) {
        if (!detail::estimable(s)) continue;
        ll -= std::log(static_cast<double>(s.plans.size()));
    }
    return ll;
}

struct MnlModel {
    UtilitySpec spec;
    std::vector<std::string> parameter_names;
    std::vector<double> beta;
    Eigen::MatrixXd covariance;
    std::vector<double> std_errors;
    std::vector<double> z_values;
    std::vector<double> p_values;
    double log_likelihood = 0.0;
    double ll_null = 0.0;
    std::size_t n_obs = 0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline void throw_singular(const UtilitySpec& spec, const Eigen::MatrixXd& info) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    const Eigen::VectorXd null_dir = es.eigenvectors().col(0);
    const auto names = spec.parameter_names();
    std::string culprits;
    for (Eigen::Index i = 0; i < null_dir.size(); ++i) {
        if (std::abs(null_dir[i]) > 0.3) {
            if (!culprits.empty()) culprits += ", ";
            culprits += names[static_cast<std::size_t>(i)];
        }
    }
    if (culprits.empty()) culprits = "(no dominant direction)";
    throw NumericError("singular Hessian in MNL fit; collinear terms: " + culprits);
}

} // namespace detail

/// Newton-Raphson MLE with step halving. Converged when the gradient
/// infinity norm drops to tolerance; the information matrix at the optimum
/// gives the covariance, standard errors, z and two-sided p values.
inline MnlModel fit(const UtilitySpec& spec, const std::vector<TripSession>& sessions,
                    double tolerance = 1e-6, int max_iter = 100) {
    const detail::CompiledSpec cs(spec);
    const auto np = static_cast<Eigen::Index>(cs.n_params);

    MnlModel model;
    model.spec = spec;
    model.parameter_names = spec.parameter_names();
    model.ll_null = null_log_likelihood(sessions);
    for (const auto& s : sessions) {
        if (detail::estimable(s)) ++model.n_obs;
    }
    if (model.n_obs == 0) throw DataError("MNL fit: no clicked sessions to estimate from");

    std::vector<double> beta(cs.n_params, 0.0);
    if (np == 0) {
        model.log_likelihood = model.ll_null;
        model.converged = true;
        return model;
    }

    Likelihood cur = log_likelihood(spec, beta, sessions, true);
    Eigen::Map<Eigen::VectorXd> b(beta.data(), np);
    for (int iter = 1; iter <= max_iter; ++iter) {
        model.iterations = iter;
        if (cur.gradient.lpNorm<Eigen::Infinity>() <= tolerance) {
            model.converged = true;
            break;
        }
        Eigen::MatrixXd info = -cur.hessian;
        Eigen::LLT<Eigen::MatrixXd> llt(info);
        if (llt.info() != Eigen::Success) detail::throw_singular(spec, info);
        const Eigen::VectorXd direction = llt.solve(cur.gradient);
        const Eigen::VectorXd base = b;

        const double rel_step = direction.lpNorm<Eigen::Infinity>() / (1.0 + base.lpNorm<Eigen::Infinity>());
        if (rel_step <= 1e-6) {
            // The remaining improvement is below the resolution of the
            // summed LL, so a comparison cannot certify it. The full Newton
            // step on a concave likelihood is an ascent step; take it.
            b = base + direction;
            cur = log_likelihood(spec, beta, sessions, true);
            continue;
        }

        // Step halving guarantees the LL never decreases.
        double step = 1.0;
        bool moved = false;
        for (int h = 0; h < 30; ++h) {
            b = base + step * direction;
            const Likelihood trial = log_likelihood(spec, beta, sessions, false);
            if (std::isfinite(trial.ll) && trial.ll >= cur.ll - 1e-12) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            b = base;
            break;
        }
        cur = log_likelihood(spec, beta, sessions, true);
        if (cur.gradient.lpNorm<Eigen::Infinity>() <= tolerance) {
            model.converged = true;
            break;
        }
    }

    model.beta = beta;
    model.log_likelihood = cur.ll;
    Eigen::MatrixXd info = -cur.hessian;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) detail::throw_singular(spec, info);
    model.covariance = llt.solve(Eigen::MatrixXd::Identity(np, np));
    model.std_errors.resize(cs.n_params);
    model.z_values.resize(cs.n_params);
    model.p_values.resize(cs.n_params);
    for (Eigen::Index i = 0; i < np; ++i) {
        const double se = std::sqrt(std::max(0.0, model.covariance(i, i)));
        model.std_errors[static_cast<std::size_t>(i)] = se;
        const double z = se > 0 ? beta[static_cast<std::size_t>(i)] / se
                                : std::numeric_limits<double>::quiet_NaN();
        model.z_values[static_cast<std::size_t>(i)] = z;
        // two-sided normal p value: 2 (1 - Phi(|z|)) = erfc(|z| / sqrt 2)
        model.p_values[static_cast<std::size_t>(i)] = std::erfc(std::abs(z) / std::sqrt(2.0));
    }
    return model;
}

struct ComparisonRow {
    std::string name;
    std::size_t n_params = 0;
    double log_likelihood = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    bool failed = false;
    bool best = false;
};

/// Fits every spec on the same sessions; a failed fit keeps its row. The
/// highest-LL successful fit is flagged.
inline std::vector<ComparisonRow> compare_models(const std::vector<UtilitySpec>& specs,
                                                 const std::vector<TripSession>& sessions,
                                                 std::vector<MnlModel>* fitted = nullptr) {
    std::vector<ComparisonRow> rows;
    rows.reserve(specs.size());
    for (const auto& spec : specs) {
        ComparisonRow row;
        row.name = spec.name;
        row.n_params = spec.n_params();
        try {
            MnlModel m = fit(spec, sessions);
            row.log_likelihood = m.log_likelihood;
            row.converged = m.converged;
            if (fitted) fitted->push_back(std::move(m));
        } catch (const Error& e) {
            row.failed = true;
            std::cerr << "warning: MNL fit failed for spec '" << spec.name << "': " << e.what() << "\n";
            if (fitted) fitted->push_back(MnlModel{});
        }
        rows.push_back(std::move(row));
    }
    double best_ll = -std::numeric_limits<double>::infinity();
    int best_i = -1;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].failed && rows[i].log_likelihood > best_ll) {
            best_ll = rows[i].log_likelihood;
            best_i = static_cast<int>(i);
        }
    }
    if (best_i >= 0) rows[static_cast<std::size_t>(best_i)].best = true;
    return rows;
}

inline UtilityTerm distance_per_mode() { return {"Distance", PlanVar::distance, false, {}}; }
inline UtilityTerm time_per_mode() { return {"Time", PlanVar::eta, false, {}}; }
inline UtilityTerm cost_all_modes() { return {"Cost_all_mode", PlanVar::price, true, {}}; }

/// The standard ladder of variable sets compared in the model-selection
/// workflow, from the empty model to distance-per-mode plus generic cost.
inline std::vector<UtilitySpec> standard_specs() {
    const std::vector<int> all = UtilitySpec::all_modes();
    std::vector<UtilitySpec> specs;
    specs.push_back({"null", {}, {}, 8});
    specs.push_back({"intercepts_only", all, {}, 8});
    specs.push_back({"intercepts_time", all, {time_per_mode()}, 8});
    specs.push_back({"intercepts_distance", all, {distance_per_mode()}, 8});
    specs.push_back({"intercepts_cost", all, {cost_all_modes()}, 8});
    specs.push_back({"intercepts_time_cost", all, {time_per_mode(), cost_all_modes()}, 8});
    specs.push_back({"intercepts_distance_cost", all, {distance_per_mode(), cost_all_modes()}, 8});
    specs.push_back({"distance_cost", {}, {distance_per_mode(), cost_all_modes()}, 8});
    return specs;
}

inline UtilitySpec spec_by_name(const std::string& name) {
    for (auto& s : standard_specs()) {
        if (s.name == name) return s;
    }
    throw ConfigError("unknown MNL spec '" + name + "'");
}

} // namespace modechoice::mnl
