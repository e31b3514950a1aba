#include "ezsdu/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ezsdu/closed_form.hpp"
#include "ezsdu/error.hpp"

namespace ezsdu {

namespace {

constexpr double kLogClamp = 700.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

// F_k = E_k[F_{k+1}] + dt/2 (h_k + E_k h_{k+1}), F_N = tail(h_N).
Eigen::ArrayXd accumulate(const Lattice& lat, const Eigen::ArrayXd& h, const TailClosure& tail) {
    const int N = lat.n_steps();
    const double half_dt = 0.5 * lat.dt();
    Eigen::ArrayXd F(h.size());
    const Eigen::Index last = Lattice::offset(N);
    for (int j = 0; j <= N; ++j) F(last + j) = tail.tail(h(last + j));
    for (int k = N - 1; k >= 0; --k) {
        const Eigen::Index base = Lattice::offset(k);
        const Eigen::Index next = Lattice::offset(k + 1);
        const Eigen::ArrayXd eh = step_expectation(lat, h.segment(next, k + 2));
        const Eigen::ArrayXd eF = step_expectation(lat, F.segment(next, k + 2));
        F.segment(base, k + 1) = eF + half_dt * (h.segment(base, k + 1) + eh);
    }
    return F;
}

Eigen::ArrayXd powered(const Eigen::ArrayXd& x, double exponent) {
    return x.unaryExpr([exponent](double v) {
        if (std::isinf(v)) return exponent > 0 ? kInf : 0.0;
        if (v == 0.0) return exponent > 0 ? 0.0 : kInf;
        return std::pow(v, exponent);
    });
}

Eigen::ArrayXd clamped_log(const Eigen::ArrayXd& x, long long& clamps) {
    Eigen::ArrayXd q(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double v = std::log(x(i));
        if (!(v <= kLogClamp)) {
            v = kLogClamp;
            ++clamps;
        } else if (v < -kLogClamp) {
            v = -kLogClamp;
            ++clamps;
        }
        q(i) = v;
    }
    return q;
}

Eigen::ArrayXd unclamped_exp(const Eigen::ArrayXd& q) {
    return q.unaryExpr([](double v) {
        if (v >= kLogClamp) return kInf;
        if (v <= -kLogClamp) return 0.0;
        return std::exp(v);
    });
}

void require_nonnegative(const AdaptedGrid& g, const char* name) {
    if (!(g.values() >= 0.0).all()) {
        throw Error(ErrorCode::DomainError, std::string(name) + " must be nonnegative at every node");
    }
}

struct IterationContext {
    const Lattice& lat;
    const TailClosure& tail;
    double epsilon;
    Eigen::ArrayXd lambda_theta;  // empty when epsilon == 0
    double chi;
    int max_iter;
    long long clamps = 0;
};

// Log-space image log F(exp Q) for the aggregator exp(P + rho Q) (+ eps Lambda^theta).
Eigen::ArrayXd log_map(IterationContext& ctx, const Eigen::ArrayXd& P, double rho, const Eigen::ArrayXd& Q) {
    Eigen::ArrayXd h = (P + rho * Q).exp();
    if (ctx.epsilon > 0.0) h += ctx.epsilon * ctx.lambda_theta;
    return clamped_log(accumulate(ctx.lat, h, ctx.tail), ctx.clamps);
}

Eigen::ArrayXd solve_level(IterationContext& ctx, const Eigen::ArrayXd& P, double rho, Eigen::ArrayXd Q, double tol,
                           int depth, SolveReport* report) {
    const bool split = rho <= -1.0;
    const double modulus = split ? ctx.chi / (1.0 - rho - ctx.chi) : std::abs(rho);
    const double inner_tol = tol * (1.0 - modulus) * 0.1;
    if (report) {
        report->modulus = modulus;
        report->splitting_depth = std::max(report->splitting_depth, depth);
    }
    double previous = 0.0;
    for (int iter = 1; iter <= ctx.max_iter; ++iter) {
        Eigen::ArrayXd next;
        if (split) {
            const Eigen::ArrayXd shifted = P - ctx.chi * Q;
            SolveReport inner;
            next = solve_level(ctx, shifted, rho + ctx.chi, Q, inner_tol, depth + 1, &inner);
            if (report) report->splitting_depth = std::max(report->splitting_depth, inner.splitting_depth);
        } else {
            next = log_map(ctx, P, rho, Q);
        }
        const double step = (next - Q).abs().maxCoeff();
        Q = std::move(next);
        if (report) {
            report->iterations = iter;
            report->steps.push_back(step);
            if (iter > 1) report->contraction_ratios.push_back(previous > 0.0 ? step / previous : 0.0);
        }
        previous = step;
        if (step <= tol * (1.0 - modulus)) return Q;
    }
    std::ostringstream os;
    os << "Picard iteration did not reach tolerance " << tol << " within " << ctx.max_iter
       << " iterations (last step " << previous << ", depth " << depth << ")";
    throw Error(ErrorCode::NotConverged, os.str());
}

}  // namespace

OrderCertificate order_check(const AdaptedGrid& Lambda, double theta, const Lattice& lat, const TailClosure& tail) {
    Lambda.require_lattice(lat);
    const int N = lat.n_steps();
    if (N < 1) throw Error(ErrorCode::NotInClass, "order check needs at least one step");
    if (!(Lambda.values() > 0.0).all() || !Lambda.values().isFinite().all()) {
        throw Error(ErrorCode::NotInClass, "Lambda must be positive and finite at every node");
    }
    const Eigen::ArrayXd lt = powered(Lambda.values(), theta);
    const Eigen::ArrayXd last = lt.segment(Lattice::offset(N), N + 1);
    const Eigen::ArrayXd before = lt.segment(Lattice::offset(N - 1), N);
    const double decay = (-(step_expectation(lat, last) / before).log() / lat.dt()).minCoeff();
    if (!(decay > 0.0)) {
        std::ostringstream os;
        os << "Lambda^theta grows at the horizon (decay rate " << decay << "), I^Lambda diverges";
        throw Error(ErrorCode::NotInClass, os.str());
    }
    const TailClosure closure =
        tail.mode() == TailClosure::Mode::Zero ? TailClosure::zero() : TailClosure::with_rate(decay);
    const Eigen::ArrayXd I = accumulate(lat, lt, closure);
    const Eigen::Index interior = Lattice::offset(N);
    const Eigen::ArrayXd ratio = lt.head(interior) / I.head(interior);
    const double lo = ratio.minCoeff();
    const double hi = ratio.maxCoeff();
    if (!(lo > 0.0) || !(hi < 1e300)) {
        std::ostringstream os;
        os << "Lambda^theta / I^Lambda spans [" << lo << ", " << hi << "]";
        throw Error(ErrorCode::NotInClass, os.str());
    }
    return {lo, hi, AdaptedGrid(N, lt), AdaptedGrid(N, I), decay};
}

AdaptedGrid apply_F(const Preferences& prefs, const AdaptedGrid& U, const AdaptedGrid& W, const Lattice& lat,
                    const TailClosure& tail, double epsilon, const AdaptedGrid* Lambda) {
    U.require_lattice(lat);
    W.require_lattice(lat);
    require_nonnegative(U, "U");
    require_nonnegative(W, "W");
    if (epsilon > 0.0 && !Lambda) throw Error(ErrorCode::MissingLambda, "epsilon > 0 requires Lambda");
    const double rho = prefs.rho();
    Eigen::ArrayXd h(U.values().size());
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = h_ez(U.values()(i), W.values()(i), rho);
    if (epsilon > 0.0) {
        Lambda->require_lattice(lat);
        h += epsilon * powered(Lambda->values(), prefs.theta());
    }
    return AdaptedGrid(lat.n_steps(), accumulate(lat, h, tail));
}

SolveReport picard_solve(const Preferences& prefs, const AdaptedGrid& U, const Lattice& lat, const TailClosure& tail,
                         const SolverOptions& options, const AdaptedGrid* Lambda) {
    const Regime regime = derive_regime(prefs);
    if (!regime.solver_supported) {
        throw Error(ErrorCode::UnsupportedRegime, std::string("no solver for regime ") + std::string(to_string(regime.kind)));
    }
    if (!(options.tol > 0.0) || options.max_iter < 1) throw Error(ErrorCode::InvalidParameters, "bad solver options");
    if (!(options.chi > 0.0)) throw Error(ErrorCode::InvalidParameters, "chi must be positive");
    U.require_lattice(lat);
    require_nonnegative(U, "U");
    if (options.epsilon > 0.0 && !Lambda) throw Error(ErrorCode::MissingLambda, "epsilon > 0 requires Lambda");
    const AdaptedGrid& lambda = Lambda ? *Lambda : U;
    lambda.require_lattice(lat);

    const double theta = prefs.theta();
    if (options.epsilon == 0.0 && lat.n_steps() > 0) {
        try {
            order_check(lambda, theta, lat, tail);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotInClass) throw;
            throw Error(ErrorCode::PreconditionFailed, std::string("order class check failed: ") + e.what());
        }
    }

    const Eigen::ArrayXd lambda_theta = powered(lambda.values(), theta);
    IterationContext ctx{lat, tail, options.epsilon, Eigen::ArrayXd(), options.chi, options.max_iter};
    if (options.epsilon > 0.0) ctx.lambda_theta = lambda_theta;

    long long initial_clamps = 0;
    const Eigen::ArrayXd start =
        options.initial_scale ? Eigen::ArrayXd(*options.initial_scale * lambda_theta) : accumulate(lat, lambda_theta, tail);
    Eigen::ArrayXd Q = clamped_log(start, initial_clamps);
    const Eigen::ArrayXd P = U.values().log();

    SolveReport report;
    Q = solve_level(ctx, P, prefs.rho(), std::move(Q), options.tol, 0, &report);
    report.converged = true;

    Eigen::ArrayXd W = unclamped_exp(Q);
    const Eigen::ArrayXd image = unclamped_exp(log_map(ctx, P, prefs.rho(), Q));
    double scale = 0.0, defect = 0.0;
    for (Eigen::Index i = 0; i < W.size(); ++i) {
        if (!std::isfinite(W(i)) || !std::isfinite(image(i))) continue;
        scale = std::max(scale, std::abs(W(i)));
        defect = std::max(defect, std::abs(image(i) - W(i)));
    }
    report.residual = scale > 0.0 ? defect / scale : defect;
    report.clamp_count = ctx.clamps + initial_clamps;
    report.solution = AdaptedGrid(lat.n_steps(), std::move(W), ValueSign::NonNegative);
    return report;
}

AdaptedGrid consumption_to_U(const Preferences& prefs, const AdaptedGrid& C, const Lattice& lat) {
    C.require_lattice(lat);
    if (!(prefs.theta() > 0.0)) throw Error(ErrorCode::UnsupportedRegime, "U requires theta > 0");
    return AdaptedGrid::from_nodes(lat, [&](int k, int j, double t, double) {
        const auto point = transform_vc_to_wu(prefs, 0.0, C(k, j), t);
        return point.U.to_double();
    });
}

AdaptedGrid W_to_V(const Preferences& prefs, const AdaptedGrid& W) {
    const ValueSign sign = value_sign(prefs);
    return AdaptedGrid(W.n_steps(), W.values() / (1.0 - prefs.R()), sign);
}

AdaptedGrid V_to_W(const Preferences& prefs, const AdaptedGrid& V) {
    return AdaptedGrid(V.n_steps(), V.values() * (1.0 - prefs.R()), ValueSign::NonNegative);
}

std::string to_string(LimitKind kind) {
    switch (kind) {
        case LimitKind::Finite: return "Finite";
        case LimitKind::DivergesToPlusInf: return "DivergesToPlusInf";
        case LimitKind::DivergesToMinusInf: return "DivergesToMinusInf";
    }
    return "Unknown";
}

GeneralizedUtilityReport generalized_utility(const AdaptedGrid& C, const Preferences& prefs, const Market& market,
                                             const Lattice& lat, const TailClosure& tail, int n_max,
                                             const SolverOptions& options) {
    const double theta = prefs.theta();
    if (!(theta > 0.0 && theta < 1.0)) {
        throw Error(ErrorCode::UnsupportedRegime, "generalized utility requires theta in (0,1)");
    }
    if (n_max < 1) throw Error(ErrorCode::InvalidParameters, "n_max must be at least 1");
    C.require_lattice(lat);
    require_nonnegative(C, "C");
    const double rate = eta(prefs, market).eta;
    const Eigen::ArrayXd c_hat = rate * lat.node_wealth();
    const bool floor = prefs.R() > 1.0;

    GeneralizedUtilityReport report{};
    for (int n = 1; n <= n_max; n *= 2) {
        const Eigen::ArrayXd cn = floor ? Eigen::ArrayXd(C.values().max(c_hat / n)) : Eigen::ArrayXd(C.values().min(n * c_hat));
        const AdaptedGrid U = consumption_to_U(prefs, AdaptedGrid(lat.n_steps(), cn), lat);
        const SolveReport solve = picard_solve(prefs, U, lat, tail, options);
        report.n.push_back(n);
        report.values.push_back(solve.solution(0, 0) / (1.0 - prefs.R()));
        report.iterations.push_back(solve.iterations);
        if (n > n_max / 2) break;
    }
    report.monotone = true;
    for (std::size_t i = 1; i < report.values.size(); ++i) {
        const double change = report.values[i] - report.values[i - 1];
        if (floor ? change > 0.0 : change < 0.0) report.monotone = false;
    }
    const double last = report.values.back();
    if (std::abs(last) > kDivergenceThreshold) {
        report.classification = last > 0 ? LimitKind::DivergesToPlusInf : LimitKind::DivergesToMinusInf;
        report.limit = last > 0 ? kInf : -kInf;
    } else {
        report.classification = LimitKind::Finite;
        report.limit = last;
    }
    return report;
}

std::string to_string(Classification c) {
    switch (c) {
        case Classification::Subsolution: return "Subsolution";
        case Classification::Supersolution: return "Supersolution";
        case Classification::Solution: return "Solution";
        case Classification::Neither: return "Neither";
    }
    return "Unknown";
}

ResidualReport check_solution(const AdaptedGrid& value, const AdaptedGrid& driver, const Lattice& lat,
                              const Preferences& prefs, const CheckOptions& options) {
    value.require_lattice(lat);
    driver.require_lattice(lat);
    const bool utility_space = options.space == CheckSpace::Utility;
    const int N = lat.n_steps();
    const Eigen::Index total = lat.size();
    const double half_dt = 0.5 * lat.dt();

    for (Eigen::Index i = 0; i < total; ++i) {
        const double v = value.values()(i);
        const bool ok = utility_space ? in_value_domain(prefs, v) : v >= 0.0;
        if (!ok || std::isnan(v)) {
            std::ostringstream os;
            os << "value " << v << " at flat index " << i << " lies outside the value domain";
            throw Error(ErrorCode::SignDomainViolation, os.str());
        }
    }

    Eigen::ArrayXd g(total);
    for (int k = 0; k <= N; ++k) {
        const Eigen::Index base = Lattice::offset(k);
        for (int j = 0; j <= k; ++j) {
            const double v = value.values()(base + j);
            const double d = driver.values()(base + j);
            g(base + j) = utility_space ? g_ez(prefs, lat.time(k), d, v) : h_ez(d, v, prefs.rho());
        }
    }
    // expected_g at step k holds E_k[g_{k+1}].
    Eigen::ArrayXd expected_g = Eigen::ArrayXd::Zero(total);
    for (int k = 0; k < N; ++k) {
        expected_g.segment(Lattice::offset(k), k + 1) = step_expectation(lat, g.segment(Lattice::offset(k + 1), k + 2));
    }
    const double grid_scale = value.values().abs().maxCoeff();
    auto relative = [&](double v, double defect) {
        const double s = std::abs(v) > 0.0 ? std::abs(v) : (grid_scale > 0.0 ? grid_scale : 1.0);
        return defect / s;
    };

    ResidualReport report;
    report.min_defect = kInf;
    report.max_defect = -kInf;
    Eigen::ArrayXd one_step = Eigen::ArrayXd::Zero(total);
    auto record = [&](double v, double continuation) {
        if (!std::isfinite(v) || !std::isfinite(continuation)) return 0.0;
        const double d = relative(v, v - continuation);
        report.min_defect = std::min(report.min_defect, d);
        report.max_defect = std::max(report.max_defect, d);
        ++report.pairs_checked;
        return d;
    };

    std::vector<int> gaps = options.gaps;
    if (std::find(gaps.begin(), gaps.end(), 1) == gaps.end()) gaps.push_back(1);
    for (int gap : gaps) {
        if (gap < 1 || gap > N) continue;
        for (int k = 0; k + gap <= N; ++k) {
            Eigen::ArrayXd Y = value.at(k + gap);
            for (int i = k + gap - 1; i >= k; --i) {
                const Eigen::Index base = Lattice::offset(i);
                Y = step_expectation(lat, Y) + half_dt * (g.segment(base, i + 1) + expected_g.segment(base, i + 1));
            }
            const Eigen::Index base = Lattice::offset(k);
            for (int j = 0; j <= k; ++j) {
                const double d = record(value.values()(base + j), Y(j));
                if (gap == 1) one_step(base + j) = d;
            }
        }
    }

    const double log_x0 = std::log(lat.x0());
    for (double width : options.band_widths) {
        Eigen::ArrayXd Z = value.at(N);
        for (int i = N - 1; i >= 0; --i) {
            const Eigen::Index base = Lattice::offset(i);
            const Eigen::ArrayXd cont =
                step_expectation(lat, Z) + half_dt * (g.segment(base, i + 1) + expected_g.segment(base, i + 1));
            Z = cont;
            for (int j = 0; j <= i; ++j) {
                const double v = value.values()(base + j);
                record(v, cont(j));
                if (std::abs(std::log(lat.node_wealth()(base + j)) - log_x0) >= width) Z(j) = v;
            }
        }
    }
    report.one_step_defect = AdaptedGrid(N, std::move(one_step));
    if (report.pairs_checked == 0) report.min_defect = report.max_defect = 0.0;

    Eigen::ArrayXd trace(N + 1);
    Eigen::ArrayXd weights = Eigen::ArrayXd::Ones(1);
    const double p = lat.p_up();
    for (int k = 0; k <= N; ++k) {
        if (k > 0) {
            Eigen::ArrayXd next = Eigen::ArrayXd::Zero(k + 1);
            next.head(k) += (1.0 - p) * weights;
            next.tail(k) += p * weights;
            weights = std::move(next);
        }
        trace(k) = (weights * value.at(k)).sum();
    }
    report.terminal_expectation_trace = trace;
    const double end = std::abs(trace(N));
    if (end == 0.0) {
        report.transversality_ok = true;
    } else if (N >= 4) {
        report.transversality_ok = end < std::abs(trace(N - 1)) && end < std::abs(trace(3 * N / 4));
    } else {
        report.transversality_ok = N >= 1 && end < std::abs(trace(N - 1));
    }

    const bool super = report.min_defect >= -options.tol;
    const bool sub = report.max_defect <= options.tol;
    if (super && sub) {
        report.classification = report.transversality_ok ? Classification::Solution : Classification::Neither;
    } else if (super) {
        report.classification = Classification::Supersolution;
    } else if (sub) {
        report.classification = Classification::Subsolution;
    } else {
        report.classification = Classification::Neither;
    }
    std::ostringstream note;
    note << "sampled pairs with gaps {";
    for (std::size_t i = 0; i < gaps.size(); ++i) note << (i ? "," : "") << gaps[i];
    note << "} and exits from " << options.band_widths.size()
         << " wealth bands; a falsifier over these stopping times, not a proof over all of them";
    report.sampling_note = note.str();
    return report;
}

ComparisonVerdict compare(const AdaptedGrid& sub, const AdaptedGrid& super) {
    sub.require_same_shape(super);
    ComparisonVerdict verdict{true, {}, kInf};
    for (int k = 0; k <= sub.n_steps(); ++k) {
        for (int j = 0; j <= k; ++j) {
            const double gap = super(k, j) - sub(k, j);
            verdict.min_gap = std::min(verdict.min_gap, gap);
            if (gap < 0.0) {
                verdict.ordered = false;
                verdict.violations.push_back({k, j, sub(k, j), super(k, j)});
            }
        }
    }
    return verdict;
}

}  // namespace ezsdu
