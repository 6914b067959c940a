#include "spectex/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace spectex {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct Point {
    std::vector<double> x;
    double f = 0.0;
    std::vector<double> g;
};

struct Sample {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;
};

class Evaluator {
public:
    Evaluator(const Objective& objective, OptimizerReport& report)
        : objective_(objective), report_(report) {}

    Point operator()(std::vector<double> x) {
        Point p;
        p.g.assign(x.size(), 0.0);
        p.x = std::move(x);
        p.f = objective_(p.x, p.g);
        ++report_.evaluations;
        if (!std::isfinite(p.f)) {
            throw OptimizerAbort("objective returned a non-finite loss at evaluation " +
                                     std::to_string(report_.evaluations),
                                 report_);
        }
        for (double v : p.g) {
            if (!std::isfinite(v)) {
                throw OptimizerAbort("objective returned a non-finite gradient at evaluation " +
                                         std::to_string(report_.evaluations),
                                     report_);
            }
        }
        return p;
    }

private:
    const Objective& objective_;
    OptimizerReport& report_;
};

// Minimiser of the cubic matching values and slopes at both ends, kept at
// least 10% of the bracket away from either end.
double interpolate(const Sample& lo, const Sample& hi) {
    const double width = hi.alpha - lo.alpha;
    const double a_min = std::min(lo.alpha, hi.alpha) + 0.1 * std::abs(width);
    const double a_max = std::max(lo.alpha, hi.alpha) - 0.1 * std::abs(width);
    const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (lo.alpha - hi.alpha);
    const double disc = d1 * d1 - lo.slope * hi.slope;
    double a = 0.5 * (lo.alpha + hi.alpha);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), width);
        const double denom = hi.slope - lo.slope + 2.0 * d2;
        const double candidate = hi.alpha - width * (hi.slope + d2 - d1) / denom;
        if (std::isfinite(candidate)) a = candidate;
    }
    return std::clamp(a, a_min, a_max);
}

struct LineSearch {
    bool ok = false;
    Point point;
    StepRecord record;
};

class StrongWolfe {
public:
    StrongWolfe(Evaluator& eval, const OptimizerOptions& opts, const Point& start,
                std::span<const double> direction, double slope0)
        : eval_(eval), opts_(opts), start_(start), direction_(direction), slope0_(slope0) {}

    LineSearch run(double alpha) {
        Sample prev{0.0, start_.f, slope0_};
        while (evals_ < opts_.max_line_search_steps) {
            const Sample cur = probe(alpha);
            if (!sufficient(cur) || (evals_ > 1 && cur.f >= prev.f)) return zoom(prev, cur);
            if (curvature(cur)) return accept(cur);
            if (cur.slope >= 0.0) return zoom(cur, prev);
            prev = cur;
            alpha *= 2.0;
        }
        return {};
    }

private:
    Sample probe(double alpha) {
        std::vector<double> x(start_.x);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha * direction_[i];
        last_ = eval_(std::move(x));
        ++evals_;
        return {alpha, last_.f, dot(last_.g, direction_)};
    }

    bool sufficient(const Sample& s) const { return s.f <= start_.f + opts_.c1 * s.alpha * slope0_; }
    bool curvature(const Sample& s) const { return std::abs(s.slope) <= -opts_.c2 * slope0_; }

    LineSearch accept(const Sample& s) {
        LineSearch ls;
        ls.ok = true;
        ls.record = {s.alpha, start_.f, slope0_, s.f, s.slope, evals_};
        ls.point = std::move(last_);
        return ls;
    }

    LineSearch zoom(Sample lo, Sample hi) {
        while (evals_ < opts_.max_line_search_steps) {
            if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
            const Sample cur = probe(interpolate(lo, hi));
            if (!sufficient(cur) || cur.f >= lo.f) {
                hi = cur;
                continue;
            }
            if (curvature(cur)) return accept(cur);
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
            lo = cur;
        }
        return {};
    }

    Evaluator& eval_;
    const OptimizerOptions& opts_;
    const Point& start_;
    std::span<const double> direction_;
    double slope0_;
    std::size_t evals_ = 0;
    Point last_;
};

struct CurvaturePair {
    std::vector<double> s;
    std::vector<double> y;
    double rho = 0.0; // 1 / s'y
};

std::vector<double> two_loop(const std::deque<CurvaturePair>& memory, std::span<const double> grad) {
    std::vector<double> q(grad.begin(), grad.end());
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
        const auto& p = memory[i];
        alpha[i] = p.rho * dot(p.s, q);
        for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * p.y[j];
    }
    const auto& newest = memory.back();
    const double gamma = dot(newest.s, newest.y) / dot(newest.y, newest.y);
    for (auto& v : q) v *= gamma;
    for (std::size_t i = 0; i < memory.size(); ++i) {
        const auto& p = memory[i];
        const double beta = p.rho * dot(p.y, q);
        for (std::size_t j = 0; j < q.size(); ++j) q[j] += (alpha[i] - beta) * p.s[j];
    }
    for (auto& v : q) v = -v;
    return q;
}

} // namespace

void OptimizerOptions::validate() const {
    if (memory < 1) throw ConfigError("L-BFGS memory must be at least 1");
    if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
        throw ConfigError("line search constants need 0 < c1 < c2 < 1");
    }
    if (max_line_search_steps < 1) throw ConfigError("line search needs at least one step");
    if (!(gradient_tolerance >= 0.0)) throw ConfigError("gradient tolerance must be non-negative");
}

std::string to_string(Termination reason) {
    switch (reason) {
    case Termination::converged: return "converged";
    case Termination::budget: return "budget";
    case Termination::line_search_failure: return "line-search-failure";
    }
    return "unknown";
}

MinimizeResult minimize(const Objective& objective, std::vector<double> x0,
                        const OptimizerOptions& options) {
    options.validate();
    OptimizerReport report;
    Evaluator eval(objective, report);

    Point cur = eval(std::move(x0));
    double gnorm = norm(cur.g);
    report.losses.push_back(cur.f);
    auto notify = [&](std::size_t iteration) {
        if (options.on_iteration) {
            options.on_iteration({iteration, cur.x, cur.f, gnorm, report.evaluations});
        }
    };
    notify(0);

    auto converged = [&] {
        return gnorm == 0.0 || (options.gradient_tolerance > 0.0 && gnorm < options.gradient_tolerance);
    };

    std::deque<CurvaturePair> memory;
    report.reason = Termination::budget;
    if (converged()) {
        report.reason = Termination::converged;
    } else {
        for (std::size_t k = 0; k < options.max_iterations; ++k) {
            std::vector<double> direction;
            double alpha0 = 1.0;
            double slope0 = 0.0;
            if (!memory.empty()) {
                direction = two_loop(memory, cur.g);
                slope0 = dot(cur.g, direction);
            }
            if (memory.empty() || !(slope0 < 0.0)) {
                memory.clear();
                direction.assign(cur.g.size(), 0.0);
                for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = -cur.g[i];
                slope0 = -gnorm * gnorm;
                alpha0 = 1.0 / gnorm;
            }

            StrongWolfe search(eval, options, cur, direction, slope0);
            LineSearch ls = search.run(alpha0);
            if (!ls.ok) {
                report.reason = Termination::line_search_failure;
                break;
            }

            CurvaturePair pair;
            pair.s.resize(cur.x.size());
            pair.y.resize(cur.x.size());
            for (std::size_t i = 0; i < cur.x.size(); ++i) {
                pair.s[i] = ls.point.x[i] - cur.x[i];
                pair.y[i] = ls.point.g[i] - cur.g[i];
            }
            const double sy = dot(pair.s, pair.y);
            if (sy > 1e-10 * norm(pair.s) * norm(pair.y)) {
                pair.rho = 1.0 / sy;
                memory.push_back(std::move(pair));
                if (memory.size() > options.memory) memory.pop_front();
            }

            cur = std::move(ls.point);
            gnorm = norm(cur.g);
            ++report.iterations;
            report.losses.push_back(cur.f);
            report.steps.push_back(ls.record);
            notify(report.iterations);
            if (converged()) {
                report.reason = Termination::converged;
                break;
            }
        }
    }
    report.final_gradient_norm = gnorm;
    return {std::move(cur.x), std::move(report)};
}

} // namespace spectex
