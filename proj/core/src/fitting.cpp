// SPDX-License-Identifier: Apache-2.0
#include "tworay/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include <boost/math/tools/minima.hpp>

namespace tworay {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;
}  // namespace

ObjectiveVector objectives(std::span<const double> f_exp, std::span<const double> f_mod) {
    if (f_exp.size() != f_mod.size() || f_exp.empty())
        throw DomainError("objectives: densities must share a non-empty grid");
    ObjectiveVector o;
    for (std::size_t i = 0; i < f_exp.size(); ++i) {
        const double d = std::abs(f_exp[i] - f_mod[i]);
        o.mse += d * d;
        o.mae += d;
        o.ks = std::max(o.ks, d);
    }
    const double n = static_cast<double>(f_exp.size());
    o.mse /= n;
    o.mae /= n;
    o.rmse = std::sqrt(o.mse);
    return o;
}

ObjectiveVector objectives(const AmplitudePdf& f_exp, const AmplitudePdf& f_mod) {
    if (f_exp.grid != f_mod.grid) throw DomainError("objectives: grids differ");
    return objectives(f_exp.density, f_mod.density);
}

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    const auto x = a.as_array(), y = b.as_array();
    bool strictly = false;
    for (int i = 0; i < 4; ++i) {
        if (x[i] > y[i]) return false;
        if (x[i] < y[i]) strictly = true;
    }
    return strictly;
}

std::vector<double> epsilon_scores(const ParetoFront& front) {
    std::array<double, 4> top{0.0, 0.0, 0.0, 0.0};
    for (const auto& s : front.solutions) {
        const auto v = s.objectives.as_array();
        for (int i = 0; i < 4; ++i) top[i] = std::max(top[i], v[i]);
    }
    std::vector<double> eps;
    eps.reserve(front.solutions.size());
    for (const auto& s : front.solutions) {
        const auto v = s.objectives.as_array();
        double e = 0.0;
        // a metric that is zero across the whole front contributes nothing
        for (int i = 0; i < 4; ++i) e += top[i] > 0.0 ? v[i] / top[i] : 0.0;
        eps.push_back(0.25 * e);
    }
    return eps;
}

FitResult select_solution(const ParetoFront& front) {
    if (front.solutions.empty()) throw FitError("select_solution: empty front");
    const std::vector<double> eps = epsilon_scores(front);
    std::vector<std::size_t> order(front.solutions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return front.solutions[a].genes < front.solutions[b].genes;
    });
    std::size_t best = order.front();
    for (std::size_t i : order)
        if (eps[i] < eps[best]) best = i;
    FitResult r;
    r.selected = front.solutions[best].genes;
    r.selected_objectives = front.solutions[best].objectives;
    r.epsilon_n = eps[best];
    r.front = front;
    return r;
}

// ---------------------------------------------------------------- NSGA-II

namespace {

struct Individual {
    std::vector<double> genes;
    ObjectiveVector obj;
    int rank = 0;
    double crowding = 0.0;
};

std::vector<std::vector<std::size_t>> nondominated_sort(std::vector<Individual>& pop) {
    const std::size_t n = pop.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<int> count(n, 0);
    std::vector<std::vector<std::size_t>> fronts(1);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(pop[p].obj, pop[q].obj)) {
                dominated[p].push_back(q);
                ++count[q];
            } else if (dominates(pop[q].obj, pop[p].obj)) {
                dominated[q].push_back(p);
                ++count[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p)
        if (count[p] == 0) {
            pop[p].rank = 0;
            fronts[0].push_back(p);
        }
    for (std::size_t f = 0; !fronts[f].empty(); ++f) {
        std::vector<std::size_t> next;
        for (std::size_t p : fronts[f])
            for (std::size_t q : dominated[p])
                if (--count[q] == 0) {
                    pop[q].rank = static_cast<int>(f + 1);
                    next.push_back(q);
                }
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

void assign_crowding(std::vector<Individual>& pop, const std::vector<std::size_t>& front) {
    for (std::size_t i : front) pop[i].crowding = 0.0;
    if (front.size() <= 2) {
        for (std::size_t i : front) pop[i].crowding = kInf;
        return;
    }
    std::vector<std::size_t> idx = front;
    for (int m = 0; m < 4; ++m) {
        auto val = [&](std::size_t i) { return pop[i].obj.as_array()[m]; };
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return val(a) < val(b); });
        pop[idx.front()].crowding = kInf;
        pop[idx.back()].crowding = kInf;
        const double span = val(idx.back()) - val(idx.front());
        if (!(span > 0.0) || !std::isfinite(span)) continue;
        for (std::size_t k = 1; k + 1 < idx.size(); ++k)
            pop[idx[k]].crowding += (val(idx[k + 1]) - val(idx[k - 1])) / span;
    }
}

bool crowded_less(const Individual& a, const Individual& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.crowding > b.crowding;
}

double snap(double g, const Range& r, double res) {
    g = std::clamp(g, r.lo, r.hi);
    if (res > 0.0) g = std::clamp(r.lo + std::round((g - r.lo) / res) * res, r.lo, r.hi);
    return g;
}

void sbx(std::vector<double>& c1, std::vector<double>& c2, std::span<const Range> bounds, double eta,
         std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < c1.size(); ++i) {
        if (u01(rng) > 0.5) continue;
        const double y1 = std::min(c1[i], c2[i]), y2 = std::max(c1[i], c2[i]);
        if (y2 - y1 < 1e-14) continue;
        const double lo = bounds[i].lo, hi = bounds[i].hi;
        const double u = u01(rng);
        auto child = [&](double beta) {
            const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
            const double bq = u <= 1.0 / alpha ? std::pow(u * alpha, 1.0 / (eta + 1.0))
                                               : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
            return bq;
        };
        const double b1 = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        const double b2 = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        double n1 = 0.5 * ((y1 + y2) - child(b1) * (y2 - y1));
        double n2 = 0.5 * ((y1 + y2) + child(b2) * (y2 - y1));
        n1 = std::clamp(n1, lo, hi);
        n2 = std::clamp(n2, lo, hi);
        if (u01(rng) < 0.5) std::swap(n1, n2);
        c1[i] = n1;
        c2[i] = n2;
    }
}

void polynomial_mutation(std::vector<double>& g, std::span<const Range> bounds, double prob, double eta,
                         std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (u01(rng) >= prob) continue;
        const double lo = bounds[i].lo, hi = bounds[i].hi, span = hi - lo;
        if (!(span > 0.0)) continue;
        const double d1 = (g[i] - lo) / span, d2 = (hi - g[i]) / span;
        const double u = u01(rng);
        const double pw = 1.0 / (eta + 1.0);
        double dq;
        if (u < 0.5) {
            const double v = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
            dq = std::pow(v, pw) - 1.0;
        } else {
            const double v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
            dq = 1.0 - std::pow(v, pw);
        }
        g[i] = std::clamp(g[i] + dq * span, lo, hi);
    }
}

ObjectiveVector selected_objectives(const std::vector<Individual>& pop) {
    ParetoFront f;
    for (const auto& ind : pop)
        if (ind.rank == 0) f.solutions.push_back({ind.genes, ind.obj});
    return select_solution(f).selected_objectives;
}

}  // namespace

ParetoFront nsga2(std::span<const Range> bounds, const BatchObjective& evaluate, const GaSettings& s,
                  std::uint64_t seed) {
    if (bounds.empty()) throw FitError("nsga2: no genes");
    if (s.population < 4) throw FitError("nsga2: population must be at least 4");
    for (const Range& r : bounds)
        if (!(r.lo <= r.hi)) throw FitError("nsga2: empty bound");
    const std::size_t n = s.population + (s.population % 2);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    auto eval_all = [&](std::vector<Individual>& group) {
        std::vector<std::vector<double>> genomes;
        genomes.reserve(group.size());
        for (const auto& ind : group) genomes.push_back(ind.genes);
        std::vector<ObjectiveVector> obj(group.size());
        evaluate(genomes, obj);
        for (std::size_t i = 0; i < group.size(); ++i) group[i].obj = obj[i];
    };
    auto rank_population = [&](std::vector<Individual>& group) {
        const auto fronts = nondominated_sort(group);
        for (const auto& f : fronts) assign_crowding(group, f);
        return fronts;
    };

    std::vector<Individual> pop(n);
    for (auto& ind : pop) {
        ind.genes.resize(bounds.size());
        for (std::size_t i = 0; i < bounds.size(); ++i)
            ind.genes[i] = snap(bounds[i].lo + (bounds[i].hi - bounds[i].lo) * u01(rng), bounds[i], s.gene_resolution);
    }
    eval_all(pop);
    rank_population(pop);

    ParetoFront out;
    out.bounds.assign(bounds.begin(), bounds.end());
    auto record = [&] {
        std::array<double, 4> best{kInf, kInf, kInf, kInf};
        for (const auto& ind : pop) {
            const auto v = ind.obj.as_array();
            for (int i = 0; i < 4; ++i) best[i] = std::min(best[i], v[i]);
        }
        out.best_history.push_back(best);
    };
    record();

    const auto elite = static_cast<std::size_t>(std::max<double>(1.0, std::round(s.elite_fraction * static_cast<double>(n))));
    std::vector<ObjectiveVector> selected_trace{selected_objectives(pop)};
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t gen = 0;
    for (; gen < s.generations; ++gen) {
        auto tournament = [&]() -> const Individual& {
            const Individual& a = pop[pick(rng)];
            const Individual& b = pop[pick(rng)];
            return crowded_less(b, a) ? b : a;
        };
        std::vector<Individual> children;
        children.reserve(n);
        while (children.size() < n) {
            Individual c1{tournament().genes, {}, 0, 0.0}, c2{tournament().genes, {}, 0, 0.0};
            if (u01(rng) < s.crossover_probability) sbx(c1.genes, c2.genes, bounds, s.crossover_eta, rng);
            polynomial_mutation(c1.genes, bounds, s.mutation_probability, s.mutation_eta, rng);
            polynomial_mutation(c2.genes, bounds, s.mutation_probability, s.mutation_eta, rng);
            for (std::size_t i = 0; i < bounds.size(); ++i) {
                c1.genes[i] = snap(c1.genes[i], bounds[i], s.gene_resolution);
                c2.genes[i] = snap(c2.genes[i], bounds[i], s.gene_resolution);
            }
            children.push_back(std::move(c1));
            children.push_back(std::move(c2));
        }
        eval_all(children);

        // the best parents by crowded order survive unconditionally
        std::vector<std::size_t> parent_order(n);
        std::iota(parent_order.begin(), parent_order.end(), 0);
        std::stable_sort(parent_order.begin(), parent_order.end(),
                         [&](std::size_t a, std::size_t b) { return crowded_less(pop[a], pop[b]); });
        std::vector<Individual> next;
        next.reserve(n);
        std::vector<Individual> pool;
        pool.reserve(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            if (i < elite)
                next.push_back(pop[parent_order[i]]);
            else
                pool.push_back(pop[parent_order[i]]);
        }
        for (auto& c : children) pool.push_back(std::move(c));
        const auto fronts = rank_population(pool);
        for (const auto& f : fronts) {
            if (next.size() >= n) break;
            if (next.size() + f.size() <= n) {
                for (std::size_t i : f) next.push_back(pool[i]);
                continue;
            }
            std::vector<std::size_t> idx = f;
            std::stable_sort(idx.begin(), idx.end(),
                             [&](std::size_t a, std::size_t b) { return pool[a].crowding > pool[b].crowding; });
            for (std::size_t k = 0; next.size() < n; ++k) next.push_back(pool[idx[k]]);
        }
        pop = std::move(next);
        rank_population(pop);
        record();

        selected_trace.push_back(selected_objectives(pop));
        if (s.stall_window > 0 && selected_trace.size() > s.stall_window) {
            const auto now = selected_trace.back().as_array();
            const auto then = selected_trace[selected_trace.size() - 1 - s.stall_window].as_array();
            bool flat = true;
            for (int i = 0; i < 4 && flat; ++i) {
                const double scale = std::max(std::abs(then[i]), 1e-300);
                flat = std::abs(now[i] - then[i]) / scale < s.stall_tolerance;
            }
            if (flat) {
                out.stalled = true;
                ++gen;
                break;
            }
        }
    }
    out.generations = gen;

    std::vector<std::size_t> first;
    for (std::size_t i = 0; i < pop.size(); ++i)
        if (pop[i].rank == 0) first.push_back(i);
    std::stable_sort(first.begin(), first.end(), [&](std::size_t a, std::size_t b) { return pop[a].genes < pop[b].genes; });
    for (std::size_t i : first) {
        if (!out.solutions.empty() && out.solutions.back().genes == pop[i].genes) continue;
        out.solutions.push_back({pop[i].genes, pop[i].obj});
    }
    return out;
}

// ---------------------------------------------------------------- model fits

double pdf_second_moment(const AmplitudePdf& pdf) {
    if (pdf.second_moment) return *pdf.second_moment;
    double mass = 0.0, m2 = 0.0;
    for (std::size_t i = 1; i < pdf.grid.size(); ++i) {
        const double h = pdf.grid[i] - pdf.grid[i - 1];
        const double a = pdf.grid[i - 1], b = pdf.grid[i];
        mass += 0.5 * h * (pdf.density[i - 1] + pdf.density[i]);
        m2 += 0.5 * h * (a * a * pdf.density[i - 1] + b * b * pdf.density[i]);
    }
    if (!(mass > 0.0)) throw FitError("empirical density has no mass");
    return m2 / mass;
}

namespace {

void check_target(const AmplitudePdf& f_exp) {
    f_exp.validate();
    if (std::all_of(f_exp.density.begin(), f_exp.density.end(), [](double d) { return d == 0.0; }))
        throw FitError("empirical density is zero everywhere");
}

// Cache-backed batch evaluation; misses are spread over worker threads.
class CachedEvaluator {
public:
    using Single = std::function<ObjectiveVector(const std::vector<double>&)>;

    CachedEvaluator(Single f, unsigned jobs) : f_(std::move(f)), jobs_(std::max(1u, jobs)) {}

    void operator()(std::span<const std::vector<double>> genomes, std::span<ObjectiveVector> out) {
        std::vector<std::vector<double>> misses;
        for (const auto& g : genomes)
            if (!cache_.count(g)) misses.push_back(g);
        std::sort(misses.begin(), misses.end());
        misses.erase(std::unique(misses.begin(), misses.end()), misses.end());
        std::vector<ObjectiveVector> values(misses.size());
        auto work = [&](std::size_t start) {
            for (std::size_t i = start; i < misses.size(); i += jobs_) values[i] = guarded(misses[i]);
        };
        if (jobs_ == 1 || misses.size() < 2) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < jobs_; ++t) pool.emplace_back(work, t);
            for (auto& th : pool) th.join();
        }
        for (std::size_t i = 0; i < misses.size(); ++i) cache_.emplace(misses[i], values[i]);
        for (std::size_t i = 0; i < genomes.size(); ++i) out[i] = cache_.at(genomes[i]);
    }

private:
    ObjectiveVector guarded(const std::vector<double>& g) const {
        try {
            return f_(g);
        } catch (const std::exception&) {
            // an unevaluable candidate is dominated by everything that evaluates
            return {kInf, kInf, kInf, kInf};
        }
    }

    Single f_;
    unsigned jobs_;
    std::map<std::vector<double>, ObjectiveVector> cache_;
};

}  // namespace

IftrFit fit_iftr(const AmplitudePdf& f_exp, const GaSettings& ga, std::uint64_t seed,
                 const SearchBounds& bounds) {
    check_target(f_exp);
    const double omega = pdf_second_moment(f_exp);
    if (!(omega > 0.0)) throw FitError("empirical second moment must be positive");
    const IftrSpectral model(f_exp.grid, {std::max(bounds.k.hi, 1.0), omega, f_exp.bandwidth.value_or(0.0)});
    const std::size_t n = f_exp.grid.size();
    CachedEvaluator eval(
        [&](const std::vector<double>& g) {
            std::vector<double> f(n);
            model.evaluate({g[0], g[1], g[2], g[3], omega}, f);
            return objectives(f_exp.density, f);
        },
        ga.jobs);
    const std::array<Range, 4> b{bounds.k, bounds.delta, bounds.m1, bounds.m2};
    ParetoFront front = nsga2(b, std::ref(eval), ga, seed);
    IftrFit out;
    out.result = select_solution(front);
    const auto& g = out.result.selected;
    out.selected = {g[0], g[1], g[2], g[3], omega};
    return out;
}

namespace {

// Best-Fisher style inverse of A1 = I1/I0.
double inverse_a1(double r) {
    if (r < 0.53) return 2.0 * r + r * r * r + 5.0 * std::pow(r, 5) / 6.0;
    if (r < 0.85) return -0.4 + 1.39 * r + 0.43 / (1.0 - r);
    return 1.0 / (r * r * r - 4.0 * r * r + 3.0 * r);
}

double vm_mse(const CircularPdf& pdf, double kappa, double phi) {
    double s = 0.0;
    for (std::size_t b = 0; b < pdf.centers.size(); ++b) {
        const double d = pdf.density[b] - von_mises_pdf(kappa, phi, pdf.centers[b]);
        s += d * d;
    }
    return s / static_cast<double>(pdf.centers.size());
}

}  // namespace

VonMisesFit fit_von_mises(const CircularPdf& phase_pdf) {
    if (phase_pdf.centers.size() != phase_pdf.density.size() || phase_pdf.centers.size() < 3)
        throw FitError("fit_von_mises: malformed circular density");
    double mass = 0.0, c = 0.0, s = 0.0;
    for (std::size_t b = 0; b < phase_pdf.centers.size(); ++b) {
        const double w = phase_pdf.density[b] * phase_pdf.bin_width;
        mass += w;
        c += w * std::cos(phase_pdf.centers[b]);
        s += w * std::sin(phase_pdf.centers[b]);
    }
    if (!(mass > 0.0)) throw FitError("fit_von_mises: density has no mass");
    const double half = 0.5 * phase_pdf.bin_width;
    // grouping into bins shrinks the resultant by sin(h)/h
    const double r = std::min(std::hypot(c, s) / mass / (std::sin(half) / half), 0.999999);
    VonMisesFit fit;
    fit.phi = std::atan2(s, c);
    if (r < 0.05) {
        fit.kappa = 0.0;
        fit.phi = 0.0;
        fit.mse = vm_mse(phase_pdf, 0.0, 0.0);
        const double level = 1.0 / (2.0 * kPi);
        fit.multimodal = fit.mse > 0.05 * level * level;
        return fit;
    }
    // the moment estimate is close; a wide search in kappa finds spurious minima where a
    // very narrow spike falls between bin centres
    const double log_k0 = std::log(std::max(inverse_a1(r), 1e-3));
    double log_k = log_k0;
    double phi = fit.phi;
    double best = vm_mse(phase_pdf, std::exp(log_k), phi);
    using boost::math::tools::brent_find_minima;
    for (int sweep = 0; sweep < 6; ++sweep) {
        const auto kr = brent_find_minima([&](double lk) { return vm_mse(phase_pdf, std::exp(lk), phi); },
                                          log_k0 - 2.0, log_k0 + 2.0, 40);
        if (kr.second < best) {
            log_k = kr.first;
            best = kr.second;
        }
        const double k = std::exp(log_k);
        const double reach = std::min(kPi, 1.0 / std::sqrt(k) + 3.0 * phase_pdf.bin_width);
        const auto pr = brent_find_minima([&](double p) { return vm_mse(phase_pdf, k, p); }, phi - reach,
                                          phi + reach, 40);
        if (pr.second < best) {
            phi = pr.first;
            best = pr.second;
        }
    }
    fit.kappa = std::exp(log_k);
    fit.phi = wrap_angle(phi);
    fit.mse = best;
    return fit;
}

GtrvFit fit_gtrv(const AmplitudePdf& f_exp, const VonMisesFit& vm, const GaSettings& ga,
                 std::uint64_t seed, const SearchBounds& bounds) {
    check_target(f_exp);
    const double power = pdf_second_moment(f_exp);
    if (!(power > 0.0)) throw FitError("empirical second moment must be positive");
    const double phi = wrap_angle(vm.phi);
    const GtrvGridEvaluator model(f_exp.grid, vm.kappa, phi, f_exp.bandwidth.value_or(0.0));
    const double tilt = von_mises_mean_resultant(vm.kappa) * std::cos(phi);
    auto omega_for = [&](double k, double delta) {
        return power / ((k * (1.0 + delta * tilt) + 1.0) / (1.0 + k));
    };
    const std::size_t n = f_exp.grid.size();
    CachedEvaluator eval(
        [&](const std::vector<double>& g) {
            std::vector<double> f(n);
            model.evaluate(g[0], g[1], omega_for(g[0], g[1]), f);
            return objectives(f_exp.density, f);
        },
        ga.jobs);
    const std::array<Range, 2> b{bounds.k, bounds.delta};
    ParetoFront front = nsga2(b, std::ref(eval), ga, seed);
    GtrvFit out;
    out.result = select_solution(front);
    const auto& g = out.result.selected;
    out.selected = {g[0], g[1], vm.kappa, phi, omega_for(g[0], g[1])};
    return out;
}

}  // namespace tworay
