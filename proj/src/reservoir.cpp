#include "amlopt/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include <Eigen/Sparse>
#include <fmt/format.h>
#include <json.hpp>

#include "amlopt/errors.hpp"
#include "amlopt/surrogate.hpp"

namespace amlopt {

namespace {

constexpr double kDay = 86400.0;
constexpr double kBar = 1e5;
constexpr double kMilliDarcy = 9.869233e-16;
constexpr double kCentiPoise = 1e-3;

inline double power(double x, double n) { return n == 2.0 ? x * x : std::pow(x, n); }

struct Fluid {
    RelativePermeability rp;
    double mu_w;
    double mu_o;

    double effective(double s) const { return std::clamp((s - rp.swr) / (1.0 - rp.swr - rp.sor), 0.0, 1.0); }
    double krw(double s) const { return rp.krw_max * power(effective(s), rp.n_water); }
    double kro(double s) const { return rp.kro_max * power(1.0 - effective(s), rp.n_oil); }
    // multiplier scales the water viscosity (Todd-Longstaff factor times permeability reduction)
    double lambda_w(double s, double multiplier) const { return krw(s) / (mu_w * multiplier); }
    double lambda_o(double s) const { return kro(s) / mu_o; }
    double fw(double s, double multiplier) const {
        const double lw = lambda_w(s, multiplier);
        const double lt = lw + lambda_o(s);
        return lt > 0.0 ? lw / lt : 0.0;
    }
};

// Largest slope of the water fractional flow over saturation for water
// viscosity multipliers in [1, max_multiplier].
double fractional_flow_lipschitz(const Fluid& fluid, double max_multiplier) {
    constexpr int kSat = 400;
    constexpr int kMult = 24;
    double lmax = 0.0;
    for (int m = 0; m < kMult; ++m) {
        const double mult = kMult == 1 ? 1.0 : std::pow(max_multiplier, static_cast<double>(m) / (kMult - 1));
        double prev = fluid.fw(0.0, mult);
        for (int i = 1; i <= kSat; ++i) {
            const double s = static_cast<double>(i) / kSat;
            const double f = fluid.fw(s, mult);
            lmax = std::max(lmax, (f - prev) * kSat);
            prev = f;
        }
    }
    return 1.05 * lmax;
}

struct Face {
    std::size_t i;
    std::size_t j;
    double trans;  // m3, geometric transmissibility
};

}  // namespace

std::string to_string(WellKind k) { return k == WellKind::injector ? "injector" : "producer"; }

std::size_t ReservoirModel::control_types() const {
    std::size_t n = 0;
    for (const auto& w : wells) n += w.control_types();
    return n;
}

std::vector<std::string> ReservoirModel::control_names() const {
    std::vector<std::string> names;
    for (const auto& w : wells) {
        names.push_back(w.name + ":rate");
        if (w.kind == WellKind::injector) names.push_back(w.name + ":concentration");
    }
    return names;
}

ControlBounds ReservoirModel::control_bounds() const {
    const auto n = static_cast<Eigen::Index>(control_types());
    Eigen::VectorXd lo(n), hi(n);
    Eigen::Index t = 0;
    for (const auto& w : wells) {
        lo[t] = w.rate_min;
        hi[t++] = w.rate_max;
        if (w.kind == WellKind::injector) {
            lo[t] = w.concentration_min;
            hi[t++] = w.concentration_max;
        }
    }
    return ControlBounds(lo, hi);
}

Eigen::VectorXd ReservoirModel::times_days() const {
    Eigen::VectorXd t(static_cast<Eigen::Index>(step_days.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < step_days.size(); ++i) {
        acc += step_days[i];
        t[static_cast<Eigen::Index>(i)] = acc;
    }
    return t;
}

void ReservoirModel::validate() const {
    if (nx == 0 || ny == 0) throw ParameterError("grid must have at least one cell in each direction");
    if (!(dx > 0.0 && dy > 0.0 && dz > 0.0)) throw ParameterError("cell dimensions must be positive");
    const auto n = static_cast<Eigen::Index>(cells());
    if (porosity.size() != n || permeability.size() != n || initial_sw.size() != n) {
        throw StructuralError("per-cell arrays must have nx*ny entries");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(porosity[i] > 0.0 && porosity[i] < 1.0)) throw ParameterError("porosity must lie in (0,1)");
        if (!(permeability[i] > 0.0)) throw ParameterError("permeability must be positive");
        if (!(initial_sw[i] >= 0.0 && initial_sw[i] <= 1.0)) throw ParameterError("saturation must lie in [0,1]");
    }
    if (!(mu_water > 0.0 && mu_oil > 0.0)) throw ParameterError("viscosities must be positive");
    const auto& rp = relperm;
    if (!(rp.swr >= 0.0 && rp.sor >= 0.0 && rp.swr + rp.sor < 1.0)) throw ParameterError("invalid residual saturations");
    if (!(rp.n_water > 0.0 && rp.n_oil > 0.0 && rp.krw_max > 0.0 && rp.kro_max > 0.0)) {
        throw ParameterError("invalid relative permeability parameters");
    }
    const auto& p = polymer;
    if (!(p.mixing_omega >= 0.0 && p.mixing_omega <= 1.0)) throw ParameterError("mixing parameter must lie in [0,1]");
    if (!(p.max_adsorption >= 0.0 && p.rock_density >= 0.0 && p.viscosity_factor >= 0.0)) {
        throw ParameterError("polymer parameters must be non-negative");
    }
    if (!(p.dead_pore_space >= 0.0 && p.dead_pore_space < 1.0)) throw ParameterError("dead pore space must lie in [0,1)");
    if (!(p.rrf >= 1.0)) throw ParameterError("residual resistance factor must be at least 1");
    if (!(p.adsorption_saturation_concentration > 0.0)) {
        throw ParameterError("adsorption saturation concentration must be positive");
    }
    if (wells.empty()) throw ParameterError("model has no wells");
    for (const auto& w : wells) {
        if (w.ix >= nx || w.iy >= ny) throw ParameterError("well " + w.name + " lies outside the grid");
        if (!(w.rate_min >= 0.0 && w.rate_min < w.rate_max)) throw ParameterError("well " + w.name + " has invalid rate bounds");
        if (w.kind == WellKind::injector && !(w.concentration_min >= 0.0 && w.concentration_min < w.concentration_max)) {
            throw ParameterError("well " + w.name + " has invalid concentration bounds");
        }
        const double r_eq = 0.14 * std::hypot(dx, dy);
        if (!(w.radius > 0.0 && w.radius < r_eq)) throw ParameterError("well " + w.name + " radius must be below the equivalent radius");
    }
    if (step_days.empty()) throw ParameterError("schedule has no control steps");
    for (double d : step_days) {
        if (!(d > 0.0)) throw ParameterError("control step lengths must be positive");
    }
    if (numerics.pressure_updates_per_step == 0) throw ParameterError("need at least one pressure update per step");
    if (!(numerics.cfl > 0.0 && numerics.cfl <= 1.0)) throw ParameterError("CFL factor must lie in (0,1]");
    if (numerics.max_substeps == 0) throw ParameterError("max_substeps must be positive");
}

SimulationResult simulate(const ReservoirModel& model, const ControlVector& u) {
    model.validate();
    const std::size_t nt = model.n_steps();
    if (u.n_wells != model.control_types() || u.n_steps != nt || u.size() != u.n_wells * nt) {
        throw StructuralError("control vector layout does not match the model");
    }
    for (Eigen::Index i = 0; i < u.values.size(); ++i) {
        if (!(u.values[i] >= 0.0)) throw PreconditionError("controls must be non-negative");
    }

    const std::size_t n = model.cells();
    const auto en = static_cast<Eigen::Index>(n);
    const double volume = model.dx * model.dy * model.dz;
    const auto& pol = model.polymer;
    const Fluid fluid{model.relperm, model.mu_water, model.mu_oil};
    const double dead = 1.0 - pol.dead_pore_space;
    const double k_ads = pol.max_adsorption / pol.adsorption_saturation_concentration;
    const double c_sat = pol.adsorption_saturation_concentration;

    std::vector<Face> faces;
    faces.reserve(2 * n);
    const auto& perm = model.permeability;
    auto harmonic = [&](std::size_t a, std::size_t b) { return 2.0 * perm[a] * perm[b] / (perm[a] + perm[b]); };
    for (std::size_t iy = 0; iy < model.ny; ++iy) {
        for (std::size_t ix = 0; ix < model.nx; ++ix) {
            const std::size_t c = model.cell(ix, iy);
            if (ix + 1 < model.nx) {
                const std::size_t e = model.cell(ix + 1, iy);
                faces.push_back({c, e, harmonic(c, e) * model.dy * model.dz / model.dx});
            }
            if (iy + 1 < model.ny) {
                const std::size_t e = model.cell(ix, iy + 1);
                faces.push_back({c, e, harmonic(c, e) * model.dx * model.dz / model.dy});
            }
        }
    }

    Eigen::VectorXd pv(en), rock(en);
    for (Eigen::Index i = 0; i < en; ++i) {
        pv[i] = model.porosity[i] * volume;
        rock[i] = pol.rock_density * (1.0 - model.porosity[i]) * volume;
    }

    const std::size_t nw = model.wells.size();
    std::vector<std::size_t> well_cell(nw), rate_type(nw), conc_type(nw);
    std::vector<double> well_index(nw);
    {
        std::size_t t = 0;
        const double r_eq = 0.14 * std::hypot(model.dx, model.dy);
        for (std::size_t w = 0; w < nw; ++w) {
            const auto& ws = model.wells[w];
            well_cell[w] = model.cell(ws.ix, ws.iy);
            well_index[w] = 2.0 * std::numbers::pi * perm[static_cast<Eigen::Index>(well_cell[w])] * model.dz /
                            std::log(r_eq / ws.radius);
            rate_type[w] = t++;
            conc_type[w] = ws.kind == WellKind::injector ? t++ : t;
        }
    }

    double max_conc = 0.0;
    for (std::size_t w = 0; w < nw; ++w) {
        if (model.wells[w].kind != WellKind::injector) continue;
        for (std::size_t s = 0; s < nt; ++s) max_conc = std::max(max_conc, u(conc_type[w], s));
    }
    const double max_multiplier =
        std::pow(1.0 + pol.viscosity_factor * max_conc, pol.mixing_omega) * (max_conc > 0.0 ? pol.rrf : 1.0);
    const double lipschitz = fractional_flow_lipschitz(fluid, std::max(1.0, max_multiplier));

    Eigen::VectorXd sw = model.initial_sw;
    Eigen::VectorXd conc = Eigen::VectorXd::Zero(en);
    Eigen::VectorXd ads = Eigen::VectorXd::Zero(en);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(en);
    Eigen::VectorXd pressure = Eigen::VectorXd::Constant(en, model.initial_pressure * kBar);
    const double water0 = pv.dot(sw);

    SimulationResult res;
    res.times_days = model.times_days();
    const auto ent = static_cast<Eigen::Index>(nt);
    for (auto* v : {&res.q_op, &res.q_wp, &res.q_wi, &res.q_pi, &res.q_pp, &res.q_gp}) *v = Eigen::VectorXd::Zero(ent);
    res.bhp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nw), ent);
    res.substeps.assign(nt, 0);
    res.min_saturation = sw.minCoeff();
    res.max_saturation = sw.maxCoeff();
    res.min_concentration = 0.0;

    Eigen::VectorXd mult(en), lam_t(en), fw(en), q_inj(en), m_inj(en), q_prod(en), outflow(en), d_water(en), d_poly(en);
    Eigen::VectorXd flux(static_cast<Eigen::Index>(faces.size()));

    auto update_mobility = [&] {
        for (Eigen::Index i = 0; i < en; ++i) {
            double m = 1.0;
            if (conc[i] > 0.0) m = std::pow(1.0 + pol.viscosity_factor * conc[i], pol.mixing_omega);
            if (ads[i] > 0.0 && pol.max_adsorption > 0.0) m *= 1.0 + (pol.rrf - 1.0) * ads[i] / pol.max_adsorption;
            mult[i] = m;
            const double lw = fluid.lambda_w(sw[i], m);
            const double lo = fluid.lambda_o(sw[i]);
            lam_t[i] = lw + lo;
            fw[i] = lam_t[i] > 0.0 ? lw / lam_t[i] : 0.0;
        }
    };

    using SpMat = Eigen::SparseMatrix<double>;
    SpMat a(en, en);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n + 4 * faces.size());
    Eigen::SimplicialLDLT<SpMat> solver;
    bool analyzed = false;

    auto solve_pressure = [&] {
        trip.clear();
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(en);
        for (const auto& f : faces) {
            const double t = f.trans * 0.5 * (lam_t[static_cast<Eigen::Index>(f.i)] + lam_t[static_cast<Eigen::Index>(f.j)]);
            diag[static_cast<Eigen::Index>(f.i)] += t;
            diag[static_cast<Eigen::Index>(f.j)] += t;
            if (f.i == 0 || f.j == 0) {
                // keep the structural entry so the pattern never changes
                trip.emplace_back(f.i, f.j, 0.0);
                trip.emplace_back(f.j, f.i, 0.0);
            } else {
                trip.emplace_back(f.i, f.j, -t);
                trip.emplace_back(f.j, f.i, -t);
            }
        }
        const double pin = diag.mean();
        for (Eigen::Index i = 0; i < en; ++i) trip.emplace_back(i, i, i == 0 ? pin : diag[i]);
        a.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
            solver.analyzePattern(a);
            analyzed = true;
        }
        solver.factorize(a);
        if (solver.info() != Eigen::Success) throw SimulationError("pressure matrix factorization failed");
        Eigen::VectorXd rhs = q_inj - q_prod;
        rhs[0] = 0.0;
        pressure = solver.solve(rhs);
        if (solver.info() != Eigen::Success || !pressure.allFinite()) throw SimulationError("pressure solve failed");
        pressure.array() += model.initial_pressure * kBar - pressure.mean();
        outflow = q_prod;
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const auto& fc = faces[f];
            const auto i = static_cast<Eigen::Index>(fc.i), j = static_cast<Eigen::Index>(fc.j);
            const double t = fc.trans * 0.5 * (lam_t[i] + lam_t[j]);
            flux[static_cast<Eigen::Index>(f)] = t * (pressure[i] - pressure[j]);
            outflow[flux[static_cast<Eigen::Index>(f)] > 0.0 ? i : j] += std::abs(flux[static_cast<Eigen::Index>(f)]);
        }
    };

    auto concentration_from_mass = [&](Eigen::Index i) {
        const double m = mass[i] / volume;
        const double aq = model.porosity[i] * dead * sw[i];
        const double b = pol.rock_density * (1.0 - model.porosity[i]);
        if (m <= 0.0) return 0.0;
        if (m <= (aq + b * k_ads) * c_sat) return m / (aq + b * k_ads);
        if (!(aq > 0.0)) throw ConsistencyError("polymer mass exceeds adsorption capacity in a cell without mobile water");
        return (m - b * pol.max_adsorption) / aq;
    };

    double water_in = 0.0, water_out = 0.0, poly_in = 0.0, poly_out = 0.0;

    for (std::size_t step = 0; step < nt; ++step) {
        const auto es = static_cast<Eigen::Index>(step);
        double inj_target = 0.0, prod_target = 0.0;
        for (std::size_t w = 0; w < nw; ++w) {
            (model.wells[w].kind == WellKind::injector ? inj_target : prod_target) += u(rate_type[w], step);
        }
        const double throughput = std::min(inj_target, prod_target);
        q_inj.setZero();
        m_inj.setZero();
        q_prod.setZero();
        std::vector<double> well_rate(nw, 0.0);
        if (throughput > 0.0) {
            for (std::size_t w = 0; w < nw; ++w) {
                const auto c = static_cast<Eigen::Index>(well_cell[w]);
                const double target = u(rate_type[w], step);
                if (model.wells[w].kind == WellKind::injector) {
                    well_rate[w] = throughput * target / inj_target / kDay;
                    q_inj[c] += well_rate[w];
                    m_inj[c] += well_rate[w] * u(conc_type[w], step);
                } else {
                    well_rate[w] = throughput * target / prod_target / kDay;
                    q_prod[c] += well_rate[w];
                }
            }
        }

        const double step_seconds = model.step_days[step] * kDay;
        if (throughput > 0.0) {
            const std::size_t np = model.numerics.pressure_updates_per_step;
            std::size_t substeps = 0;
            for (std::size_t pstep = 0; pstep < np; ++pstep) {
                const double t_end = step_seconds * static_cast<double>(pstep + 1) / static_cast<double>(np);
                double t = step_seconds * static_cast<double>(pstep) / static_cast<double>(np);
                update_mobility();
                solve_pressure();
                bool fresh = true;
                while (t < t_end) {
                    if (++substeps > model.numerics.max_substeps) {
                        throw SimulationError(fmt::format("transport needed more than {} substeps in control step {}",
                                                          model.numerics.max_substeps, step));
                    }
                    if (!fresh) update_mobility();
                    fresh = false;
                    double dt = t_end - t;
                    for (Eigen::Index i = 0; i < en; ++i) {
                        if (!(outflow[i] > 0.0)) continue;
                        dt = std::min(dt, model.numerics.cfl * pv[i] / (lipschitz * outflow[i]));
                        const double wout = fw[i] * outflow[i];
                        if (wout > 0.0) dt = std::min(dt, model.numerics.cfl * pv[i] * dead * sw[i] / wout);
                    }
                    if (t_end - t - dt < 1e-9 * step_seconds) dt = t_end - t;

                    d_water = q_inj;
                    d_poly = m_inj;
                    for (std::size_t f = 0; f < faces.size(); ++f) {
                        const double fl = flux[static_cast<Eigen::Index>(f)];
                        if (fl == 0.0) continue;
                        const auto up = static_cast<Eigen::Index>(fl > 0.0 ? faces[f].i : faces[f].j);
                        const auto dn = static_cast<Eigen::Index>(fl > 0.0 ? faces[f].j : faces[f].i);
                        const double w = std::abs(fl) * fw[up];
                        d_water[up] -= w;
                        d_water[dn] += w;
                        d_poly[up] -= w * conc[up];
                        d_poly[dn] += w * conc[up];
                    }
                    double qo = 0.0, qw = 0.0, qp = 0.0;
                    for (Eigen::Index i = 0; i < en; ++i) {
                        if (q_prod[i] > 0.0) {
                            const double w = q_prod[i] * fw[i];
                            d_water[i] -= w;
                            d_poly[i] -= w * conc[i];
                            qw += w;
                            qo += q_prod[i] - w;
                            qp += w * conc[i];
                        }
                    }
                    const double qi = q_inj.sum();
                    const double pi = m_inj.sum();
                    res.q_op[es] += qo * dt;
                    res.q_wp[es] += qw * dt;
                    res.q_wi[es] += qi * dt;
                    res.q_pi[es] += pi * dt;
                    res.q_pp[es] += qp * dt;
                    water_in += qi * dt;
                    water_out += qw * dt;
                    poly_in += pi * dt;
                    poly_out += qp * dt;

                    for (Eigen::Index i = 0; i < en; ++i) {
                        sw[i] += dt * d_water[i] / pv[i];
                        if (sw[i] < -1e-9 || sw[i] > 1.0 + 1e-9) {
                            throw ConsistencyError(fmt::format("water saturation {} left [0,1] in cell {}", sw[i], i));
                        }
                        res.min_saturation = std::min(res.min_saturation, sw[i]);
                        res.max_saturation = std::max(res.max_saturation, sw[i]);
                        if (d_poly[i] != 0.0 || mass[i] != 0.0) {
                            mass[i] += dt * d_poly[i];
                            if (mass[i] < 0.0) {
                                if (mass[i] < -1e-9 * std::max(1.0, poly_in)) {
                                    throw ConsistencyError(fmt::format("negative polymer mass in cell {}", i));
                                }
                                mass[i] = 0.0;
                            }
                            conc[i] = concentration_from_mass(i);
                            ads[i] = std::min(pol.max_adsorption, k_ads * conc[i]);
                            res.min_concentration = std::min(res.min_concentration, conc[i]);
                        }
                    }
                    t += dt;
                }
                for (std::size_t w = 0; w < nw; ++w) {
                    const auto c = static_cast<Eigen::Index>(well_cell[w]);
                    const double drawdown = well_rate[w] / (well_index[w] * lam_t[c]);
                    const double sign = model.wells[w].kind == WellKind::injector ? 1.0 : -1.0;
                    res.bhp(static_cast<Eigen::Index>(w), es) = (pressure[c] + sign * drawdown) / kBar;
                }
            }
            res.substeps[step] = substeps;
        } else {
            for (std::size_t w = 0; w < nw; ++w) {
                res.bhp(static_cast<Eigen::Index>(w), es) = pressure[static_cast<Eigen::Index>(well_cell[w])] / kBar;
            }
        }
    }

    const double water_now = pv.dot(sw);
    const double water_gap = water_in - water_out - (water_now - water0);
    res.water_residual = std::abs(water_gap) / (water_in > 0.0 ? water_in : 1.0);
    double poly_now = 0.0;
    for (Eigen::Index i = 0; i < en; ++i) {
        poly_now += pv[i] * dead * sw[i] * conc[i] + rock[i] * ads[i];
    }
    res.polymer_residual = std::abs(poly_in - poly_out - poly_now) / (poly_in > 0.0 ? poly_in : 1.0);
    res.final_sw = sw;
    res.final_concentration = conc;
    res.final_pressure = pressure / kBar;
    return res;
}

std::pair<double, Eigen::VectorXd> npv(const SimulationResult& r, const EconParams& e) {
    const Eigen::VectorXd j = e.r_op * r.q_op + e.r_gp * r.q_gp -
                              (e.r_wi * r.q_wi + e.r_wp * r.q_wp + e.r_pi * r.q_pi + e.r_pp * r.q_pp);
    const Eigen::VectorXd delta = discount_vector(e.d_tau, e.tau, r.times_days);
    return {delta.dot(j), j};
}

ReservoirObjective::ReservoirObjective(std::shared_ptr<const ReservoirModel> model, EconParams econ,
                                       ControlBounds bounds)
    : model_(std::move(model)), econ_(econ), bounds_(std::move(bounds)) {
    if (!model_) throw StructuralError("reservoir objective needs a model");
    model_->validate();
    if (bounds_.n_wells() != model_->control_types()) throw StructuralError("bounds do not match the control layout");
    delta_ = discount_vector(econ_.d_tau, econ_.tau, model_->times_days());
}

Evaluation ReservoirObjective::compute(const ControlVector& u) const {
    bounds_.check_against(u);
    ControlVector v = u;
    for (std::size_t s = 0; s < u.n_steps; ++s) {
        for (std::size_t w = 0; w < u.n_wells; ++w) {
            const double lo = bounds_.lower[static_cast<Eigen::Index>(w)];
            const double hi = bounds_.upper[static_cast<Eigen::Index>(w)];
            const double slack = 1e-12 * (hi - lo);
            double& x = v(w, s);
            if (x < lo - slack || x > hi + slack) throw PreconditionError("control outside the admissible set");
            x = std::clamp(x, lo, hi);
        }
    }
    const SimulationResult r = simulate(*model_, v);
    auto [value, j] = npv(r, econ_);
    return {value, std::move(j)};
}

std::shared_ptr<ReservoirObjective> make_fom_objective(std::shared_ptr<const ReservoirModel> model,
                                                       const EconParams& econ, const ControlBounds& bounds) {
    return std::make_shared<ReservoirObjective>(std::move(model), econ, bounds);
}

ControlVector constant_controls(const ReservoirModel& model, double injector_rate, double concentration,
                                double producer_rate) {
    Eigen::VectorXd per(static_cast<Eigen::Index>(model.control_types()));
    Eigen::Index t = 0;
    for (const auto& w : model.wells) {
        if (w.kind == WellKind::injector) {
            per[t++] = injector_rate;
            per[t++] = concentration;
        } else {
            per[t++] = producer_rate;
        }
    }
    return ControlVector::from_well_values(per, model.n_steps());
}

namespace {

using nlohmann::json;

Eigen::VectorXd cell_array(const json& node, std::size_t n, double unit, const std::string& what) {
    if (node.is_number()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), node.get<double>() * unit);
    const auto v = node.get<std::vector<double>>();
    if (v.size() != n) throw StructuralError(fmt::format("{} needs {} entries, found {}", what, n, v.size()));
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = v[i] * unit;
    return out;
}

json array_or_scalar(const Eigen::VectorXd& v, double unit) {
    if (v.size() > 0 && (v.array() == v[0]).all()) return v[0] / unit;
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v[i] / unit;
    return out;
}

}  // namespace

ReservoirModel load_deck(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read deck " + path.string());
    json d;
    try {
        d = json::parse(in);
    } catch (const json::parse_error& e) {
        throw StructuralError(path.string() + ": " + e.what());
    }
    ReservoirModel m;
    try {
        m.name = d.value("name", path.stem().string());
        const auto& g = d.at("grid");
        m.nx = g.at("nx").get<std::size_t>();
        m.ny = g.at("ny").get<std::size_t>();
        m.dx = g.at("dx").get<double>();
        m.dy = g.at("dy").get<double>();
        m.dz = g.at("dz").get<double>();
        m.porosity = cell_array(d.at("porosity"), m.cells(), 1.0, "porosity");
        m.permeability = cell_array(d.at("permeability_md"), m.cells(), kMilliDarcy, "permeability_md");
        m.initial_sw = cell_array(d.value("initial_sw", json(0.1)), m.cells(), 1.0, "initial_sw");
        m.initial_pressure = d.value("initial_pressure_bar", 200.0);
        if (d.contains("fluid")) {
            const auto& f = d["fluid"];
            m.mu_water = f.value("mu_water_cp", 0.5) * kCentiPoise;
            m.mu_oil = f.value("mu_oil_cp", 5.0) * kCentiPoise;
            if (f.contains("relperm")) {
                const auto& r = f["relperm"];
                m.relperm.n_water = r.value("n_water", m.relperm.n_water);
                m.relperm.n_oil = r.value("n_oil", m.relperm.n_oil);
                m.relperm.swr = r.value("swr", m.relperm.swr);
                m.relperm.sor = r.value("sor", m.relperm.sor);
                m.relperm.krw_max = r.value("krw_max", m.relperm.krw_max);
                m.relperm.kro_max = r.value("kro_max", m.relperm.kro_max);
            }
        }
        if (d.contains("polymer")) {
            const auto& p = d["polymer"];
            auto& q = m.polymer;
            q.mixing_omega = p.value("mixing_omega", q.mixing_omega);
            q.max_adsorption = p.value("max_adsorption", q.max_adsorption);
            q.rock_density = p.value("rock_density", q.rock_density);
            q.dead_pore_space = p.value("dead_pore_space", q.dead_pore_space);
            q.rrf = p.value("rrf", q.rrf);
            q.viscosity_factor = p.value("viscosity_factor", q.viscosity_factor);
            q.adsorption_saturation_concentration =
                p.value("adsorption_saturation_concentration", q.adsorption_saturation_concentration);
        }
        const auto& sch = d.at("schedule");
        if (sch.contains("step_days") && sch["step_days"].is_array()) {
            m.step_days = sch["step_days"].get<std::vector<double>>();
        } else {
            m.step_days.assign(sch.at("steps").get<std::size_t>(), sch.at("step_days").get<double>());
        }
        for (const auto& w : d.at("wells")) {
            WellSpec s;
            s.name = w.at("name").get<std::string>();
            const std::string kind = w.at("kind").get<std::string>();
            if (kind == "injector") {
                s.kind = WellKind::injector;
            } else if (kind == "producer") {
                s.kind = WellKind::producer;
            } else {
                throw StructuralError("unknown well kind '" + kind + "'");
            }
            const auto cell = w.at("cell").get<std::vector<std::size_t>>();
            if (cell.size() != 2) throw StructuralError("well cell must be [ix, iy]");
            s.ix = cell[0];
            s.iy = cell[1];
            s.bhp_limit = w.value("bhp_limit_bar", 0.0);
            s.radius = w.value("radius_m", 0.1);
            s.rate_min = w.value("rate_min", 0.0);
            s.rate_max = w.at("rate_max").get<double>();
            if (s.kind == WellKind::injector) {
                s.concentration_min = w.value("concentration_min", 0.0);
                s.concentration_max = w.at("concentration_max").get<double>();
            }
            m.wells.push_back(s);
        }
        if (d.contains("economics")) {
            const auto& e = d["economics"];
            auto& c = m.econ;
            c.r_op = e.value("r_op", c.r_op);
            c.r_gp = e.value("r_gp", c.r_gp);
            c.r_wi = e.value("r_wi", c.r_wi);
            c.r_wp = e.value("r_wp", c.r_wp);
            c.r_pi = e.value("r_pi", c.r_pi);
            c.r_pp = e.value("r_pp", c.r_pp);
            c.d_tau = e.value("d_tau", c.d_tau);
            c.tau = e.value("tau_days", c.tau);
        }
        if (d.contains("numerics")) {
            const auto& x = d["numerics"];
            m.numerics.pressure_updates_per_step = x.value("pressure_updates_per_step", m.numerics.pressure_updates_per_step);
            m.numerics.cfl = x.value("cfl", m.numerics.cfl);
            m.numerics.max_substeps = x.value("max_substeps", m.numerics.max_substeps);
        }
    } catch (const json::exception& e) {
        throw StructuralError(path.string() + ": " + e.what());
    }
    m.validate();
    return m;
}

void save_deck(const ReservoirModel& m, const std::filesystem::path& path) {
    json wells = json::array();
    for (const auto& w : m.wells) {
        json j = {{"name", w.name},           {"kind", to_string(w.kind)}, {"cell", {w.ix, w.iy}},
                  {"bhp_limit_bar", w.bhp_limit}, {"radius_m", w.radius},   {"rate_min", w.rate_min},
                  {"rate_max", w.rate_max}};
        if (w.kind == WellKind::injector) {
            j["concentration_min"] = w.concentration_min;
            j["concentration_max"] = w.concentration_max;
        }
        wells.push_back(j);
    }
    const auto& p = m.polymer;
    const auto& r = m.relperm;
    const auto& e = m.econ;
    json d = {
        {"name", m.name},
        {"grid", {{"nx", m.nx}, {"ny", m.ny}, {"dx", m.dx}, {"dy", m.dy}, {"dz", m.dz}}},
        {"porosity", array_or_scalar(m.porosity, 1.0)},
        {"permeability_md", array_or_scalar(m.permeability, kMilliDarcy)},
        {"initial_sw", array_or_scalar(m.initial_sw, 1.0)},
        {"initial_pressure_bar", m.initial_pressure},
        {"fluid",
         {{"mu_water_cp", m.mu_water / kCentiPoise},
          {"mu_oil_cp", m.mu_oil / kCentiPoise},
          {"relperm",
           {{"n_water", r.n_water}, {"n_oil", r.n_oil}, {"swr", r.swr}, {"sor", r.sor}, {"krw_max", r.krw_max},
            {"kro_max", r.kro_max}}}}},
        {"polymer",
         {{"mixing_omega", p.mixing_omega},
          {"max_adsorption", p.max_adsorption},
          {"rock_density", p.rock_density},
          {"dead_pore_space", p.dead_pore_space},
          {"rrf", p.rrf},
          {"viscosity_factor", p.viscosity_factor},
          {"adsorption_saturation_concentration", p.adsorption_saturation_concentration}}},
        {"schedule", {{"step_days", m.step_days}}},
        {"wells", wells},
        {"economics",
         {{"r_op", e.r_op}, {"r_gp", e.r_gp}, {"r_wi", e.r_wi}, {"r_wp", e.r_wp}, {"r_pi", e.r_pi}, {"r_pp", e.r_pp},
          {"d_tau", e.d_tau}, {"tau_days", e.tau}}},
        {"numerics",
         {{"pressure_updates_per_step", m.numerics.pressure_updates_per_step},
          {"cfl", m.numerics.cfl},
          {"max_substeps", m.numerics.max_substeps}}},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write deck " + path.string());
    out << d.dump(1) << '\n';
}

void write_results_table(std::ostream& out, const SimulationResult& r, const EconParams& econ) {
    const auto [value, j] = npv(r, econ);
    out << "# time_days Q_OP Q_WP Q_WI Q_PI Q_PP J_i\n";
    for (Eigen::Index i = 0; i < r.times_days.size(); ++i) {
        out << fmt::format("{:.10g} {:.10g} {:.10g} {:.10g} {:.10g} {:.10g} {:.10g}\n", r.times_days[i], r.q_op[i],
                           r.q_wp[i], r.q_wi[i], r.q_pi[i], r.q_pp[i], j[i]);
    }
    out << fmt::format("# J {:.17g}\n", value);
}

}  // namespace amlopt
