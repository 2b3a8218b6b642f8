// ---------------------------------------------------------------------------
// ode_grid.hpp
//
// Fixed-step ODE support used by every solver in the suite.
//
// Storage convention ("dense half grid"): a path solved with step dt on [0,T],
// n = T/dt intervals, is stored at the 2n+1 points
//
//     t_j = j * dt/2,   j = 0..2n,
//
// i.e. at every step node AND every step midpoint. The reason is structural:
// classical RK4 with step dt needs coefficient values at (t, t+dt/2, t+dt).
// When a solved path later appears as a time-varying coefficient inside
// another ODE integrated with the same step, all RK4 stage times land exactly
// on stored points — no interpolation inside the integration loop, and no
// cascade of grid refinements.
//
// Midpoint values are produced by cubic Hermite dense output from the step
// endpoints (value + derivative known exactly from the ODE right-hand side).
// The local Hermite error is O(dt^4), the same order as the RK4 global error,
// so consuming a stored path as a coefficient does not degrade the order of
// downstream solves.
//
// All integrators are classical fixed-step RK4. The equations in this project
// are smooth scalar/small-system ODEs on a short horizon; adaptivity would add
// machinery without accuracy the acceptance tolerances need.
// ---------------------------------------------------------------------------
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace glq {

// Uniform step grid on [0,T] with dense (half-step) storage.
class TimeGrid {
public:
    TimeGrid(double horizon, int intervals) : horizon_(horizon), intervals_(intervals) {
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (intervals < 1) throw std::invalid_argument("TimeGrid: need at least one interval");
    }

    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] int intervals() const noexcept { return intervals_; }
    [[nodiscard]] double dt() const noexcept { return horizon_ / intervals_; }

    // Number of stored samples (nodes + midpoints).
    [[nodiscard]] int samples() const noexcept { return 2 * intervals_ + 1; }

    // Time of dense-sample j (j = 0..2n).
    [[nodiscard]] double time_at(int dense_index) const { return 0.5 * dt() * dense_index; }

    // Dense index of step node i (i = 0..n).
    [[nodiscard]] static int node(int step_index) noexcept { return 2 * step_index; }
    // Dense index of the midpoint of step i (between nodes i and i+1).
    [[nodiscard]] static int midpoint(int step_index) noexcept { return 2 * step_index + 1; }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
        return a.horizon_ == b.horizon_ && a.intervals_ == b.intervals_;
    }

private:
    double horizon_;
    int intervals_;
};

// A scalar path on a TimeGrid, stored densely (2n+1 samples).
struct ScalarPath {
    TimeGrid grid;
    std::vector<double> values;  // size grid.samples()

    explicit ScalarPath(const TimeGrid& g) : grid(g), values(g.samples(), 0.0) {}

    [[nodiscard]] double at_dense(int j) const { return values[static_cast<std::size_t>(j)]; }
    [[nodiscard]] double at_node(int i) const { return values[static_cast<std::size_t>(TimeGrid::node(i))]; }
    [[nodiscard]] double front() const { return values.front(); }
    [[nodiscard]] double back() const { return values.back(); }

    // Linear interpolation at an arbitrary time (clamped to [0,T]); used only
    // at API boundaries, never inside integration loops.
    [[nodiscard]] double at_time(double t) const {
        const double h = 0.5 * grid.dt();
        double u = t / h;
        if (u <= 0.0) return values.front();
        const auto last = static_cast<double>(values.size() - 1);
        if (u >= last) return values.back();
        const auto j = static_cast<std::size_t>(u);
        const double frac = u - static_cast<double>(j);
        return (1.0 - frac) * values[j] + frac * values[j + 1];
    }
};

// Cubic Hermite midpoint value from step-endpoint values and derivatives.
inline double hermite_midpoint(double y0, double f0, double y1, double f1, double dt) {
    return 0.5 * (y0 + y1) + 0.125 * dt * (f0 - f1);
}

// Integrate dy/dt = f(t, y) forward from y(0) = y0 over the grid, storing
// dense output. `f` must be callable as f(double t, double y) -> double and is
// only evaluated at grid nodes and midpoints.
template <class Rhs>
ScalarPath rk4_forward(const TimeGrid& grid, double y0, Rhs&& f) {
    ScalarPath path(grid);
    const double dt = grid.dt();
    double y = y0;
    path.values[0] = y;
    for (int i = 0; i < grid.intervals(); ++i) {
        const double t = grid.time_at(TimeGrid::node(i));
        const double tm = t + 0.5 * dt;
        const double k1 = f(t, y);
        const double k2 = f(tm, y + 0.5 * dt * k1);
        const double k3 = f(tm, y + 0.5 * dt * k2);
        const double k4 = f(t + dt, y + dt * k3);
        const double y_next = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double f_next = f(t + dt, y_next);
        path.values[static_cast<std::size_t>(TimeGrid::midpoint(i))] =
            hermite_midpoint(y, k1, y_next, f_next, dt);
        path.values[static_cast<std::size_t>(TimeGrid::node(i + 1))] = y_next;
        y = y_next;
    }
    return path;
}

// Integrate a terminal-value problem dy/dt = f(t, y), y(T) = yT, backward over
// the grid, storing dense output in forward-time order. Returns true on
// success; returns false (leaving the remaining entries at the escape value)
// if |y| exceeds `cap` — the caller decides whether that is an error. The
// escape time (first time, moving backward, at which the cap was crossed) is
// written to *escape_time.
template <class Rhs>
bool rk4_backward(const TimeGrid& grid, double yT, Rhs&& f, ScalarPath& out, double cap,
                  double* escape_time) {
    const double dt = grid.dt();
    double y = yT;
    out.values[static_cast<std::size_t>(TimeGrid::node(grid.intervals()))] = y;
    for (int i = grid.intervals() - 1; i >= 0; --i) {
        const double t1 = grid.time_at(TimeGrid::node(i + 1));
        const double tm = t1 - 0.5 * dt;
        const double t0 = grid.time_at(TimeGrid::node(i));
        const double k1 = f(t1, y);
        const double k2 = f(tm, y - 0.5 * dt * k1);
        const double k3 = f(tm, y - 0.5 * dt * k2);
        const double k4 = f(t0, y - dt * k3);
        const double y_prev = y - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(y_prev) || std::abs(y_prev) > cap) {
            if (escape_time != nullptr) *escape_time = t0;
            return false;
        }
        const double f_prev = f(t0, y_prev);
        // Hermite fill over [t0, t1]: left end (y_prev, f_prev), right (y, k1).
        out.values[static_cast<std::size_t>(TimeGrid::midpoint(i))] =
            hermite_midpoint(y_prev, f_prev, y, k1, dt);
        out.values[static_cast<std::size_t>(TimeGrid::node(i))] = y_prev;
        y = y_prev;
    }
    return true;
}

// Composite Simpson quadrature of a densely stored integrand over [0,T].
// Exact for cubics on each step; O(dt^4) overall, matching RK4.
inline double simpson_dense(const TimeGrid& grid, const std::vector<double>& dense_values) {
    if (dense_values.size() != static_cast<std::size_t>(grid.samples()))
        throw std::invalid_argument("simpson_dense: value count does not match grid");
    const double dt = grid.dt();
    double acc = 0.0;
    for (int i = 0; i < grid.intervals(); ++i) {
        acc += dense_values[static_cast<std::size_t>(TimeGrid::node(i))] +
               4.0 * dense_values[static_cast<std::size_t>(TimeGrid::midpoint(i))] +
               dense_values[static_cast<std::size_t>(TimeGrid::node(i + 1))];
    }
    return acc * dt / 6.0;
}

}  // namespace glq
