// ode.hpp — Dormand-Prince 5(4) with dense output for complex state vectors

#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsb/types.hpp"

namespace tsb::ode {

struct Options {
    double rtol{1e-8};
    double atol{1e-10};
    double h_init{0.0};  // 0 picks a starting step automatically
    double h_max{std::numeric_limits<double>::infinity()};
    long max_steps{50'000'000};
};

class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
    double time() const { return t_; }

private:
    double t_;
};

using Rhs = std::function<void(double t, const VecX& y, VecX& dydt)>;

/// Called at every output time with its index.
using Observer = std::function<void(std::size_t index, double t, const VecX& y)>;

/// Called after each accepted step; may rescale y in place and must then return true.
using StepHook = std::function<bool(double t, VecX& y)>;

struct Stats {
    long accepted{0};
    long rejected{0};
    long rhs_calls{0};
};

/// Integrate from t0 through the sorted output times (all >= t0).
/// y holds the state at the last output time on return.
Stats integrate(const Rhs& f, VecX& y, double t0, const std::vector<double>& t_out, const Options& opt,
                const Observer& observe, const StepHook& hook = {});

}  // namespace tsb::ode
