"""
Solver orders and repeated-step error
=====================================

For one Gaussian per branch the guided ODE is affine in x and can be solved
to machine precision with quadrature. The local error of a single step then
shows the solver's order, and chaining m steps shows the error growing
linearly in m.
"""
import numpy as np
from scipy.integrate import quad

from thg import Solver, make_flow_schedule, single_gaussian_model, step_full

flow = make_flow_schedule()
omega, t0, x0 = 3.5, 0.6, np.array([0.4])


def exact(mode_model, t1):
    # dx/dt = a(t) x + b(t), sampled from the model itself at x = 0 and x = 1
    f = lambda t, x: float(mode_model.predict(np.array([x]), t, flow).cond[0])
    guided = lambda t, x: omega * f(t, x) - (omega - 1) * float(mode_model.uncond(np.array([x]), t, flow)[0])
    b = lambda t: guided(t, 0.0)
    a = lambda t: guided(t, 1.0) - b(t)
    A = lambda s: quad(a, t0, s, epsabs=1e-14)[0]
    A1 = A(t1)
    return np.exp(A1) * x0[0] + quad(lambda s: np.exp(A1 - A(s)) * b(s), t0, t1, epsabs=1e-14)[0]


model = single_gaussian_model("velocity", dim=1)
steps = 2.0 ** -np.arange(3, 9)
for kind in ("euler", "midpoint2"):
    solver = Solver(kind, "velocity")
    errs = [abs(step_full(solver, model, x0, omega, t0, t0 - dt, flow)[0][0] - exact(model, t0 - dt)) for dt in steps]
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    print(f"{kind:10s} local error slope {slope:.3f} (order {solver.order})")

# m Euler steps of size 1/64 against one
dt = 1 / 64
euler = Solver("euler", "velocity")
single = abs(step_full(euler, model, x0, omega, t0, t0 - dt, flow)[0][0] - exact(model, t0 - dt))
for m in (2, 4, 8):
    x, t = x0, t0
    for _ in range(m):
        x, _ = step_full(euler, model, x, omega, t, t - dt, flow)
        t -= dt
    print(f"m={m}: accumulated / single = {abs(x[0] - exact(model, t)) / single:.3f}")
