"""
Calibrating the coarse grid
===========================

A batch of guided trajectories is stepped once with a full step and once
with two half steps; the gap estimates each branch's error constant. Where
the guidance branch is accurate relative to the conditional branch it may
leap several fine steps, and a greedy walk turns the admissible leaps into
a coarse grid.
"""
import numpy as np

from thg import (
    build_coarse_grid, error_bound_profile_report, make_fine_grid, make_flow_schedule, make_solver,
    richardson_profile, two_mode_model,
)
from thg.harness import initial_states

flow = make_flow_schedule()
model = two_mode_model("velocity", dim=8)
fine = make_fine_grid(flow, 50)
batch = initial_states(flow, "velocity", 8, range(100))
profile = richardson_profile(model, flow, fine, 3.5, make_solver("euler"), batch)

print("  i     t   tortoise     hare   m_max")
for i, t, tm, _, hm, _, m in error_bound_profile_report(profile, rho=1.1, p=1)[::4]:
    print(f"{i:3d}  {t:4.2f}  {tm:.3e}  {hm:.3e}  {m:3d}")

for rho in (0.9, 1.0, 1.1, 1.2, 1.3):
    grid = build_coarse_grid(profile, rho, 1, fine=fine)
    nfe = fine.N + sum(i < 38 for i in grid.indices)
    print(f"rho={rho}: |C|={len(grid):2d}  nfe with i_hi=38: {nfe}")
print(build_coarse_grid(profile, 1.1, 1, fine=fine).indices)

# the CSV written by the command line tool
print(profile.to_csv(1.1, 1).splitlines()[:3])
