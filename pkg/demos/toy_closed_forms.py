"""
Dead time and strong convergence on a scalar system
===================================================

x' = -x + beta with boundary value beta(t) = u(t - 1).  Everything has a
closed form here, which makes it the place to see the scheme's error.
"""

import numpy as np

from delaylift import SystemSpec, brownian_path, make_system, simulate_mild
from delaylift.sde import mild_steps

# a unit step switched on at t=0 only reaches the state at t=1
ls = make_system(SystemSpec("toy", sigma=0.0, delay={"kind": "dirac", "theta": -1.0}))
k = 3 * ls.m
phi = np.zeros(ls.m + 1)
phi[-1] = 1.0
traj = simulate_mild(ls, 0.0, phi, np.ones(k + 1), brownian_path(k, ls.dt, 0))
exact = np.where(traj.times > 1, 1 - np.exp(-(traj.times - 1)), 0.0)
print("dead-time error:", np.abs(traj.outputs[:, 0] - exact).max())

# geometric noise: dX = -X dt + 0.3 X dW has X(1) = exp(-1.045 + 0.3 W(1))
sigma, n_paths, m_fine = 0.3, 1000, 256
fine = make_system(SystemSpec("toy", m=m_fine, sigma=sigma))
paths = [brownian_path(m_fine, fine.dt, seed=3, path_index=p) for p in range(n_paths)]
x_end = np.exp(-1 - sigma**2 / 2 + sigma * np.array([p.W[-1] for p in paths]))

dts, errs = [], []
for factor in (16, 8, 4, 2, 1):
    sys_ = make_system(SystemSpec("toy", m=m_fine // factor, sigma=sigma))
    dw = np.stack([p.coarsen(factor).increments if factor > 1 else p.increments for p in paths], axis=1)
    zeros = np.zeros((sys_.m + 1, 1))
    # all paths advance together as one batch
    for _, x, _ in mild_steps(sys_, np.ones((1, n_paths)), zeros, zeros, dw):
        pass
    dts.append(sys_.dt)
    errs.append(np.mean(np.abs(x[0] - x_end)))
    print(f"dt={sys_.dt:.5f}  E|error|={errs[-1]:.2e}")

print("strong order:", np.polyfit(np.log(dts), np.log(errs), 1)[0])
