#!/usr/bin/env python3
"""Benchmark the numba-jitted kernels against the pure-numpy fallback.

The dispatch in mimosg._kernels picks numba when it imports (and the
environment variable MIMOSG_NO_NUMBA is unset); this script times both
implementations directly on identical realization arrays and checks they
agree. Run:

    python bench/benchmark_kernels.py [--trials 200]
"""
import argparse
import time

import numpy as np

from mimosg import _kernels
from mimosg.geometry import build_network
from mimosg.montecarlo import McConfig, _flatten_users, run_trial
from mimosg.params import default_params, derived_constants


def time_fn(fn, *args, repeat=50):
    fn(*args)  # warm-up (jit compilation for the numba path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        out = fn(*args)
    return (time.perf_counter() - t0) / repeat, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--trials", type=int, default=200,
                    help="trials for the end-to-end comparison")
    args = ap.parse_args()

    print(f"numba available: {_kernels.HAVE_NUMBA}, "
          f"active: {_kernels.USE_NUMBA}")
    p = default_params("async", m=64, eps=0.5)
    rng = np.random.default_rng(1)
    net = build_network(p, 4.0, rng)
    _, user_cell, pilot_slot, pos, d_serv = _flatten_users(net)
    d_bu = _kernels.pairwise_dist(net.bs, pos)
    d_bb = _kernels.pairwise_dist(net.bs, net.bs)
    valid = net.valid.astype(np.uint8)

    dargs = (d_serv, user_cell, pilot_slot, d_bu, d_bb, valid, 0, p.alpha,
             p.eps, float(p.n_p), p.n_u, p.n_d, float(p.n_tot), p.p_d, p.p_u,
             p.omega, p.sigma2, p.k)
    rows = [("kernel", "numpy ms", "numba ms", "speedup")]

    t_np, ref = time_fn(_kernels._deltas_np, *dargs, repeat=args.repeat)
    if _kernels.HAVE_NUMBA:
        t_nb, got = time_fn(_kernels._deltas_nb, *dargs, repeat=args.repeat)
        assert np.allclose(ref, got, rtol=1e-12)
    else:
        t_nb = float("nan")
    rows.append(("all_deltas", t_np * 1e3, t_nb * 1e3, t_np / t_nb))

    deltas = ref
    tag = np.arange(min(50, d_serv.size))
    phases = np.random.default_rng(2).integers(
        0, 3, size=(tag.size, net.n_bs)).astype(np.int8)
    inv_dp = np.zeros((net.n_bs, p.k))
    inv_dp[user_cell, pilot_slot] = 1.0 / deltas
    inv_ds = inv_dp.sum(axis=1)
    d_uu = _kernels.pairwise_dist(pos, pos[tag])
    dc = derived_constants(p.m, 1)
    sargs = (d_serv[tag], tag, user_cell[tag], pilot_slot, d_serv, user_cell,
             d_bu, d_bb, d_uu, deltas, inv_ds, inv_dp, valid, phases, 0,
             p.alpha, p.eps, float(p.n_p), p.n_u, p.n_d, float(p.n_tot),
             dc.c_m_sq, dc.v_m, float(p.m), p.p_d, p.p_u, p.omega, p.sigma2)

    t_np, ref = time_fn(_kernels._sinr_batch_np, *sargs, repeat=args.repeat)
    if _kernels.HAVE_NUMBA:
        t_nb, got = time_fn(_kernels._sinr_batch_nb, *sargs, repeat=args.repeat)
        for a, b in zip(ref, got):
            assert np.allclose(a, b, rtol=1e-12)
    else:
        t_nb = float("nan")
    rows.append(("sinr_batch", t_np * 1e3, t_nb * 1e3, t_np / t_nb))

    pts = np.random.default_rng(3).random((2000, 2)) * 4.0
    t_np, ref = time_fn(_kernels._nearest_bs_np, pts, net.bs,
                        repeat=args.repeat)
    if _kernels.HAVE_NUMBA:
        t_nb, got = time_fn(_kernels._nearest_bs_nb, pts, net.bs,
                            repeat=args.repeat)
        assert np.array_equal(ref[0], got[0])
    else:
        t_nb = float("nan")
    rows.append(("nearest_bs", t_np * 1e3, t_nb * 1e3, t_np / t_nb))

    print(f"{rows[0][0]:<12} {rows[0][1]:>10} {rows[0][2]:>10} {rows[0][3]:>8}")
    for name, a, b, s in rows[1:]:
        print(f"{name:<12} {a:>10.3f} {b:>10.3f} {s:>8.2f}x")

    # end-to-end trial throughput under the active dispatch
    cfg = McConfig(trials=args.trials, seed=5,
                   thresholds=tuple(10.0 ** (np.arange(-10, 21, 1.0) / 10.0)))
    run_trial(p, cfg, 0)  # warm-up
    t0 = time.perf_counter()
    for i in range(args.trials):
        run_trial(p, cfg, i)
    dt = (time.perf_counter() - t0) / args.trials
    print(f"\nend-to-end trial ({'numba' if _kernels.USE_NUMBA else 'numpy'}"
          f" path): {dt * 1e3:.2f} ms/trial")


if __name__ == "__main__":
    main()
