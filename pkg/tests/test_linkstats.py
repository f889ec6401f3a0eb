import numpy as np
import pytest

from mimosg import _kernels
from mimosg.errors import DomainError, NumericalError
from mimosg.geometry import NetworkRealization, build_network, extract_bundle
from mimosg.linkstats import (PHASE_DOWNLINK, PHASE_PILOT, PHASE_UPLINK,
                              DeltaSet, PhaseIndicators, compute_delta, delta1,
                              draw_phases, inverse_sinr, isolated_cell_sinr,
                              lmmse_variances, path_loss, pilot_matrix,
                              uplink_power)
from mimosg.montecarlo import _flatten_users
from mimosg.params import default_params, derived_constants


def make_isolated(params, seed=5, window=4.0):
    """Single-station network with all users in the central region."""
    rng = np.random.default_rng(seed)
    bs = np.array([[window / 2, window / 2]])
    r = params.r0 + 0.3 * rng.random((1, params.k))
    ang = 2.0 * np.pi * rng.random((1, params.k))
    users = bs[:, None, :] + np.stack([r * np.cos(ang), r * np.sin(ang)], -1)
    return NetworkRealization(bs=bs, users=users, serving=r,
                              valid=np.array([True]), window=window)


def deltas_for(net, params):
    _, user_cell, pilot_slot, pos, d_serv = _flatten_users(net)
    d_bu = _kernels.pairwise_dist(net.bs, pos)
    d_bb = _kernels.pairwise_dist(net.bs, net.bs)
    flat = _kernels.all_deltas(
        d_serv, user_cell, pilot_slot, d_bu, d_bb, net.valid, params.sync,
        params.alpha, params.eps, params.n_p, params.n_u, params.n_d,
        params.n_tot, params.p_d, params.p_u, params.omega, params.sigma2,
        params.k)
    table = np.full((net.n_bs, params.k), np.nan)
    table[user_cell, pilot_slot] = flat
    return table


def delta_set_for(bundle, table):
    return DeltaSet(tagged=table[bundle.cell_index, bundle.pilot_index],
                    same_cell=table[bundle.cell_index],
                    other=table[bundle.other_cells])


class TestPathLoss:
    def test_reference_distance(self):
        assert path_loss(1.0, 1e-13, 4.0) == pytest.approx(1e-13)

    def test_exponent(self):
        assert path_loss(2.0, 1e-13, 4.0) == pytest.approx(1e-13 / 16.0)

    def test_zero_distance(self):
        with pytest.raises(DomainError):
            path_loss(0.0, 1e-13, 4.0)


class TestUplinkPower:
    def test_no_control(self):
        assert uplink_power(1e-9, 0.2, 0.0) == pytest.approx(0.2)

    def test_full_control_uncapped(self):
        p = uplink_power(1e-13, 0.19952623149688796, 1.0)
        assert p == pytest.approx(1.9952623149688796e12, rel=1e-12)

    def test_half_control(self):
        assert uplink_power(1e-8, 0.2, 0.5) == pytest.approx(0.2e4)

    def test_eps_domain(self):
        with pytest.raises(DomainError):
            uplink_power(1e-9, 0.2, 1.2)


class TestPilotMatrix:
    def test_orthogonality(self):
        phi = pilot_matrix(10)
        gram = phi.conj().T @ phi
        np.testing.assert_allclose(gram, 10.0 * np.eye(10), atol=1e-9)

    def test_unit_magnitude(self):
        assert np.allclose(np.abs(pilot_matrix(7)), 1.0)


class TestDrawPhases:
    def test_sync_degenerate(self, params_sync, rng):
        ph = draw_phases(params_sync, 12, rng)
        assert np.all(ph.phase == PHASE_DOWNLINK)
        assert not ph.chi_pilot_or_uplink.any()

    def test_async_frequencies(self, params_async, rng):
        n = 100_000
        ph = draw_phases(params_async, n, rng)
        for code, p_exp in [(PHASE_PILOT, 0.25), (PHASE_UPLINK, 0.25),
                            (PHASE_DOWNLINK, 0.5)]:
            freq = np.mean(ph.phase == code)
            sigma = np.sqrt(p_exp * (1 - p_exp) / n)
            assert abs(freq - p_exp) < 3.0 * sigma

    def test_seed_determinism(self, params_async):
        a = draw_phases(params_async, 50, np.random.default_rng(8)).phase
        b = draw_phases(params_async, 50, np.random.default_rng(8)).phase
        np.testing.assert_array_equal(a, b)

    def test_indicator_views(self, params_async, rng):
        ph = draw_phases(params_async, 1000, rng)
        np.testing.assert_array_equal(ph.chi_dd | ph.chi_pilot_or_uplink,
                                      np.ones(1000, dtype=bool))


class TestDelta:
    def test_isolated_closed_form(self):
        p = default_params("async", eps=0.5)
        net = make_isolated(p)
        b = extract_bundle(net, 0, 2, margin=1.0)
        expected = (p.p_u * p.omega ** 0.5 * b.x ** (-p.alpha * 0.5)
                    + p.sigma2 / p.n_p)
        assert compute_delta(b, p) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("mode", ["async", "sync"])
    def test_brute_force_oracle(self, mode, rng):
        p = default_params(mode, eps=0.5)
        net = build_network(p, 4.0, rng)
        cell = int(net.central_cells(1.0)[0])
        b = extract_bundle(net, cell, 4, margin=1.0)
        val = compute_delta(b, p)

        # naive term-by-term accumulation, scalar loops
        acc = p.p_u * (p.omega * b.x ** -p.alpha) ** (1 - p.eps) * b.x ** 0
        acc = uplink_power(path_loss(b.x, p.omega, p.alpha), p.p_u, p.eps) \
            * path_loss(b.x, p.omega, p.alpha)
        for row in range(b.n_other):
            for k in range(p.k):
                if mode == "sync" and k != b.pilot_index:
                    continue
                pw = uplink_power(path_loss(b.cross_serving[row, k], p.omega,
                                            p.alpha), p.p_u, p.eps)
                beta = path_loss(b.cross_to_desired_bs[row, k], p.omega, p.alpha)
                if mode == "sync":
                    acc += pw * beta
                else:
                    acc += (p.n_p + p.n_u) / p.n_tot ** 2 * pw * beta
        if mode == "async":
            for row in range(b.n_other):
                acc += (p.p_d * p.n_p * p.n_d / p.n_tot ** 2
                        * path_loss(b.bs_to_bs[row], p.omega, p.alpha))
        acc += p.sigma2 / p.n_p
        assert val == pytest.approx(acc, rel=1e-12)

    def test_kernel_matches_bundle(self, rng):
        for mode in ("async", "sync"):
            p = default_params(mode, eps=0.5)
            net = build_network(p, 4.0, rng)
            table = deltas_for(net, p)
            for cell in net.central_cells(1.0)[:2]:
                for k in (0, 7):
                    b = extract_bundle(net, int(cell), k, margin=1.0)
                    assert compute_delta(b, p) == pytest.approx(
                        table[cell, k], rel=1e-12)

    def test_delta_floor(self, rng):
        p = default_params("async", eps=0.0)
        net = build_network(p, 4.0, rng)
        cell = int(net.central_cells(1.0)[0])
        b = extract_bundle(net, cell, 0, margin=1.0)
        floor = (uplink_power(path_loss(b.x, p.omega, p.alpha), p.p_u, p.eps)
                 * path_loss(b.x, p.omega, p.alpha) + p.sigma2 / p.n_p)
        assert compute_delta(b, p) >= floor


class TestDelta1:
    def test_isolated_noise_free_is_zero(self):
        p = default_params("async", eps=0.5, sigma2=0.0)
        net = make_isolated(p)
        b = extract_bundle(net, 0, 0, margin=1.0)
        assert delta1(compute_delta(b, p), b.x, p) == pytest.approx(0.0, abs=1e-9)

    def test_definitional_arithmetic(self, params_async, rng):
        p = params_async
        net = build_network(p, 4.0, rng)
        b = extract_bundle(net, int(net.central_cells(1.0)[0]), 1, margin=1.0)
        d = compute_delta(b, p)
        expected = d / (p.p_u * p.omega ** (1 - p.eps)) - b.x ** (-p.alpha)
        assert delta1(d, b.x, p) == pytest.approx(expected, rel=1e-12)

    def test_full_control_collapses_omega(self):
        p = default_params("async", eps=1.0)
        assert delta1(3.0, 0.4, p) == pytest.approx(3.0 / p.p_u - 1.0)


class TestLmmse:
    def test_perfect_estimation_limit(self):
        p = default_params("async", eps=0.0, sigma2=0.0)
        net = make_isolated(p)
        b = extract_bundle(net, 0, 0, margin=1.0)
        same = np.array([compute_delta(extract_bundle(net, 0, k, 1.0), p)
                         for k in range(p.k)])
        st = lmmse_variances(b, same, p)
        beta = path_loss(b.x, p.omega, p.alpha)
        assert st.est_var_own == pytest.approx(beta, rel=1e-12)
        assert st.err_var_own == pytest.approx(0.0, abs=1e-25)

    @pytest.mark.parametrize("mode", ["async", "sync"])
    def test_case_formulas(self, mode, rng):
        p = default_params(mode, eps=0.5)
        net = build_network(p, 4.0, rng)
        b = extract_bundle(net, int(net.central_cells(1.0)[0]), 2, margin=1.0)
        table = deltas_for(net, p)
        same = table[b.cell_index]
        st = lmmse_variances(b, same, p)
        row, k = 1, 4
        beta = path_loss(b.cross_to_desired_bs[row, k], p.omega, p.alpha)
        pw = uplink_power(path_loss(b.cross_serving[row, k], p.omega, p.alpha),
                          p.p_u, p.eps)
        if mode == "sync":
            expected = pw * beta ** 2 / same[k]
        else:
            expected = ((p.n_p + p.n_u) / p.n_tot ** 2 * pw * beta ** 2
                        * np.sum(1.0 / same))
        assert st.est_var[row, k] == pytest.approx(expected, rel=1e-12)
        np.testing.assert_allclose(st.est_var + st.err_var,
                                   path_loss(b.cross_to_desired_bs, p.omega,
                                             p.alpha), rtol=1e-12)
        assert np.all(st.err_var >= 0.0)
        assert st.f_var == pytest.approx(20.0 / 1600.0)
        assert st.g_var == pytest.approx(20.0 / 1600.0)

    def test_inconsistent_deltas_rejected(self, params_async, rng):
        net = build_network(params_async, 4.0, rng)
        b = extract_bundle(net, int(net.central_cells(1.0)[0]), 0, margin=1.0)
        bogus = np.full(params_async.k, 1e-40)  # far below the own-pilot floor
        with pytest.raises(NumericalError):
            lmmse_variances(b, bogus, params_async)


class TestInverseSinr:
    def test_isolated_noise_free_closed_form(self):
        p = default_params("async", m=64, eps=0.5, sigma2=0.0)
        net = make_isolated(p)
        b = extract_bundle(net, 0, 0, margin=1.0)
        table = deltas_for(net, p)
        inv = inverse_sinr(b, PhaseIndicators(np.zeros(0, np.int8)),
                           delta_set_for(b, table), p)
        assert inv.gamma2 == 0.0 and inv.gamma3 == 0.0
        assert inv.sinr == pytest.approx(6.8923101238510452, rel=1e-9)
        assert inv.sinr == pytest.approx(isolated_cell_sinr(64, 10), rel=1e-12)

    def test_sync_gamma3_zero(self, rng):
        p = default_params("sync", eps=0.5)
        net = build_network(p, 4.0, rng)
        b = extract_bundle(net, int(net.central_cells(1.0)[0]), 0, margin=1.0)
        table = deltas_for(net, p)
        ph = PhaseIndicators(np.full(b.n_other, PHASE_DOWNLINK, np.int8))
        inv = inverse_sinr(b, ph, delta_set_for(b, table), p)
        assert inv.gamma3 == 0.0
        assert inv.gamma1 > 0.0 and inv.gamma2 > 0.0

    @pytest.mark.parametrize("mode,eps", [("async", 0.0), ("async", 0.5),
                                          ("sync", 0.5)])
    def test_independent_rederivation(self, mode, eps, rng):
        """Naive scalar re-accumulation of every summand, in reversed order."""
        p = default_params(mode, m=64, eps=eps)
        net = build_network(p, 4.0, rng)
        b = extract_bundle(net, int(net.central_cells(1.0)[0]), 3, margin=1.0)
        table = deltas_for(net, p)
        dset = delta_set_for(b, table)
        rng2 = np.random.default_rng(17)
        ph = draw_phases(p, b.n_other, rng2)
        inv = inverse_sinr(b, ph, dset, p)

        dc = derived_constants(p.m, 1)
        c2 = dc.c_m_sq
        x = b.x
        g1 = (dc.v_m - 1.0) / c2 + p.n_p / c2
        g1 += p.sigma2 * x ** p.alpha / (p.p_d * p.omega * c2)
        g1 += (p.sigma2 * x ** (p.alpha * (1 - p.eps))
               / (p.p_u * c2 * p.omega ** (1 - p.eps)))
        g1 += (p.sigma2 ** 2 * x ** (p.alpha * (2 - p.eps))
               / (p.n_p * p.p_u * p.p_d * c2 * p.omega ** (2 - p.eps)))
        pref = (x ** (p.alpha * (1 - p.eps)) / c2) * (
            p.n_p + p.sigma2 * x ** p.alpha / (p.p_d * p.omega))
        cross = 0.0
        rows = list(range(b.n_other))[::-1]
        if mode == "sync":
            for r in rows:
                cross += (b.cross_serving[r, b.pilot_index] ** (p.alpha * p.eps)
                          * b.cross_to_desired_bs[r, b.pilot_index] ** -p.alpha)
            g1 += pref * cross
        else:
            for r in rows:
                for k in range(p.k)[::-1]:
                    cross += (b.cross_serving[r, k] ** (p.alpha * p.eps)
                              * b.cross_to_desired_bs[r, k] ** -p.alpha)
            bsbs = sum(b.bs_to_bs[r] ** -p.alpha for r in rows)
            g1 += pref * ((p.n_p + p.n_u) / p.n_tot ** 2 * cross
                          + p.p_d * p.n_p * p.n_d
                          / (p.p_u * p.omega ** -p.eps * p.n_tot ** 2) * bsbs)

        d1 = dset.tagged / (p.p_u * p.omega ** (1 - p.eps)) - x ** (-p.alpha * (1 - p.eps))
        amp = x ** p.alpha + x ** (p.alpha * (2 - p.eps)) * d1
        g2 = 0.0
        g3 = 0.0
        for r in rows:
            rj = b.bs_to_user[r]
            if mode == "sync":
                g2 += (p.n_p / c2) * amp * rj ** -p.alpha
                g2 += ((p.m - 1) / c2) * x ** (2 * p.alpha) \
                    * (dset.tagged / dset.other[r, b.pilot_index]) \
                    * rj ** (-2 * p.alpha)
            else:
                if ph.phase[r] == PHASE_DOWNLINK:
                    g2 += (p.n_p / c2) * amp * rj ** -p.alpha
                    ratio = sum(dset.tagged / dset.other[r, k]
                                for k in range(p.k))
                    g2 += ((p.m - 1) / c2) * x ** (2 * p.alpha) \
                        * (p.n_p + p.n_u) / p.n_tot ** 2 * ratio \
                        * rj ** (-2 * p.alpha)
                else:
                    for k in range(p.k):
                        g3 += (b.cross_serving[r, k] ** (p.alpha * p.eps)
                               * b.user_to_user[r, k] ** -p.alpha)
        g3 *= amp * p.p_u / (p.p_d * p.omega ** p.eps * c2)

        assert inv.gamma1 == pytest.approx(g1, rel=1e-10)
        assert inv.gamma2 == pytest.approx(g2, rel=1e-10)
        if mode == "async":
            assert inv.gamma3 == pytest.approx(g3, rel=1e-10)

    def test_monotone_in_interferers(self, rng):
        """Dropping the farthest interfering cell never raises the total."""
        p = default_params("async", eps=0.5)
        net = build_network(p, 4.0, rng)
        b = extract_bundle(net, int(net.central_cells(1.0)[0]), 0, margin=1.0)
        table = deltas_for(net, p)
        ph = draw_phases(p, b.n_other, np.random.default_rng(3))
        full = inverse_sinr(b, ph, delta_set_for(b, table), p)

        import dataclasses
        trimmed = dataclasses.replace(
            b, other_cells=b.other_cells[:-1], bs_to_user=b.bs_to_user[:-1],
            bs_to_bs=b.bs_to_bs[:-1], cross_serving=b.cross_serving[:-1],
            cross_to_desired_bs=b.cross_to_desired_bs[:-1],
            user_to_user=b.user_to_user[:-1])
        ph_t = PhaseIndicators(ph.phase[:-1])
        dset = delta_set_for(b, table)
        dset_t = DeltaSet(tagged=dset.tagged, same_cell=dset.same_cell,
                          other=dset.other[:-1])
        part = inverse_sinr(trimmed, ph_t, dset_t, p)
        assert part.total <= full.total + 1e-15

    def test_phase_mismatch_rejected(self, params_async, rng):
        net = build_network(params_async, 4.0, rng)
        b = extract_bundle(net, int(net.central_cells(1.0)[0]), 0, margin=1.0)
        table = deltas_for(net, params_async)
        with pytest.raises(DomainError):
            inverse_sinr(b, PhaseIndicators(np.zeros(b.n_other + 2, np.int8)),
                         delta_set_for(b, table), params_async)

    def test_power_scaling_of_noise_terms(self, rng):
        """With eps=0, scaling p_d and sigma2 together leaves every noise-
        over-p_d term invariant; realized SINR changes only through the
        uplink-power terms held fixed here."""
        p0 = default_params("async", eps=0.0)
        net = build_network(p0, 4.0, rng)
        b = extract_bundle(net, int(net.central_cells(1.0)[0]), 0, margin=1.0)
        ph = draw_phases(p0, b.n_other, np.random.default_rng(1))
        scale = 7.0
        p1 = p0.with_updates(p_d=p0.p_d * scale, sigma2=p0.sigma2 * scale,
                             p_u=p0.p_u * scale)
        t0 = deltas_for(net, p0) * scale  # deltas are linear in power at eps=0
        t1 = deltas_for(net, p1)
        np.testing.assert_allclose(t0[~np.isnan(t0)], t1[~np.isnan(t1)],
                                   rtol=1e-12)
        inv0 = inverse_sinr(b, ph, delta_set_for(b, t0 / scale), p0)
        inv1 = inverse_sinr(b, ph, delta_set_for(b, t1), p1)
        assert inv0.total == pytest.approx(inv1.total, rel=1e-12)
