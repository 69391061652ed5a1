from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chisquare

from fsmdm.datagen import generate_network
from fsmdm.errors import DivergenceError, NotReadyError, PreconditionError
from fsmdm.model import Hyperparams, SensorNetwork, objective
from fsmdm.orchestrator import (GLOBAL, AsyncProfile, EventTrace, FleetState, StepPolicy,
                                build_schedule, execute_schedule, run, step_policy)

from conftest import requires_compiled

G = GLOBAL


class TestSchedules:
    def test_synchronous(self):
        ev = build_schedule(AsyncProfile(local_per_global=2), L=2, n_global=2)
        assert ev.tolist() == [0, 0, 1, 1, G, 0, 0, 1, 1, G]

    def test_fixed_ratio_pattern(self):
        ev = build_schedule(AsyncProfile("fixed-ratio", local_per_global=3), L=2, n_global=3)
        assert ev.tolist() == [0, 1, 0, 1, 0, 1, G] * 3

    def test_step_policy_replays_prefix(self):
        prof = AsyncProfile.with_slow_client(4, k_a=3, rng_seed=5)
        ev = build_schedule(prof, 4, 30)
        for cut in (0, 1, 7, len(ev) - 1):
            assert step_policy(prof, ev[:cut], 4) == ev[cut]
        bad = ev[:5].copy()
        bad[2] = (bad[2] + 1) % 4
        with pytest.raises(ValueError, match="diverges"):
            step_policy(prof, bad, 4)

    def test_iterator_matches_build(self):
        prof = AsyncProfile("heterogeneous", local_per_global=2, rng_seed=9)
        it = iter(StepPolicy(prof, 3))
        first = [next(it) for _ in range(40)]
        assert first == build_schedule(prof, 3, 40).tolist()[:40]

    @pytest.mark.parametrize("k_a", [2, 3, 7])
    def test_deadline_forcing(self, k_a):
        # a client that is never sampled steps exactly at its deadlines
        weights = (1.0, 1.0, 1e-300)
        prof = AsyncProfile("heterogeneous", client_speed_weights=weights, k_a=k_a, rng_seed=1)
        trace = EventTrace(build_schedule(prof, 3, 60), 3)
        gaps_with_2 = [g for g, evs in enumerate(trace.gaps()) if 2 in evs]
        assert gaps_with_2 == list(range(0, 60, k_a - 1))
        assert trace.fairness_violations(k_a) == []

    def test_k_a_one_forces_every_round(self):
        prof = AsyncProfile("heterogeneous", client_speed_weights=(1, 1e-300), k_a=1)
        trace = EventTrace(build_schedule(prof, 2, 20), 2)
        assert all(1 in g for g in trace.gaps())

    def test_uniform_sampling_chi2(self):
        L = 8
        prof = AsyncProfile("heterogeneous", k_a=10_000, rng_seed=3)
        ev = build_schedule(prof, L, 10_000 // L + 1)
        ev = ev[ev >= 0][:10_000]
        counts = np.bincount(ev, minlength=L)
        assert chisquare(counts).pvalue > 0.01

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            AsyncProfile("asap")
        with pytest.raises(ValueError):
            AsyncProfile(local_per_global=0)
        with pytest.raises(ValueError):
            AsyncProfile(client_speed_weights=(1.0, 0.0))
        with pytest.raises(ValueError):
            build_schedule(AsyncProfile("heterogeneous", client_speed_weights=(1.0,)), 2, 1)


class TestTrace:
    def test_indices_and_csv(self):
        tr = EventTrace([0, 1, G, 1, G], 2)
        assert tr.k_l.tolist() == [1, 1, -1, 2, -1]
        assert tr.k_w.tolist() == [0, 0, 1, 1, 2]
        assert tr.to_csv().splitlines() == [
            "event_type,client_id,k_l,k_w", "client,0,1,0", "client,1,1,0",
            "global,-1,-1,1", "client,1,2,1", "global,-1,-1,2"]

    def test_fairness_detector(self):
        tr = EventTrace([0, 1, G, 0, G, 0, G, 0, G], 2)
        assert tr.fairness_violations(3) == [(1, 1)]
        assert tr.fairness_violations(4) == []

    def test_duplicate_detector(self):
        assert EventTrace([0, 0, G], 1).duplicate_kl_violations() == []

    def test_write(self, tmp_path):
        tr = EventTrace([0, G], 1)
        tr.write(tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text() == tr.to_csv()


class TestRun:
    def test_heterogeneous_trace_audit(self):
        net = generate_network(L=12, seed=4)
        prof = AsyncProfile.with_slow_client(12, slow_client=3, slowdown=100, k_a=10, rng_seed=8)
        res = run(net, replace(Hyperparams(), k_global_max=400), prof)
        assert res.rounds == 400
        assert res.trace.fairness_violations(10) == []
        assert res.trace.pause_violations() == []
        assert res.trace.duplicate_kl_violations() == []
        counts = np.bincount(res.trace.events[res.trace.events >= 0], minlength=12)
        assert counts[3] < counts.min(initial=10**9, where=np.arange(12) != 3)

    def test_deterministic(self):
        net = generate_network(L=6, seed=42)
        prof = AsyncProfile.with_slow_client(6, rng_seed=42)
        hp = replace(Hyperparams(), k_global_max=300)
        a, b = run(net, hp, prof), run(net, hp, prof)
        assert np.array_equal(a.trace.events, b.trace.events)
        assert a.w.tobytes() == b.w.tobytes()
        assert a.x.tobytes() == b.x.tobytes()

    @requires_compiled
    @pytest.mark.parametrize("mode", ["synchronous", "fixed-ratio", "heterogeneous"])
    def test_backends_agree(self, mode):
        net = generate_network(L=7, seed=11)
        prof = AsyncProfile(mode, local_per_global=2, rng_seed=2)
        hp = replace(Hyperparams(omega=1.3), k_global_max=150)
        a = run(net, hp, prof, backend="compiled")
        b = run(net, hp, prof, backend="python")
        np.testing.assert_allclose(a.history.x, b.history.x, atol=1e-9)
        np.testing.assert_allclose(a.history.zeta, b.history.zeta, atol=1e-9)
        for name in ("X", "Z", "G", "Q", "PSI", "XI", "ZETA", "SQ", "SZETA", "W"):
            np.testing.assert_allclose(getattr(a.fleet, name), getattr(b.fleet, name),
                                       atol=1e-9, err_msg=name)
        assert np.array_equal(a.fleet.K, b.fleet.K) and np.array_equal(a.fleet.SK, b.fleet.SK)
        assert np.array_equal(a.trace.w_seen, b.trace.w_seen)

    @pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=requires_compiled)])
    def test_resume_equals_single_pass(self, backend):
        net = generate_network(L=4, seed=3)
        hp = Hyperparams()
        ev = build_schedule(AsyncProfile.with_slow_client(4, rng_seed=1), 4, 80)
        cut = int(np.flatnonzero(ev == G)[39]) + 1
        full, _, _ = execute_schedule(net, hp, ev, backend=backend)
        part, _, _ = execute_schedule(net, hp, ev[:cut], backend=backend)
        part, _, _ = execute_schedule(net, hp, ev[cut:], fleet=part, backend=backend)
        assert part.k_w == full.k_w == 80
        np.testing.assert_array_equal(part.W, full.W)

    @pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=requires_compiled)])
    def test_not_ready(self, backend):
        net = generate_network(L=2, seed=0)
        with pytest.raises(NotReadyError):
            execute_schedule(net, Hyperparams(), [0, G], backend=backend)

    @pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=requires_compiled)])
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_event(self, backend):
        net = generate_network(L=2, seed=0)
        fleet = FleetState.zeros(2, 3)
        fleet.PSI[1] = np.inf
        with pytest.raises(DivergenceError) as info:
            execute_schedule(net, Hyperparams(), [0, 0, 1, G], fleet=fleet, backend=backend)
        assert info.value.event_index == 2

    @pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=requires_compiled)])
    def test_z_precondition(self, backend):
        net = generate_network(L=2, seed=0)
        with pytest.raises(PreconditionError):
            execute_schedule(net, Hyperparams(alpha=1.0), [0, 1, G], backend=backend)

    def test_rejects_inadmissible_params(self):
        with pytest.raises(ValueError, match="alpha"):
            run(generate_network(L=2, seed=0), Hyperparams(c=1.0, alpha=1.0))

    def test_rejects_unknown_client(self):
        with pytest.raises(ValueError):
            execute_schedule(generate_network(L=2, seed=0), Hyperparams(), [2, G])

    def test_single_anchor_reaches_its_sphere(self):
        # every point of the range sphere is optimal, so only the residual is pinned
        net = SensorNetwork([[3.0, 4.0, 0.0]], [2.0])
        res = run(net, replace(Hyperparams(), k_global_max=20_000), record=False)
        assert objective(res.x[0], net) < 1e-2
        assert objective(res.w, net) < 1e-2
        assert np.linalg.norm(res.x[0] - res.w) < 1e-2

    def test_clean_run_residual_trends(self):
        net = generate_network(seed=1)
        res = run(net.blind(), Hyperparams())
        h = res.history
        half = len(h.w) // 2
        for series in (h.consensus_max(), h.xz_gap_max(), h.wq_gap_max(), h.dual_sum_norm()):
            tail = np.minimum.accumulate(series)[half:]
            assert tail[-1] < 1e-2
            assert tail[-1] < tail[0]
        assert h.rmse_local(net.source)[-1] < 0.1
