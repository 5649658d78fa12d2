import math

import numpy as np
import pytest

from wagnersis.errors import PreconditionViolated
from wagnersis.rngutil import derive_np_rng
from wagnersis.solvers import (
    VERDICT_NORM,
    VERDICT_NOT_IN_LATTICE,
    VERDICT_VALID,
    VERDICT_ZERO,
    l2_within,
    linf_within,
    nonzero_mod_q,
    solve_sis_inf,
    solve_sis_l2,
    verify,
)
from wagnersis.wagner import MODE_HEURISTIC, MODE_PROVABLE
from wagnersis.zqlin import SisInstance


def make_systematic(n, m, q, seed, beta=None):
    rng = derive_np_rng(seed, "mk")
    a_prime = rng.integers(0, q, size=(n, m - n), dtype=np.int64)
    A = np.hstack([a_prime, np.eye(n, dtype=np.int64)])
    return SisInstance.create(A, q, beta=beta)


class TestVerify:
    def test_valid(self):
        inst = SisInstance.create([[1, 1]], 3, beta=2)
        assert verify(inst, (1, 2)) == VERDICT_VALID

    def test_zero(self):
        inst = SisInstance.create([[1, 1]], 3, beta=2)
        assert verify(inst, (0, 0)) == VERDICT_ZERO

    def test_norm_exceeded_after_membership(self):
        inst = SisInstance.create([[1, 1]], 3, beta=2)
        assert verify(inst, (3, 0)) == VERDICT_NORM  # 3 = 0 mod 3 but 3 > 2

    def test_not_in_lattice_first(self):
        inst = SisInstance.create([[1, 1]], 3, beta=2)
        assert verify(inst, (1, 1)) == VERDICT_NOT_IN_LATTICE
        assert verify(inst, (5, 0, 0)) == VERDICT_NOT_IN_LATTICE  # wrong length

    def test_l2_norm_kind(self):
        inst = SisInstance.create([[1, 1]], 3, beta=2, norm_kind="l2")
        assert verify(inst, (1, 2)) == VERDICT_NORM  # sqrt(5) > 2
        inst2 = SisInstance.create([[1, 1]], 3, beta=3, norm_kind="l2")
        assert verify(inst2, (1, 2)) == VERDICT_VALID


class TestFilters:
    def test_exact_boundary_comparison(self):
        assert linf_within([4, -4], 4.0)
        assert not linf_within([5], 4.999999999)
        assert l2_within([3, 4], 5.0)
        assert not l2_within([3, 4], 4.9999999999)

    def test_sisx_rejects_q_multiples(self):
        # (q, 0, ..., 0) is always in the lattice and short enough in l2 for
        # large beta, but it is 0 mod q and must not count for the x-variant.
        assert not nonzero_mod_q([257, 0, 0], 257)
        assert nonzero_mod_q([257, 1, 0], 257)


class TestSolveInf:
    F = 4 * math.sqrt(math.log(20))  # beta = q/4 at m = 20

    def test_heuristic_desk_scale(self):
        wins = 0
        for seed in range(10):
            inst = make_systematic(8, 20, 257, seed=seed, beta=64)
            rep = solve_sis_inf(inst, self.F, 2.0**-10, MODE_HEURISTIC, seed)
            if rep.success:
                wins += 1
                for sol in rep.solutions:
                    assert verify(inst, sol.x) == VERDICT_VALID
        assert wins >= 5

    def test_report_round_trips_json(self):
        inst = make_systematic(8, 20, 257, seed=0)
        rep = solve_sis_inf(inst, self.F, 2.0**-10, MODE_HEURISTIC, 1)
        import json

        doc = json.loads(rep.to_json())
        assert doc["success"] == rep.success
        assert doc["attempts"] == rep.attempts

    def test_provable_epsilon_precondition(self):
        inst = make_systematic(8, 20, 257, seed=0)
        with pytest.raises(PreconditionViolated):
            solve_sis_inf(inst, 4.0, 1 / 20, MODE_PROVABLE, 0)  # eps = 1/m

    def test_provable_warns_about_asymptotics(self):
        inst = make_systematic(8, 20, 257, seed=0)
        eps = 0.9 / (20 * 257**4)
        with pytest.warns(UserWarning):
            with pytest.raises(Exception):
                # schedule construction fails at this size, after the warning
                solve_sis_inf(inst, 4.0, eps, MODE_PROVABLE, 0)


class TestSolveL2:
    def test_solutions_nonzero_mod_q(self):
        inst = make_systematic(8, 20, 257, seed=2)
        rep = solve_sis_l2(inst, 12.0, 2.0**-10, MODE_HEURISTIC, 3)
        for sol in rep.solutions:
            assert nonzero_mod_q(sol.x, 257)

    def test_trivial_regime_flagged(self):
        inst = make_systematic(8, 20, 257, seed=2)
        # beta = (q/f) sqrt(m) >= q sqrt(n/12) iff f <= sqrt(12 m / n)
        rep = solve_sis_l2(inst, 2.0, 2.0**-10, MODE_HEURISTIC, 3)
        assert rep.trivial_regime
        rep2 = solve_sis_l2(inst, 12.0, 2.0**-10, MODE_HEURISTIC, 3)
        assert not rep2.trivial_regime
