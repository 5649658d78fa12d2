"""Top-level SIS solvers wrapping the Gaussian sampler, plus verification.

The infinity-norm solver filters sampler outputs by 0 < ||x||_inf <= beta
with beta = (q/f) sqrt(ln m); the Euclidean variant uses beta = (q/f) sqrt(m)
and additionally insists the solution is nonzero mod q (multiples of q such
as (q, 0, ..., 0) are rejected).  Norm comparisons against the real-valued
beta are exact: the float beta is interpreted as the dyadic rational it is,
and integer norms are compared by cross-multiplication.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

from .errors import PreconditionViolated
from .wagner import (
    MODE_HEURISTIC,
    MODE_PROVABLE,
    Schedule,
    choose_heuristic_params,
    choose_provable_params,
    gaussian_wagner,
)
from .zqlin import SisInstance, Solution, matvec_mod

VERDICT_VALID = "Valid"
VERDICT_ZERO = "ZeroVector"
VERDICT_NORM = "NormExceeded"
VERDICT_NOT_IN_LATTICE = "NotInLattice"


@dataclass
class SolveReport:
    solutions: List[Solution]
    attempts: int
    success: bool
    norm_bound_used: float
    mode: str
    trivial_regime: bool = False
    stats: Optional[dict] = None

    def to_json(self) -> str:
        stats = None
        if self.stats is not None:
            # wall times stay in --stats-out files; stdout must be
            # byte-identical for a fixed (command, flags, seed, threads=1)
            stats = {k: v for k, v in self.stats.items() if k != "stage_seconds"}
        return json.dumps({
            "solutions": [{"x": list(s.x), "norm": s.norm_value}
                          for s in self.solutions],
            "attempts": self.attempts,
            "success": self.success,
            "norm_bound_used": self.norm_bound_used,
            "mode": self.mode,
            "trivial_regime": self.trivial_regime,
            "stats": stats,
        })


def linf_within(x, beta) -> bool:
    """||x||_inf <= beta, exactly (beta read as the dyadic rational it is)."""
    b = Fraction(beta)
    return all(abs(int(v)) <= b for v in x)


def l2_within(x, beta) -> bool:
    """||x||_2 <= beta via cross-multiplied squares, exactly."""
    b = Fraction(beta)
    return sum(int(v) * int(v) for v in x) <= b * b


def nonzero_mod_q(x, q: int) -> bool:
    """The cross-variant solution requirement: x is not 0 modulo q."""
    return any(int(v) % q for v in x)


def verify(inst: SisInstance, x) -> str:
    """Exact verdict: lattice membership first, then zero, then the norm."""
    xs = [int(v) for v in x]
    if len(xs) != inst.m:
        return VERDICT_NOT_IN_LATTICE
    if any(int(v) for v in matvec_mod(inst.A, xs, inst.q)):
        return VERDICT_NOT_IN_LATTICE
    if all(v == 0 for v in xs):
        return VERDICT_ZERO
    if inst.beta is not None:
        if inst.norm_kind == "linf":
            ok = all(abs(v) <= inst.beta for v in xs)
        else:
            ok = sum(v * v for v in xs) <= inst.beta * inst.beta
        if not ok:
            return VERDICT_NORM
    return VERDICT_VALID


def _provable_preconditions(inst: SisInstance, f: float, epsilon: float):
    if not inst.q_prime:
        raise PreconditionViolated("q prime")
    if inst.q ** (1 - inst.n / inst.m) < 6:
        raise PreconditionViolated("q^(1-n/m) >= 6")
    if epsilon > 1.0 / (inst.m * inst.q ** 4):
        raise PreconditionViolated("epsilon <= 1/(m q^4)")
    if inst.q / f < math.sqrt(math.log(1 / epsilon)):
        raise PreconditionViolated("q/f >= sqrt(ln(1/eps))")
    warnings.warn(
        "provable-mode guarantees are asymptotic; desk-scale runs are experiments",
        stacklevel=3)


def _run(inst: SisInstance, f: float, epsilon: float, mode: str, rng, beta: float,
         schedule: Optional[Schedule], threads: int):
    if mode == MODE_PROVABLE:
        _provable_preconditions(inst, f, epsilon)
        sched = schedule or choose_provable_params(inst.n, inst.m, inst.q, f, epsilon)
    elif mode == MODE_HEURISTIC:
        sched = schedule or choose_heuristic_params(inst.n, inst.m, inst.q, beta,
                                                    epsilon=epsilon)
    else:
        raise PreconditionViolated(f"unknown solve mode {mode!r}")
    outputs, stats = gaussian_wagner(inst, sched, rng, threads=threads)
    return outputs, stats, sched


def solve_sis_inf(inst: SisInstance, f: float, epsilon: float, mode: str, rng, *,
                  schedule: Optional[Schedule] = None, threads: int = 1,
                  max_solutions: int = 16) -> SolveReport:
    """Infinity-norm solver at beta = (q/f) sqrt(ln m)."""
    beta = (inst.q / f) * math.sqrt(math.log(inst.m))
    outputs, stats, sched = _run(inst, f, epsilon, mode, rng, beta, schedule, threads)
    sols = []
    for row in outputs:
        xs = [int(v) for v in row]
        if any(xs) and linf_within(xs, beta):
            sols.append(Solution.from_vector(xs, "linf"))
            if len(sols) >= max_solutions:
                break
    return SolveReport(solutions=sols, attempts=len(outputs), success=bool(sols),
                       norm_bound_used=beta, mode=sched.mode, stats=stats.as_dict())


def solve_sis_l2(inst: SisInstance, f: float, epsilon: float, mode: str, rng, *,
                 schedule: Optional[Schedule] = None, threads: int = 1,
                 max_solutions: int = 16) -> SolveReport:
    """Euclidean solver at beta = (q/f) sqrt(m); solutions must be nonzero
    mod q, which excludes trivia like (q, 0, ..., 0)."""
    beta = (inst.q / f) * math.sqrt(inst.m)
    trivial = beta >= inst.q * math.sqrt(inst.n / 12.0)
    outputs, stats, sched = _run(inst, f, epsilon, mode, rng, beta, schedule, threads)
    sols = []
    for row in outputs:
        xs = [int(v) for v in row]
        if nonzero_mod_q(xs, inst.q) and l2_within(xs, beta):
            sols.append(Solution.from_vector(xs, "l2"))
            if len(sols) >= max_solutions:
                break
    return SolveReport(solutions=sols, attempts=len(outputs), success=bool(sols),
                       norm_bound_used=beta, mode=sched.mode,
                       trivial_regime=trivial, stats=stats.as_dict())
