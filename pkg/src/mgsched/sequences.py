"""Discrete probability sequences over equally spaced power levels.

A :class:`ProbSeq` assigns a probability to each power level ``i * step``
for ``i = 0..N``.  Continuous models are mapped onto sequences by integrating
their density over half-step bins (plus any probability atoms), after which
all uncertainty arithmetic happens through two convolution operators:

* :func:`add_convolve` gives the distribution of a sum of independent
  sequence-valued variables.
* :func:`sub_convolve` gives the distribution of a difference, with all
  non-positive outcomes collapsed onto level zero (net demand cannot be
  negative from the dispatcher's point of view).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import quad

__all__ = [
    "StepMismatchError",
    "ProbSeq",
    "point_mass",
    "expectation",
    "discretize",
    "add_convolve",
    "sub_convolve",
    "el_sequence",
    "pv_sequence",
    "wt_sequence",
    "load_sequence",
    "write_sequence_csv",
]

# Absolute quadrature tolerance for one discretisation bin.
_BIN_QUAD_TOL = 1e-10

_SUM_TOL = 1e-9


class StepMismatchError(ValueError):
    """Convolution operands use different discretisation steps."""


@dataclass(frozen=True)
class ProbSeq:
    """Probabilities over power levels 0, step, 2*step, ... (kW)."""

    probs: np.ndarray
    step: float

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("probs must be a non-empty 1-d array")
        if self.step <= 0:
            raise ValueError("step must be > 0")
        if arr.min() < 0.0:
            raise ValueError("probabilities must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 +- {_SUM_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __len__(self) -> int:
        return int(self.probs.size)

    @property
    def max_index(self) -> int:
        return int(self.probs.size - 1)

    def levels(self) -> np.ndarray:
        """Power level (kW) of every index."""
        return np.arange(self.probs.size) * self.step


def point_mass(step: float) -> ProbSeq:
    """The degenerate sequence with all probability at zero output."""
    return ProbSeq(np.array([1.0]), step)


def expectation(seq: ProbSeq) -> float:
    """Expected power (kW): sum of i * step * probs[i]."""
    idx = np.arange(seq.probs.size)
    return float(idx @ seq.probs) * seq.step


def discretize(
    density: Callable[[float], float] | None,
    p_max: float,
    q: float,
    atoms: Iterable[tuple[float, float]] = (),
) -> ProbSeq:
    """Map a continuous distribution on [0, p_max] onto a sequence of step ``q``.

    The sequence has max index ``N = ceil(p_max / q)``.  Bin 0 integrates the
    density over [0, q/2], interior bin ``i`` over [i*q - q/2, i*q + q/2], and
    the final bin up to ``p_max``.  Probability atoms are added to the bin
    containing them.  The result is renormalised to unit mass, which also
    realises truncation for densities whose support exceeds [0, p_max].
    """
    if q <= 0:
        raise ValueError("q must be > 0")
    if p_max < 0:
        raise ValueError("p_max must be >= 0")

    if p_max == 0:
        n = 0
    else:
        n = int(math.ceil(p_max / q - 1e-12))
    probs = np.zeros(n + 1)

    if density is not None and p_max > 0:
        for i in range(n + 1):
            if i == 0:
                lo, hi = 0.0, q / 2.0
            else:
                lo, hi = i * q - q / 2.0, i * q + q / 2.0
            lo = max(0.0, lo)
            hi = min(p_max, hi)
            if hi <= lo:
                continue
            mass, _ = quad(density, lo, hi, epsabs=_BIN_QUAD_TOL,
                           epsrel=_BIN_QUAD_TOL, limit=200)
            probs[i] += mass

    for loc, mass in atoms:
        if mass < 0:
            raise ValueError("atom mass must be >= 0")
        idx = int(math.floor(loc / q + 0.5))
        probs[min(max(idx, 0), n)] += mass

    total = probs.sum()
    if total <= 0:
        if n == 0:
            probs[0] = 1.0
            total = 1.0
        else:
            raise ValueError("distribution has zero probability mass on [0, p_max]")
    return ProbSeq(probs / total, q)


def _check_steps(a: ProbSeq, b: ProbSeq) -> None:
    if a.step != b.step:
        raise StepMismatchError(f"step mismatch: {a.step} != {b.step}")


def add_convolve(a: ProbSeq, b: ProbSeq) -> ProbSeq:
    """Distribution of the sum of two independent sequences (same step)."""
    _check_steps(a, b)
    pa, pb = a.probs, b.probs
    if pa.size > pb.size:
        pa, pb = pb, pa
    out = np.zeros(pa.size + pb.size - 1)
    for i, weight in enumerate(pa):
        if weight > 0.0:
            out[i:i + pb.size] += weight * pb
    return ProbSeq(out, a.step)


def sub_convolve(d: ProbSeq, c: ProbSeq) -> ProbSeq:
    """Distribution of ``d - c`` with non-positive differences collapsed to 0.

    The output length equals the minuend's length: the largest net value
    occurs when the subtrahend is zero.
    """
    _check_steps(d, c)
    pd_, pc = d.probs, c.probs
    n_out = pd_.size
    out = np.zeros(n_out)
    prefix = np.cumsum(pd_)
    for ic, weight in enumerate(pc):
        if weight <= 0.0:
            continue
        # All pairs with i_d <= ic truncate onto level zero.
        out[0] += weight * prefix[min(ic, n_out - 1)]
        if ic + 1 < n_out:
            tail = pd_[ic + 1:]
            out[1:1 + tail.size] += weight * tail
    return ProbSeq(out, d.step)


def el_sequence(d: ProbSeq, a: ProbSeq, b: ProbSeq) -> tuple[ProbSeq, float]:
    """Net-demand sequence and its balance expectation.

    Returns ``(e, expected_el)`` where ``e = d (-) (a (+) b)`` and
    ``expected_el = E(d) - E(a) - E(b)``.  The latter ignores the truncation
    at level zero and is the value used in power-balance and reserve
    calculations; ``expectation(e)`` differs from it whenever renewables can
    exceed the load with positive probability.
    """
    _check_steps(d, a)
    _check_steps(d, b)
    joint = add_convolve(a, b)
    e = sub_convolve(d, joint)
    expected_el = expectation(d) - expectation(a) - expectation(b)
    return e, expected_el


def pv_sequence(model, q: float) -> ProbSeq:
    """Sequence of a :class:`~mgsched.stochastic.PvModel` (None = no sun)."""
    from . import stochastic

    if model is None:
        return point_mass(q)
    return discretize(lambda p: stochastic.pv_output_pdf(model, p), model.p_max, q)


def wt_sequence(model, q: float) -> ProbSeq:
    """Sequence of a :class:`~mgsched.stochastic.WtModel` (None = no wind)."""
    from . import stochastic

    if model is None:
        return point_mass(q)
    atoms = stochastic.wt_output_atoms(model)
    return discretize(lambda p: stochastic.wt_output_pdf(model, p),
                      model.p_rated, q, atoms=atoms)


def load_sequence(model, p_max: float, q: float) -> ProbSeq:
    """Sequence of a :class:`~mgsched.stochastic.LoadModel` truncated to [0, p_max]."""
    from . import stochastic

    if model.sigma == 0:
        return discretize(None, p_max, q, atoms=[(model.mu, 1.0)])
    return discretize(lambda p: stochastic.load_pdf(model, p), p_max, q)


def write_sequence_csv(path, seq: ProbSeq, header: Sequence[str] = ("index", "power_kw", "probability")) -> None:
    """Debug dump of a sequence as CSV rows (index, power, probability)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i, p in enumerate(seq.probs):
            fh.write(f"{i},{i * seq.step!r},{float(p)!r}\n")
