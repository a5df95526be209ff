"""Distance and closeness measures between density matrices and sequences thereof.

All functions accept either :class:`~qtrack.channels.DensityMatrix` instances
or bare Hermitian arrays; validation is the caller's business for bare arrays.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .channels import DensityMatrix
from .linalg import LinalgError, vec

MEASURES = ("F", "FN", "FHS", "Q", "D", "H", "O")
SCHEMES = ("avg1", "avg2")

RANK_RTOL = 1e-10


def _mat(x):
    return x.mat if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def _pair(rho, sigma):
    r, s = _mat(rho), _mat(sigma)
    if r.shape != s.shape:
        raise LinalgError(f"shape mismatch {r.shape} vs {s.shape}")
    return r, s


def fidelity_uhlmann(rho, sigma):
    """Uhlmann-Jozsa fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Evaluated as the squared trace norm of sqrt(rho) sqrt(sigma): the singular
    values are the square roots of the eigenvalues of sqrt(rho) sigma
    sqrt(rho), but computing them directly avoids losing half the digits to
    the final square root on rank-deficient products.
    """
    r, s = _pair(rho, sigma)
    sv = np.linalg.svd(_clean_sqrt(r) @ _clean_sqrt(s), compute_uv=False)
    return float(sv.sum() ** 2)


def _clean_sqrt(m):
    """PSD square root with eigenvalues below machine-level noise zeroed out."""
    w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w.min() < -1e-10:
        raise LinalgError(f"state has negative eigenvalue {w.min():.3e}")
    w = np.where(w < 1e-14 * max(w.max(), 1e-300), 0.0, w)
    return (u * np.sqrt(w)) @ u.conj().T


def super_fidelity(rho, sigma):
    """tr(rho sigma) + sqrt(1 - tr rho^2) sqrt(1 - tr sigma^2)."""
    r, s = _pair(rho, sigma)
    lin_r = max(1.0 - np.trace(r @ r).real, 0.0)
    lin_s = max(1.0 - np.trace(s @ s).real, 0.0)
    return float(np.trace(r @ s).real + np.sqrt(lin_r) * np.sqrt(lin_s))


def hs_inner(rho, sigma):
    """Hilbert-Schmidt inner product tr(rho sigma)."""
    r, s = _pair(rho, sigma)
    return float(np.trace(r @ s).real)


def _golden_section(f, lo, hi, width=1e-10):
    """Golden-section minimizer on [lo, hi] down to the given bracket width."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def chernoff_q(rho, sigma):
    """Nonlogarithmic quantum Chernoff bound min_s tr(rho^s sigma^(1-s)).

    Evaluated through the eigendecompositions of both states; the scalar
    minimization over s in [0, 1] uses golden-section search.  Zero
    eigenvalues are floored to keep s -> lambda^s well behaved.
    """
    r, s = _pair(rho, sigma)
    wr, ur = np.linalg.eigh(r)
    ws, us = np.linalg.eigh(s)
    floor = 1e-15
    wr = np.clip(wr, floor, None)
    ws = np.clip(ws, floor, None)
    overlap = np.abs(ur.conj().T @ us) ** 2

    def objective(t):
        return float(wr**t @ overlap @ ws ** (1.0 - t))

    _, val = _golden_section(objective, 0.0, 1.0)
    return min(val, objective(0.0), objective(1.0))


def trace_distance(rho, sigma):
    """Half the sum of absolute eigenvalues of rho - sigma."""
    r, s = _pair(rho, sigma)
    return float(0.5 * np.abs(np.linalg.eigvalsh(r - s)).sum())


def hs_distance(rho, sigma):
    """Hilbert-Schmidt (Frobenius) distance, via the Euclidean norm of vec(rho - sigma)."""
    r, s = _pair(rho, sigma)
    return float(np.linalg.norm(vec(r - s)))


def spectral_distance(rho, sigma):
    """Largest absolute eigenvalue of rho - sigma."""
    r, s = _pair(rho, sigma)
    return float(np.abs(np.linalg.eigvalsh(r - s)).max())


_MEASURE_FN = {
    "F": fidelity_uhlmann,
    "FN": super_fidelity,
    "FHS": hs_inner,
    "Q": chernoff_q,
    "D": trace_distance,
    "H": hs_distance,
    "O": spectral_distance,
}


def measure(tag, rho, sigma):
    """Evaluate the measure named by ``tag`` (one of F, FN, FHS, Q, D, H, O)."""
    try:
        return _MEASURE_FN[tag](rho, sigma)
    except KeyError:
        raise LinalgError(f"unknown measure tag {tag!r}") from None


def metric_functional(kind, value):
    """Metric functionals of a closeness value v in [0, 1].

    A = arccos(sqrt(v)) (Bures angle), B = sqrt(2 - 2 sqrt(v)) (Bures
    distance), C = sqrt(1 - v) (sine distance).
    """
    if not -1e-12 <= value <= 1.0 + 1e-12:
        raise LinalgError(f"closeness value {value} outside [0, 1]")
    v = min(max(value, 0.0), 1.0)
    if kind == "A":
        return float(np.arccos(np.sqrt(v)))
    if kind == "B":
        return float(np.sqrt(2.0 - 2.0 * np.sqrt(v)))
    if kind == "C":
        return float(np.sqrt(1.0 - v))
    raise LinalgError(f"unknown functional {kind!r}")


@dataclass(frozen=True)
class WeightedSequence:
    """Ordered list of (priority, state) with priorities in (0, 1) summing to 1."""

    priorities: np.ndarray
    states: tuple

    def __init__(self, items):
        pis = np.array([float(p) for p, _ in items])
        states = tuple(s if isinstance(s, DensityMatrix) else DensityMatrix(s) for _, s in items)
        if len(states) < 1:
            raise LinalgError("sequence must have at least one element")
        if abs(pis.sum() - 1.0) > 1e-12:
            raise LinalgError(f"priorities sum to {pis.sum()}, not 1")
        if np.any(pis <= 0.0) or np.any(pis >= 1.0):
            if not (len(states) == 1 and abs(pis[0] - 1.0) <= 1e-12):
                raise LinalgError("priorities must lie in (0, 1)")
        d = states[0].d
        if any(s.d != d for s in states):
            raise LinalgError("all states must share one dimension")
        object.__setattr__(self, "priorities", pis)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return len(self.states)

    @property
    def d(self):
        return self.states[0].d

    def direct_sum(self):
        """Block-diagonal density matrix  (+)_i pi_i rho_i  of dimension I*d."""
        i, d = len(self), self.d
        out = np.zeros((i * d, i * d), dtype=complex)
        for k, (p, s) in enumerate(zip(self.priorities, self.states)):
            out[k * d : (k + 1) * d, k * d : (k + 1) * d] = p * s.mat
        return out


def sequence_distance(tag, scheme, src: WeightedSequence, tgt: WeightedSequence):
    """Distance between two weighted sequences under averaging scheme 1 or 2.

    Scheme 1 is the priority-weighted mean of elementwise values; scheme 2
    evaluates the measure once on the direct-sum states.
    """
    if len(src) != len(tgt) or src.d != tgt.d:
        raise LinalgError("sequences must match in length and dimension")
    if np.abs(src.priorities - tgt.priorities).max() > 1e-12:
        raise LinalgError("sequences must carry identical priorities")
    if scheme == "avg1":
        return float(
            sum(
                p * measure(tag, a, b)
                for p, a, b in zip(src.priorities, src.states, tgt.states)
            )
        )
    if scheme == "avg2":
        return measure(tag, src.direct_sum(), tgt.direct_sum())
    raise LinalgError(f"unknown scheme {scheme!r}")


def difference_rank(rho, sigma, rtol=RANK_RTOL):
    """Rank of rho - sigma with a relative singular-value threshold."""
    r, s = _pair(rho, sigma)
    sv = np.abs(np.linalg.eigvalsh(r - s))
    top = sv.max()
    if top == 0.0:
        return 0
    return int((sv > rtol * top).sum())


def check_bounds(rho, sigma):
    """Slack report for the inequality suite tying D, H, O, F and F_N together.

    Each entry is (value, slack); every slack is expected to be >= -1e-9.
    """
    f = fidelity_uhlmann(rho, sigma)
    fn = super_fidelity(rho, sigma)
    d = trace_distance(rho, sigma)
    h = hs_distance(rho, sigma)
    o = spectral_distance(rho, sigma)
    r = max(difference_rank(rho, sigma), 1)
    report = {
        "fuchs_lower": d - (1.0 - np.sqrt(f)),
        "fuchs_upper": np.sqrt(max(1.0 - f, 0.0)) - d,
        "fn_rank_upper": np.sqrt(r / 2.0) * np.sqrt(max(1.0 - fn, 0.0)) - d,
        "fn_lower": d - (1.0 - fn),
        "fn_sqrt_lower": d - (1.0 - np.sqrt(fn)),
        "chain_O_le_H": h - o,
        "chain_H_le_2D": 2.0 * d - h,
        "chain_2D_le_rootr_H": np.sqrt(r) * h - 2.0 * d,
        "chain_rootr_H_le_r_O": r * o - np.sqrt(r) * h,
    }
    report = {k: float(v) for k, v in report.items()}
    report["rank"] = r
    report["values"] = {"F": f, "FN": fn, "D": d, "H": h, "O": o}
    return report


def benchmark_measures(d, repeats, rng, tags=("FN", "D", "F", "Q")):
    """Mean evaluation time per measure on random d-dimensional pairs.

    Only the relative ordering is meaningful (F_N cheapest, Q most expensive
    for large d); absolute numbers are hardware noise.
    """
    from .channels import random_state

    pairs = [(random_state(d, rng), random_state(d, rng)) for _ in range(repeats)]
    out = {}
    for tag in tags:
        fn = _MEASURE_FN[tag]
        start = time.perf_counter()
        for a, b in pairs:
            fn(a, b)
        out[tag] = (time.perf_counter() - start) / repeats
    return out
