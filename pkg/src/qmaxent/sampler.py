"""Shot-based measurement backends with readout noise and mitigation.

Sampling draws i.i.d. bitstrings from the squared amplitudes and then
applies independent per-qubit readout flips. All randomness flows through
numpy's default PCG64 generator seeded explicitly; multi-setting
estimators derive sub-seeds as seed + setting index, so results do not
depend on evaluation order. Passing ``shots=None`` to the estimators
selects the exact (infinite-shot) mode, which runs the same code path on
exact outcome probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Mapping

import numpy as np
from scipy.optimize import minimize, nnls

from .circuit import Circuit, Gate, populations, simulate
from .errors import DomainError, ParseError, TomographyError, ValidationError
from .pauli import PauliString, decompose_ketbra, expectation_from_paulis, measurement_settings


@dataclass(frozen=True)
class ReadoutNoise:
    """Independent per-qubit readout flips.

    p01[q] is P(read 1 | true 0) and p10[q] is P(read 0 | true 1) on
    qubit q; both must lie in [0, 0.5].
    """

    p01: tuple[float, ...]
    p10: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "p01", tuple(float(p) for p in self.p01))
        object.__setattr__(self, "p10", tuple(float(p) for p in self.p10))
        if len(self.p01) != len(self.p10):
            raise ValidationError("p01 and p10 must cover the same qubits")
        for p in self.p01 + self.p10:
            if not 0.0 <= p <= 0.5:
                raise ValidationError(f"flip probability {p} outside [0, 0.5]")

    @classmethod
    def uniform(cls, p01: float, p10: float, num_qubits: int) -> "ReadoutNoise":
        return cls((p01,) * num_qubits, (p10,) * num_qubits)

    @property
    def num_qubits(self) -> int:
        return len(self.p01)


@dataclass(frozen=True)
class CountsTable:
    """Bitstring counts from one measured setting (qubit 0 rightmost)."""

    num_qubits: int
    shots: int
    counts: Mapping[str, int]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "counts", dict(self.counts))
        if self.shots < 1:
            raise ValidationError("shots must be >= 1")
        for key, value in self.counts.items():
            if len(key) != self.num_qubits or set(key) - {"0", "1"}:
                raise ValidationError(f"bad bitstring key {key!r}")
            if value < 0:
                raise ValidationError(f"negative count for {key!r}")
        if sum(self.counts.values()) != self.shots:
            raise ValidationError("counts do not sum to shots")


@dataclass(frozen=True)
class CalibrationMatrix:
    """Column-stochastic readout confusion matrix M[r, t] = P(read r | true t)."""

    num_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        dim = 2**self.num_qubits
        if entries.shape != (dim, dim):
            raise ValidationError(f"expected shape {(dim, dim)}, got {entries.shape}")
        if entries.min() < 0:
            raise ValidationError("calibration entries must be non-negative")
        col_sums = entries.sum(axis=0)
        if np.abs(col_sums - 1.0).max() > 1e-12:
            raise ValidationError("calibration columns must sum to 1")

    @property
    def dim(self) -> int:
        return 2**self.num_qubits


def _noise_matrix_1q(p01: float, p10: float) -> np.ndarray:
    return np.array([[1 - p01, p10], [p01, 1 - p10]])


def sample_counts(
    sv: np.ndarray,
    shots: int,
    noise: ReadoutNoise | None = None,
    seed: int = 0,
) -> CountsTable:
    """Draw ``shots`` bitstrings from |a_i|^2, then apply readout flips."""
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    probs = populations(sv)
    num_qubits = int(math.log2(probs.size))
    if noise is not None and noise.num_qubits != num_qubits:
        raise ValidationError(
            f"noise covers {noise.num_qubits} qubit(s), state has {num_qubits}"
        )
    rng = np.random.default_rng(seed)
    outcomes = rng.choice(probs.size, size=shots, p=probs / probs.sum())
    if noise is not None:
        for q in range(num_qubits):
            bits = (outcomes >> q) & 1
            flip_prob = np.where(bits == 0, noise.p01[q], noise.p10[q])
            flips = rng.random(shots) < flip_prob
            outcomes = outcomes ^ (flips.astype(outcomes.dtype) << q)
    values, tallies = np.unique(outcomes, return_counts=True)
    counts = {
        format(int(v), f"0{num_qubits}b"): int(c) for v, c in zip(values, tallies)
    }
    return CountsTable(num_qubits, shots, counts, seed)


def estimate_populations(ct: CountsTable) -> np.ndarray:
    """Observed frequency of each basis state, indexed by basis state - 1."""
    freqs = np.zeros(2**ct.num_qubits)
    for key, value in ct.counts.items():
        freqs[int(key, 2)] = value / ct.shots
    return freqs


def _parity_signs(num_qubits: int, mask: int) -> np.ndarray:
    idx = np.arange(2**num_qubits)
    bits = idx & mask
    parity = np.zeros(idx.size, dtype=int)
    for q in range(num_qubits):
        parity ^= (bits >> q) & 1
    return 1.0 - 2.0 * parity


def _mitigation_solve(freqs: np.ndarray, cal: CalibrationMatrix) -> np.ndarray:
    m = cal.entries
    if np.linalg.cond(m) > 1e12:
        raise DomainError("calibration matrix is singular or ill-conditioned")
    direct = np.linalg.solve(m, freqs)
    if direct.min() >= 0.0:
        return direct
    # Constrained least squares: min ||M p - f||^2, p >= 0, sum p = 1.
    start = np.maximum(direct, 0.0)
    start /= start.sum()
    result = minimize(
        lambda p: float(np.sum((m @ p - freqs) ** 2)),
        start,
        jac=lambda p: 2.0 * m.T @ (m @ p - freqs),
        method="SLSQP",
        bounds=[(0.0, 1.0)] * freqs.size,
        constraints={
            "type": "eq",
            "fun": lambda p: p.sum() - 1.0,
            "jac": lambda p: np.ones((1, p.size)),
        },
        options={"ftol": 1e-14, "maxiter": 300},
    )
    if result.success:
        return np.maximum(result.x, 0.0)
    solution, _ = nnls(m, freqs)
    total = solution.sum()
    if total <= 0:
        raise TomographyError("mitigation solve produced an empty distribution")
    return solution / total


def mitigate(ct: CountsTable, cal: CalibrationMatrix) -> np.ndarray:
    """Readout-corrected outcome probabilities for a counts table."""
    if cal.num_qubits != ct.num_qubits:
        raise ValidationError(
            f"calibration covers {cal.num_qubits} qubit(s), counts have {ct.num_qubits}"
        )
    return _mitigation_solve(estimate_populations(ct), cal)


def build_calibration(
    noise: ReadoutNoise,
    num_qubits: int,
    shots: int | None = None,
    seed: int = 0,
) -> CalibrationMatrix:
    """Calibration matrix of a readout-noise model.

    With ``shots=None`` the exact tensor product of the per-qubit confusion
    matrices is returned. Otherwise each basis state is prepared (X gates
    on its set bits) and sampled, and the observed frequencies become the
    matrix columns.
    """
    if noise.num_qubits != num_qubits:
        raise ValidationError(
            f"noise covers {noise.num_qubits} qubit(s), asked for {num_qubits}"
        )
    if shots is None:
        singles = [
            _noise_matrix_1q(noise.p01[q], noise.p10[q]) for q in range(num_qubits)
        ]
        entries = reduce(np.kron, reversed(singles))
        return CalibrationMatrix(num_qubits, entries)
    dim = 2**num_qubits
    entries = np.zeros((dim, dim))
    for true_state in range(dim):
        gates = tuple(
            Gate("x", (q,)) for q in range(num_qubits) if (true_state >> q) & 1
        )
        sv = simulate(Circuit(num_qubits, gates))
        table = sample_counts(sv, shots, noise, seed + true_state)
        entries[:, true_state] = estimate_populations(table)
    return CalibrationMatrix(num_qubits, entries)


def estimate_pauli(
    c: Circuit,
    p: PauliString,
    shots: int | None = None,
    noise: ReadoutNoise | None = None,
    seed: int = 0,
    calibration: CalibrationMatrix | None = None,
) -> float:
    """Estimate <P> by appending basis rotations and reading Z-basis parity.

    ``shots=None`` uses exact outcome probabilities (with the noise model
    applied as its calibration matrix, if given); otherwise probabilities
    come from seeded sampling. A calibration matrix, when supplied,
    corrects the outcome distribution before the parity average.
    """
    if p.num_qubits != c.num_qubits:
        raise ValidationError(
            f"string acts on {p.num_qubits} qubit(s), circuit has {c.num_qubits}"
        )
    setting = measurement_settings(p)
    sv = simulate(c.extended(setting.rotations))
    if shots is None:
        freqs = populations(sv)
        if noise is not None:
            freqs = build_calibration(noise, c.num_qubits).entries @ freqs
    else:
        freqs = estimate_populations(sample_counts(sv, shots, noise, seed))
    if calibration is not None:
        freqs = _mitigation_solve(freqs, calibration)
    return float(_parity_signs(c.num_qubits, setting.parity_mask) @ freqs)


def estimate_coherence(
    c: Circuit,
    i: int,
    j: int,
    shots_per_setting: int | None = None,
    noise: ReadoutNoise | None = None,
    seed: int = 0,
    calibration: CalibrationMatrix | None = None,
) -> complex:
    """Estimate the mean of |i><j| by measuring its Pauli expansion.

    Each non-identity string is estimated with its own sub-seeded stream
    (seed + setting index); the statistical error of the recombined value
    scales as 1 / sqrt(shots).
    """
    if i == j:
        raise ValidationError("use populations for diagonal entries")
    decomposition = decompose_ketbra(i, j, c.num_qubits)
    means: dict[PauliString, float] = {}
    for offset, ps in enumerate(decomposition.terms):
        if ps.is_identity:
            continue
        means[ps] = estimate_pauli(
            c, ps, shots_per_setting, noise, seed + offset, calibration
        )
    return expectation_from_paulis(decomposition, means)


# Flat text form: header lines "shots <n>" and "seed <s>", then one
# "<bitstring> <count>" line per observed outcome, qubit 0 rightmost.

def dump_counts(ct: CountsTable) -> str:
    lines = [f"shots {ct.shots}", f"seed {ct.seed}"]
    lines.extend(f"{key} {ct.counts[key]}" for key in sorted(ct.counts))
    return "\n".join(lines) + "\n"


def load_counts(text: str) -> CountsTable:
    shots = seed = None
    counts: dict[str, int] = {}
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected two fields, got {raw!r}", lineno)
        key, value = parts
        try:
            number = int(value)
        except ValueError:
            raise ParseError(f"bad integer {value!r}", lineno) from None
        if key == "shots":
            shots = number
        elif key == "seed":
            seed = number
        else:
            if set(key) - {"0", "1"}:
                raise ParseError(f"bad bitstring {key!r}", lineno)
            if width is None:
                width = len(key)
            elif len(key) != width:
                raise ParseError("inconsistent bitstring widths", lineno)
            counts[key] = number
    if shots is None or seed is None or width is None:
        raise ParseError("counts text needs 'shots', 'seed' and at least one row")
    return CountsTable(width, shots, counts, seed)
