"""Linear observation models y = A h + n and pilot patterns.

Three model kinds: identity observation of all antennas, pilot-matrix
MIMO observation, and pilot-position selection from a time-frequency grid.
Noise is white circular complex Gaussian with per-entry variance sigma2,
and the SNR convention is snr = 1 / sigma2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .util import complex_randn

KIND_SIMO = "simo_identity"
KIND_MIMO = "mimo_pilot"
KIND_WIDEBAND = "wideband_selection"

LAYOUT_BLOCK = "block"
LAYOUT_COMB = "comb"
LAYOUT_LATTICE = "lattice"


def snr_db_to_sigma2(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


@dataclass(frozen=True)
class PilotPattern:
    """Pilot positions on an n_c x n_t time-frequency grid."""

    layout: str
    n_c: int
    n_t: int
    positions: tuple  # of (carrier, time) pairs

    def __post_init__(self):
        pos = tuple((int(c), int(t)) for c, t in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(set(pos)) != len(pos):
            raise ConfigError("pilot positions must be distinct")
        if len(pos) > self.n_c * self.n_t:
            raise ConfigError("more pilots than resource elements")
        for c, t in pos:
            if not (0 <= c < self.n_c and 0 <= t < self.n_t):
                raise ConfigError(f"pilot position {(c, t)} outside grid")

    @property
    def n_p(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class ObservationModel:
    """Observation matrix, white-noise variance, and model kind."""

    a: np.ndarray
    sigma2: float
    kind: str
    n_rx: int = 0
    n_tx: int = 0
    pattern: PilotPattern | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=complex))
        if self.sigma2 < 0:
            raise ConfigError("sigma2 must be nonnegative")
        if self.a.ndim != 2:
            raise DimensionError("A must be a matrix")

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def with_sigma2(self, sigma2: float) -> "ObservationModel":
        return ObservationModel(a=self.a, sigma2=sigma2, kind=self.kind,
                                n_rx=self.n_rx, n_tx=self.n_tx, pattern=self.pattern)


def simo_model(n: int, sigma2: float) -> ObservationModel:
    """Identity observation of an n-antenna array."""
    if n < 1:
        raise DimensionError("antenna count must be >= 1")
    return ObservationModel(a=np.eye(n, dtype=complex), sigma2=sigma2,
                            kind=KIND_SIMO, n_rx=n, n_tx=1)


def dft_pilot_matrix(n_tx: int, n_p: int) -> np.ndarray:
    """Unit-column scaled DFT pilot matrix of shape (n_tx, n_p).

    For n_p <= n_tx these are the first n_p columns of the n_tx-point DFT;
    for n_p > n_tx the n_p-point DFT is truncated to n_tx rows so the pilot
    block keeps full rank with unit-norm columns.
    """
    if n_p < 1:
        raise ConfigError("n_p must be >= 1")
    size = max(n_tx, n_p)
    j, k = np.meshgrid(np.arange(n_tx), np.arange(n_p), indexing="ij")
    p = np.exp(-2j * np.pi * j * k / size)
    return p / np.linalg.norm(p, axis=0, keepdims=True)


def mimo_model(n_rx: int, n_tx: int, n_p: int, sigma2: float,
               pilot_matrix: np.ndarray | None = None) -> ObservationModel:
    """Pilot observation of a vectorized n_rx x n_tx channel matrix.

    A = P^T kron I_nrx with P the scaled DFT pilot matrix, so that
    A vec(H) = vec(H P) under column stacking.  ``pilot_matrix`` overrides
    P (test hook, e.g. an identity pilot block).
    """
    p = dft_pilot_matrix(n_tx, n_p) if pilot_matrix is None else np.asarray(pilot_matrix, complex)
    if p.shape != (n_tx, n_p):
        raise DimensionError(f"pilot matrix must be ({n_tx}, {n_p})")
    a = np.kron(p.T, np.eye(n_rx, dtype=complex))
    return ObservationModel(a=a, sigma2=sigma2, kind=KIND_MIMO, n_rx=n_rx, n_tx=n_tx)


def wideband_model(pattern: PilotPattern, sigma2: float) -> ObservationModel:
    """Selection-matrix observation of pilot positions from vec(H).

    Row r selects the flattened index time*n_c + carrier of positions[r],
    matching column stacking of the n_c x n_t grid.
    """
    n = pattern.n_c * pattern.n_t
    a = np.zeros((pattern.n_p, n), dtype=complex)
    for r, (c, t) in enumerate(pattern.positions):
        a[r, t * pattern.n_c + c] = 1.0
    return ObservationModel(a=a, sigma2=sigma2, kind=KIND_WIDEBAND,
                            n_rx=pattern.n_c, n_tx=pattern.n_t, pattern=pattern)


def make_pattern(layout: str, n_c: int, n_t: int, n_p: int) -> PilotPattern:
    """Deterministic pilot placement.

    block:   earliest time symbols fully occupied; a remainder spills into
             the lowest carriers of the next symbol.
    comb:    n_p/n_t evenly spaced carriers, repeated in every time symbol.
    lattice: comb with the carrier set shifted by half the spacing on odd
             time symbols.
    """
    if n_p > n_c * n_t or n_p < 1:
        raise ConfigError("need 1 <= n_p <= n_c * n_t")
    if layout == LAYOUT_BLOCK:
        flat = [(c, t) for t in range(n_t) for c in range(n_c)]
        positions = flat[:n_p]
    elif layout in (LAYOUT_COMB, LAYOUT_LATTICE):
        if n_p % n_t != 0:
            raise ConfigError(f"{layout} layout needs n_p divisible by n_t")
        per_symbol = n_p // n_t
        if per_symbol > n_c:
            raise ConfigError("more pilots per symbol than carriers")
        spacing = n_c / per_symbol
        base = [int(np.floor(i * spacing)) for i in range(per_symbol)]
        offset = int(np.floor(spacing / 2)) if layout == LAYOUT_LATTICE else 0
        positions = []
        for t in range(n_t):
            shift = offset if (layout == LAYOUT_LATTICE and t % 2 == 1) else 0
            positions.extend(((c + shift) % n_c, t) for c in base)
    else:
        raise ConfigError(f"unknown layout {layout!r}")
    return PilotPattern(layout=layout, n_c=n_c, n_t=n_t, positions=tuple(positions))


def observe(rng: np.random.Generator, model: ObservationModel, h: np.ndarray) -> np.ndarray:
    """Draw y = A h + n with white circular complex Gaussian noise."""
    h = np.asarray(h, dtype=complex)
    if h.shape != (model.n,):
        raise DimensionError(f"channel dimension {h.shape} does not match model ({model.n},)")
    noise = np.sqrt(model.sigma2) * complex_randn(rng, model.m)
    return model.a @ h + noise


def observe_batch(rng: np.random.Generator, model: ObservationModel, h: np.ndarray) -> np.ndarray:
    """Vectorized observe() over rows of h (T, N) -> (T, m)."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[1] != model.n:
        raise DimensionError("batch must be (T, N)")
    noise = np.sqrt(model.sigma2) * complex_randn(rng, h.shape[0], model.m)
    return h @ model.a.T + noise


def model_to_json(model: ObservationModel) -> str:
    """Serialize the model descriptor (no matrix payload)."""
    doc: dict = {"kind": model.kind, "sigma2": model.sigma2}
    if model.kind == KIND_SIMO:
        doc["n"] = model.n
    elif model.kind == KIND_MIMO:
        doc.update(n_rx=model.n_rx, n_tx=model.n_tx, n_p=model.m // model.n_rx)
    elif model.kind == KIND_WIDEBAND:
        pat = model.pattern
        doc["pattern"] = {"layout": pat.layout, "n_c": pat.n_c, "n_t": pat.n_t,
                          "positions": [list(p) for p in pat.positions]}
    else:
        raise ConfigError(f"cannot serialize kind {model.kind!r}")
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> ObservationModel:
    """Reconstruct a model from its JSON descriptor; matrices are rebuilt."""
    doc = json.loads(text)
    kind = doc["kind"]
    if kind == KIND_SIMO:
        return simo_model(doc["n"], doc["sigma2"])
    if kind == KIND_MIMO:
        return mimo_model(doc["n_rx"], doc["n_tx"], doc["n_p"], doc["sigma2"])
    if kind == KIND_WIDEBAND:
        pat = doc["pattern"]
        pattern = PilotPattern(layout=pat["layout"], n_c=pat["n_c"], n_t=pat["n_t"],
                               positions=tuple(tuple(p) for p in pat["positions"]))
        return wideband_model(pattern, doc["sigma2"])
    raise ConfigError(f"unknown model kind {kind!r}")
