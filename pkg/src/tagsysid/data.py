"""Datasets, CSV I/O, excitation signals and synthetic benchmark systems."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter, max_len_seq

from .exceptions import Divergence, NonFiniteSample, ParseError, UnknownSystem
from .model import ModelStructure, generate, parse_equation

__all__ = [
    "Dataset",
    "DatasetBundle",
    "SyntheticSystem",
    "SYSTEMS",
    "load_csv",
    "save_csv",
    "generate_excitation",
    "simulate_truth",
    "make_benchmark",
]

ROLES = ("estimation", "validation", "test")


@dataclass(frozen=True, eq=False)
class Dataset:
    u: np.ndarray
    y: np.ndarray
    n_transient: int = 0
    role: str = "estimation"
    sample_rate: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if u.shape != y.shape:
            raise ValueError(f"u has {u.size} samples but y has {y.size}")
        if u.size == 0:
            raise ValueError("empty dataset")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise NonFiniteSample("dataset contains non-finite samples")
        if not 0 <= self.n_transient < u.size:
            raise ValueError(f"n_transient={self.n_transient} must lie in [0, {u.size})")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def N(self) -> int:
        return self.u.size

    def __len__(self):
        return self.u.size

    def with_role(self, role: str) -> "Dataset":
        return replace(self, role=role)


@dataclass(frozen=True)
class DatasetBundle:
    """Estimation data, fitness data (may be the same object) and optional test data."""

    estimation: Dataset
    fitness: Dataset | None = None
    test: Dataset | None = None

    def __post_init__(self):
        if self.fitness is None:
            object.__setattr__(self, "fitness", self.estimation)


# -- CSV -----------------------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def load_csv(path, role: str | None = None, n_transient: int | None = None,
             sample_rate: float | None = None) -> Dataset:
    """Read a ``k,u,y`` (or ``u,y``) CSV file.

    Dataset settings come from a JSON sidecar next to the file (same stem,
    ``.json``) with keys ``role``, ``N_t`` and ``sample_rate_hz``; explicit
    arguments take precedence.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        if header not in (["k", "u", "y"], ["u", "y"]):
            raise ParseError(f"header must be 'k,u,y' or 'u,y', got {','.join(header)!r}", 1)
        iu, iy = header.index("u"), header.index("y")
        u, y = [], []
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                vu, vy = float(row[iu]), float(row[iy])
            except ValueError:
                raise ParseError(f"not a number in {row!r}", lineno) from None
            if not (math.isfinite(vu) and math.isfinite(vy)):
                raise NonFiniteSample("non-finite sample", lineno)
            u.append(vu)
            y.append(vy)
    if not u:
        raise ParseError("no data rows", 2)
    side = {}
    if _sidecar(path).exists():
        side = json.loads(_sidecar(path).read_text())
    return Dataset(
        np.array(u),
        np.array(y),
        n_transient=int(n_transient if n_transient is not None else side.get("N_t", 0)),
        role=role or side.get("role", "estimation"),
        sample_rate=float(sample_rate if sample_rate is not None else side.get("sample_rate_hz", 1.0)),
        meta={"path": str(path), **side.get("meta", {})},
    )


def save_csv(data: Dataset, path, sidecar: bool = True) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "u", "y"])
        for k, (a, b) in enumerate(zip(data.u, data.y)):
            w.writerow([k, f"{a:.17g}", f"{b:.17g}"])
    if sidecar:
        meta = {k: v for k, v in data.meta.items() if k != "path"}
        _sidecar(path).write_text(json.dumps(
            {"role": data.role, "N_t": data.n_transient, "sample_rate_hz": data.sample_rate, "meta": meta},
            indent=2, sort_keys=True,
        ) + "\n")


# -- excitation ------------------------------------------------------------------------

def generate_excitation(n: int, amplitude: float, kind: str = "filtered-uniform", seed=None,
                        n_zero: int = 0) -> np.ndarray:
    """Input signal of length ``n``.

    ``filtered-uniform``: white uniform noise on ``[-A, A]`` passed through
    ``H(z) = 0.1 z^-1 / (1 - 0.9 z^-1)`` (unit DC gain).
    ``prbs``: maximum-length binary sequence on the levels ``{0, A}``.
    ``uniform``: unfiltered white uniform noise on ``[-A, A]``.
    The first ``n_zero`` samples are set to zero.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    if kind == "filtered-uniform":
        w = rng.uniform(-amplitude, amplitude, n)
        x = lfilter([0.0, 0.1], [1.0, -0.9], w)
    elif kind == "uniform":
        x = rng.uniform(-amplitude, amplitude, n)
    elif kind == "prbs":
        nbits = 10
        state = rng.integers(0, 2, nbits)
        if not state.any():
            state[0] = 1
        seq, _ = max_len_seq(nbits, state=state, length=n)
        x = amplitude * seq.astype(float)
    else:
        raise ValueError(f"unknown excitation kind {kind!r}")
    x[:n_zero] = 0.0
    return x


# -- synthetic systems -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SyntheticSystem:
    name: str
    structure: ModelStructure
    true_coefficients: np.ndarray
    noise_std: float = 0.0
    excitation: dict = field(default_factory=dict)
    description: str = ""

    @classmethod
    def from_equation(cls, name, equation, noise_std, excitation, description=""):
        structure, coefs = parse_equation(equation)
        return cls(name, structure, coefs, noise_std, excitation, description)

    def excite(self, n: int, seed=None) -> np.ndarray:
        return generate_excitation(n, seed=seed, **self.excitation)


SYSTEMS = {
    s.name: s
    for s in (
        SyntheticSystem.from_equation(
            "S1", "y_k = 0.7 y_{k-1} - 0.1 y_{k-2} + 0.5 u_{k-1} + 0.2 u_{k-1}*y_{k-1} + ξ_k",
            0.01, {"kind": "uniform", "amplitude": 1.0}, "poly-narx",
        ),
        SyntheticSystem.from_equation(
            "S2", "y_k = 0.8 y_{k-1} + 1 u_{k-1} + 0.5 ξ_{k-1} + ξ_k",
            0.05, {"kind": "uniform", "amplitude": 1.0}, "narmax",
        ),
        SyntheticSystem.from_equation(
            "S3", "y_k = 1.7 y_{k-1} - 0.8 y_{k-2} + 0.05 u_{k-1} - 0.1 sin(y_{k-1}) + ξ_k",
            0.001, {"kind": "filtered-uniform", "amplitude": 15.0}, "trig-pendulum-like",
        ),
        SyntheticSystem.from_equation(
            "S4", "y_k = 0.9 y_{k-1} + 0.3 u_{k-12} + ξ_k",
            0.01, {"kind": "filtered-uniform", "amplitude": 5.0}, "delay",
        ),
    )
}


def get_system(name: str) -> SyntheticSystem:
    try:
        return SYSTEMS[name]
    except KeyError:
        raise UnknownSystem(f"unknown system {name!r}; expected one of {sorted(SYSTEMS)}") from None


def simulate_truth(system: SyntheticSystem, u, seed=None, noise_std: float | None = None,
                   n_transient: int = 0, role: str = "estimation") -> Dataset:
    """Run the system's recursion on input ``u`` with Gaussian innovations."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("excitation must be finite")
    sigma = system.noise_std if noise_std is None else noise_std
    rng = np.random.default_rng(seed)
    innov = sigma * rng.standard_normal(u.size) if sigma > 0 else np.zeros(u.size)
    try:
        y = generate(system.structure, system.true_coefficients, u, innov)
    except Divergence:
        raise Divergence(f"system {system.name} diverged") from None
    if np.max(np.abs(y), initial=0.0) > 1e8:
        raise Divergence(f"system {system.name} diverged")
    return Dataset(u, y, n_transient=n_transient, role=role,
                   meta={"system": system.name, "seed": seed, "noise_std": sigma})


def make_benchmark(name: str, n: int, seed: int, noise_std: float | None = None,
                   role: str = "estimation", n_transient: int | None = None) -> Dataset:
    """Excite a shipped system and record its response.

    The excitation and the noise draw from independent streams of ``seed``.
    """
    system = get_system(name)
    u_seed, e_seed = np.random.SeedSequence(seed).spawn(2)
    u = system.excite(n, seed=u_seed)
    nt = system.structure.max_lag if n_transient is None else n_transient
    data = simulate_truth(system, u, seed=e_seed, noise_std=noise_std, n_transient=nt, role=role)
    return replace(data, meta={**data.meta, "seed": seed})
