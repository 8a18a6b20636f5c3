"""Ground-truth plant simulation and experiment-data assembly.

This is the harness side of the toolkit: it knows the true (A, B, L, H, f)
and produces the data matrices (U0, X0, X1, F0) that the data-driven
synthesis consumes.  Discrete-time experiments record shifted states in
X1; continuous-time experiments record state derivatives, evaluated from
the model at the integrated states (idealized derivative measurements,
not finite differences).

``measure`` builds a dataset from arbitrary (time, state, input) samples;
the columns need not lie on a single trajectory, which is exactly the
generality the derivative-based representation permits.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .matcore import MatrixError, as_matrix, row_rank

__all__ = [
    "TimeDomain",
    "SimulationError",
    "PlantModel",
    "Trajectory",
    "DataSet",
    "AssumptionReport",
    "NONLINEARITY_CATALOG",
    "make_nonlinearity",
    "simulate_discrete",
    "simulate_continuous",
    "measure",
    "collect_dataset",
    "check_assumptions",
    "save_dataset",
    "load_dataset",
    "save_model",
    "load_model",
]

BLOWUP_NORM = 1e9


class TimeDomain(enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class SimulationError(RuntimeError):
    """Trajectory left the finite range or the integrator gave up."""


# ---------------------------------------------------------------------------
# nonlinearity catalog (JSON-addressable ground-truth nonlinearities)

def _surge_phi(params):
    def f(t, z):
        z = np.atleast_1d(z)
        return 0.5 * z**3 + 1.5 * z**2 + 1.125 * z
    return f


def _tanh(params):
    scale = float(params.get("scale", 1.0))
    slope = float(params.get("slope", 1.0))
    return lambda t, z: scale * np.tanh(slope * np.atleast_1d(z))


def _sin(params):
    scale = float(params.get("scale", 1.0))
    return lambda t, z: scale * np.sin(np.atleast_1d(z))


def _cubic(params):
    scale = float(params.get("scale", 1.0))
    return lambda t, z: scale * np.atleast_1d(z) ** 3


def _zero(params):
    return lambda t, z: np.zeros_like(np.atleast_1d(z))


def _linear(params):
    gain = as_matrix(params["gain"], "gain")
    return lambda t, z: gain @ np.atleast_1d(z)


def _sector_tanh(params):
    # stays in the sector [k1, k2]: f = mid*z + half*tanh(z), |tanh z| <= |z|
    k1 = float(params["k1"])
    k2 = float(params["k2"])
    mid, half = 0.5 * (k1 + k2), 0.5 * (k2 - k1)
    return lambda t, z: mid * np.atleast_1d(z) + half * np.tanh(np.atleast_1d(z))


NONLINEARITY_CATALOG = {
    "surge_phi": _surge_phi,
    "tanh": _tanh,
    "sin": _sin,
    "cubic": _cubic,
    "zero": _zero,
    "linear": _linear,
    "sector_tanh": _sector_tanh,
}


def make_nonlinearity(name: str, params: Optional[dict] = None) -> Callable:
    if name not in NONLINEARITY_CATALOG:
        raise KeyError(
            f"unknown nonlinearity {name!r}; catalog: {sorted(NONLINEARITY_CATALOG)}"
        )
    return NONLINEARITY_CATALOG[name](params or {})


# ---------------------------------------------------------------------------
# core types

@dataclass(frozen=True)
class PlantModel:
    """Ground-truth plant x+ (or dx/dt) = A x + B u + L f(t, Hx)."""

    a: np.ndarray
    b: np.ndarray
    l: np.ndarray
    h: np.ndarray
    f: Callable = field(compare=False)
    time_domain: TimeDomain = TimeDomain.DISCRETE
    nonlinearity: Optional[dict] = None   # {name, params} when catalog-backed
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        n = a.shape[0]
        if a.shape[1] != n:
            raise MatrixError("A must be square")
        b = as_matrix(self.b, "B")
        l = as_matrix(self.l, "L")
        h = as_matrix(self.h, "H")
        if b.shape[0] != n or l.shape[0] != n or h.shape[1] != n:
            raise MatrixError("B, L rows and H columns must match the state dimension")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "h", h)
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=float).reshape(-1)
            if x0.size != n:
                raise MatrixError("x0 length must match the state dimension")
            object.__setattr__(self, "x0", x0)
        # spot check: admissible nonlinearities vanish at z = 0
        for t in (0.0, 1.0):
            v = np.atleast_1d(self.f(t, np.zeros(self.p)))
            if v.shape != (self.q,):
                raise MatrixError(
                    f"nonlinearity must return {self.q} values, got shape {v.shape}"
                )
            if np.linalg.norm(v) > 1e-9:
                raise MatrixError("nonlinearity violates f(t, 0) = 0")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def q(self) -> int:
        return self.l.shape[1]

    @property
    def p(self) -> int:
        return self.h.shape[0]

    def rhs(self, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        v = np.atleast_1d(self.f(t, self.h @ x))
        return self.a @ x + self.b @ u + self.l @ v


@dataclass(frozen=True)
class Trajectory:
    """Per-sample experiment records; all arrays share the column count.

    For discrete time ``final_state`` holds x(T) so that shifted states are
    available; for continuous time ``derivatives`` holds dx/dt at `times`.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    nonlinearity_outputs: np.ndarray
    time_domain: TimeDomain
    derivatives: Optional[np.ndarray] = None
    final_state: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise MatrixError("trajectory times must be strictly increasing")
        cols = t.size
        for name in ("states", "inputs", "nonlinearity_outputs"):
            arr = as_matrix(getattr(self, name), name)
            if arr.shape[1] != cols:
                raise MatrixError(f"{name} must have {cols} columns")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "times", t)
        if self.derivatives is not None:
            d = as_matrix(self.derivatives, "derivatives")
            if d.shape != self.states.shape:
                raise MatrixError("derivatives must match states in shape")
            object.__setattr__(self, "derivatives", d)

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class DataSet:
    """Experiment data matrices: inputs, states, shifted states or
    derivatives, and nonlinearity samples."""

    u0: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    f0: np.ndarray
    time_domain: TimeDomain
    sample_times: Optional[np.ndarray] = None

    def __post_init__(self):
        u0 = as_matrix(self.u0, "U0")
        x0 = as_matrix(self.x0, "X0")
        x1 = as_matrix(self.x1, "X1")
        f0 = as_matrix(self.f0, "F0")
        cols = {u0.shape[1], x0.shape[1], x1.shape[1], f0.shape[1]}
        if len(cols) != 1 or cols.pop() < 1:
            raise MatrixError("U0, X0, X1, F0 must share a column count T >= 1")
        if x1.shape[0] != x0.shape[0]:
            raise MatrixError("X0 and X1 must have the same number of rows")
        if self.time_domain is TimeDomain.CONTINUOUS:
            if self.sample_times is None:
                raise MatrixError("continuous-time datasets require sample_times")
        if self.sample_times is not None:
            st = np.asarray(self.sample_times, dtype=float).reshape(-1)
            if st.size != x0.shape[1]:
                raise MatrixError("sample_times length must equal T")
            object.__setattr__(self, "sample_times", st)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "f0", f0)

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    @property
    def m(self) -> int:
        return self.u0.shape[0]

    @property
    def q(self) -> int:
        return self.f0.shape[0]

    @property
    def samples(self) -> int:
        return self.x0.shape[1]

    def w0(self) -> np.ndarray:
        return np.vstack([self.u0, self.x0])

    def psi0(self) -> np.ndarray:
        return np.vstack([self.x0, self.f0, self.u0])

    def scale(self) -> float:
        return max(1.0, *(float(np.abs(m).max())
                          for m in (self.u0, self.x0, self.x1, self.f0)))


@dataclass(frozen=True)
class AssumptionReport:
    rank_w0: int
    full_w0: bool
    rank_psi0: int
    full_psi0: bool
    rank_x0: int
    full_x0: bool


# ---------------------------------------------------------------------------
# simulation

def simulate_discrete(model: PlantModel, x0, inputs) -> Trajectory:
    """Iterate the plant for one input column per step."""
    if model.time_domain is not TimeDomain.DISCRETE:
        raise MatrixError("simulate_discrete requires a discrete-time model")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u = as_matrix(inputs, "inputs")
    if u.shape[0] != model.m:
        raise MatrixError(f"inputs must have {model.m} rows")
    steps = u.shape[1]
    states = np.empty((model.n, steps))
    outputs = np.empty((model.q, steps))
    x = x0
    for k in range(steps):
        states[:, k] = x
        v = np.atleast_1d(model.f(float(k), model.h @ x))
        outputs[:, k] = v
        x = model.a @ x + model.b @ u[:, k] + model.l @ v
        if not np.isfinite(x).all() or np.linalg.norm(x) > BLOWUP_NORM:
            raise SimulationError(f"state diverged at step {k + 1}")
    return Trajectory(
        times=np.arange(steps, dtype=float),
        states=states,
        inputs=u,
        nonlinearity_outputs=outputs,
        time_domain=TimeDomain.DISCRETE,
        final_state=x,
    )


def simulate_continuous(
    model: PlantModel,
    x0,
    u: Callable[[float], np.ndarray],
    horizon: tuple,
    at_times=None,
    tol: float = 1e-10,
) -> Trajectory:
    """Adaptive high-order integration; derivatives recorded exactly.

    ``at_times`` selects the output grid (default: 201 uniform points).
    Each recorded derivative is A x + B u(t) + L f(t, Hx) evaluated at the
    integrated state, not a finite difference.
    """
    if model.time_domain is not TimeDomain.CONTINUOUS:
        raise MatrixError("simulate_continuous requires a continuous-time model")
    t0, tf = float(horizon[0]), float(horizon[1])
    if tf <= t0:
        raise MatrixError("horizon must satisfy tf > t0")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if at_times is None:
        at_times = np.linspace(t0, tf, 201)
    ts = np.asarray(at_times, dtype=float).reshape(-1)

    def u_vec(t):
        return np.atleast_1d(np.asarray(u(t), dtype=float))

    def rhs(t, x):
        return model.rhs(t, x, u_vec(t))

    def blow_up(t, x):
        return BLOWUP_NORM - float(np.abs(x).max())

    blow_up.terminal = True
    sol = solve_ivp(
        rhs, (t0, tf), x0, method="DOP853", rtol=tol, atol=tol,
        dense_output=True, events=blow_up,
    )
    if sol.status == 1:
        raise SimulationError(f"state diverged near t = {sol.t_events[0][0]:.6g}")
    if sol.status != 0:
        raise SimulationError(f"integration failed at t = {sol.t[-1]:.6g}: {sol.message}")

    states = sol.sol(ts)
    inputs = np.column_stack([u_vec(t) for t in ts])
    outputs = np.column_stack(
        [np.atleast_1d(model.f(t, model.h @ states[:, k])) for k, t in enumerate(ts)]
    )
    derivs = model.a @ states + model.b @ inputs + model.l @ outputs
    return Trajectory(
        times=ts,
        states=states,
        inputs=inputs,
        nonlinearity_outputs=outputs,
        time_domain=TimeDomain.CONTINUOUS,
        derivatives=derivs,
    )


def measure(model: PlantModel, times, states, inputs) -> DataSet:
    """Dataset from (time, state, input) samples measured through a model.

    Continuous time: X1 column k is A x_k + B u_k + L f(t_k, H x_k).
    Discrete time: X1 column k is the one-step successor of x_k.  Columns
    need not come from a single trajectory.
    """
    ts = np.asarray(times, dtype=float).reshape(-1)
    x = as_matrix(states, "states")
    u = as_matrix(inputs, "inputs")
    if x.shape[0] != model.n or u.shape[0] != model.m:
        raise MatrixError("states/inputs rows must match the model dimensions")
    if x.shape[1] != ts.size or u.shape[1] != ts.size:
        raise MatrixError("states, inputs and times must agree in sample count")
    f0 = np.column_stack(
        [np.atleast_1d(model.f(t, model.h @ x[:, k])) for k, t in enumerate(ts)]
    )
    x1 = model.a @ x + model.b @ u + model.l @ f0
    return DataSet(
        u0=u, x0=x, x1=x1, f0=f0,
        time_domain=model.time_domain,
        sample_times=ts,
    )


def collect_dataset(traj: Trajectory, samples=None) -> DataSet:
    """Assemble (U0, X0, X1, F0) from a trajectory.

    ``samples`` are column indices (any time domain) or sample times that
    must match trajectory times (continuous only).  Default: every column
    (discrete uses all recorded steps).
    """
    count = len(traj)
    if samples is None:
        idx = np.arange(count)
    else:
        samples = np.asarray(samples)
        if samples.dtype.kind in "iu":
            idx = samples.astype(int)
        elif traj.time_domain is TimeDomain.CONTINUOUS:
            idx = np.array([_match_time(traj.times, t) for t in samples.astype(float)])
        else:
            raise MatrixError("discrete trajectories are sampled by index")
    if idx.size < 1:
        raise MatrixError("at least one sample is required")
    if idx.min() < 0 or idx.max() >= count:
        raise MatrixError(f"sample index out of range 0..{count - 1}")

    x0 = traj.states[:, idx]
    u0 = traj.inputs[:, idx]
    f0 = traj.nonlinearity_outputs[:, idx]
    if traj.time_domain is TimeDomain.DISCRETE:
        if traj.final_state is None:
            raise MatrixError("discrete trajectory lacks the final state")
        shifted = np.column_stack([traj.states, traj.final_state])
        x1 = shifted[:, idx + 1]
        return DataSet(u0=u0, x0=x0, x1=x1, f0=f0, time_domain=TimeDomain.DISCRETE,
                       sample_times=traj.times[idx])
    if traj.derivatives is None:
        raise MatrixError("continuous trajectory lacks recorded derivatives")
    x1 = traj.derivatives[:, idx]
    return DataSet(u0=u0, x0=x0, x1=x1, f0=f0, time_domain=TimeDomain.CONTINUOUS,
                   sample_times=traj.times[idx])


def _match_time(times: np.ndarray, t: float) -> int:
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise MatrixError(f"requested sample time {t} not on the trajectory grid")
    return k


def check_assumptions(data: DataSet, tol: float = 1e-9) -> AssumptionReport:
    """Rank checks on the stacked data matrices W0 and Psi0."""
    w0 = data.w0()
    psi0 = data.psi0()
    rw = row_rank(w0, tol)
    rp = row_rank(psi0, tol)
    rx = row_rank(data.x0, tol)
    return AssumptionReport(
        rank_w0=rw, full_w0=rw == w0.shape[0],
        rank_psi0=rp, full_psi0=rp == psi0.shape[0],
        rank_x0=rx, full_x0=rx == data.n,
    )


# ---------------------------------------------------------------------------
# disk formats

_CSV_NAMES = {"U0": "u0", "X0": "x0", "X1": "x1", "F0": "f0"}


def save_dataset(data: DataSet, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for fname, attr in _CSV_NAMES.items():
        np.savetxt(directory / f"{fname}.csv", getattr(data, attr), delimiter=",")
    meta = {"time_domain": data.time_domain.value}
    if data.sample_times is not None:
        meta["sample_times"] = data.sample_times.tolist()
    with open(directory / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)


def load_dataset(directory) -> DataSet:
    directory = Path(directory)
    mats = {}
    for fname, attr in _CSV_NAMES.items():
        path = directory / f"{fname}.csv"
        if not path.exists():
            raise FileNotFoundError(f"dataset is missing {path.name}")
        mats[attr] = np.loadtxt(path, delimiter=",", ndmin=2)
    with open(directory / "meta.json") as fh:
        meta = json.load(fh)
    return DataSet(
        time_domain=TimeDomain(meta["time_domain"]),
        sample_times=meta.get("sample_times"),
        **mats,
    )


def save_model(model: PlantModel, path) -> None:
    if model.nonlinearity is None:
        raise MatrixError(
            "only catalog-backed nonlinearities are serializable; "
            "set PlantModel.nonlinearity = {'name': ..., 'params': ...}"
        )
    doc = {
        "A": model.a.tolist(),
        "B": model.b.tolist(),
        "L": model.l.tolist(),
        "H": model.h.tolist(),
        "time_domain": model.time_domain.value,
        "nonlinearity": model.nonlinearity,
    }
    if model.x0 is not None:
        doc["x0"] = model.x0.tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def load_model(path) -> PlantModel:
    with open(path) as fh:
        doc = json.load(fh)
    nl = doc["nonlinearity"]
    f = make_nonlinearity(nl["name"], nl.get("params"))
    return PlantModel(
        a=np.asarray(doc["A"], dtype=float),
        b=np.asarray(doc["B"], dtype=float),
        l=np.asarray(doc["L"], dtype=float),
        h=np.asarray(doc["H"], dtype=float),
        f=f,
        time_domain=TimeDomain(doc["time_domain"]),
        nonlinearity=nl,
        x0=doc.get("x0"),
    )
