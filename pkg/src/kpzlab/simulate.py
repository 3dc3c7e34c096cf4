"""Continuous-time TASEP: event-driven simulation, heights, 1:2:3 rescaling.

Particles jump right at rate 1 when the target site is free, labels increase
to the left.  The event loop keeps one exponential alarm per unblocked
particle; alarms are regenerated lazily (memorylessness makes that exact in
law).  Randomness is counter-based and keyed by (seed, particle label), so a
trajectory is reproducible no matter how runs are scheduled.

The hot loop compiles under numba when available and runs as plain Python
otherwise; both paths execute the same function body.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(f):
            return f

        return deco


_MASK = 0xFFFFFFFFFFFFFFFF
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_NEG53 = 2.0**-53

LIGHT_CONE_FACTOR = 10  # tracked particles per unit time beyond the window


def _mix_int(z: int) -> int:
    """splitmix64 finalizer on plain ints (setup path, exact)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def stream_base(seed: int, label: int) -> int:
    """Per-particle stream key; mixing keeps streams decorrelated."""
    s = _mix_int(int(seed) & _MASK)
    lab = _mix_int((int(label) * 0x9E3779B97F4A7C15 + 0x7F4A7C15) & _MASK)
    return _mix_int(s ^ lab)


def _core_body(pos, base, t0, t_end, record, ev_cap):
    """Event loop shared by the jitted and pure builds.

    pos: int64 positions, strictly decreasing (index 0 = rightmost).
    base: uint64 per-particle stream keys.  Returns (time_of_last_event or
    t_end, events_time, events_index, events_pos, n_events).
    """
    n = pos.shape[0]
    counter = np.zeros(n, dtype=np.uint64)
    armed = np.zeros(n, dtype=np.bool_)
    heap_t = np.empty(n, dtype=np.float64)
    heap_i = np.empty(n, dtype=np.int64)
    size = 0

    ev_t = np.empty(ev_cap if record else 0, dtype=np.float64)
    ev_i = np.empty(ev_cap if record else 0, dtype=np.int64)
    ev_x = np.empty(ev_cap if record else 0, dtype=np.int64)
    n_ev = 0

    for i in range(n):
        if i == 0 or pos[i - 1] - pos[i] >= 2:
            z = base[i] + (counter[i] + _ONE) * _GOLD
            z = (z ^ (z >> _S30)) * _MIX1
            z = (z ^ (z >> _S27)) * _MIX2
            z = z ^ (z >> _S31)
            counter[i] += _ONE
            u = float(z >> _S11) * _TWO_NEG53
            t_next = t0 - math.log(1.0 - u)
            # push
            j = size
            heap_t[j] = t_next
            heap_i[j] = i
            size += 1
            while j > 0:
                p = (j - 1) >> 1
                if heap_t[p] <= heap_t[j]:
                    break
                heap_t[p], heap_t[j] = heap_t[j], heap_t[p]
                heap_i[p], heap_i[j] = heap_i[j], heap_i[p]
                j = p
            armed[i] = True

    t_now = t0
    while size > 0:
        t_min = heap_t[0]
        if t_min > t_end:
            break
        i = heap_i[0]
        # pop root
        size -= 1
        heap_t[0] = heap_t[size]
        heap_i[0] = heap_i[size]
        j = 0
        while True:
            lft = 2 * j + 1
            if lft >= size:
                break
            small = lft
            rgt = lft + 1
            if rgt < size and heap_t[rgt] < heap_t[lft]:
                small = rgt
            if heap_t[j] <= heap_t[small]:
                break
            heap_t[j], heap_t[small] = heap_t[small], heap_t[j]
            heap_i[j], heap_i[small] = heap_i[small], heap_i[j]
            j = small
        # armed particles always have a free target site: the gap ahead can
        # only have grown since arming
        pos[i] += 1
        t_now = t_min
        armed[i] = False
        if record:
            if n_ev >= ev_t.shape[0]:
                new_cap = 2 * ev_t.shape[0] if ev_t.shape[0] > 0 else 1024
                tmp_t = np.empty(new_cap, dtype=np.float64)
                tmp_i = np.empty(new_cap, dtype=np.int64)
                tmp_x = np.empty(new_cap, dtype=np.int64)
                tmp_t[:n_ev] = ev_t[:n_ev]
                tmp_i[:n_ev] = ev_i[:n_ev]
                tmp_x[:n_ev] = ev_x[:n_ev]
                ev_t, ev_i, ev_x = tmp_t, tmp_i, tmp_x
            ev_t[n_ev] = t_min
            ev_i[n_ev] = i
            ev_x[n_ev] = pos[i]
            n_ev += 1
        # lazily re-arm: the jumper if still free ahead, and the follower if
        # this jump just unblocked it
        for k in range(2):
            cand = i + k
            if cand >= n or armed[cand]:
                continue
            if cand > 0 and pos[cand - 1] - pos[cand] < 2:
                continue
            z = base[cand] + (counter[cand] + _ONE) * _GOLD
            z = (z ^ (z >> _S30)) * _MIX1
            z = (z ^ (z >> _S27)) * _MIX2
            z = z ^ (z >> _S31)
            counter[cand] += _ONE
            u = float(z >> _S11) * _TWO_NEG53
            t_next = t_min - math.log(1.0 - u)
            j = size
            heap_t[j] = t_next
            heap_i[j] = cand
            size += 1
            while j > 0:
                p = (j - 1) >> 1
                if heap_t[p] <= heap_t[j]:
                    break
                heap_t[p], heap_t[j] = heap_t[j], heap_t[p]
                heap_i[p], heap_i[j] = heap_i[j], heap_i[p]
                j = p
            armed[cand] = True

    return t_now, ev_t, ev_i, ev_x, n_ev


_core_py = _core_body
if HAVE_NUMBA:
    _core_jit = njit(cache=True)(_core_body)
else:  # pragma: no cover
    _core_jit = _core_body


def _run_core(pos, base, t0, t_end, record, ev_cap, pure=False):
    if pure or not HAVE_NUMBA:
        with np.errstate(over="ignore"):
            return _core_py(pos, base, t0, t_end, record, ev_cap)
    return _core_jit(pos, base, t0, t_end, record, ev_cap)


@dataclass(frozen=True)
class InitialData:
    """Right-finite initial configuration X_0(1) > X_0(2) > ...

    `kind` is one of step/periodic/explicit.  Step is X_0(k) = -k; periodic
    with gap d >= 2 is X_0(k) = -d(k-1); explicit stores the entries, which
    may include +inf leading entries (those are meaningful to the exact
    solvers but not simulatable).
    """

    kind: str
    d: int | None = None
    entries: tuple | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("step", "periodic", "explicit"):
            raise ValueError(f"unknown initial data kind: {self.kind!r}")
        if self.kind == "periodic":
            if self.d is None or self.d < 2:
                raise ValueError("periodic data needs an integer gap d >= 2")
        if self.kind == "explicit":
            if not self.entries:
                raise ValueError("explicit data needs entries")
            if any(e == -math.inf for e in self.entries):
                raise ValueError("-inf entries not allowed")
            seen_finite = False
            for e in self.entries:
                if math.isinf(e):
                    if seen_finite:
                        raise ValueError("+inf entries must lead")
                else:
                    seen_finite = True
            finite = [e for e in self.entries if not math.isinf(e)]
            if any(finite[i] <= finite[i + 1] for i in range(len(finite) - 1)):
                raise ValueError("explicit entries must be strictly decreasing")

    def entry(self, k: int) -> float:
        """X_0(k), 1-based label."""
        if k < 1:
            raise ValueError("labels start at 1")
        if self.kind == "step":
            return -k
        if self.kind == "periodic":
            return -self.d * (k - 1)
        if k > len(self.entries):
            raise ValueError(f"label {k} beyond explicit data")
        return self.entries[k - 1]

    @property
    def n_finite(self) -> float:
        if self.kind == "explicit":
            return sum(1 for e in self.entries if not math.isinf(e))
        return math.inf

    def anchor(self) -> int:
        """X_0^{-1}(-1) = min{k : X_0(k) <= -1}.

        For a complete finite family with every particle right of -1 this is
        N+1 (the empty half-line below the last particle is determined).
        """
        if self.kind == "step":
            return 1
        if self.kind == "periodic":
            return 2
        for k, e in enumerate(self.entries, start=1):
            if e <= -1:
                return k
        return len(self.entries) + 1


@dataclass
class ParticleState:
    """Ordered particle configuration at a fixed time."""

    positions: np.ndarray  # strictly decreasing, int64
    first_label: int
    time: float
    anchor0: int  # X_0^{-1}(-1) cached from the initial data
    complete: bool  # True if this is the whole family, not a truncation

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if self.positions.ndim != 1 or self.positions.size == 0:
            raise ValueError("need at least one particle")
        if np.any(np.diff(self.positions) >= 0):
            raise ValueError("positions must be strictly decreasing")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    @property
    def labels(self) -> np.ndarray:
        return self.first_label + np.arange(self.positions.size)

    def occupations(self, z_lo: int, z_hi: int) -> np.ndarray:
        """0/1 site occupation on [z_lo, z_hi] as seen by tracked particles."""
        out = np.zeros(z_hi - z_lo + 1, dtype=np.int64)
        for x in self.positions:
            if z_lo <= x <= z_hi:
                out[x - z_lo] = 1
        return out


@dataclass
class HeightField:
    """Integer height profile h(z) on a window starting at `anchor`."""

    anchor: int
    values: np.ndarray
    time: float

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.int64)
        steps = np.diff(self.values)
        if steps.size and not np.all(np.abs(steps) == 1):
            raise ValueError("height increments must be +-1")

    @property
    def z(self) -> np.ndarray:
        return self.anchor + np.arange(self.values.size)


def make_initial(kind: str, *, d: int | None = None, entries: Sequence | None = None) -> InitialData:
    return InitialData(kind, d=d, entries=tuple(entries) if entries is not None else None)


def particles_needed(init: InitialData, z_lo: int, duration: float) -> int:
    """Light-cone truncation: enough particles that the untracked ones cannot
    influence sites >= z_lo - 1 within `duration`."""
    in_window = 0
    k = 1
    while k <= init.n_finite and init.entry(k) >= z_lo - 1:
        in_window += 1
        k += 1
    need = in_window + int(math.ceil(LIGHT_CONE_FACTOR * duration)) + 8
    if init.n_finite != math.inf:
        need = min(need, int(init.n_finite))
    return max(need, 1)


def initial_state(
    init: InitialData,
    n_particles: int | None = None,
    z_lo: int | None = None,
    duration: float | None = None,
) -> ParticleState:
    """Materialize a tracked configuration at time 0.

    Either pass n_particles directly or (z_lo, duration) for the light-cone
    rule.  Explicit data is always materialized in full.
    """
    if init.kind == "explicit":
        if any(math.isinf(e) for e in init.entries):
            raise ValueError("cannot simulate data with +inf entries")
        pos = np.array(init.entries, dtype=np.int64)
        return ParticleState(pos, 1, 0.0, init.anchor(), complete=True)
    if n_particles is None:
        if z_lo is None or duration is None:
            raise ValueError("need n_particles or (z_lo, duration)")
        n_particles = particles_needed(init, z_lo, duration)
    pos = np.array([init.entry(k) for k in range(1, n_particles + 1)], dtype=np.int64)
    return ParticleState(pos, 1, 0.0, init.anchor(), complete=False)


def evolve(state: ParticleState, duration: float, seed: int, pure: bool = False) -> ParticleState:
    """Run the dynamics for `duration`; returns a new state."""
    new_state, _ = _evolve_impl(state, duration, seed, record=False, pure=pure)
    return new_state


def evolve_events(
    state: ParticleState, duration: float, seed: int, pure: bool = False
) -> tuple[ParticleState, np.ndarray]:
    """Like evolve, but also returns the jump log as a structured array with
    fields (time, label, position)."""
    return _evolve_impl(state, duration, seed, record=True, pure=pure)


def _evolve_impl(state, duration, seed, record, pure):
    if duration < 0:
        raise ValueError("duration must be >= 0")
    pos = state.positions.copy()
    n = pos.size
    base = np.empty(n, dtype=np.uint64)
    for i in range(n):
        base[i] = stream_base(seed, state.first_label + i)
    t0 = state.time
    _, ev_t, ev_i, ev_x, n_ev = _run_core(
        pos, base, t0, t0 + duration, record, 4096, pure=pure
    )
    new_state = ParticleState(
        pos, state.first_label, t0 + duration, state.anchor0, state.complete
    )
    events = np.empty(
        n_ev, dtype=[("time", np.float64), ("label", np.int64), ("position", np.int64)]
    )
    events["time"] = ev_t[:n_ev]
    events["label"] = state.first_label + ev_i[:n_ev]
    events["position"] = ev_x[:n_ev]
    return new_state, events


def inverse_label(state: ParticleState, z: int) -> int:
    """X_t^{-1}(z) = min{k : X_t(k) <= z}; raises outside the determined region."""
    pos = state.positions
    # positions decrease with index; find first index with pos <= z
    idx = np.searchsorted(-pos, -z, side="left")
    if idx == pos.size:
        if state.complete:
            return state.first_label + pos.size
        raise ValueError(
            f"site {z} lies below every tracked particle; enlarge the truncation"
        )
    return state.first_label + int(idx)


def height(state: ParticleState, z_lo: int, z_hi: int) -> HeightField:
    """h_t(z) = -2(X_t^{-1}(z-1) - X_0^{-1}(-1)) - z on [z_lo, z_hi]."""
    if z_hi < z_lo:
        raise ValueError("empty window")
    vals = np.empty(z_hi - z_lo + 1, dtype=np.int64)
    for j, z in enumerate(range(z_lo, z_hi + 1)):
        vals[j] = -2 * (inverse_label(state, z - 1) - state.anchor0) - z
    return HeightField(z_lo, vals, state.time)


@dataclass
class RescaledHeight:
    """h^eps(t, x) sampled on the rescaled lattice, linearly interpolated."""

    eps: float
    t: float
    x: np.ndarray
    values: np.ndarray

    def __call__(self, x) -> np.ndarray:
        xq = np.asarray(x, dtype=float)
        if np.any(xq < self.x[0]) or np.any(xq > self.x[-1]):
            raise ValueError("requested x outside the simulated window")
        return np.interp(xq, self.x, self.values)


def rescale_height(h: HeightField, eps: float, t: float) -> RescaledHeight:
    """h^eps(t,x) = eps^{1/2} [h_{2 eps^{-3/2} t}(2 eps^{-1} x) + eps^{-3/2} t]."""
    if not 0 < eps <= 1:
        raise ValueError("need 0 < eps <= 1")
    t_micro = 2.0 * eps ** -1.5 * t
    if not math.isclose(h.time, t_micro, rel_tol=1e-9, abs_tol=1e-9):
        raise ValueError(
            f"height was computed at time {h.time}, rescaling needs {t_micro}"
        )
    x = 0.5 * eps * h.z
    vals = math.sqrt(eps) * (h.values + eps ** -1.5 * t)
    return RescaledHeight(eps, t, x, vals)


def write_trajectory_csv(events: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("time,label,position\n")
        for row in events:
            fh.write(f"{row['time']:.17g},{row['label']},{row['position']}\n")


def write_height_csv(h: HeightField, path) -> None:
    with open(path, "w") as fh:
        fh.write("z,h\n")
        for z, v in zip(h.z, h.values):
            fh.write(f"{z},{v}\n")


def config_to_json(init: InitialData, duration: float, seed: int, window: tuple[int, int]) -> str:
    params: dict = {}
    if init.kind == "periodic":
        params["d"] = init.d
    if init.kind == "explicit":
        params["entries"] = list(init.entries)
    return json.dumps(
        {
            "kind": init.kind,
            "params": params,
            "duration": duration,
            "seed": seed,
            "window": list(window),
        }
    )


def config_from_json(text: str) -> tuple[InitialData, float, int, tuple[int, int]]:
    obj = json.loads(text)
    params = obj.get("params", {})
    init = make_initial(
        obj["kind"], d=params.get("d"), entries=params.get("entries")
    )
    lo, hi = obj["window"]
    return init, float(obj["duration"]), int(obj["seed"]), (int(lo), int(hi))
