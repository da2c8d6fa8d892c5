"""Time evolution of the four-mode walk on the integer line.

State layout: a walker state is a dict mapping integer position to a
complex amplitude vector of length 4 in the fixed mode order

    0: cH   1: cV   2: ccH   3: ccV

One time step applies the position/time dependent coin first and the
flip-flop shift second.  The shift exchanges direction subspaces:

    cH @ x  -> ccH @ x-1        ccH @ x -> cH @ x+1
    cV @ x  -> ccV @ x+1        ccV @ x -> cV @ x-1

so applying it twice is the identity.  Amplitudes are never pruned;
whatever positions appear in the dict stay there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .optics import ArmSetting, OpticalElement, arm_operator, full_coin, loop_operator

CH, CV, CCH, CCV = 0, 1, 2, 3
MODE_NAMES = ("cH", "cV", "ccH", "ccV")

# effective two-mode walks use (R, L) component order
R2, L2 = 0, 1

WalkerState = dict  # position -> complex (4,) amplitudes
Effective2DState = dict  # position -> complex (2,) amplitudes


class ProgramError(KeyError):
    """Raised when a coin program cannot resolve a (step, position) query."""


@dataclass(frozen=True)
class RawCoin:
    """Coin given directly as a unitary 4x4 matrix."""

    matrix_value: np.ndarray

    def matrix(self) -> np.ndarray:
        return self.matrix_value

    def perturbed(self, rng, angle_err_deg, distribution):
        raise ValueError("raw-matrix coins carry no element angles to perturb")

    @property
    def has_elements(self) -> bool:
        return False


@dataclass(frozen=True)
class ElementCoin:
    """Coin assembled from arm settings and loop elements.

    Keeping the element-level description around (instead of collapsing to
    a matrix immediately) is what makes angle-uncertainty sampling possible.
    """

    arm_a: ArmSetting
    arm_b: ArmSetting
    loop: tuple[OpticalElement, ...] = ()
    eom_first: bool = False

    def __post_init__(self):
        object.__setattr__(self, "loop", tuple(self.loop))

    def matrix(self) -> np.ndarray:
        return full_coin(
            arm_operator(self.arm_a, eom_first=self.eom_first),
            arm_operator(self.arm_b, eom_first=self.eom_first),
            loop_operator(self.loop),
        )

    def angles(self) -> list[float]:
        """All element parameters in a fixed documented order.

        Order: arm A waveplates, arm A modulator phase, arm B waveplates,
        arm B modulator phase, loop elements.
        """
        vals = [el.parameter_deg for el in self.arm_a.waveplates]
        vals.append(self.arm_a.eom_phase_deg)
        vals += [el.parameter_deg for el in self.arm_b.waveplates]
        vals.append(self.arm_b.eom_phase_deg)
        vals += [el.parameter_deg for el in self.loop]
        return vals

    def with_angles(self, vals: Sequence[float]) -> "ElementCoin":
        vals = list(vals)
        expect = len(self.angles())
        if len(vals) != expect:
            raise ValueError(f"expected {expect} angles, got {len(vals)}")
        it = iter(vals)
        wp_a = tuple(OpticalElement(el.kind, next(it)) for el in self.arm_a.waveplates)
        eom_a = next(it)
        wp_b = tuple(OpticalElement(el.kind, next(it)) for el in self.arm_b.waveplates)
        eom_b = next(it)
        loop = tuple(OpticalElement(el.kind, next(it)) for el in self.loop)
        return ElementCoin(
            ArmSetting(wp_a, eom_a), ArmSetting(wp_b, eom_b), loop, self.eom_first
        )

    def perturbed(self, rng: np.random.Generator, angle_err_deg: float, distribution: str) -> "ElementCoin":
        base = self.angles()
        if distribution == "uniform":
            jitter = rng.uniform(-angle_err_deg, angle_err_deg, size=len(base))
        elif distribution == "truncated_normal":
            # sigma = err/2, resampled into the +-err window
            jitter = np.empty(len(base))
            for i in range(len(base)):
                while True:
                    d = rng.normal(0.0, angle_err_deg / 2.0)
                    if abs(d) <= angle_err_deg:
                        jitter[i] = d
                        break
        else:
            raise ValueError(f"unknown perturbation distribution {distribution!r}")
        return self.with_angles([b + j for b, j in zip(base, jitter)])

    @property
    def has_elements(self) -> bool:
        return True


class CoinProgram:
    """Resolver from (step, position) to a 4x4 coin.

    Resolution order: an entry of `time_table` indexed by step wins when
    present (uniform over positions); otherwise `overrides` keyed by
    position; otherwise `default`.  A query that reaches no rule raises
    ProgramError naming the offending step and position.
    """

    def __init__(
        self,
        default=None,
        overrides: Optional[Mapping[int, object]] = None,
        time_table: Optional[Sequence[object]] = None,
    ):
        self.default = default
        self.overrides = dict(overrides) if overrides else {}
        self.time_table = list(time_table) if time_table is not None else None
        self._cache: dict[int, np.ndarray] = {}

    def spec_at(self, t: int, x: int):
        if self.time_table is not None and 0 <= t < len(self.time_table):
            return self.time_table[t]
        if x in self.overrides:
            return self.overrides[x]
        if self.default is not None:
            return self.default
        raise ProgramError(f"no coin rule for step {t} at position {x}")

    def coin_at(self, t: int, x: int) -> np.ndarray:
        spec = self.spec_at(t, x)
        key = id(spec)
        m = self._cache.get(key)
        if m is None:
            m = np.asarray(spec.matrix(), dtype=complex)
            self._cache[key] = m
        return m

    def all_specs(self) -> list:
        """Distinct coin specs in documented enumeration order.

        Order: default, overrides by ascending position, time table entries.
        Duplicates (same object) are listed once.
        """
        seen: dict[int, object] = {}
        out = []

        def add(spec):
            if spec is not None and id(spec) not in seen:
                seen[id(spec)] = spec
                out.append(spec)

        add(self.default)
        for x in sorted(self.overrides):
            add(self.overrides[x])
        if self.time_table is not None:
            for spec in self.time_table:
                add(spec)
        return out

    def perturbed(self, rng: np.random.Generator, angle_err_deg: float, distribution: str = "uniform") -> "CoinProgram":
        """New program with every element angle independently jittered.

        Each distinct coin spec is perturbed once and reused wherever it
        appeared, so a shared position class shares its draw.
        """
        mapping: dict[int, object] = {}
        for spec in self.all_specs():
            mapping[id(spec)] = spec.perturbed(rng, angle_err_deg, distribution)
        default = mapping.get(id(self.default)) if self.default is not None else None
        overrides = {x: mapping[id(s)] for x, s in self.overrides.items()}
        time_table = (
            [mapping[id(s)] for s in self.time_table] if self.time_table is not None else None
        )
        return CoinProgram(default=default, overrides=overrides, time_table=time_table)

    @property
    def has_elements(self) -> bool:
        return all(spec.has_elements for spec in self.all_specs())


def constant_program(coin_matrix: np.ndarray) -> CoinProgram:
    return CoinProgram(default=RawCoin(np.asarray(coin_matrix, dtype=complex)))


class IntensityRecord:
    """Per-step intensity tables of one walk run.

    `steps[t]` maps position to a float vector of the four mode intensities
    after t time steps; index 0 is the initial state.
    """

    def __init__(self, steps: list):
        self.steps = steps

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def num_steps(self) -> int:
        return len(self.steps) - 1

    def intensity(self, t: int) -> dict:
        return self.steps[t]

    def positions(self, t: int) -> list:
        return sorted(self.steps[t])

    def total(self, t: int) -> float:
        return float(sum(np.sum(v) for v in self.steps[t].values()))

    def position_distribution(self, t: int) -> dict:
        return {x: float(np.sum(v)) for x, v in self.steps[t].items()}


def _intensities(state: WalkerState) -> dict:
    return {x: np.abs(a) ** 2 for x, a in state.items()}


def make_initial(direction: str, polarization: str, position: int = 0) -> WalkerState:
    """Localized initial state at `position`.

    direction: 'cw'/'c' or 'ccw'/'cc'; polarization: H, V, D, A with
    D = (H+V)/sqrt2 and A = (H-V)/sqrt2.
    """
    d = direction.lower()
    if d in ("cw", "c"):
        base = CH
    elif d in ("ccw", "cc"):
        base = CCH
    else:
        raise ValueError(f"unknown direction {direction!r}")
    amp = np.zeros(4, dtype=complex)
    p = polarization.upper()
    if p == "H":
        amp[base] = 1.0
    elif p == "V":
        amp[base + 1] = 1.0
    elif p == "D":
        amp[base] = 1.0 / np.sqrt(2.0)
        amp[base + 1] = 1.0 / np.sqrt(2.0)
    elif p == "A":
        amp[base] = 1.0 / np.sqrt(2.0)
        amp[base + 1] = -1.0 / np.sqrt(2.0)
    else:
        raise ValueError(f"unknown polarization {polarization!r}")
    return {int(position): amp}


def apply_coin(state: WalkerState, program: CoinProgram, t: int) -> WalkerState:
    out: WalkerState = {}
    for x, amp in state.items():
        out[x] = program.coin_at(t, x) @ amp
    return out


def apply_step(state: WalkerState) -> WalkerState:
    out: WalkerState = {}

    def acc(x, mode, val):
        vec = out.get(x)
        if vec is None:
            vec = np.zeros(4, dtype=complex)
            out[x] = vec
        vec[mode] += val

    for x, amp in state.items():
        if amp[CH] != 0.0:
            acc(x - 1, CCH, amp[CH])
        if amp[CV] != 0.0:
            acc(x + 1, CCV, amp[CV])
        if amp[CCH] != 0.0:
            acc(x + 1, CH, amp[CCH])
        if amp[CCV] != 0.0:
            acc(x - 1, CV, amp[CCV])
    return out


def evolve_states(initial: WalkerState, program: CoinProgram, steps: int):
    """Yield the state after 0, 1, ..., steps time steps."""
    state = {x: np.array(a, dtype=complex) for x, a in initial.items()}
    yield state
    for t in range(steps):
        state = apply_step(apply_coin(state, program, t))
        yield state


def evolve(initial: WalkerState, program: CoinProgram, steps: int) -> IntensityRecord:
    return IntensityRecord([_intensities(s) for s in evolve_states(initial, program, steps)])


def final_state(initial: WalkerState, program: CoinProgram, steps: int) -> WalkerState:
    state = None
    for state in evolve_states(initial, program, steps):
        pass
    return state


def effective_2d_evolve(initial: Effective2DState, coin: np.ndarray, steps: int):
    """Reference two-mode walk: coin then shift, R moves +1 and L moves -1.

    Returns a list over steps of {position: (2,) float intensities}.
    """
    coin = np.asarray(coin, dtype=complex)
    state = {x: np.array(a, dtype=complex) for x, a in initial.items()}
    record = [{x: np.abs(a) ** 2 for x, a in state.items()}]
    for _ in range(steps):
        new: Effective2DState = {}
        for x, amp in state.items():
            c = coin @ amp
            if c[R2] != 0.0:
                vec = new.setdefault(x + 1, np.zeros(2, dtype=complex))
                vec[R2] += c[R2]
            if c[L2] != 0.0:
                vec = new.setdefault(x - 1, np.zeros(2, dtype=complex))
                vec[L2] += c[L2]
        state = new
        record.append({x: np.abs(a) ** 2 for x, a in state.items()})
    return record


_TRACE_MODES = ("full", "sum_polarization", "sum_direction", "sum_all")


def trace_intensities(record: IntensityRecord, mode: str = "full"):
    """Collapse the mode axis of a record.

    full            -> keys (position, mode name)
    sum_polarization-> keys (position, 'c'|'cc')
    sum_direction   -> keys (position, 'H'|'V')
    sum_all         -> keys position
    """
    if mode not in _TRACE_MODES:
        raise ValueError(f"unknown trace mode {mode!r}; expected one of {_TRACE_MODES}")
    out = []
    for table in record.steps:
        row: dict = {}
        for x, v in table.items():
            if mode == "full":
                for i, name in enumerate(MODE_NAMES):
                    row[(x, name)] = float(v[i])
            elif mode == "sum_polarization":
                row[(x, "c")] = float(v[CH] + v[CV])
                row[(x, "cc")] = float(v[CCH] + v[CCV])
            elif mode == "sum_direction":
                row[(x, "H")] = float(v[CH] + v[CCH])
                row[(x, "V")] = float(v[CV] + v[CCV])
            else:
                row[x] = float(np.sum(v))
        out.append(row)
    return out
