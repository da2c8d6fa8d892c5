"""Momentum-space analysis of translation-invariant walks.

The walk operator at Bloch momentum k is U(k) = S(k) . C with the shift

    S(k) |cH>  = e^{-ik} |ccH>      S(k) |ccH> = e^{+ik} |cH>
    S(k) |cV>  = e^{+ik} |ccV>      S(k) |ccV> = e^{-ik} |cV>

(reading columns: the coefficient sits at row = target mode).  Bands are
eigenphases of U(k) connected across the sampled grid by maximal
eigenvector overlap, unwrapped so each branch is continuous; the exposed
values are the unwrapped phases (congruent mod 2pi to values in [-pi, pi)
at the anchor sample).

Wavefront speeds are the group velocities at inflection points of a band
(zeros of the second derivative).  Bands with numerically constant slope
(flat or strictly linear) have no isolated inflections and contribute
their constant velocity as a single wavefront.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .linalg_core import assert_unitary, wrap_phase
from .walk_engine import CH, CV, CCH, CCV

_PAD = 3  # grid samples kept on each side for derivative stencils
_STENCIL_DELTA = 1e-2
_BISECT_WIDTH = 1e-8
_LINEAR_BRANCH_TOL = 1e-9


def shift_bloch(k) -> np.ndarray:
    """Shift operator at momentum k; k may be scalar or an array (batched)."""
    k = np.asarray(k, dtype=float)
    out = np.zeros(k.shape + (4, 4), dtype=complex)
    out[..., CCH, CH] = np.exp(-1j * k)
    out[..., CCV, CV] = np.exp(1j * k)
    out[..., CH, CCH] = np.exp(1j * k)
    out[..., CV, CCV] = np.exp(-1j * k)
    return out


def bloch_operator(coin: np.ndarray, k) -> np.ndarray:
    """U(k) = S(k) . coin for a position-independent 4x4 coin."""
    coin = assert_unitary(np.asarray(coin, dtype=complex), name="bloch coin")
    if coin.shape != (4, 4):
        raise ValueError(f"expected a 4x4 coin, got {coin.shape}")
    return shift_bloch(k) @ coin


def _as_batched_bloch(coin_or_fn) -> Callable[[np.ndarray], np.ndarray]:
    """Normalize the input to a callable mapping a k array to (n, d, d)."""
    if callable(coin_or_fn):
        fn = coin_or_fn

        def batched(ks: np.ndarray) -> np.ndarray:
            ks = np.atleast_1d(np.asarray(ks, dtype=float))
            try:
                out = np.asarray(fn(ks), dtype=complex)
                if out.ndim == 3 and out.shape[0] == ks.shape[0]:
                    return out
            except Exception:
                pass
            return np.stack([np.asarray(fn(float(k)), dtype=complex) for k in ks])

        return batched
    coin = assert_unitary(np.asarray(coin_or_fn, dtype=complex), name="band coin")
    if coin.shape != (4, 4):
        raise ValueError(f"expected a 4x4 coin or a callable, got {coin.shape}")

    def batched_coin(ks: np.ndarray) -> np.ndarray:
        return shift_bloch(np.atleast_1d(ks)) @ coin

    return batched_coin


def _greedy_assign(weights: np.ndarray) -> np.ndarray:
    """perm[i] = column of the next sample continuing ordered branch i.

    Greedy maximum matching on the overlap magnitudes; adequate because
    off-branch overlaps are small away from exact degeneracies, and inside
    a degenerate cluster any assignment is equally valid.
    """
    d = weights.shape[0]
    w = weights.copy()
    perm = np.full(d, -1, dtype=int)
    for _ in range(d):
        i, j = np.unravel_index(np.argmax(w), w.shape)
        perm[i] = j
        w[i, :] = -1.0
        w[:, j] = -1.0
    return perm


class DispersionSpectrum:
    """Connected band structure on a uniform k grid over [-pi, pi).

    Attributes
    ----------
    k_grid : (n_k,) sample momenta
    omegas : (n_branches, n_k) unwrapped eigenphase branches
    vectors : (n_branches, n_k, dim) matching eigenvectors
    """

    def __init__(self, k_pad, omega_pad, vec_pad, bloch_fn, n_k):
        self._k_pad = k_pad
        self._omega_pad = omega_pad
        self._vec_pad = vec_pad
        self._bloch = bloch_fn
        self._n_k = n_k

    @property
    def k_grid(self) -> np.ndarray:
        return self._k_pad[_PAD:_PAD + self._n_k]

    @property
    def omegas(self) -> np.ndarray:
        return self._omega_pad[:, _PAD:_PAD + self._n_k]

    @property
    def vectors(self) -> np.ndarray:
        return self._vec_pad[:, _PAD:_PAD + self._n_k, :]

    @property
    def n_branches(self) -> int:
        return self._omega_pad.shape[0]

    @property
    def spacing(self) -> float:
        return float(self._k_pad[1] - self._k_pad[0])

    def local_omegas(self, ks: np.ndarray, ref_vecs: np.ndarray, ref_omegas: np.ndarray):
        """Branch-followed eigenphases at off-grid momenta.

        For each k, the eigenpair with maximal overlap against the given
        reference eigenvector is selected and its phase unwrapped to the
        2pi window of the reference omega.
        """
        ks = np.asarray(ks, dtype=float)
        u = self._bloch(ks)
        w, v = np.linalg.eig(u)
        ov = np.abs(np.einsum("ni,nid->nd", ref_vecs.conj(), v))
        j = np.argmax(ov, axis=1)
        rows = np.arange(len(ks))
        vec = v[rows, :, j]
        ph = np.angle(w[rows, j])
        om = ph + 2.0 * np.pi * np.round((np.asarray(ref_omegas) - ph) / (2.0 * np.pi))
        return om, vec


def band_structure(coin, n_k: int = 1024) -> DispersionSpectrum:
    """Eigenphase branches of U(k) on n_k uniform samples of [-pi, pi).

    Branches are connected sample-to-sample by maximal eigenvector overlap
    and unwrapped to be continuous.  Extra samples beyond both ends of the
    window are computed with the same connection so that derivative
    stencils never hit a seam.
    """
    if n_k < 64:
        raise ValueError(f"n_k must be at least 64, got {n_k}")
    bloch_fn = _as_batched_bloch(coin)
    h = 2.0 * np.pi / n_k
    idx = np.arange(-_PAD, n_k + _PAD)
    k_pad = -np.pi + h * idx
    m = len(k_pad)

    u = bloch_fn(k_pad)
    d = u.shape[-1]
    w, v = np.linalg.eig(u)

    # pairwise overlaps between consecutive samples, computed in one shot
    ov = np.abs(np.einsum("mij,mik->mjk", v[:-1].conj(), v[1:]))

    omega_pad = np.empty((d, m), dtype=float)
    vec_pad = np.empty((d, m, d), dtype=complex)

    ph0 = wrap_phase(np.angle(w[0]))
    order = np.argsort(ph0, kind="stable")
    omega_pad[:, 0] = ph0[order]
    for b in range(d):
        vec_pad[b, 0, :] = v[0][:, order[b]]
    cols = order.copy()

    for s in range(1, m):
        weights = ov[s - 1][cols, :]
        perm = _greedy_assign(weights)
        new_cols = perm
        ph = np.angle(w[s][new_cols])
        prev = omega_pad[:, s - 1]
        omega_pad[:, s] = ph + 2.0 * np.pi * np.round((prev - ph) / (2.0 * np.pi))
        for b in range(d):
            vec_pad[b, s, :] = v[s][:, new_cols[b]]
        cols = new_cols

    return DispersionSpectrum(k_pad, omega_pad, vec_pad, bloch_fn, n_k)


def group_velocities(spec: DispersionSpectrum) -> np.ndarray:
    """d omega / d k on the main grid, central differences plus one
    Richardson refinement (fourth-order accurate)."""
    om = spec._omega_pad
    h = spec.spacing
    d1 = (om[:, 2:] - om[:, :-2]) / (2.0 * h)    # centered at pad index 1..m-2
    d2 = (om[:, 4:] - om[:, :-4]) / (4.0 * h)    # centered at pad index 2..m-3
    rich = (4.0 * d1[:, 1:-1] - d2) / 3.0        # centered at pad index 2..m-3
    start = _PAD - 2
    return rich[:, start:start + spec._n_k]


@dataclass(frozen=True)
class Wavefront:
    branch: int
    k: Optional[float]          # None for constant-velocity branches
    speed: float


@dataclass
class WavefrontSet:
    """Distinct propagation-front speeds of a walk.

    speeds: cluster representatives, ascending; fronts: every detected
    inflection (or constant-slope branch) before merging.
    """

    speeds: np.ndarray
    fronts: list
    merge_tol: float

    def __len__(self) -> int:
        return len(self.speeds)


def _stencil_second(spec, ks, ref_vecs, ref_oms, delta=_STENCIL_DELTA):
    offs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * delta
    n = len(ks)
    pts = (ks[:, None] + offs[None, :]).ravel()
    rv = np.repeat(ref_vecs, 5, axis=0)
    ro = np.repeat(ref_oms, 5)
    om, _ = spec.local_omegas(pts, rv, ro)
    f = om.reshape(n, 5)
    return (-f[:, 0] + 16.0 * f[:, 1] - 30.0 * f[:, 2] + 16.0 * f[:, 3] - f[:, 4]) / (
        12.0 * delta * delta
    )


def _stencil_first(spec, ks, ref_vecs, ref_oms, delta=_STENCIL_DELTA):
    offs = np.array([-2.0, -1.0, 1.0, 2.0]) * delta
    n = len(ks)
    pts = (ks[:, None] + offs[None, :]).ravel()
    rv = np.repeat(ref_vecs, 4, axis=0)
    ro = np.repeat(ref_oms, 4)
    om, _ = spec.local_omegas(pts, rv, ro)
    f = om.reshape(n, 4)
    return (f[:, 0] - 8.0 * f[:, 1] + 8.0 * f[:, 2] - f[:, 3]) / (12.0 * delta)


def wavefront_speeds(spec: DispersionSpectrum, merge_tol: float = 1e-4) -> WavefrontSet:
    """Propagation-front speeds from band inflection points.

    Sign changes of the second derivative on the grid are bracketed and
    refined by bisection (on a five-point second-derivative stencil of the
    branch-followed band) until the bracket is narrower than 1e-8; the
    speed is the fourth-order first derivative at the refined point.
    Speeds from all branches are then clustered within merge_tol.
    """
    om = spec._omega_pad
    h = spec.spacing
    vg = group_velocities(spec)
    fronts: list[Wavefront] = []

    # second difference on the padded window
    om_pp = (om[:, 2:] - 2.0 * om[:, 1:-1] + om[:, :-2]) / (h * h)
    # pad-index alignment: om_pp[:, j] sits at grid point j+1

    brackets = []  # (branch, k_lo, k_hi, ref pad index)
    for b in range(spec.n_branches):
        v_row = vg[b]
        if np.max(np.abs(v_row - np.mean(v_row))) <= _LINEAR_BRANCH_TOL:
            fronts.append(Wavefront(branch=b, k=None, speed=float(np.mean(v_row))))
            continue
        row = om_pp[b]
        # main window plus one sample margin so seam-adjacent roots are kept
        lo_idx = _PAD - 1
        hi_idx = _PAD + spec._n_k
        for j in range(lo_idx, hi_idx):
            a, c = row[j - 1], row[j]
            if a == 0.0:
                # exact grid zero: treat as a degenerate tiny bracket
                brackets.append((b, spec._k_pad[j], spec._k_pad[j], j))
            elif a * c < 0.0:
                brackets.append((b, spec._k_pad[j], spec._k_pad[j + 1], j))

    if brackets:
        bs = np.array([br[0] for br in brackets])
        lo = np.array([br[1] for br in brackets])
        hi = np.array([br[2] for br in brackets])
        refs = np.array([br[3] for br in brackets])
        ref_vecs = np.stack([spec._vec_pad[b, j] for b, j in zip(bs, refs)])
        ref_oms = np.array([spec._omega_pad[b, j] for b, j in zip(bs, refs)])

        g_lo = _stencil_second(spec, lo, ref_vecs, ref_oms)
        while np.max(hi - lo) > _BISECT_WIDTH:
            mid = 0.5 * (lo + hi)
            g_mid = _stencil_second(spec, mid, ref_vecs, ref_oms)
            take_left = g_lo * g_mid <= 0.0
            hi = np.where(take_left, mid, hi)
            lo = np.where(take_left, lo, mid)
            g_lo = np.where(take_left, g_lo, g_mid)
        roots = 0.5 * (lo + hi)
        speeds = _stencil_first(spec, roots, ref_vecs, ref_oms)
        for b, k, s in zip(bs, roots, speeds):
            fronts.append(Wavefront(branch=int(b), k=float(k), speed=float(s)))

    if fronts:
        vals = np.sort(np.array([f.speed for f in fronts]))
        reps = []
        start = 0
        for i in range(1, len(vals) + 1):
            if i == len(vals) or vals[i] - vals[i - 1] > merge_tol:
                reps.append(float(np.mean(vals[start:i])))
                start = i
        speeds_arr = np.array(reps)
    else:
        speeds_arr = np.array([])
    return WavefrontSet(speeds=speeds_arr, fronts=fronts, merge_tol=merge_tol)


@dataclass(frozen=True)
class Crossing:
    k: float
    branches: tuple
    gap: float
    kind: str                 # 'crossing' or 'avoided'
    continuum: bool = False


def _circle_gap(a, b):
    return np.abs(wrap_phase(a - b))


def classify_crossings(spec: DispersionSpectrum, gap_tol: float = 1e-9) -> list:
    """Locate and classify interbranch gap minima.

    Local minima of the eigenphase distance (on the phase circle) of each
    branch pair are refined by ternary search; minima with refined gap at
    most gap_tol are crossings, the rest avoided.  Pairs degenerate over
    the whole grid yield a single entry flagged continuum=True.
    """
    out: list[Crossing] = []
    nb = spec.n_branches
    lo_idx = _PAD - 1
    hi_idx = _PAD + spec._n_k + 1
    for i in range(nb):
        for j in range(i + 1, nb):
            d = _circle_gap(spec._omega_pad[i], spec._omega_pad[j])
            window = d[lo_idx:hi_idx]
            if np.max(window) <= gap_tol:
                out.append(
                    Crossing(
                        k=float(spec.k_grid[0]),
                        branches=(i, j),
                        gap=float(np.max(window)),
                        kind="crossing",
                        continuum=True,
                    )
                )
                continue
            for m in range(lo_idx + 1, hi_idx - 1):
                if d[m] <= d[m - 1] and d[m] < d[m + 1]:
                    k_lo, k_hi = spec._k_pad[m - 1], spec._k_pad[m + 1]
                    ref_i = (spec._vec_pad[i, m], spec._omega_pad[i, m])
                    ref_j = (spec._vec_pad[j, m], spec._omega_pad[j, m])
                    k_star, gap = _refine_min_gap(spec, k_lo, k_hi, ref_i, ref_j)
                    kind = "crossing" if gap <= gap_tol else "avoided"
                    out.append(Crossing(k=float(k_star), branches=(i, j), gap=float(gap), kind=kind))
    out.sort(key=lambda c: (c.k, c.branches))
    return out


def _refine_min_gap(spec, k_lo, k_hi, ref_i, ref_j, width=1e-12):
    vec_i, om_i = ref_i
    vec_j, om_j = ref_j

    def gap_at(ks):
        ks = np.asarray(ks, dtype=float)
        oi, _ = spec.local_omegas(ks, np.tile(vec_i, (len(ks), 1)), np.full(len(ks), om_i))
        oj, _ = spec.local_omegas(ks, np.tile(vec_j, (len(ks), 1)), np.full(len(ks), om_j))
        return _circle_gap(oi, oj)

    lo, hi = float(k_lo), float(k_hi)
    while hi - lo > width:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        g = gap_at(np.array([m1, m2]))
        if g[0] <= g[1]:
            hi = m2
        else:
            lo = m1
    k_star = 0.5 * (lo + hi)
    return k_star, float(gap_at(np.array([k_star]))[0])


@dataclass(frozen=True)
class SplitStepParams:
    """Two SU(2) coins of a split-step two-mode walk.

    The step operator is U(k) = diag(e^{ik}, 1) . coin_2 . diag(1, e^{-ik}) . coin_1
    with both coins of the form [[u, v], [-conj(v), conj(u)]].
    """

    coin_1: np.ndarray
    coin_2: np.ndarray

    def __post_init__(self):
        for name in ("coin_1", "coin_2"):
            c = np.asarray(getattr(self, name), dtype=complex)
            if c.shape != (2, 2):
                raise ValueError(f"{name} must be 2x2")
            assert_unitary(c, tol=1e-9, name=name)
            det = np.linalg.det(c)
            if abs(det - 1.0) > 1e-9:
                raise ValueError(f"{name} must have determinant 1, got {det}")
            object.__setattr__(self, name, c)


@dataclass
class SplitStepBands:
    """Closed-form dispersion of a split-step walk.

    cos(omega(k)) = u_tilde * cos(k + phi) - v_tilde, the positive branch in
    [0, pi] and its mirror.  Exactly two wavefront speeds {+s, -s}.
    """

    params: SplitStepParams
    u_tilde: float
    v_tilde: float
    phi: float
    speeds: WavefrontSet
    k_inflection: np.ndarray

    def cos_omega(self, k):
        return np.clip(self.u_tilde * np.cos(np.asarray(k) + self.phi) - self.v_tilde, -1.0, 1.0)

    def omega_plus(self, k):
        return np.arccos(self.cos_omega(k))

    def omega_minus(self, k):
        return -self.omega_plus(k)

    def group_velocity_plus(self, k):
        k = np.asarray(k, dtype=float)
        s_om = np.sqrt(np.maximum(1.0 - self.cos_omega(k) ** 2, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.u_tilde * np.sin(k + self.phi) / s_om
        return v

    def bloch(self, k):
        """Operator form, batched over k, for cross-checks against band_structure."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        n = len(k)
        s_plus = np.zeros((n, 2, 2), dtype=complex)
        s_minus = np.zeros((n, 2, 2), dtype=complex)
        s_plus[:, 0, 0] = np.exp(1j * k)
        s_plus[:, 1, 1] = 1.0
        s_minus[:, 0, 0] = 1.0
        s_minus[:, 1, 1] = np.exp(-1j * k)
        return s_plus @ self.params.coin_2 @ s_minus @ self.params.coin_1


def split_step_bands(params: SplitStepParams) -> SplitStepBands:
    """Closed-form band structure and wavefront speeds of a split-step walk."""
    u1, v1 = params.coin_1[0, 0], params.coin_1[0, 1]
    u2, v2 = params.coin_2[0, 0], params.coin_2[0, 1]
    prod = u1 * u2
    u_t = float(np.abs(prod))
    phi = float(np.angle(prod)) if u_t > 0.0 else 0.0
    v_t = float(np.real(v1 * np.conj(v2)))

    eps = 1e-12
    if u_t <= eps:
        # flat band: cos(omega) constant
        fronts = [Wavefront(branch=0, k=None, speed=0.0), Wavefront(branch=1, k=None, speed=0.0)]
        speeds = WavefrontSet(speeds=np.array([0.0]), fronts=fronts, merge_tol=1e-4)
        k_inf = np.array([])
    elif u_t >= 1.0 - eps:
        # strictly linear bands omega = +-(k + phi)
        fronts = [Wavefront(branch=0, k=None, speed=1.0), Wavefront(branch=1, k=None, speed=-1.0)]
        speeds = WavefrontSet(speeds=np.array([-1.0, 1.0]), fronts=fronts, merge_tol=1e-4)
        k_inf = np.array([])
    else:
        if abs(v_t) <= eps:
            c_star = 0.0
        else:
            a = (u_t * u_t + v_t * v_t - 1.0) / (2.0 * u_t * v_t)
            root = np.sqrt(max(a * a - 1.0, 0.0))
            c_star = a - root if a >= 0.0 else a + root
            c_star = float(np.clip(c_star, -1.0, 1.0))
        theta = float(np.arccos(c_star))
        cos_om = u_t * c_star - v_t
        sin_om = np.sqrt(max(1.0 - cos_om * cos_om, 0.0))
        s = float(u_t * np.sin(theta) / sin_om)
        k_inf = wrap_phase(np.array([theta - phi, -theta - phi]))
        fronts = [
            Wavefront(branch=0, k=float(k_inf[0]), speed=s),
            Wavefront(branch=0, k=float(k_inf[1]), speed=-s),
        ]
        speeds = WavefrontSet(speeds=np.array([-s, s]), fronts=fronts, merge_tol=1e-4)
    return SplitStepBands(
        params=params, u_tilde=u_t, v_tilde=v_t, phi=phi, speeds=speeds, k_inflection=k_inf
    )
