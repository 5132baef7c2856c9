"""Symbol-level fusion of per-TBS feature vectors into position and velocity estimates.

Position cells are ordered row-major over ``P[p, j] = (x_p, y_j)``; velocity
cells put the speed axis fastest (``z = d * S + s`` for speed index ``s`` and
heading index ``d``). All searches are taken from fixed global lattices
(``k * step``) so a coarse-to-fine search lands on cells of the full grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .scene import SPEED_OF_LIGHT, OfdmConfig, bistatic_doppler, direction, wrap_angle

_TOL = 1e-9


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class PositionGrid:
    xs: np.ndarray
    ys: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.xs), len(self.ys))

    @property
    def size(self) -> int:
        return len(self.xs) * len(self.ys)

    def coords(self) -> np.ndarray:
        """(Q_x Q_y, 2) array, row-major over (x index, y index)."""
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell(self, flat_index: int) -> Tuple[float, float]:
        p, j = divmod(int(flat_index), len(self.ys))
        return (float(self.xs[p]), float(self.ys[j]))


def _lattice(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ValueError("grid step must be positive")
    k0 = math.ceil(lo / step - _TOL)
    k1 = math.floor(hi / step + _TOL)
    return np.arange(k0, k1 + 1) * step


def build_position_grid(scope: Sequence[float], step: float) -> PositionGrid:
    """Lattice points ``k * step`` inside scope = (xmin, xmax, ymin, ymax)."""
    xmin, xmax, ymin, ymax = (float(v) for v in scope)
    if xmax < xmin or ymax < ymin:
        raise ValueError("invalid scope")
    grid = PositionGrid(_lattice(xmin, xmax, step), _lattice(ymin, ymax, step))
    if grid.size == 0:
        raise ValueError("empty position grid")
    return grid


def centered_grid(center: Sequence[float], side: float, step: float) -> PositionGrid:
    """Square grid of ``round(side/step) + 1`` points per axis around ``center``."""
    q = int(round(side / step)) + 1
    offs = (np.arange(q) - (q - 1) / 2) * step
    return PositionGrid(center[0] + offs, center[1] + offs)


@dataclass(frozen=True)
class VelocityGrid:
    speeds: np.ndarray
    headings: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.speeds), len(self.headings))

    @property
    def size(self) -> int:
        return len(self.speeds) * len(self.headings)

    def coords(self) -> np.ndarray:
        """(S D, 2) array of (speed, heading); speed varies fastest."""
        s = np.tile(self.speeds, len(self.headings))
        h = np.repeat(self.headings, len(self.speeds))
        return np.column_stack([s, h])

    def cell(self, flat_index: int) -> Tuple[float, float]:
        d, s = divmod(int(flat_index), len(self.speeds))
        return (float(self.speeds[s]), float(self.headings[d]))


def _heading_count(step: float) -> int:
    return math.ceil(2 * math.pi / step - _TOL)


def build_velocity_grid(speed_min: float, speed_max: float, speed_step: float,
                        heading_step: float) -> VelocityGrid:
    if speed_min < 0 or speed_max < speed_min:
        raise ValueError("invalid speed range")
    speeds = _lattice(speed_min, speed_max, speed_step)
    headings = np.arange(_heading_count(heading_step)) * heading_step
    if speeds.size == 0:
        raise ValueError("empty speed grid")
    return VelocityGrid(speeds, headings)


def _heading_window(center: float, half: float, step: float) -> np.ndarray:
    n = _heading_count(step)
    k0 = math.ceil((center - half) / step - _TOL)
    k1 = math.floor((center + half) / step + _TOL)
    ks = np.arange(k0, k1 + 1)
    if ks.size >= n:
        return np.arange(n) * step
    return np.mod(ks, n) * step


# ---------------------------------------------------------------------------
# matching matrices and profiles

@dataclass
class Profile:
    values: np.ndarray
    coords: np.ndarray
    kind: str  # "position" or "velocity"
    grid_shape: Optional[Tuple[int, int]] = None

    @property
    def peak_index(self) -> int:
        return int(np.argmax(np.abs(self.values)))

    @property
    def peak(self) -> Tuple[float, float]:
        c = self.coords[self.peak_index]
        return (float(c[0]), float(c[1]))


def compensated_distances(coords: np.ndarray, tbs: Sequence[float],
                          pbs: Sequence[float]) -> np.ndarray:
    """TBS -> cell -> PBS path length for every cell."""
    c = np.asarray(coords, dtype=float)
    return (np.hypot(c[:, 0] - tbs[0], c[:, 1] - tbs[1])
            + np.hypot(c[:, 0] - pbs[0], c[:, 1] - pbs[1]))


def delay_matching_matrix(distances: np.ndarray, ofdm: OfdmConfig) -> np.ndarray:
    """(N_c - 1, n_cells) with entries exp(-j2pi n' df r / c), n' = 1..N_c-1."""
    n = np.arange(1, ofdm.n_subcarriers)[:, None]
    tau = np.asarray(distances, dtype=float)[None, :] / SPEED_OF_LIGHT
    return np.exp(-2j * np.pi * ofdm.subcarrier_spacing * n * tau)


def _phasor_series(coeffs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """sum_{k>=1} coeffs[k-1] * w**k by Horner's rule (|w| = 1 keeps it stable)."""
    acc = np.zeros(w.shape, dtype=complex)
    for c in coeffs[::-1]:
        acc += c
        acc *= w
    return acc


def position_profile(range_fv: np.ndarray, coords: np.ndarray, tbs, pbs,
                     ofdm: OfdmConfig, grid_shape=None) -> Profile:
    """conj(f)^T G for every cell.

    Column ``z`` of G is ``w_z ** n'`` with ``w_z = exp(-j2pi df r_z / c)``, so
    the product is a polynomial in ``w_z`` and is evaluated without forming G.
    """
    f = np.asarray(range_fv).conj()
    if f.size != ofdm.n_subcarriers - 1:
        raise ValueError("range feature vector length must be N_c - 1")
    r = compensated_distances(coords, tbs, pbs)
    w = np.exp(-2j * np.pi * ofdm.subcarrier_spacing * r / SPEED_OF_LIGHT)
    return Profile(_phasor_series(f, w), np.asarray(coords), "position", grid_shape)


def doppler_matching_matrix(coords: np.ndarray, aoa: float, aod: float,
                            ofdm: OfdmConfig, exact: bool = False) -> np.ndarray:
    """(n_cells, M - 1) with rows exp(j2pi m' T f_z), m' = 1..M-1.

    ``aoa``/``aod`` are global angles of the PBS->target and TBS->target rays.
    """
    c = np.asarray(coords, dtype=float)
    fz = bistatic_doppler(c[:, 0], c[:, 1], aod, aoa, ofdm.carrier_freq, exact=exact)
    m = np.arange(1, ofdm.n_symbols)[None, :]
    return np.exp(2j * np.pi * ofdm.symbol_duration * np.asarray(fz)[:, None] * m)


def velocity_profile(velocity_fv: np.ndarray, coords: np.ndarray, aoa: float, aod: float,
                     ofdm: OfdmConfig, exact: bool = False, grid_shape=None) -> Profile:
    """S conj(e) for every cell, as a polynomial in exp(j2pi T f_z)."""
    e = np.asarray(velocity_fv).conj()
    if e.size != ofdm.n_symbols - 1:
        raise ValueError("velocity feature vector length must be M - 1")
    c = np.asarray(coords, dtype=float)
    fz = np.asarray(bistatic_doppler(c[:, 0], c[:, 1], aod, aoa, ofdm.carrier_freq, exact=exact))
    w = np.exp(2j * np.pi * ofdm.symbol_duration * fz)
    return Profile(_phasor_series(e, w), c, "velocity", grid_shape)


def fuse_profiles(profiles: Sequence[Profile]) -> Profile:
    """Average of per-TBS complex profiles on a common grid."""
    if not profiles:
        raise ValueError("no profiles to fuse")
    n = len(profiles[0].values)
    if any(len(p.values) != n for p in profiles):
        raise ValueError("profiles live on different grids")
    vals = np.mean([p.values for p in profiles], axis=0)
    first = profiles[0]
    return Profile(vals, first.coords, first.kind, first.grid_shape)


# ---------------------------------------------------------------------------
# coarse-to-fine searches

@dataclass(frozen=True)
class SearchConfig:
    position_step: float = 0.01
    coarse_position_step: float = 1.0
    position_window: float = 1.0  # half-width of the fine window (m)
    scope: Optional[Tuple[float, float, float, float]] = None  # None -> BS bounding box
    speed_min: float = 0.0
    speed_max: float = 54.0
    speed_step: float = 0.1
    heading_step: float = 0.001
    coarse_speed_step: float = 0.5
    coarse_heading_step: float = 0.01
    speed_window: float = 1.0
    heading_window: float = 0.05
    refine: bool = True  # False -> single pass on the fine lattice
    max_recenter: int = 8
    doppler_exact: bool = False


@dataclass
class LocalizationResult:
    position: Tuple[float, float]
    fused: Profile
    per_tbs: List[Profile]
    coarse: Optional[Profile] = None
    cells_evaluated: int = 0


def _fused_position(range_fvs, grid, tbs_positions, pbs, ofdm):
    coords = grid.coords()
    per = [position_profile(f, coords, t, pbs, ofdm, grid.shape)
           for f, t in zip(range_fvs, tbs_positions)]
    return fuse_profiles(per), per


def _on_border(idx: int, n: int, at_limit_lo: bool, at_limit_hi: bool) -> int:
    """-1 / +1 if the peak sits on an interior window edge, else 0."""
    if idx == 0 and n > 1 and not at_limit_lo:
        return -1
    if idx == n - 1 and n > 1 and not at_limit_hi:
        return 1
    return 0


def localize(range_fvs: Sequence[np.ndarray], tbs_positions, pbs_position,
             ofdm: OfdmConfig, search: SearchConfig = SearchConfig()) -> LocalizationResult:
    """Peak of the fused position profile."""
    if len(range_fvs) != len(tbs_positions) or not range_fvs:
        raise ValueError("need one range feature vector per TBS")
    scope = search.scope
    if scope is None:
        pts = np.array(list(tbs_positions) + [pbs_position], dtype=float)
        scope = (pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max())
    step = search.position_step
    full = build_position_grid(scope, step)
    if not search.refine:
        fused, per = _fused_position(range_fvs, full, tbs_positions, pbs_position, ofdm)
        return LocalizationResult(fused.peak, fused, per, None, full.size)

    coarse_grid = build_position_grid(scope, search.coarse_position_step)
    coarse, _ = _fused_position(range_fvs, coarse_grid, tbs_positions, pbs_position, ofdm)
    evaluated = coarse_grid.size
    center = coarse.peak
    x_lo, x_hi, y_lo, y_hi = full.xs[0], full.xs[-1], full.ys[0], full.ys[-1]
    for _ in range(search.max_recenter + 1):
        w = search.position_window
        grid = build_position_grid((max(x_lo, center[0] - w), min(x_hi, center[0] + w),
                                    max(y_lo, center[1] - w), min(y_hi, center[1] + w)), step)
        fused, per = _fused_position(range_fvs, grid, tbs_positions, pbs_position, ofdm)
        evaluated += grid.size
        p, j = divmod(fused.peak_index, len(grid.ys))
        dx = _on_border(p, len(grid.xs), grid.xs[0] <= x_lo + _TOL, grid.xs[-1] >= x_hi - _TOL)
        dy = _on_border(j, len(grid.ys), grid.ys[0] <= y_lo + _TOL, grid.ys[-1] >= y_hi - _TOL)
        if dx == 0 and dy == 0:
            break
        center = fused.peak
    return LocalizationResult(fused.peak, fused, per, coarse, evaluated)


@dataclass
class VelocityResult:
    speed: float
    heading: float
    fused: Profile
    per_tbs: List[Profile]
    coarse: Optional[Profile] = None
    cells_evaluated: int = 0


def _fused_velocity(velocity_fvs, grid, aoas, aods, ofdm, exact):
    coords = grid.coords()
    per = [velocity_profile(e, coords, a, d, ofdm, exact, grid.shape)
           for e, a, d in zip(velocity_fvs, aoas, aods)]
    return fuse_profiles(per), per


def estimate_velocity(velocity_fvs: Sequence[np.ndarray], aoas: Sequence[float],
                      aods: Sequence[float], ofdm: OfdmConfig,
                      search: SearchConfig = SearchConfig()) -> VelocityResult:
    """Peak of the fused velocity profile; angles are global path directions."""
    if not (len(velocity_fvs) == len(aoas) == len(aods)) or not velocity_fvs:
        raise ValueError("need one velocity feature vector and angle pair per TBS")
    ex = search.doppler_exact
    vmin, vmax = search.speed_min, search.speed_max
    if not search.refine:
        grid = build_velocity_grid(vmin, vmax, search.speed_step, search.heading_step)
        fused, per = _fused_velocity(velocity_fvs, grid, aoas, aods, ofdm, ex)
        s, h = fused.peak
        return VelocityResult(s, h, fused, per, None, grid.size)

    cgrid = build_velocity_grid(vmin, vmax, search.coarse_speed_step, search.coarse_heading_step)
    coarse, _ = _fused_velocity(velocity_fvs, cgrid, aoas, aods, ofdm, ex)
    evaluated = cgrid.size
    speed, heading = coarse.peak
    fine_speeds = _lattice(vmin, vmax, search.speed_step)
    s_lo, s_hi = fine_speeds[0], fine_speeds[-1]
    for _ in range(search.max_recenter + 1):
        sw = search.speed_window
        speeds = _lattice(max(s_lo, speed - sw), min(s_hi, speed + sw), search.speed_step)
        headings = _heading_window(heading, search.heading_window, search.heading_step)
        grid = VelocityGrid(speeds, headings)
        fused, per = _fused_velocity(velocity_fvs, grid, aoas, aods, ofdm, ex)
        evaluated += grid.size
        d, s = divmod(fused.peak_index, len(speeds))
        ds = _on_border(s, len(speeds), speeds[0] <= s_lo + _TOL, speeds[-1] >= s_hi - _TOL)
        full_circle = len(headings) == _heading_count(search.heading_step)
        dh = 0 if full_circle else _on_border(d, len(headings), False, False)
        speed, heading = fused.peak
        if ds == 0 and dh == 0:
            break
    return VelocityResult(speed, heading, fused, per, coarse, evaluated)


# ---------------------------------------------------------------------------
# angle bookkeeping and the single-TBS baseline

def global_angle_candidates(array_angle: float, broadside: float) -> Tuple[float, float]:
    """The two global directions a ULA cannot tell apart (front/back)."""
    return (float(np.mod(broadside + array_angle, 2 * np.pi)),
            float(np.mod(broadside + np.pi - array_angle, 2 * np.pi)))


def resolve_global_angle(array_angle: float, broadside: float, origin, toward) -> float:
    """Pick the front/back candidate closest to the direction ``origin -> toward``."""
    ref = direction(origin, toward)
    cands = global_angle_candidates(array_angle, broadside)
    return min(cands, key=lambda c: abs(wrap_angle(c - ref)))


def range_profile(range_fv: np.ndarray, distances: np.ndarray, ofdm: OfdmConfig) -> np.ndarray:
    return np.asarray(range_fv).conj() @ delay_matching_matrix(distances, ofdm)


def estimate_bistatic_range(range_fv: np.ndarray, r_min: float, r_max: float,
                            ofdm: OfdmConfig, step: float = 0.01,
                            coarse_step: float = 1.0) -> float:
    """Total path length at the peak of the 1D range profile."""
    coarse = _lattice(r_min, r_max, coarse_step)
    r0 = coarse[int(np.argmax(np.abs(range_profile(range_fv, coarse, ofdm))))]
    fine = _lattice(max(r_min, r0 - 2 * coarse_step), min(r_max, r0 + 2 * coarse_step), step)
    return float(fine[int(np.argmax(np.abs(range_profile(range_fv, fine, ofdm))))])


def _in_scope(p, scope) -> bool:
    return scope[0] - _TOL <= p[0] <= scope[1] + _TOL and scope[2] - _TOL <= p[1] <= scope[3] + _TOL


def localize_single_tbs(range_fv: np.ndarray, aoa_array: float, pbs_broadside: float,
                        tbs_position, pbs_position, ofdm: OfdmConfig,
                        scope: Optional[Sequence[float]] = None,
                        step: float = 0.01) -> Tuple[float, float]:
    """Intersect the estimated AoA ray with the bistatic-range ellipse.

    With ``b = PBS - TBS``, unit ray ``u`` and total path ``R`` the target sits
    at ``PBS + r u`` with ``r = (R^2 - |b|^2) / (2 (b.u + R))``. The front/back
    ambiguity is resolved by keeping the candidate inside ``scope``.
    """
    tbs = np.asarray(tbs_position, dtype=float)
    pbs = np.asarray(pbs_position, dtype=float)
    if scope is None:
        pts = np.vstack([tbs, pbs])
        scope = (pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max())
    baseline = float(np.linalg.norm(pbs - tbs))
    r_max = baseline + 2 * math.hypot(scope[1] - scope[0], scope[3] - scope[2])
    big_r = estimate_bistatic_range(range_fv, baseline, r_max, ofdm, step)
    b = pbs - tbs
    best = None
    for ang in global_angle_candidates(aoa_array, pbs_broadside):
        u = np.array([math.cos(ang), math.sin(ang)])
        den = 2 * (b @ u + big_r)
        if den <= 0:
            continue
        r = (big_r ** 2 - b @ b) / den
        if r < 0:
            continue
        cand = tuple(float(v) for v in pbs + r * u)
        inside = _in_scope(cand, scope)
        if best is None or (inside and not best[0]):
            best = (inside, cand)
    if best is None:
        raise ValueError("AoA ray does not meet the bistatic-range ellipse")
    return best[1]


def write_heatmap_csv(path, profile: Profile) -> None:
    names = ("x", "y") if profile.kind == "position" else ("speed", "heading")
    mag = np.abs(profile.values)
    with open(path, "w", newline="") as fh:
        fh.write(f"{names[0]},{names[1]},magnitude\n")
        for (a, b), v in zip(profile.coords.tolist(), mag.tolist()):
            fh.write(f"{a!r},{b!r},{v!r}\n")
