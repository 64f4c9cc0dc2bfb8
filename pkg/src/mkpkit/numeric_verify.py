"""Pseudospectral checks of line solitons on periodic grids.

The evolution uses the u-form

    u_t + s1 u^2 u_x + k u_x v + u_xxx + s2 d_x^{-1} u_yy = 0,   v = d_x^{-1} u_y,

with every linear term handled by an integrating factor and the cubic and
quadratic products dealiased.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .conservation_laws import ConservationLaw, FluxIntegrand, RectBoundary
from .jet import DerivIndex
from .model import CaseParams
from .solitons import LineSolitonParams, profile, profile_derivatives, soliton_potential

MIN_POINTS = 64
#: points required across the part of the profile above 1% of the peak
MIN_RESOLUTION_POINTS = 16


class ResolutionError(ValueError):
    pass


class BlowUpError(RuntimeError):
    def __init__(self, t: float, trajectory: Trajectory):
        self.t = t
        self.trajectory = trajectory
        super().__init__(f"non-finite values at t = {t:.6g}")


class TrackingError(RuntimeError):
    pass


class UnsupportedJetError(ValueError):
    pass


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Grid2D:
    """Periodic grid on [-Lx, Lx) x [-Ly, Ly)."""

    Lx: float
    Ly: float
    Nx: int
    Ny: int

    def __post_init__(self):
        for n in (self.Nx, self.Ny):
            if n < MIN_POINTS or not _is_pow2(n):
                raise ValueError(f"grid sizes must be powers of two >= {MIN_POINTS}, got {n}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("half-lengths must be positive")

    @property
    def dx(self) -> float:
        return 2 * self.Lx / self.Nx

    @property
    def dy(self) -> float:
        return 2 * self.Ly / self.Ny

    @property
    def x(self) -> np.ndarray:
        return -self.Lx + self.dx * np.arange(self.Nx)

    @property
    def y(self) -> np.ndarray:
        return -self.Ly + self.dy * np.arange(self.Ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, Y)`` arrays of shape ``(Ny, Nx)``."""
        return np.meshgrid(self.x, self.y)

    @property
    def kx(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.Nx, d=self.dx)

    @property
    def ky(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.Ny, d=self.dy)

    def describe(self) -> dict:
        return {"Lx": self.Lx, "Ly": self.Ly, "Nx": self.Nx, "Ny": self.Ny}


@dataclass(frozen=True)
class Field2D:
    grid: Grid2D
    u: np.ndarray
    t: float = 0.0
    v: np.ndarray | None = None

    def __post_init__(self):
        shape = (self.grid.Ny, self.grid.Nx)
        for arr in (self.u, self.v):
            if arr is None:
                continue
            if arr.shape != shape:
                raise ValueError(f"field shape {arr.shape} != grid shape {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("field contains non-finite values")

    @property
    def row_means(self) -> np.ndarray:
        return self.u.mean(axis=1)


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    t_end: float
    dealias: float = 2 / 3
    integrating_factor: bool = True
    save_every: int = 20
    #: constant in the step bound dt <= cfl * dx^2 used with the integrating factor
    cfl: float = 1.0

    def __post_init__(self):
        if not (0 < self.dealias <= 1):
            raise ValueError("dealiasing fraction must lie in (0, 1]")
        if not (self.dt > 0 and self.t_end >= 0):
            raise ValueError("need dt > 0 and t_end >= 0")
        if self.save_every < 1:
            raise ValueError("save_every must be >= 1")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def validate(self, grid: Grid2D) -> None:
        dx = min(grid.dx, grid.dy)
        if self.integrating_factor:
            bound = self.cfl * dx * dx
        else:
            # RK4 stability along the imaginary axis for the explicit u_xxx term
            bound = 2.5 * (grid.dx / math.pi) ** 3
        if self.dt > bound:
            raise ValueError(f"dt = {self.dt} exceeds the step bound {bound:.3g}")
        if abs(self.steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ValueError("t_end must be a whole number of steps")


@dataclass
class Trajectory:
    grid: Grid2D
    case: CaseParams
    times: list[float] = dc_field(default_factory=list)
    snapshots: list[np.ndarray] = dc_field(default_factory=list)

    def append(self, t: float, u: np.ndarray) -> None:
        self.times.append(float(t))
        self.snapshots.append(np.array(u, dtype=float, copy=True))

    def __len__(self) -> int:
        return len(self.times)

    def field(self, i: int) -> Field2D:
        return Field2D(self.grid, self.snapshots[i], self.times[i])

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]


# --------------------------------------------------------------------------
# spectral helpers (arrays are (Ny, Nx); axis 1 is x)


def spectral_derivative(f: np.ndarray, grid: Grid2D, order: int = 1, axis: str = "x") -> np.ndarray:
    if axis == "x":
        k = grid.kx[None, :]
        ax = 1
    else:
        k = grid.ky[:, None]
        ax = 0
    spec = np.fft.fft(f, axis=ax)
    mult = (1j * k) ** order
    if order % 2 == 1:
        n = f.shape[ax]
        nyq = np.zeros_like(k, dtype=bool)
        if ax == 1:
            nyq[:, n // 2] = True
        else:
            nyq[n // 2, :] = True
        mult = np.where(nyq, 0.0, mult)
    return np.real(np.fft.ifft(spec * mult, axis=ax))


def inverse_dx(f: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Periodic x-antiderivative with the zero mode annihilated."""
    k = grid.kx[None, :]
    spec = np.fft.fft(f, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(k == 0, 0.0, spec / (1j * k))
    out[:, grid.Nx // 2] = 0.0
    return np.real(np.fft.ifft(out, axis=1))


def anchored_antiderivative(f: np.ndarray, grid: Grid2D, anchor_index: int) -> np.ndarray:
    """``int_{x_a}^{x} f dx'`` per row, exact for band-limited ``f``.

    The row mean is integrated as a linear ramp and the fluctuation
    spectrally, then the value at the anchor column is subtracted.
    """
    mean = f.mean(axis=1, keepdims=True)
    prim = inverse_dx(f - mean, grid) + mean * grid.x[None, :]
    return prim - prim[:, anchor_index : anchor_index + 1]


# --------------------------------------------------------------------------
# PDE residual


def resolution_points(p: LineSolitonParams, grid: Grid2D) -> int:
    """Grid spacings across the part of the profile above 1% of its peak."""
    xs = np.linspace(-grid.Lx, grid.Lx, 20001)
    u = profile(p, xs)
    inside = xs[u >= 0.01 * u.max()]
    return int((inside[-1] - inside[0]) / grid.dx) if inside.size else 0


def pde_residual_fields(u: np.ndarray, v: np.ndarray, u_t: np.ndarray, case: CaseParams,
                        grid: Grid2D, shear: float = 0.0) -> float:
    """Max of ``|(u_t + s1 u^2 u_x + k u_x v + u_xxx)_x + s2 u_yy|``.

    With ``shear = mu`` the first grid coordinate is ``s = x + mu y`` and the
    y-derivative at fixed x is ``mu d_s + d_y``.
    """
    def dx(f, n=1):
        return spectral_derivative(f, grid, n, "x")

    def dy(f):
        return shear * dx(f) + spectral_derivative(f, grid, 1, "y")

    ux = dx(u)
    flux = u_t + case.sigma1 * u * u * ux + case.kappa_float * ux * v + dx(u, 3)
    res = dx(flux) + case.sigma2 * dy(dy(u))
    return float(np.max(np.abs(res)))


def pde_residual_grid(p: LineSolitonParams, grid: Grid2D,
                      min_points: int = MIN_RESOLUTION_POINTS) -> float:
    """Spectral residual of the closed-form soliton at t = 0.

    The grid is laid out in the sheared coordinate ``s = x + mu y`` so that an
    oblique soliton is periodic on it; ``v = mu U`` and ``u_t = -nu U'``.
    """
    n = resolution_points(p, grid)
    if n < min_points:
        raise ResolutionError(f"profile spans {n} grid spacings, need {min_points}")
    s, _ = grid.mesh()
    u = profile(p, s)
    v = p.mu * u
    u_t = -p.nu * spectral_derivative(u, grid, 1, "x")
    return pde_residual_fields(u, v, u_t, p.case, grid, shear=p.mu)


# --------------------------------------------------------------------------
# evolution


class _Stepper:
    def __init__(self, grid: Grid2D, case: CaseParams, cfg: EvolutionConfig):
        self.grid, self.case, self.cfg = grid, case, cfg
        kx = grid.kx[None, :]
        ky = grid.ky[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            lin = 1j * kx**3 - 1j * case.sigma2 * ky**2 / kx
        lin = np.where(kx == 0, 0.0, lin)
        self.kx = kx
        self.ky = ky
        self.lin = lin
        cut_x = cfg.dealias * np.abs(grid.kx).max()
        cut_y = cfg.dealias * np.abs(grid.ky).max()
        self.mask = (np.abs(kx) <= cut_x) & (np.abs(ky) <= cut_y)
        self.hold = np.broadcast_to(kx == 0, lin.shape)
        dt = cfg.dt
        if cfg.integrating_factor:
            self.e1 = np.exp(lin * dt)
            self.e2 = np.exp(lin * dt / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.inv_ikx = np.where(kx == 0, 0.0, 1.0 / (1j * kx))

    def nonlinear(self, uh: np.ndarray) -> np.ndarray:
        """Fourier transform of ``-(s1 u^2 u_x + k u_x v)``, dealiased."""
        u = np.real(np.fft.ifft2(uh))
        ux = np.real(np.fft.ifft2(1j * self.kx * uh))
        v = np.real(np.fft.ifft2(self.inv_ikx * 1j * self.ky * uh))
        n = self.case.sigma1 * u * u * ux + self.case.kappa_float * ux * v
        out = -np.fft.fft2(n) * self.mask
        out[self.hold] = 0.0
        return out

    def rhs(self, uh: np.ndarray) -> np.ndarray:
        return self.lin * uh + self.nonlinear(uh)

    def step(self, uh: np.ndarray) -> np.ndarray:
        dt = self.cfg.dt
        if self.cfg.integrating_factor:
            e1, e2, g = self.e1, self.e2, self.nonlinear
            a = dt * g(uh)
            b = dt * g(e2 * (uh + a / 2))
            c = dt * g(e2 * uh + b / 2)
            d = dt * g(e1 * uh + e2 * c)
            return e1 * uh + (e1 * a + 2 * e2 * (b + c) + d) / 6
        f = self.rhs
        k1 = f(uh)
        k2 = f(uh + dt / 2 * k1)
        k3 = f(uh + dt / 2 * k2)
        k4 = f(uh + dt * k3)
        return uh + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


MEAN_TOLERANCE = 1e-10


def evolve(u0: Field2D, case: CaseParams, cfg: EvolutionConfig) -> Trajectory:
    """Advance ``u0`` to ``cfg.t_end``; snapshots every ``cfg.save_every`` steps.

    The x-mean of u must not vary between rows, otherwise ``d_x^{-1} u_y``
    does not exist on the periodic grid. The mean itself is conserved.
    """
    grid = u0.grid
    cfg.validate(grid)
    means = u0.row_means
    if np.max(np.abs(means - means.mean())) > MEAN_TOLERANCE * max(1.0, np.abs(u0.u).max()):
        raise ValueError("the x-mean of u0 must be the same on every row")
    stepper = _Stepper(grid, case, cfg)
    traj = Trajectory(grid, case)
    traj.append(u0.t, u0.u)
    uh = np.fft.fft2(u0.u)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, cfg.steps + 1):
            uh = stepper.step(uh)
            t = u0.t + n * cfg.dt
            if n % cfg.save_every == 0 or n == cfg.steps:
                u = np.real(np.fft.ifft2(uh))
                if not np.all(np.isfinite(u)):
                    raise BlowUpError(t, traj)
                traj.append(t, u)
            elif not np.isfinite(uh[0, 1]):
                raise BlowUpError(t, traj)
    return traj


def soliton_field(p: LineSolitonParams, grid: Grid2D, t: float = 0.0) -> Field2D:
    X, Y = grid.mesh()
    xi = X + p.mu * Y - p.nu * t
    return Field2D(grid, profile(p, xi), t, p.mu * profile(p, xi))


def advected_trajectory(p: LineSolitonParams, grid: Grid2D, times: Sequence[float]) -> Trajectory:
    """The exact soliton sampled at the given times (no solver involved)."""
    traj = Trajectory(grid, p.case)
    for t in times:
        traj.append(t, soliton_field(p, grid, t).u)
    return traj


# --------------------------------------------------------------------------
# speed tracking


@dataclass(frozen=True)
class SpeedMeasurement:
    nu: float
    mu: float
    peak_positions: np.ndarray
    amplitudes: np.ndarray


def _peak_in_row(row: np.ndarray, x: np.ndarray, dx: float) -> tuple[float, float]:
    j = int(np.argmax(row))
    n = row.size
    fm, f0, fp = row[(j - 1) % n], row[j], row[(j + 1) % n]
    denom = fm - 2 * f0 + fp
    shift = 0.5 * (fm - fp) / denom if denom != 0 else 0.0
    shift = float(np.clip(shift, -0.5, 0.5))
    peak = f0 - 0.25 * (fm - fp) * shift
    return x[j] + shift * dx, peak


def track_speed(traj: Trajectory, rows: Sequence[int] | None = None,
                min_amplitude: float = 1e-6) -> SpeedMeasurement:
    """Fit ``x_peak = x0 + nu t - mu y`` to sub-grid peak positions."""
    grid = traj.grid
    if len(traj) < 2:
        raise TrackingError("need at least two snapshots")
    rows = list(range(grid.Ny)) if rows is None else list(rows)
    period = 2 * grid.Lx
    pos = np.empty((len(traj), len(rows)))
    amp = np.empty_like(pos)
    for i, u in enumerate(traj.snapshots):
        for r, k in enumerate(rows):
            pos[i, r], amp[i, r] = _peak_in_row(u[k], grid.x, grid.dx)
    if np.any(amp < min_amplitude):
        raise TrackingError("peak lost: amplitude below threshold")
    pos = np.unwrap(pos, period=period, axis=0)
    steps = np.abs(np.diff(pos, axis=0))
    if steps.size and steps.max() > 0.25 * period:
        raise TrackingError("peak jumped between snapshots")
    times = np.asarray(traj.times)
    ys = grid.y[rows]
    tt, yy = np.meshgrid(times, ys, indexing="ij")
    design = np.column_stack([np.ones(tt.size), tt.ravel(), yy.ravel()])
    coef, *_ = np.linalg.lstsq(design, pos.ravel(), rcond=None)
    if len(rows) == 1:
        coef[2] = 0.0
    return SpeedMeasurement(float(coef[1]), float(-coef[2]), pos, amp)


# --------------------------------------------------------------------------
# boundary flux of conservation laws


def exact_soliton_sampler(p: LineSolitonParams, anchor_x: float | None = None):
    """Jet values of ``w = W(xi)`` for the closed-form soliton.

    With ``anchor_x`` the potential is re-anchored so that ``w = 0`` on the
    line ``x = anchor_x``, which is what x-antidifferentiation of sampled u
    data inside a box produces.
    """
    def sampler(x, y, t, indices):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xi = x + p.mu * y - p.nu * t
        top = max((i.order for i in indices), default=1)
        d = profile_derivatives(p, xi, max(top - 1, 0))
        if anchor_x is not None:
            xi_a = anchor_x + p.mu * y - p.nu * t
            d_a = profile_derivatives(p, xi_a, max(top - 1, 0))
        out = {}
        for idx in indices:
            a, b, c = idx.as_tuple()
            if idx.order == 0:
                val = soliton_potential(p, xi)
                if anchor_x is not None:
                    val = val - soliton_potential(p, xi_a)
                out[idx] = val
                continue
            factor = (-p.nu) ** a * p.mu**c
            val = d[idx.order - 1]
            if b == 0 and anchor_x is not None:
                val = val - d_a[idx.order - 1]
            out[idx] = factor * val
        return out

    return sampler


def exact_flux(p: LineSolitonParams, law: ConservationLaw, box: RectBoundary, t: float = 0.0,
               f=None, anchored: bool = True, panels: int = 64) -> float:
    """``oint (X, Y) . n ds`` for the closed-form soliton by Gauss quadrature."""
    integrand = FluxIntegrand(law, box, f)
    sampler = exact_soliton_sampler(p, box.x_min if anchored else None)
    return integrand.integrate(sampler, t, panels=panels)


_GRID_JETS = {
    DerivIndex(0, 1, 0), DerivIndex(0, 2, 0), DerivIndex(0, 3, 0), DerivIndex(0, 4, 0),
    DerivIndex(0, 0, 1), DerivIndex(0, 1, 1), DerivIndex(0, 0, 2), DerivIndex(1, 0, 0),
}


def _grid_jets(u: np.ndarray, grid: Grid2D, case: CaseParams, anchor: int, indices) -> dict:
    missing = [i for i in indices if i not in _GRID_JETS]
    if missing:
        raise UnsupportedJetError(
            f"cannot reconstruct {', '.join(map(str, missing))} from a single snapshot"
        )
    def dx(f, n=1):
        return spectral_derivative(f, grid, n, "x")

    def dy(f, n=1):
        return spectral_derivative(f, grid, n, "y")

    uy = dy(u)
    wy = anchored_antiderivative(uy, grid, anchor)
    ux = dx(u)
    v = inverse_dx(uy, grid)
    u_t = -(case.sigma1 * u * u * ux + case.kappa_float * ux * v + dx(u, 3)
            + case.sigma2 * inverse_dx(dy(v), grid))
    table = {
        DerivIndex(0, 1, 0): lambda: u,
        DerivIndex(0, 2, 0): lambda: ux,
        DerivIndex(0, 3, 0): lambda: dx(u, 2),
        DerivIndex(0, 4, 0): lambda: dx(u, 3),
        DerivIndex(0, 0, 1): lambda: wy,
        DerivIndex(0, 1, 1): lambda: uy,
        DerivIndex(0, 0, 2): lambda: dy(wy),
        DerivIndex(1, 0, 0): lambda: anchored_antiderivative(u_t, grid, anchor),
    }
    return {i: table[i]() for i in indices}


#: nodes next to the periodic seam treated as a boundary layer
EDGE_LAYER = 8


def _trapezoid(values: np.ndarray, h: float) -> float:
    return float(h * (values.sum() - 0.5 * (values[0] + values[-1])))


def grid_box(grid: Grid2D, half_x: float, half_y: float | None = None) -> tuple[RectBoundary, tuple]:
    """Largest node-aligned centred box inside the requested half-widths."""
    half_y = half_x if half_y is None else half_y
    ix = np.nonzero(np.abs(grid.x) <= half_x + 1e-12)[0]
    iy = np.nonzero(np.abs(grid.y) <= half_y + 1e-12)[0]
    i0, i1 = int(ix[0]), int(ix[-1])
    j0, j1 = int(iy[0]), int(iy[-1])
    if i0 == 0 or j0 == 0 or i1 == grid.Nx - 1 or j1 == grid.Ny - 1:
        raise ValueError("box must lie strictly inside the periodic grid")
    if min(i0, j0, grid.Nx - 1 - i1, grid.Ny - 1 - j1) < EDGE_LAYER:
        warnings.warn(
            f"box is within {EDGE_LAYER} nodes of the periodic seam; fluxes there may be unresolved",
            RuntimeWarning, stacklevel=3,
        )
    box = RectBoundary(float(grid.x[i0]), float(grid.x[i1]), float(grid.y[j0]), float(grid.y[j1]))
    return box, (i0, i1, j0, j1)


def charge_balance(traj: Trajectory, law: ConservationLaw, half_x: float,
                   half_y: float | None = None, f=None) -> np.ndarray:
    """``oint (X, Y) . n ds`` at every stored time, for a node-aligned box.

    w is rebuilt inside the box by x-antidifferentiation anchored on its
    left edge; time derivatives come from the evolution equation itself.
    """
    grid = traj.grid
    box, (i0, i1, j0, j1) = grid_box(grid, half_x, half_y)
    integrand = FluxIntegrand(law, box, f)
    X, Y = grid.mesh()
    out = []
    for t, u in zip(traj.times, traj.snapshots):
        jets = _grid_jets(u, grid, traj.case, i0, integrand.indices)
        sides = [
            (np.s_[j1, i0 : i1 + 1], (0.0, 1.0), grid.dx),
            (np.s_[j0 : j1 + 1, i1], (1.0, 0.0), grid.dy),
            (np.s_[j0, i0 : i1 + 1], (0.0, -1.0), grid.dx),
            (np.s_[j0 : j1 + 1, i0], (-1.0, 0.0), grid.dy),
        ]
        total = 0.0
        for sl, normal, h in sides:
            vals = integrand.evaluate({k: v[sl] for k, v in jets.items()}, X[sl], Y[sl], t, normal)
            total += _trapezoid(np.asarray(vals), h)
        out.append(total)
    return np.column_stack([np.asarray(traj.times), np.asarray(out)])
