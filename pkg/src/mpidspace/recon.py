"""Regularized Kaczmarz reconstruction with a dense direct-solve oracle.

The iterative solver runs on the Tikhonov-augmented system [S, sqrt(l)*I]:
with enough sweeps it converges to the same minimizer as the normal-equation
solve (S^H S + l I) c = S^H u, which ``direct_solve_oracle`` computes
directly and which every solver test is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .model import FovGrid, ReconImage, SystemMatrix

__all__ = [
    "ReconError",
    "ZeroNormRowError",
    "SingularSystemError",
    "ReconConfig",
    "tikhonov_lambda",
    "regularized_kaczmarz",
    "kaczmarz_solve",
    "direct_solve_oracle",
    "oracle_residual",
    "choose_lambda",
    "LAMBDA_GRID",
    "reconstruct_multicolor",
    "reconstruct_stream",
    "FrameError",
]


class ReconError(Exception):
    pass


class ZeroNormRowError(ReconError):
    pass


class SingularSystemError(ReconError):
    pass


#: Candidate relative regularization weights for the automatic choice.
LAMBDA_GRID = tuple(np.logspace(-6.0, 0.0, 13))


@dataclass(frozen=True)
class ReconConfig:
    """Solver settings.

    ``lambda_rel`` is normalized by the mean row energy so values transfer
    between presets; ``row_order`` is either "sequential" or "shuffled"
    (deterministic permutations drawn from ``seed``).
    """

    lambda_rel: float = 1e-3
    sweeps: int = 10
    enforce_nonneg: bool = True
    enforce_real: bool = True
    row_order: str = "shuffled"
    seed: int = 0
    tol: float | None = None

    def __post_init__(self) -> None:
        if self.lambda_rel < 0:
            raise ValueError("lambda_rel must be >= 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.row_order not in ("sequential", "shuffled"):
            raise ValueError("row_order must be 'sequential' or 'shuffled'")


def _as_matrix(s) -> np.ndarray:
    if isinstance(s, SystemMatrix):
        # columns are per unit volume; scale so solutions are concentrations
        return s.entries * s.grid.voxel_volume
    return np.asarray(s, dtype=np.complex128)


def tikhonov_lambda(matrix: np.ndarray, lambda_rel: float) -> float:
    """Absolute regularization weight: lambda_rel times the mean row energy."""
    rows = matrix.shape[0]
    energy = float(np.sum(np.abs(matrix) ** 2)) / rows
    return lambda_rel * energy


def regularized_kaczmarz(
    matrix: np.ndarray,
    u: np.ndarray,
    cfg: ReconConfig,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, float, int]:
    """Row-action solve of the Tikhonov-augmented system.

    Per row k the update is
    ``alpha = (u_k - s_k.c - sqrt(l) v_k) / (|s_k|^2 + l)``, ``c += alpha *
    conj(s_k)``, ``v_k += alpha * sqrt(l)``; after every sweep the optional
    real-part and non-negativity projections are applied.  Returns the
    solution, the final residual norm |S c - u| and the number of sweeps run
    (stops early once the relative residual is at or below ``cfg.tol``).
    """
    a = np.asarray(matrix, dtype=np.complex128)
    u = np.asarray(u, dtype=np.complex128).reshape(-1)
    rows, cols = a.shape
    if u.shape[0] != rows:
        raise ReconError(f"dimension mismatch: matrix has {rows} rows, data {u.shape[0]}")
    energies = np.sum(np.abs(a) ** 2, axis=1)
    if np.any(energies == 0):
        raise ZeroNormRowError(
            f"row {int(np.argmin(energies))} has zero norm; filter rows before solving"
        )
    lam = tikhonov_lambda(a, cfg.lambda_rel)
    sqrt_lam = np.sqrt(lam)
    denom = energies + lam
    conj_a = np.conj(a)

    x = np.zeros(cols, dtype=np.complex128) if x0 is None else np.asarray(x0, dtype=np.complex128).copy()
    v = np.zeros(rows, dtype=np.complex128)
    rng = np.random.default_rng(cfg.seed)
    u_norm = float(np.linalg.norm(u))

    def residual() -> float:
        return float(np.linalg.norm(a @ x - u))

    sweeps_used = 0
    if cfg.tol is not None and u_norm > 0 and residual() / u_norm <= cfg.tol:
        return x, residual(), 0
    for sweep in range(cfg.sweeps):
        order = rng.permutation(rows) if cfg.row_order == "shuffled" else np.arange(rows)
        for k in order:
            alpha = (u[k] - a[k] @ x - sqrt_lam * v[k]) / denom[k]
            x += alpha * conj_a[k]
            v[k] += alpha * sqrt_lam
        if cfg.enforce_real:
            x = x.real.astype(np.complex128)
        if cfg.enforce_nonneg:
            x = np.where(x.real < 0, 0.0, x)
        sweeps_used = sweep + 1
        if cfg.tol is not None and u_norm > 0 and residual() / u_norm <= cfg.tol:
            break
    return x, residual(), sweeps_used


def _to_image(
    x: np.ndarray,
    residual: float,
    sweeps: int,
    grid: FovGrid | None,
    frame_seq: int,
    n_tracers: int = 1,
) -> ReconImage:
    conc = x.real.reshape(n_tracers, -1)
    return ReconImage(
        concentrations=conc,
        frame_seq=frame_seq,
        grid=grid,
        residual_norm=residual,
        sweeps_used=sweeps,
    )


def kaczmarz_solve(
    s: SystemMatrix | np.ndarray,
    u: np.ndarray,
    cfg: ReconConfig,
    x0: np.ndarray | None = None,
    frame_seq: int = 0,
) -> ReconImage:
    """Solve S c = u for one frame and package the result as an image."""
    matrix = _as_matrix(s)
    grid = s.grid if isinstance(s, SystemMatrix) else None
    x, res, sweeps = regularized_kaczmarz(matrix, u, cfg, x0=x0)
    return _to_image(x, res, sweeps, grid, frame_seq)


def direct_solve_oracle(s: SystemMatrix | np.ndarray, u: np.ndarray, lam: float) -> np.ndarray:
    """Dense Tikhonov solve of (S^H S + lam I) c = S^H u.

    Independent of the iterative path; intended for desk-scale systems
    (roughly <= 2000 columns).  The unconstrained complex solution is
    returned.
    """
    a = _as_matrix(s)
    u = np.asarray(u, dtype=np.complex128).reshape(-1)
    if u.shape[0] != a.shape[0]:
        raise ReconError(f"dimension mismatch: matrix has {a.shape[0]} rows, data {u.shape[0]}")
    gram = a.conj().T @ a
    gram[np.diag_indices_from(gram)] += lam
    rhs = a.conj().T @ u
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"normal equations are singular (lambda={lam}): {exc}") from exc


def oracle_residual(s: SystemMatrix | np.ndarray, u: np.ndarray, lambda_rel: float) -> float:
    """Residual norm |S c - u| of the direct Tikhonov solution."""
    a = _as_matrix(s)
    lam = tikhonov_lambda(a, lambda_rel)
    x = direct_solve_oracle(a, np.asarray(u), lam)
    return float(np.linalg.norm(a @ x - np.asarray(u).reshape(-1)))


def choose_lambda(
    s: SystemMatrix | np.ndarray,
    u: np.ndarray,
    noise_estimate: float,
    grid: Sequence[float] = LAMBDA_GRID,
) -> float:
    """Automatic regularization choice by the discrepancy principle.

    Scans the logarithmic grid of relative weights and picks the largest one
    whose direct-solve residual stays within 1.1 * sqrt(rows) *
    noise_estimate (the expected residual of pure noise).  A zero noise
    estimate targets a zero residual, so the smallest grid value is returned;
    if no grid point satisfies the bound, the corner of the residual/solution
    L-curve (maximum Menger curvature over the grid) is used instead.
    """
    if noise_estimate < 0:
        raise ValueError("noise_estimate must be >= 0")
    a = _as_matrix(s)
    u = np.asarray(u, dtype=np.complex128).reshape(-1)
    lambdas = sorted(grid)
    if noise_estimate == 0:
        return float(lambdas[0])
    # factor the normal equations once; only the diagonal changes per lambda
    gram = a.conj().T @ a
    rhs = a.conj().T @ u
    diag = np.diag_indices_from(gram)
    residuals = []
    norms = []
    for rel in lambdas:
        shifted = gram.copy()
        shifted[diag] += tikhonov_lambda(a, rel)
        try:
            x = np.linalg.solve(shifted, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"normal equations are singular: {exc}") from exc
        residuals.append(float(np.linalg.norm(a @ x - u)))
        norms.append(float(np.linalg.norm(x)))
    bound = 1.1 * np.sqrt(a.shape[0]) * noise_estimate
    feasible = [rel for rel, res in zip(lambdas, residuals) if res <= bound]
    if feasible:
        return float(max(feasible))
    return float(lambdas[_lcurve_corner(residuals, norms)])


def _lcurve_corner(residuals: Sequence[float], norms: Sequence[float]) -> int:
    """Index of maximum curvature of the log-log residual/solution curve."""
    eps = np.finfo(float).tiny
    x = np.log10(np.maximum(residuals, eps))
    y = np.log10(np.maximum(norms, eps))
    best_i, best_c = 0, -np.inf
    for i in range(1, len(x) - 1):
        c = _menger(x[i - 1], y[i - 1], x[i], y[i], x[i + 1], y[i + 1])
        if c > best_c:
            best_i, best_c = i, c
    return best_i


def _menger(x1, y1, x2, y2, x3, y3) -> float:
    area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    d12 = np.hypot(x2 - x1, y2 - y1)
    d23 = np.hypot(x3 - x2, y3 - y2)
    d13 = np.hypot(x3 - x1, y3 - y1)
    denom = d12 * d23 * d13
    if denom == 0:
        return -np.inf
    return 2.0 * area2 / denom


def reconstruct_multicolor(
    s_list: Sequence[SystemMatrix],
    u: np.ndarray,
    cfg: ReconConfig,
    x0: np.ndarray | None = None,
    frame_seq: int = 0,
) -> ReconImage:
    """Joint reconstruction of several tracers at once.

    The per-tracer matrices (same grid, rows and protocol) are concatenated
    horizontally, the combined system is solved once, and the solution is
    split back into one concentration channel per tracer in list order.
    """
    if not s_list:
        raise ReconError("need at least one system matrix")
    first = s_list[0]
    for s in s_list[1:]:
        if s.row_index != first.row_index:
            raise ReconError("all tracer matrices must share the same selected rows")
        if s.grid != first.grid:
            raise ReconError("all tracer matrices must share the grid")
        if s.params_hash != first.params_hash:
            raise ReconError("all tracer matrices must share the acquisition protocol")
    combined = np.concatenate([_as_matrix(s) for s in s_list], axis=1)
    x, res, sweeps = regularized_kaczmarz(combined, u, cfg, x0=x0)
    return _to_image(x, res, sweeps, first.grid, frame_seq, n_tracers=len(s_list))


@dataclass(frozen=True)
class FrameError:
    """Marker emitted for a frame whose solve failed; the stream continues."""

    frame_seq: int
    error: str


def reconstruct_stream(
    s: SystemMatrix | Sequence[SystemMatrix],
    frames: Iterable[tuple[int, np.ndarray]],
    cfg: ReconConfig,
    warm_start: bool = True,
) -> Iterator[ReconImage | FrameError]:
    """Per-frame reconstruction of a measurement stream.

    ``frames`` yields (frame_seq, masked data vector) in arrival order;
    images come out in the same order with matching frame_seq.  With
    ``warm_start`` each solve starts from the previous solution.  Solver
    errors yield a FrameError marker instead of aborting the stream.
    """
    matrices = [s] if isinstance(s, SystemMatrix) else list(s)
    x_prev: np.ndarray | None = None
    for frame_seq, u in frames:
        x0 = x_prev if warm_start else None
        try:
            if len(matrices) == 1:
                image = kaczmarz_solve(matrices[0], u, cfg, x0=x0, frame_seq=frame_seq)
            else:
                image = reconstruct_multicolor(matrices, u, cfg, x0=x0, frame_seq=frame_seq)
        except ReconError as exc:
            yield FrameError(frame_seq=frame_seq, error=str(exc))
            continue
        x_prev = image.concentrations.reshape(-1).astype(np.complex128)
        yield image
