"""Joint detection solver: alternating minimization with per-entry projection
onto the constellation hull.

The solver runs on the Gram matrix of the received block. Preprocessing
builds the scaled iteration matrix either from the exact shifted inverse or
from its cheap two-term series approximation; each iteration is one
matrix-vector product, a scaled clip onto the hull, and a pilot-slot
overwrite. Per-iteration diagnostics (objective value, gradient residual,
distance to the hull boundary) support the convergence test suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .linalg import invert_shifted, neumann_two_term, spectral_norm
from .model import Constellation, ReceivedBlock

MODE_EXACT = "exact"
MODE_APPROX = "approx"
GAMMA_MAX_ABS = "max_abs"


@dataclass(frozen=True)
class ProxParams:
    """Solver knobs.

    The shift factor is ``alpha_scale`` times the Gram spectral norm and must
    stay above it, so ``alpha_scale > 1``. The projection gain is the power
    of two ``2**rho_log2`` (a hardware shift). ``gamma_rule`` is either
    ``"max_abs"`` (scale the iteration matrix so its largest component
    magnitude is one) or a fixed positive number.
    """

    alpha_scale: float = 2.0
    rho_log2: int = 1
    t_max: int = 5
    mode: str = MODE_EXACT
    gamma_rule: str | float = GAMMA_MAX_ABS

    def __post_init__(self):
        if self.alpha_scale <= 1.0:
            raise ParameterError("alpha_scale must exceed 1")
        if self.t_max < 1:
            raise ParameterError("t_max must be at least 1")
        if self.rho_log2 < 0:
            raise ParameterError("rho_log2 must be non-negative")
        if self.mode not in (MODE_EXACT, MODE_APPROX):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if not isinstance(self.gamma_rule, str):
            if self.gamma_rule <= 0:
                raise ParameterError("fixed gamma must be positive")
        elif self.gamma_rule != GAMMA_MAX_ABS:
            raise ParameterError(f"unknown gamma rule {self.gamma_rule!r}")

    @property
    def rho(self) -> float:
        return float(2**self.rho_log2)


@dataclass
class PreprocessedMatrix:
    """Scaled iteration matrix plus the quantities needed to reason about it.

    ``gamma * Ghat`` is the raw (unscaled) matrix; in exact mode that is the
    shifted inverse, in approx mode the two-term series. ``G`` is kept so
    diagnostics can evaluate the objective without the received block.
    """

    Ghat: np.ndarray
    gamma: float
    alpha: float
    mode: str
    G: np.ndarray

    def beta(self, rho: float) -> float:
        """Norm-promotion weight implied by (alpha, gamma, rho).

        Recovered from rho = theta * gamma and theta = alpha / (alpha - beta).
        Can come out non-positive, in which case objective diagnostics are
        not meaningful and callers should skip them.
        """
        return self.alpha * (1.0 - self.gamma / rho)


@dataclass
class IterationRecord:
    objective: float
    grad_residual: float
    boundary_gap: float


@dataclass
class SolverState:
    s_cur: np.ndarray
    q_cur: np.ndarray
    iter: int = 0
    trace: list[IterationRecord] = field(default_factory=list)


@dataclass
class SolveResult:
    s_hat: np.ndarray
    h_hat: np.ndarray
    state: SolverState


def preprocess(G: np.ndarray, params: ProxParams) -> PreprocessedMatrix:
    """Build the scaled iteration matrix for the requested mode."""
    G = np.asarray(G, dtype=np.complex128)
    norm = spectral_norm(G)
    alpha = params.alpha_scale * norm
    if norm == 0.0:
        raw = np.eye(G.shape[0], dtype=np.complex128)
    elif params.mode == MODE_EXACT:
        raw = invert_shifted(G, alpha)
    else:
        raw = neumann_two_term(G, alpha)
    if params.gamma_rule == GAMMA_MAX_ABS:
        gamma = float(max(np.max(np.abs(raw.real)), np.max(np.abs(raw.imag))))
    else:
        gamma = float(params.gamma_rule)
    return PreprocessedMatrix(Ghat=raw / gamma, gamma=gamma, alpha=alpha, mode=params.mode, G=G)


def init_s(G: np.ndarray, s_check: complex) -> np.ndarray:
    """Matched-filter start: the pilot-row correlations normalized by the
    pilot-slot energy."""
    G = np.asarray(G, dtype=np.complex128)
    n = G.shape[0]
    g00 = float(G[0, 0].real)
    threshold = 1e-12 * float(np.trace(G).real) / n
    if g00 <= threshold:
        raise DegenerateInputError("no received energy in the pilot slot")
    return s_check * G[:, 0] / g00


def _clip_to_hull(v: np.ndarray, c: Constellation) -> np.ndarray:
    re = np.clip(v.real, -c.re_bound, c.re_bound)
    if c.im_bound == 0.0:
        return re.astype(np.complex128)
    return re + 1j * np.clip(v.imag, -c.im_bound, c.im_bound)


def _boundary_gap(s: np.ndarray, c: Constellation) -> float:
    """Distance of the entry closest to the hull boundary, pilot excluded."""
    if len(s) < 2:
        return 0.0
    body = s[1:]
    if c.im_bound == 0.0:
        gaps = c.re_bound - np.abs(body.real)
    else:
        gaps = c.re_bound - np.maximum(np.abs(body.real), np.abs(body.imag))
    return float(np.min(gaps))


def iterate_once(
    state: SolverState,
    pre: PreprocessedMatrix,
    c: Constellation,
    params: ProxParams,
    s_check: complex,
    record_trace: bool = True,
) -> SolverState:
    """One solver step: matrix-vector product, scaled hull clip, pilot pin."""
    s_prev = state.s_cur
    q_tilde = pre.Ghat @ s_prev
    s_new = _clip_to_hull(params.rho * q_tilde, c)
    s_new[0] = s_check
    trace = state.trace
    if record_trace:
        grad_residual = pre.alpha * float(np.linalg.norm(s_prev - s_new))
        beta = pre.beta(params.rho)
        if 0.0 < beta < pre.alpha:
            q = pre.gamma * q_tilde
            obj = (
                -0.5 * float(np.real(np.vdot(q, pre.G @ q)))
                + 0.5 * pre.alpha * float(np.linalg.norm(q - s_new) ** 2)
                - 0.5 * beta * float(np.linalg.norm(s_new) ** 2)
            )
        else:
            obj = math.nan
        trace = trace + [IterationRecord(obj, grad_residual, _boundary_gap(s_new, c))]
    return SolverState(s_cur=s_new, q_cur=pre.gamma * q_tilde, iter=state.iter + 1, trace=trace)


def hard_decision(s: np.ndarray, c: Constellation) -> np.ndarray:
    """Per-entry nearest constellation point; ties go to the lowest-index
    point in the canonical ordering."""
    s = np.asarray(s, dtype=np.complex128)
    dists = np.abs(s[:, None] - c.points[None, :])
    return c.points[np.argmin(dists, axis=1)]


def channel_estimate(Y: np.ndarray, s_hat: np.ndarray) -> np.ndarray:
    """Least-squares channel estimate from a detected symbol vector."""
    energy = float(np.linalg.norm(s_hat) ** 2)
    if energy == 0.0:
        raise DegenerateInputError("cannot estimate a channel from a zero symbol vector")
    return (np.asarray(Y) @ s_hat) / energy


def objective(
    q: np.ndarray,
    s: np.ndarray,
    Y: np.ndarray,
    alpha: float,
    beta: float,
    c: Constellation | None = None,
) -> float:
    """Relaxed-problem objective; +inf when s leaves the hull (checked when
    a constellation is supplied)."""
    if c is not None:
        tol = 1e-9
        outside = np.any(np.abs(s.real) > c.re_bound + tol) or np.any(
            np.abs(s.imag) > c.im_bound + tol
        )
        if outside:
            return math.inf
    return (
        -0.5 * float(np.linalg.norm(Y @ q) ** 2)
        + 0.5 * alpha * float(np.linalg.norm(q - s) ** 2)
        - 0.5 * beta * float(np.linalg.norm(s) ** 2)
    )


def solve(
    block: ReceivedBlock,
    c: Constellation,
    params: ProxParams,
    s_check: complex | None = None,
    record_trace: bool = True,
) -> SolveResult:
    """Full detection pass: preprocess, initialize, iterate, slice, and
    re-estimate the channel from the hard decisions."""
    s_check = c.points[0] if s_check is None else s_check
    pre = preprocess(block.G, params)
    state = SolverState(s_cur=init_s(block.G, s_check), q_cur=np.zeros_like(block.G[:, 0]))
    for _ in range(params.t_max):
        state = iterate_once(state, pre, c, params, s_check, record_trace=record_trace)
    s_hat = hard_decision(state.s_cur, c)
    s_hat[0] = s_check
    h_hat = channel_estimate(block.Y, s_hat)
    return SolveResult(s_hat=s_hat, h_hat=h_hat, state=state)
