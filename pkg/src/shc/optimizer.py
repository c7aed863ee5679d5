"""Hash-center generation by augmented-Lagrangian alternating minimization.

Given a C x C class-similarity matrix S and a code length q, this module
searches for C codewords h_i in {-1,+1}^q whose normalized Gram matrix
(1/q) H^T H tracks S while every pair keeps Hamming distance >= d
(equivalently h_i^T h_j <= q - 2d).  The constrained problem

    min  ||S - (1/q) H^T H||_F^2  +  mu * sum_{i != j} h_i^T h_j
    s.t. h_i^T h_j <= q - 2d   (i != j),   h_i in {-1,+1}^q

is handled by introducing a real-valued proxy M for H, nonnegative slacks
k_ij for the pair inequalities, and multipliers (Lambda, alpha), then
cycling closed-form updates of M and K, sign-projected gradient steps on
each column h_i, and first-order multiplier updates.

All matrices follow the column convention: H, M, Lambda are (q, C) with
column i belonging to class i; K and alpha are (C, C) with unused zero
diagonals.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, hadamard

from .core import (
    CenterSet,
    DimensionMismatchError,
    InfeasibleError,
    ShcError,
    SimilarityMatrix,
    ValidationError,
)

__all__ = [
    "AlmHyperParams",
    "AlmState",
    "INIT_GREEDY",
    "INIT_HADAMARD",
    "init_centers",
    "alm_objective",
    "update_proxy",
    "update_slack",
    "center_gradient",
    "update_center",
    "update_multipliers",
    "optimize",
    "ablation_optimize",
    "quality_metrics",
    "constrained_objective",
    "violation_count",
]

log = logging.getLogger(__name__)

INIT_GREEDY = "greedy"
INIT_HADAMARD = "hadamard"

# Initial multiplier values; alpha starts at zero.
LAMBDA_INIT = 0.1

# Random candidates drawn per slot in the greedy farthest-point init.
_CANDIDATES_PER_SLOT = 200


@dataclass(frozen=True)
class AlmHyperParams:
    """Knobs of the alternating optimization.

    mu      weight of the pairwise inner-product (distance) term
    rho     quadratic penalty tying the proxy M to H
    beta    quadratic penalty on the slack equality constraints
    eta     divisor of the projected gradient step (step size 1/eta)
    cycles  outer alternating cycles
    inner   sign-projected gradient steps per column per cycle
    """

    mu: float = 0.625
    rho: float = 0.2
    beta: float = 1e-6
    eta: float = 0.5
    cycles: int = 20
    inner: int = 3

    def __post_init__(self):
        if self.mu < 0:
            raise ValidationError(f"mu must be >= 0, got {self.mu}")
        if self.rho <= 0:
            raise ValidationError(f"rho must be > 0, got {self.rho}")
        if self.beta <= 0:
            raise ValidationError(f"beta must be > 0, got {self.beta}")
        if self.eta <= 0:
            raise ValidationError(f"eta must be > 0, got {self.eta}")
        if self.cycles < 1:
            raise ValidationError(f"cycles must be >= 1, got {self.cycles}")
        if self.inner < 1:
            raise ValidationError(f"inner must be >= 1, got {self.inner}")

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "rho": self.rho,
            "beta": self.beta,
            "eta": self.eta,
            "cycles": self.cycles,
            "inner": self.inner,
        }


@dataclass
class AlmState:
    """Full variable set of one optimization run.

    H      (q, C) current binary centers, entries +-1.0
    M      (q, C) real proxy of H
    K      (C, C) nonnegative slacks for the pair inequalities, diagonal 0
    Lam    (q, C) multipliers for H = M
    Alpha  (C, C) multipliers for the slack equalities, diagonal 0
    d      target minimum pairwise Hamming distance
    """

    H: np.ndarray
    M: np.ndarray
    K: np.ndarray
    Lam: np.ndarray
    Alpha: np.ndarray
    d: int

    def __post_init__(self):
        q, C = self.H.shape
        for name, arr, shape in (
            ("M", self.M, (q, C)),
            ("K", self.K, (C, C)),
            ("Lam", self.Lam, (q, C)),
            ("Alpha", self.Alpha, (C, C)),
        ):
            if arr.shape != shape:
                raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected {shape}")
        if not np.isin(self.H, (-1.0, 1.0)).all():
            raise ValidationError("H entries must be exactly -1 or +1")
        off = ~np.eye(C, dtype=bool)
        if (self.K[off] < 0).any():
            raise ValidationError("K off-diagonal entries must be nonnegative")
        if np.diag(self.K).any() or np.diag(self.Alpha).any():
            raise ValidationError("K and Alpha diagonals must be zero")
        if not 1 <= self.d <= q:
            raise ValidationError(f"d must lie in [1, {q}], got {self.d}")

    @property
    def q(self) -> int:
        return int(self.H.shape[0])

    @property
    def C(self) -> int:
        return int(self.H.shape[1])

    @classmethod
    def initial(cls, centers: CenterSet, d: int) -> "AlmState":
        """State at the start of a run: M = H, K = 0, Lam = 0.1, Alpha = 0."""
        H = centers.matrix.T.astype(np.float64)
        q, C = H.shape
        return cls(
            H=H,
            M=H.copy(),
            K=np.zeros((C, C)),
            Lam=np.full((q, C), LAMBDA_INIT),
            Alpha=np.zeros((C, C)),
            d=d,
        )


def _sim_values(S) -> np.ndarray:
    arr = S.values if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"similarity matrix must be square, got shape {arr.shape}")
    return arr


def _check_sim(state: AlmState, S: np.ndarray) -> None:
    if S.shape[0] != state.C:
        raise DimensionMismatchError(f"similarity is {S.shape[0]}x{S.shape[0]} but C={state.C}")


def _sign_keep(values: np.ndarray, previous: np.ndarray) -> np.ndarray:
    """Elementwise sign with ties (exact zeros) keeping the previous bit."""
    return np.where(values > 0, 1.0, np.where(values < 0, -1.0, previous))


def init_centers(q: int, C: int, d: int, seed: int, method: str = INIT_GREEDY) -> CenterSet:
    """Seeded construction of C distinct centers aiming for pairwise distance >= d.

    Greedy farthest-point: per slot, draw 200 uniform candidates, accept the
    first with distance >= d to everything accepted, falling back to the
    max-min candidate.  When the target spacing is not met the set is still
    returned and the violating pair count is logged.  Hadamard seeding uses
    the rows of a power-of-two Hadamard matrix and their complements
    (pairwise distance q/2 for up to 2q classes).
    """
    if q < 1:
        raise ValidationError(f"code length must be positive, got {q}")
    if C < 1:
        raise ValidationError(f"class count must be positive, got {C}")
    if not 1 <= d <= q:
        raise ValidationError(f"d must lie in [1, {q}], got {d}")
    if C > 2**q:
        raise InfeasibleError(f"{C} classes do not fit in {{-1,+1}}^{q} ({2**q} codewords)")

    if method == INIT_HADAMARD:
        return _hadamard_centers(q, C, d)
    if method != INIT_GREEDY:
        raise ValidationError(f"unknown init method {method!r}")

    rng = np.random.default_rng(seed)
    rows = np.empty((C, q), dtype=np.int8)
    filled = 0
    while filled < C:
        cand = (rng.integers(0, 2, size=(_CANDIDATES_PER_SLOT, q), dtype=np.int8) * 2) - 1
        if filled == 0:
            rows[0] = cand[0]
            filled = 1
            continue
        dist = (q - cand.astype(np.int64) @ rows[:filled].T) // 2
        min_dist = dist.min(axis=1)
        qualified = np.nonzero(min_dist >= d)[0]
        if qualified.size:
            rows[filled] = cand[qualified[0]]
        else:
            best = int(np.argmax(min_dist))
            if min_dist[best] == 0:
                rows[filled] = _exhaustive_max_min(rows[:filled], q)
            else:
                rows[filled] = cand[best]
        filled += 1

    bad = _count_close_pairs(rows, d)
    if bad:
        log.warning(
            "greedy init: %d of %d center pairs below target distance %d (q=%d, C=%d)",
            bad, C * (C - 1) // 2, d, q, C,
        )
    return CenterSet(rows)


def _count_close_pairs(rows: np.ndarray, d: int) -> int:
    gram = rows.astype(np.int64) @ rows.T
    iu = np.triu_indices(rows.shape[0], k=1)
    dist = (rows.shape[1] - gram[iu]) // 2
    return int(np.count_nonzero(dist < d))


def _exhaustive_max_min(accepted: np.ndarray, q: int) -> np.ndarray:
    """All 200 candidates collided with accepted centers; enumerate instead.

    Only reachable for tiny q, where the codeword space is nearly full.
    """
    if q > 20:
        raise ShcError("could not draw a candidate distinct from accepted centers")
    codes = ((np.arange(2**q, dtype=np.int64)[:, None] >> np.arange(q - 1, -1, -1)) & 1)
    codes = (codes.astype(np.int8) * 2) - 1
    dist = (q - codes.astype(np.int64) @ accepted.T) // 2
    min_dist = dist.min(axis=1)
    return codes[int(np.argmax(min_dist))]


def _hadamard_centers(q: int, C: int, d: int) -> CenterSet:
    if q & (q - 1):
        raise ValidationError(f"hadamard init needs a power-of-two code length, got q={q}")
    if C > 2 * q:
        raise ValidationError(f"hadamard init supports at most 2q={2 * q} classes, got C={C}")
    rows = hadamard(q).astype(np.int8)
    pool = np.vstack([rows, -rows])
    centers = pool[:C]
    bad = _count_close_pairs(centers, d)
    if bad:
        log.warning(
            "hadamard init: %d center pairs below target distance %d (pairwise spacing is q/2=%d)",
            bad, d, q // 2,
        )
    return CenterSet(centers)


def alm_objective(state: AlmState, S, hp: AlmHyperParams) -> float:
    """Full augmented-Lagrangian value at the given state.

    Sum of: the similarity-fit term ||S - (1/q) H^T M||_F^2, the mu-weighted
    pairwise inner products, the Lambda/rho terms tying M to H, and the
    alpha/beta terms on the residuals r_ij = q - 2d - h_i^T h_j - k_ij
    (off-diagonal pairs only).
    """
    Sv = _sim_values(S)
    _check_sim(state, Sv)
    q, C = state.q, state.C
    H, M = state.H, state.M
    G = H.T @ H

    fit = Sv - (H.T @ M) / q
    value = float((fit * fit).sum())
    value += hp.mu * float(G.sum() - np.trace(G))
    diff = H - M
    value += float((state.Lam * diff).sum())
    value += 0.5 * hp.rho * float((diff * diff).sum())

    R = (q - 2 * state.d) - G - state.K
    np.fill_diagonal(R, 0.0)
    A = state.Alpha.copy()
    np.fill_diagonal(A, 0.0)
    value += float((A * R).sum())
    value += 0.5 * hp.beta * float((R * R).sum())
    return value


def update_proxy(state: AlmState, S, hp: AlmHyperParams) -> np.ndarray:
    """Closed-form minimizer of the objective over M, all columns at once.

    Solves the SPD system ((2/q^2) H H^T + rho I) m_i = (2/q) H s_i +
    lambda_i + rho h_i for every column.
    """
    Sv = _sim_values(S)
    _check_sim(state, Sv)
    q = state.q
    H = state.H
    A = (2.0 / q**2) * (H @ H.T)
    A[np.diag_indices_from(A)] += hp.rho
    B = (2.0 / q) * (H @ Sv) + state.Lam + hp.rho * H
    try:
        factor = cho_factor(A)
    except np.linalg.LinAlgError as exc:  # unreachable for rho > 0
        raise ShcError(f"proxy system is not positive definite: {exc}") from exc
    return cho_solve(factor, B)


def update_slack(state: AlmState, hp: AlmHyperParams) -> np.ndarray:
    """Closed-form minimizer over the slacks: max(q - 2d - h_i^T h_j + alpha/beta, 0)."""
    G = state.H.T @ state.H
    K = (state.q - 2 * state.d) - G + state.Alpha / hp.beta
    np.maximum(K, 0.0, out=K)
    np.fill_diagonal(K, 0.0)
    return K


def center_gradient(state: AlmState, S, hp: AlmHyperParams, i: int) -> np.ndarray:
    """Gradient of the objective with respect to column h_i as a real vector.

    Every occurrence of h_i contributes: the similarity-fit row, both
    orderings of each mu pair, the Lambda/rho coupling, and both orderings
    of each alpha/beta residual (r_ij and r_ji).  Matches central finite
    differences of :func:`alm_objective`.
    """
    Sv = _sim_values(S)
    _check_sim(state, Sv)
    q, C = state.q, state.C
    H, M = state.H, state.M
    h = H[:, i]

    g = (2.0 / q**2) * (M @ (M.T @ h)) - (2.0 / q) * (M @ Sv[:, i])
    g = g + state.Lam[:, i] + hp.rho * (h - M[:, i])
    if C > 1:
        g = g + 2.0 * hp.mu * (H.sum(axis=1) - h)
        gi = H.T @ h
        base = float(q - 2 * state.d)
        r_row = base - gi - state.K[i, :]
        r_col = base - gi - state.K[:, i]
        w = state.Alpha[i, :] + state.Alpha[:, i] + hp.beta * (r_row + r_col)
        w[i] = 0.0
        g = g - H @ w
    return g


def update_center(state: AlmState, S, hp: AlmHyperParams, i: int) -> np.ndarray:
    """Run ``hp.inner`` sign-projected gradient steps on column i, in place.

    Each step moves h_i by -1/eta times the current gradient and projects
    back onto {-1,+1}^q; components that land exactly on 0 keep their
    previous sign.  Returns a copy of the updated column.
    """
    for _ in range(hp.inner):
        g = center_gradient(state, S, hp, i)
        v = state.H[:, i] - g / hp.eta
        state.H[:, i] = _sign_keep(v, state.H[:, i])
    return state.H[:, i].copy()


def update_multipliers(state: AlmState, hp: AlmHyperParams, i: int) -> tuple[np.ndarray, np.ndarray]:
    """First-order multiplier updates for column i, in place.

    lambda_i += rho (h_i - m_i); alpha_ij += beta (q - 2d - h_i^T h_j - k_ij)
    for j != i.  The alpha diagonal is untouched.  Returns copies of the new
    lambda_i and alpha row i.
    """
    state.Lam[:, i] += hp.rho * (state.H[:, i] - state.M[:, i])
    gi = state.H.T @ state.H[:, i]
    r = (state.q - 2 * state.d) - gi - state.K[i, :]
    r[i] = 0.0
    state.Alpha[i, :] += hp.beta * r
    return state.Lam[:, i].copy(), state.Alpha[i, :].copy()


def constrained_objective(centers: CenterSet, S, mu: float) -> float:
    """Original constrained objective of a center set (no ALM terms).

    ||S - (1/q) H^T H||_F^2 + mu * sum_{i != j} h_i^T h_j.
    """
    Sv = _sim_values(S)
    if Sv.shape[0] != centers.C:
        raise DimensionMismatchError(f"similarity is {Sv.shape[0]}x{Sv.shape[0]} but C={centers.C}")
    rows = centers.matrix.astype(np.float64)
    G = rows @ rows.T
    fit = Sv - G / centers.q
    return float((fit * fit).sum()) + mu * float(G.sum() - np.trace(G))


def violation_count(centers: CenterSet, d: int) -> int:
    """Number of unordered center pairs with Hamming distance below d."""
    return _count_close_pairs(centers.matrix, d)


def _gram_score(G: np.ndarray, Sv: np.ndarray, q: int, d: int, mu: float) -> tuple[int, float]:
    """Incumbent key: (violated pair count, constrained objective), from the Gram matrix."""
    iu = np.triu_indices(G.shape[0], k=1)
    violations = int(np.count_nonzero(G[iu] > q - 2 * d))
    fit = Sv - G / q
    objective = float((fit * fit).sum()) + mu * float(G.sum() - np.trace(G))
    return violations, objective


def optimize(
    S,
    q: int,
    d: int,
    hp: AlmHyperParams = AlmHyperParams(),
    seed: int = 0,
    init: str = INIT_GREEDY,
) -> tuple[CenterSet, list[float]]:
    """Generate semantic hash centers for similarity matrix S.

    Runs ``hp.cycles`` alternating cycles: proxy update, slack update, then
    per column the inner sign-PGD steps followed by that column's
    multiplier updates.  The raw iterates may oscillate, so the incumbent
    best H - ordered by (violated pair count, constrained objective) and
    recorded at initialization and at every cycle boundary - is what gets
    returned, together with the per-cycle trace of the
    augmented-Lagrangian value.  Deterministic for fixed (S, q, d, hp,
    seed, init).
    """
    Sv = _sim_values(S)
    C = Sv.shape[0]
    if not 1 <= d <= q:
        raise ValidationError(f"d must lie in [1, {q}], got {d}")
    state = AlmState.initial(init_centers(q, C, d, seed, method=init), d)

    best_key = _gram_score(state.H.T @ state.H, Sv, q, d, hp.mu)
    best_H = state.H.copy()
    trace = []
    for _ in range(hp.cycles):
        state.M = update_proxy(state, Sv, hp)
        state.K = update_slack(state, hp)
        for i in range(C):
            update_center(state, Sv, hp, i)
            update_multipliers(state, hp, i)
        key = _gram_score(state.H.T @ state.H, Sv, q, d, hp.mu)
        if key < best_key:
            best_key = key
            best_H = state.H.copy()
        trace.append(alm_objective(state, Sv, hp))

    if best_key[0]:
        log.warning(
            "optimize: returned centers violate the distance target on %d pairs (q=%d, C=%d, d=%d)",
            best_key[0], q, C, d,
        )
    return CenterSet(best_H.T.astype(np.int8)), trace


def ablation_optimize(
    S,
    q: int,
    hp: AlmHyperParams = AlmHyperParams(),
    seed: int = 0,
    init: str = INIT_GREEDY,
    initial: CenterSet | None = None,
) -> CenterSet:
    """Distance-free variant: alternate closed-form M and sign-projected H.

    Minimizes the relaxation ||S - (1/q) H^T M||_F^2 + mu ||H - M||_F^2 by
    solving the M normal equations exactly (which can only lower the
    relaxed objective) and setting H to the sign of the real minimizer of
    the H subproblem.  mu > 0 keeps both systems positive definite.
    Returns the iterate with the smallest similarity loss seen.
    ``initial`` overrides the seeded init (shared fixed points are easiest
    to exercise that way).
    """
    Sv = _sim_values(S)
    C = Sv.shape[0]
    if hp.mu <= 0:
        raise ValidationError("ablation requires mu > 0 to regularize the normal equations")
    if initial is None:
        initial = init_centers(q, C, 1, seed, method=init)
    if initial.C != C or initial.q != q:
        raise DimensionMismatchError(
            f"initial centers are ({initial.C}, {initial.q}), expected ({C}, {q})"
        )
    H = initial.matrix.T.astype(np.float64)
    M = H.copy()
    eye = np.eye(q)

    def relaxed(Hm, Mm):
        fit = Sv - (Hm.T @ Mm) / q
        gap = Hm - Mm
        return float((fit * fit).sum()) + hp.mu * float((gap * gap).sum())

    def similarity_loss(Hm):
        G = Hm.T @ Hm
        fit = Sv - G / q
        return float((fit * fit).sum())

    best_loss = similarity_loss(H)
    best_H = H.copy()
    for _ in range(hp.cycles):
        before = relaxed(H, M)
        A = (H @ H.T) / q**2 + hp.mu * eye
        B = (H @ Sv) / q + hp.mu * H
        M = cho_solve(cho_factor(A), B)
        after = relaxed(H, M)
        assert after <= before + 1e-9 * (1.0 + abs(before)), "M-step raised the relaxed objective"

        A = (M @ M.T) / q**2 + hp.mu * eye
        B = (M @ Sv) / q + hp.mu * M
        H = _sign_keep(cho_solve(cho_factor(A), B), H)

        loss = similarity_loss(H)
        if loss < best_loss:
            best_loss = loss
            best_H = H.copy()
    return CenterSet(best_H.T.astype(np.int8))


def quality_metrics(centers: CenterSet, S) -> tuple[int | None, float]:
    """Minimum pairwise Hamming distance and similarity loss of a center set.

    The similarity loss is ||S - (1/q) H^T H||_F^2 over the full matrix.
    With a single center there are no pairs, so the distance is reported as
    None rather than a misleading 0.
    """
    Sv = _sim_values(S)
    if Sv.shape[0] != centers.C:
        raise DimensionMismatchError(f"similarity is {Sv.shape[0]}x{Sv.shape[0]} but C={centers.C}")
    rows = centers.matrix.astype(np.float64)
    G = rows @ rows.T
    fit = Sv - G / centers.q
    s_loss = float((fit * fit).sum())
    if centers.C < 2:
        return None, s_loss
    iu = np.triu_indices(centers.C, k=1)
    d_min = int(((centers.q - G[iu]) / 2).min())
    return d_min, s_loss
