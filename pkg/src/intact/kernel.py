"""Kernelized intact-space learning.

View maps live in a reproducing-kernel feature space and are expressed
through atom matrices A_v over the training examples, so residuals and
map norms reduce to Gram-matrix algebra:

    ||z_i^v - map_v(x_i)||^2 = k(z_i,z_i) - 2 k_i^T A_v x_i
                               + x_i^T A_v^T K_v A_v x_i
    ||map_v||^2 = trace(A_v^T K_v A_v)

Training alternates the same reweighted sweeps as the linear fitter; with
a linear kernel the iterates coincide with the linear model's exactly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    FitHistory,
    Hyperparams,
    IntactEmbedding,
    IntactModel,
    MultiViewDataset,
    as_matrix,
    freeze_array,
)
from .errors import GramNotPSD, NonFiniteInput, ShapeMismatch
from .optimizer import (
    _audit_descent,
    _rho_terms,
    _spd_solve,
    _weights,
    default_init,
    residual_sq_from_stacks,
    sweep_latents,
)

PSD_JITTER_TRIGGER = -1e-8
PSD_REJECT = -1e-4


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family: linear, or rbf with bandwidth gamma.

    gamma=None requests the median heuristic 1/median(pairwise squared
    distance), resolved per view when the model is fitted.
    """

    kind: str
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None and self.gamma <= 0:
            raise ValueError("rbf gamma must be > 0")


def median_heuristic_gamma(Z) -> float:
    """1 / median pairwise squared distance between rows of Z."""
    Z = np.asarray(Z, dtype=np.float64)
    n = Z.shape[0]
    if n < 2:
        return 1.0
    sq = np.einsum("ij,ij->i", Z, Z)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    med = float(np.median(d2[np.triu_indices(n, k=1)]))
    if med <= 0:
        return 1.0
    return 1.0 / med


def ensure_psd(K: np.ndarray) -> np.ndarray:
    """Symmetrize and check positive semidefiniteness.

    Round-off negativity up to the jitter trigger is absorbed by a tiny
    diagonal shift; anything below the reject threshold raises.
    """
    K = 0.5 * (K + K.T)
    lam_min = float(np.linalg.eigvalsh(K)[0])
    if lam_min < PSD_REJECT:
        raise GramNotPSD(f"smallest Gram eigenvalue {lam_min:.3e}")
    if lam_min < PSD_JITTER_TRIGGER:
        K = K + (1e-10 * float(np.mean(np.diag(K)))) * np.eye(K.shape[0])
    return K


def cross_gram(Za, Zb, kind: str, gamma: Optional[float]) -> np.ndarray:
    """Kernel evaluations k(a_i, b_j) between two row sets."""
    Za = np.atleast_2d(np.asarray(Za, dtype=np.float64))
    Zb = np.atleast_2d(np.asarray(Zb, dtype=np.float64))
    if not (np.all(np.isfinite(Za)) and np.all(np.isfinite(Zb))):
        raise NonFiniteInput("kernel inputs contain NaN or infinite entries")
    if Za.shape[1] != Zb.shape[1]:
        raise ShapeMismatch(
            f"kernel inputs have {Za.shape[1]} and {Zb.shape[1]} columns"
        )
    if kind == "linear":
        return Za @ Zb.T
    sa = np.einsum("ij,ij->i", Za, Za)
    sb = np.einsum("ij,ij->i", Zb, Zb)
    d2 = np.maximum(sa[:, None] + sb[None, :] - 2.0 * (Za @ Zb.T), 0.0)
    return np.exp(-gamma * d2)


def gram(view_data, kernel: KernelSpec) -> np.ndarray:
    """Symmetric PSD Gram matrix of one view under the given kernel.

    For rbf, a concrete gamma must be supplied (fitting resolves the
    median heuristic before calling this).
    """
    if kernel.kind == "rbf" and kernel.gamma is None:
        raise ValueError("rbf gram needs a concrete gamma; resolve the heuristic first")
    K = cross_gram(view_data, view_data, kernel.kind, kernel.gamma)
    return ensure_psd(K)


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Atom matrices plus everything needed to evaluate kernels later:
    retained training views, the kernel spec, resolved per-view gammas,
    and the cached (read-only) Gram matrices."""

    A: tuple
    training_views: tuple
    kernel: KernelSpec
    gram: tuple
    gammas: tuple

    @property
    def n_train(self) -> int:
        return self.training_views[0].shape[0]


def kernel_residual_sq(i: int, v: int, x, km: KernelModel) -> float:
    """Feature-space squared residual of training example i on view v at
    latent point x; round-off negativity is clamped to zero."""
    if not 0 <= v < len(km.A):
        raise IndexError(f"view index {v} out of range")
    K = km.gram[v]
    if not 0 <= i < K.shape[0]:
        raise IndexError(f"example index {i} out of range")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    A = km.A[v]
    Ax = A @ x
    val = float(K[i, i] - 2.0 * (K[i] @ Ax) + Ax @ (K @ Ax))
    return max(val, 0.0)


def kernel_w_norm_sq(v: int, km: KernelModel) -> float:
    """Squared feature-space norm of view v's map: trace(A^T K A).

    This is the Frobenius norm of the implicit map, the unique reading
    under which explicit (linear-kernel) features reproduce the linear
    model's penalty exactly.
    """
    A = km.A[v]
    return float(np.einsum("ij,ik,kj->", A, km.gram[v], A))


def _kernel_stacks(km: KernelModel):
    """Per-view sweep quantities: G_v = A^T K A, P_v = K A, diag(K)."""
    G = np.stack([A.T @ K @ A for A, K in zip(km.A, km.gram)])
    P = np.stack([K @ A for A, K in zip(km.A, km.gram)])
    znorm = np.stack([np.diag(K).copy() for K in km.gram])
    return G, P, znorm


def kernel_alternation_objective(km_A, grams, X, hp: Hyperparams, loss="cauchy") -> float:
    G = np.stack([A.T @ K @ A for A, K in zip(km_A, grams)])
    P = np.stack([K @ A for A, K in zip(km_A, grams)])
    znorm = np.stack([np.diag(K).copy() for K in grams])
    s = residual_sq_from_stacks(G, P, znorm, X)
    m, n = s.shape
    total = float(_rho_terms(s, hp.c, loss).sum())
    reg_w = sum(float(np.einsum("ij,ik,kj->", A, K, A)) for A, K in zip(km_A, grams))
    reg_x = float(np.sum(X * X))
    return total / (m * n) + hp.C1 * reg_w / m + hp.C2 * reg_x / n


def _fit_atoms(K, X, A0, c, C1, tol_x, max_inner, loss="cauchy"):
    """Reweighted solve of one view's atom matrix against fixed latents.

    Stationarity in atom coordinates gives
    A = diag(Q) X (X^T diag(Q) X + n C1 I)^{-1}, the same ridge form as
    the explicit map update with feature images replaced by basis rows.
    """
    n, d = X.shape
    A = A0.copy()
    kdiag = np.diag(K)
    ridge = n * C1 * np.eye(d)
    iterations = 0
    for k in range(max_inner):
        KA = K @ A
        lin = np.einsum("ij,ij->i", KA, X)
        Gq = A.T @ KA
        quad = np.einsum("ij,jk,ik->i", X, Gq, X)
        s = np.maximum(kdiag - 2.0 * lin + quad, 0.0)
        Q = _weights(s, c, loss)
        QX = X * Q[:, None]
        Hw = X.T @ QX + ridge
        A_new = _spd_solve(Hw, QX.T).T
        iterations = k + 1
        delta = float(np.linalg.norm(A_new - A))
        A = A_new
        if delta <= tol_x:
            break
    return A, iterations


def kernel_fit(
    dataset: MultiViewDataset,
    hp: Hyperparams,
    kernel: KernelSpec,
    init=None,
    loss: str = "cauchy",
    threads: int = 1,
):
    """Alternating reweighted fit in atom coordinates.

    Mirrors the linear fitter: latent sweep, atom sweep, monotone trace,
    then a final latent refresh. Returns (IntactModel in kernel mode,
    IntactEmbedding, FitHistory).
    """
    if loss not in ("cauchy", "l2"):
        raise ValueError(f"unknown loss {loss!r}")
    views = dataset.views
    m, n, d = dataset.m, dataset.n, hp.d

    gammas = []
    grams = []
    for Z in views:
        if kernel.kind == "rbf":
            g = kernel.gamma if kernel.gamma is not None else median_heuristic_gamma(Z)
        else:
            g = None
        gammas.append(g)
        grams.append(freeze_array(gram(Z, KernelSpec(kernel.kind, g))))

    if init is not None:
        model0, X0 = init
        if model0.mode != "kernel":
            raise ShapeMismatch("kernel_fit init must carry a kernel-mode model")
        A = [np.array(Av, dtype=np.float64) for Av in model0.kernel_part.A]
        X = np.array(as_matrix(X0), dtype=np.float64)
    else:
        X, _ = default_init(views, hp)
        Hw = X.T @ X + n * hp.C1 * np.eye(d)
        A_shared = _spd_solve(Hw, X.T).T  # n x d
        A = [A_shared.copy() for _ in range(m)]
    for v, Av in enumerate(A):
        if Av.shape != (n, d):
            raise ShapeMismatch(f"A[{v}] shape {Av.shape}, expected ({n}, {d})")

    J_prev = kernel_alternation_objective(A, grams, X, hp, loss)
    trace = []
    inner = []
    converged = False
    stop_reason = "max_iter"
    last = J_prev

    def run_x_sweep(X_cur):
        G = np.stack([Av.T @ K @ Av for Av, K in zip(A, grams)])
        P = np.stack([K @ Av for Av, K in zip(A, grams)])
        znorm = np.stack([np.diag(K).copy() for K in grams])
        return sweep_latents(
            G, P, znorm, X_cur, hp.c, hp.C2, hp.tol_x, hp.max_inner, loss, threads
        )

    def run_a_sweep(X_cur):
        def one(v):
            return _fit_atoms(
                grams[v], X_cur, A[v], hp.c, hp.C1, hp.tol_x, hp.max_inner, loss
            )

        if threads > 1 and m > 1:
            with ThreadPoolExecutor(max_workers=min(threads, m)) as pool:
                results = list(pool.map(one, range(m)))
        else:
            results = [one(v) for v in range(m)]
        return [r[0] for r in results], max(r[1] for r in results)

    for _ in range(hp.max_outer):
        X, x_iters, _ = run_x_sweep(X)
        J1 = kernel_alternation_objective(A, grams, X, hp, loss)
        _audit_descent(last, J1)
        trace.append(("x-update", J1))
        last = J1

        A, a_iters = run_a_sweep(X)
        J2 = kernel_alternation_objective(A, grams, X, hp, loss)
        _audit_descent(last, J2)
        trace.append(("W-update", J2))
        last = J2
        inner.append((int(np.max(x_iters)), int(a_iters)))

        if abs(J2 - J_prev) <= hp.tol_obj * max(1.0, abs(J_prev)):
            converged = True
            stop_reason = "objective_tol"
            break
        J_prev = J2

    X, x_iters, _ = run_x_sweep(X)
    J3 = kernel_alternation_objective(A, grams, X, hp, loss)
    _audit_descent(last, J3)
    trace.append(("x-update", J3))
    inner.append((int(np.max(x_iters)), 0))

    km = KernelModel(
        A=tuple(freeze_array(Av) for Av in A),
        training_views=tuple(views),
        kernel=kernel,
        gram=tuple(grams),
        gammas=tuple(gammas),
    )
    model = IntactModel(mode="kernel", W=None, kernel_part=km, hyperparams=hp)
    history = FitHistory(
        objective_trace=tuple(trace),
        inner_iterations=tuple(inner),
        converged=converged,
        stop_reason=stop_reason,
    )
    return model, IntactEmbedding(X), history


def _embed_stacks(z_rows, km: KernelModel):
    """Sweep quantities for new examples given per view as row matrices."""
    G, P, znorm = [], [], []
    for v, (Znew, A, Ztr, g) in enumerate(
        zip(z_rows, km.A, km.training_views, km.gammas)
    ):
        Znew = np.atleast_2d(np.asarray(Znew, dtype=np.float64))
        if Znew.shape[1] != Ztr.shape[1]:
            raise ShapeMismatch(
                f"view {v} has {Znew.shape[1]} columns, model expects {Ztr.shape[1]}"
            )
        Kx = cross_gram(Znew, Ztr, km.kernel.kind, g)  # n_new x n_train
        if km.kernel.kind == "linear":
            kself = np.einsum("ij,ij->i", Znew, Znew)
        else:
            kself = np.ones(Znew.shape[0])
        G.append(A.T @ km.gram[v] @ A)
        P.append(Kx @ A)
        znorm.append(kself)
    return np.stack(G), np.stack(P), np.stack(znorm)


def kernel_embed_many(z_rows, km: KernelModel, hp: Hyperparams, threads: int = 1):
    """Embed a batch of new multi-view examples (one row matrix per view)."""
    G, P, znorm = _embed_stacks(z_rows, km)
    n_new = znorm.shape[1]
    X0 = np.zeros((n_new, G.shape[1]))
    X, _, _ = sweep_latents(
        G, P, znorm, X0, hp.c, hp.C2, hp.tol_x, hp.max_inner, "cauchy", threads
    )
    return X


def kernel_embed(z_new, km: KernelModel, hp: Hyperparams = None) -> np.ndarray:
    """Latent coordinate of one new multi-view example, found by the same
    reweighted solver used in training, via cross-kernels against the
    retained training views."""
    if hp is None:
        raise ValueError("kernel_embed needs hyperparameters")
    rows = [np.asarray(z, dtype=np.float64).reshape(1, -1) for z in z_new]
    return kernel_embed_many(rows, km, hp)[0]
