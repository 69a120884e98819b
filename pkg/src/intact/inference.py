"""Out-of-sample embedding and multi-view stability diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Hyperparams, IntactModel
from .errors import ShapeMismatch, ZeroRegularizer
from .kernel import kernel_embed, kernel_embed_many
from .optimizer import (
    _check_views_against_model,
    _example_vectors,
    _view_stacks,
    objective_x,
    solve_x,
    sweep_latents,
)


@dataclass(frozen=True)
class StabilityReport:
    """One perturbation probe: the summed per-view loss deviation between
    an example and its single-coordinate perturbed copy, against the
    theoretical stability bound."""

    tau: float
    view_index: int
    coord_index: int
    measured_deviation: float
    beta_bound: float
    holds: bool
    local_convex: bool


def embed_example(z_new, model: IntactModel, hp: Hyperparams = None, x0=None) -> np.ndarray:
    """Latent coordinate of a new multi-view example (linear model).

    Minimizes the per-example objective with the trained maps via the
    reweighted solver, starting from zero unless x0 is given.
    """
    _check_views_against_model(z_new, model)
    hp = hp or model.hyperparams
    if x0 is None:
        x0 = np.zeros(hp.d)
    return solve_x(z_new, model, x0, hp).solution


def embed_examples(view_rows, model: IntactModel, hp: Hyperparams = None, threads: int = 1):
    """Embed a batch of examples given as one row matrix per view.

    Dispatches on model mode; rows are independent solves from zero.
    """
    hp = hp or model.hyperparams
    if model.mode == "kernel":
        return kernel_embed_many(view_rows, model.kernel_part, hp, threads)
    if len(view_rows) != len(model.W):
        raise ShapeMismatch(
            f"got {len(view_rows)} views for a model with {len(model.W)}"
        )
    rows = []
    for v, (Z, Wv) in enumerate(zip(view_rows, model.W)):
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if Z.shape[1] != Wv.shape[0]:
            raise ShapeMismatch(
                f"view {v} has {Z.shape[1]} columns, model expects {Wv.shape[0]}"
            )
        rows.append(Z)
    G, P, znorm = _view_stacks(rows, list(model.W))
    X0 = np.zeros((rows[0].shape[0], hp.d))
    X, _, _ = sweep_latents(
        G, P, znorm, X0, hp.c, hp.C2, hp.tol_x, hp.max_inner, "cauchy", threads
    )
    return X


def view_losses(z_views, model: IntactModel, x) -> np.ndarray:
    """Per-view Cauchy losses log(1 + ||z^v - W_v x||^2 / c^2)."""
    zs = _example_vectors(z_views, model)
    c = model.hyperparams.c
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    out = np.empty(len(zs))
    for v, (z, Wv) in enumerate(zip(zs, model.W)):
        r = z - Wv @ x
        out[v] = np.log1p((r @ r) / (c * c))
    return out


def map_spectral_norms(model: IntactModel) -> np.ndarray:
    """Largest singular value of each view map (feature-space operator
    norm in kernel mode, via the Gram quadratic form)."""
    if model.mode == "linear":
        return np.array([np.linalg.norm(Wv, 2) for Wv in model.W])
    km = model.kernel_part
    out = []
    for A, K in zip(km.A, km.gram):
        G = A.T @ K @ A
        out.append(float(np.sqrt(max(np.linalg.eigvalsh(G)[-1], 0.0))))
    return np.array(out)


def stability_bound(tau: float, model: IntactModel, hp: Hyperparams = None) -> float:
    """Worst-case summed per-view loss deviation under a single-coordinate
    perturbation of magnitude tau:

        sqrt(2)/c * |tau| + sum_v 128^(1/4) * Omega_v / c
                              * sqrt(|tau| / (m c C2))

    with Omega_v the spectral norm of view v's map. Requires C2 > 0.
    """
    hp = hp or model.hyperparams
    if hp.C2 <= 0:
        raise ZeroRegularizer("stability bound undefined when C2 = 0")
    c = hp.c
    tau = abs(float(tau))
    omegas = map_spectral_norms(model)
    m = len(omegas)
    head = np.sqrt(2.0) / c * tau
    tail = float(np.sum(128.0**0.25 * omegas / c)) * np.sqrt(tau / (m * c * hp.C2))
    return head + tail


def local_convexity_check(
    z_views,
    model: IntactModel,
    center,
    radius: float,
    n_samples: int = 16,
    seed: int = 0,
) -> bool:
    """Sampled midpoint-convexity audit of the per-example objective in a
    ball around `center`; the stability bound's derivation assumes it."""
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=np.float64).reshape(-1)
    d = center.shape[0]
    for _ in range(n_samples):
        a = center + radius * rng.normal(size=d)
        b = center + radius * rng.normal(size=d)
        ja = objective_x(z_views, model, a)
        jb = objective_x(z_views, model, b)
        jm = objective_x(z_views, model, 0.5 * (a + b))
        bound = 0.5 * (ja + jb)
        if jm > bound + 1e-10 * max(1.0, abs(bound)):
            return False
    return True


def stability_probe(
    z_views,
    model: IntactModel,
    hp: Hyperparams = None,
    tau: float = 0.0,
    view_index: int = 0,
    coord_index: int = 0,
    convexity_samples: int = 16,
    seed: int = 0,
) -> StabilityReport:
    """Embed an example and its perturbed copy and compare the summed
    per-view loss deviation against the stability bound.

    The perturbed embedding starts from the unperturbed solution, matching
    the local neighborhood the bound's derivation works in. A sampled
    local-convexity check is attached so bound violations can be told
    apart from assumption failures.
    """
    hp = hp or model.hyperparams
    if hp.C2 <= 0:
        raise ZeroRegularizer("stability probes need C2 > 0")
    if model.mode == "kernel":
        zs = [np.asarray(z, dtype=np.float64).reshape(-1) for z in z_views]
        if not 0 <= view_index < len(zs):
            raise IndexError(f"view index {view_index} out of range")
        embed_one = lambda z, x0: kernel_embed(z, model.kernel_part, hp)
        losses = lambda z, x: _kernel_view_losses(z, model, x)
    else:
        zs = _example_vectors(z_views, model)
        if not 0 <= view_index < len(zs):
            raise IndexError(f"view index {view_index} out of range")
        embed_one = lambda z, x0: solve_x(z, model, x0, hp).solution
        losses = lambda z, x: view_losses(z, model, x)
    if not 0 <= coord_index < zs[view_index].shape[0]:
        raise IndexError(f"coordinate index {coord_index} out of range")

    x = embed_one(zs, np.zeros(hp.d))
    z_hat = [z.copy() for z in zs]
    z_hat[view_index][coord_index] += tau
    # tau = 0 poses the identical problem; re-solving would only add noise
    x_hat = x if tau == 0.0 else embed_one(z_hat, x)

    measured = float(np.sum(np.abs(losses(zs, x) - losses(z_hat, x_hat))))
    bound = stability_bound(tau, model, hp)
    holds = measured <= bound + 1e-12
    if model.mode == "kernel":
        convex = True
    else:
        radius = max(float(np.linalg.norm(x_hat - x)), abs(tau), 1e-6)
        convex = local_convexity_check(
            zs, model, x, radius, n_samples=convexity_samples, seed=seed
        )
    return StabilityReport(
        tau=float(tau),
        view_index=int(view_index),
        coord_index=int(coord_index),
        measured_deviation=measured,
        beta_bound=bound,
        holds=holds,
        local_convex=convex,
    )


def _kernel_view_losses(z_views, model: IntactModel, x) -> np.ndarray:
    from .kernel import _embed_stacks  # local import to avoid a cycle
    from .optimizer import residual_sq_from_stacks

    km = model.kernel_part
    rows = [np.asarray(z, dtype=np.float64).reshape(1, -1) for z in z_views]
    G, P, znorm = _embed_stacks(rows, km)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    s = residual_sq_from_stacks(G, P, znorm, x)[:, 0]
    c = model.hyperparams.c
    return np.log1p(s / (c * c))
