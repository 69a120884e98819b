"""Quantitative evaluation: reconstruction error, latent-space alignment,
k-NN classification, and the contamination-robustness benchmark."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Hyperparams, IntactModel, MultiViewDataset, as_matrix, validate_dataset
from .errors import EmptyTrainingSet, RankDeficient, ShapeMismatch
from .optimizer import fit, objective_full


@dataclass(frozen=True, eq=False)
class AlignmentScore:
    """Frobenius-relative error after the best affine map from an estimated
    latent space onto ground truth, plus the fitted map itself.

    Alignment is scored up to an affine transform because the generative
    model identifies the latent space only up to invertible linear maps
    (absorbed into the view maps) and standardization recenters views.
    """

    relative_residual: float
    map: np.ndarray
    offset: np.ndarray


def reconstruction_error(dataset, model: IntactModel, X) -> float:
    """Mean Cauchy loss over all (view, example) pairs; the training
    objective with its regularizers stripped."""
    views = dataset.views if isinstance(dataset, MultiViewDataset) else list(dataset)
    X = as_matrix(X)
    hp = model.hyperparams
    reg = hp.C1 * sum(float(np.sum(Wv * Wv)) for Wv in model.W) + hp.C2 * float(
        np.sum(X * X)
    )
    return objective_full(views, model, X) - reg


def align_to_truth(X_est, X_true) -> AlignmentScore:
    """Least-squares affine alignment of X_est onto X_true.

    Requires X_est to have full column rank; the residual is invariant
    under invertible re-parameterizations of X_est.
    """
    X_est = np.asarray(X_est, dtype=np.float64)
    X_true = np.asarray(X_true, dtype=np.float64)
    if X_est.shape != X_true.shape:
        raise ShapeMismatch(
            f"estimate {X_est.shape} and truth {X_true.shape} differ in shape"
        )
    n, d = X_est.shape
    aug = np.column_stack([X_est, np.ones(n)])
    sol, _, rank, _ = np.linalg.lstsq(aug, X_true, rcond=None)
    if rank < d + 1:
        raise RankDeficient(
            f"estimate has rank {rank - 1 if rank else 0} < {d}; alignment undefined"
        )
    resid = X_true - aug @ sol
    denom = max(float(np.linalg.norm(X_true)), np.finfo(float).tiny)
    return AlignmentScore(
        relative_residual=float(np.linalg.norm(resid)) / denom,
        map=sol[:d].copy(),
        offset=sol[d].copy(),
    )


def knn_classify(train_X, train_labels, test_X, k: int = 3, test_labels=None):
    """Majority vote among the k Euclidean-nearest training rows.

    Vote ties break by smallest summed distance to the tied label's
    neighbors, then by lowest label identifier. Returns (predictions,
    accuracy) where accuracy is None without test labels.
    """
    train_X = np.atleast_2d(np.asarray(train_X, dtype=np.float64))
    test_X = np.atleast_2d(np.asarray(test_X, dtype=np.float64))
    labels = np.asarray(train_labels)
    if train_X.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    if labels.shape[0] != train_X.shape[0]:
        raise ShapeMismatch("label count does not match training rows")
    if not 1 <= k <= train_X.shape[0]:
        raise ValueError(f"k must be in [1, {train_X.shape[0]}], got {k}")
    if train_X.shape[1] != test_X.shape[1]:
        raise ShapeMismatch("train and test dimensionality differ")

    d2 = (
        np.einsum("ij,ij->i", test_X, test_X)[:, None]
        + np.einsum("ij,ij->i", train_X, train_X)[None, :]
        - 2.0 * test_X @ train_X.T
    )
    d2 = np.maximum(d2, 0.0)
    preds = []
    for row in d2:
        order = np.argsort(row, kind="stable")[:k]
        neigh_labels = labels[order]
        neigh_d = np.sqrt(row[order])
        uniq = np.unique(neigh_labels)
        counts = np.array([(neigh_labels == u).sum() for u in uniq])
        best = uniq[counts == counts.max()]
        if len(best) > 1:
            sums = np.array(
                [neigh_d[neigh_labels == u].sum() for u in best], dtype=np.float64
            )
            best = best[sums == sums.min()]
        preds.append(np.sort(best)[0])
    preds = np.asarray(preds)
    accuracy = None
    if test_labels is not None:
        test_labels = np.asarray(test_labels)
        accuracy = float(np.mean(preds == test_labels))
    return preds, accuracy


@dataclass(frozen=True)
class RobustnessReport:
    """Reconstruction errors against clean truth for the Cauchy fit and the
    structurally identical L2 baseline, plus their ratio."""

    cauchy_error: float
    l2_error: float
    ratio: float


def _relative_reconstruction(clean_views, model, X) -> float:
    X = as_matrix(X)
    num = 0.0
    den = 0.0
    for Z, Wv in zip(clean_views, model.W):
        Z = np.asarray(Z, dtype=np.float64)
        num += float(np.sum((Z - X @ Wv.T) ** 2))
        den += float(np.sum(Z * Z))
    return num / max(den, np.finfo(float).tiny)


def robustness_benchmark(
    base_dataset: MultiViewDataset,
    contamination_rate: float,
    magnitude: float,
    hp: Hyperparams,
    seed: int = None,
) -> RobustnessReport:
    """Contaminate one view with +/-magnitude outliers and compare fits.

    A seeded random subset of view 0's entries is replaced; the Cauchy fit
    and an alternating ridge baseline (squared error, unit weights) with
    the same schedule and regularizers are both trained on the corrupted
    data and scored by squared reconstruction error against the clean
    views, isolating the effect of the loss function.
    """
    if not 0.0 <= contamination_rate < 0.5:
        raise ValueError("contamination_rate must lie in [0, 0.5)")
    seed = hp.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    clean = [np.asarray(Z, dtype=np.float64) for Z in base_dataset.views]
    corrupted = [Z.copy() for Z in clean]
    n_entries = corrupted[0].size
    n_bad = int(contamination_rate * n_entries)
    if n_bad > 0:
        flat_idx = rng.choice(n_entries, size=n_bad, replace=False)
        signs = rng.choice([-1.0, 1.0], size=n_bad)
        target = corrupted[0].reshape(-1)
        target[flat_idx] = signs * magnitude
        corrupted[0] = target.reshape(corrupted[0].shape)
    noisy = validate_dataset(corrupted, base_dataset.labels)

    model_c, X_c, _ = fit(noisy, hp, loss="cauchy")
    model_l, X_l, _ = fit(noisy, hp, loss="l2")
    err_c = _relative_reconstruction(clean, model_c, X_c)
    err_l = _relative_reconstruction(clean, model_l, X_l)
    return RobustnessReport(
        cauchy_error=err_c,
        l2_error=err_l,
        ratio=err_c / max(err_l, np.finfo(float).tiny),
    )
