import math

import numpy as np
import pytest

from intact import (
    Hyperparams,
    embed_example,
    embed_examples,
    fit,
    gen_planted_linear,
    local_convexity_check,
    map_spectral_norms,
    stability_bound,
    stability_probe,
    validate_dataset,
    view_losses,
)
from intact.core import IntactModel, freeze_array
from intact.errors import ShapeMismatch, ZeroRegularizer


def make_model(W_list, hp):
    return IntactModel(
        mode="linear",
        W=tuple(freeze_array(W) for W in W_list),
        kernel_part=None,
        hyperparams=hp,
    )


def trained_model(seed=0, n=40, dims=(5, 4, 6), d=3, C2=0.1):
    _, _, Zs = gen_planted_linear(n, list(dims), d, seed=seed, noise_sigma=0.05)
    ds = validate_dataset(Zs)
    hp = Hyperparams(d=d, C1=1e-3, C2=C2, seed=seed)
    model, emb, _ = fit(ds, hp)
    return ds, hp, model, emb


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------

def test_embed_recovers_planted_point():
    rng = np.random.default_rng(0)
    hp = Hyperparams(d=3, C1=0.0, C2=0.0)
    W = [rng.normal(size=(D, 3)) for D in (4, 5)]
    model = make_model(W, hp)
    x_true = rng.normal(size=3)
    x = embed_example([Wv @ x_true for Wv in W], model, hp)
    assert np.max(np.abs(x - x_true)) < 1e-6


def test_embed_zero_views_is_exactly_zero():
    rng = np.random.default_rng(1)
    hp = Hyperparams(d=2, C1=0.0, C2=0.1)
    W = [rng.normal(size=(3, 2))]
    model = make_model(W, hp)
    x = embed_example([np.zeros(3)], model, hp)
    assert np.array_equal(x, np.zeros(2))


def test_embed_training_examples_reproduce_coordinates():
    ds, hp, model, emb = trained_model(seed=2)
    rows = [Z for Z in ds.views]
    X = embed_examples(rows, model, hp)
    assert np.max(np.abs(X - emb.X)) < 1e-6


def test_embed_idempotent_on_reconstructions():
    rng = np.random.default_rng(3)
    hp = Hyperparams(d=2, C1=0.0, C2=0.0)
    W = [rng.normal(size=(4, 2)), rng.normal(size=(3, 2))]
    model = make_model(W, hp)
    x_hat = rng.normal(size=2)
    targets = [Wv @ x_hat for Wv in W]
    x_again = embed_example(targets, model, hp)
    assert np.max(np.abs(x_again - x_hat)) < 1e-8


def test_embed_examples_checks_shapes():
    ds, hp, model, _ = trained_model(seed=4)
    with pytest.raises(ShapeMismatch):
        embed_examples([Z[:, :-1] for Z in ds.views], model, hp)
    with pytest.raises(ShapeMismatch):
        embed_examples([ds.views[0]], model, hp)


# ---------------------------------------------------------------------------
# stability bound
# ---------------------------------------------------------------------------

def test_bound_zero_at_zero_tau():
    _, hp, model, _ = trained_model(seed=5)
    assert stability_bound(0.0, model, hp) == 0.0


def test_bound_reference_value():
    hp = Hyperparams(d=1, c=1.0, C1=0.0, C2=1.0)
    model = make_model([np.array([[1.0]])], hp)
    beta = stability_bound(1.0, model, hp)
    want = math.sqrt(2.0) + 128.0**0.25
    assert math.isclose(beta, want, rel_tol=1e-12)
    assert math.isclose(want, 4.77780, rel_tol=1e-5)


def test_bound_sqrt_tau_scaling():
    _, hp, model, _ = trained_model(seed=6)
    for tau in np.logspace(-6, -1, 8):
        ratio = stability_bound(tau, model, hp) / stability_bound(4 * tau, model, hp)
        assert ratio >= 0.25


def test_bound_requires_regularizer():
    hp = Hyperparams(d=1, c=1.0, C1=0.0, C2=0.0)
    model = make_model([np.array([[1.0]])], hp)
    with pytest.raises(ZeroRegularizer):
        stability_bound(1.0, model, hp)


def test_spectral_norms():
    hp = Hyperparams(d=2, C1=0.0, C2=0.1)
    W = np.array([[3.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    model = make_model([W], hp)
    assert np.allclose(map_spectral_norms(model), [3.0])


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

def test_probe_zero_tau():
    ds, hp, model, _ = trained_model(seed=7)
    z = [Z[0] for Z in ds.views]
    rep = stability_probe(z, model, hp, tau=0.0, view_index=0, coord_index=0)
    assert rep.measured_deviation == 0.0
    assert rep.holds


def test_probe_small_tau_holds():
    ds, hp, model, _ = trained_model(seed=8)
    for i, v, j in [(0, 0, 1), (3, 1, 0), (9, 2, 2)]:
        z = [Z[i] for Z in ds.views]
        rep = stability_probe(z, model, hp, tau=1e-3, view_index=v, coord_index=j)
        assert rep.holds
        assert rep.local_convex


def test_probe_deviation_continuity_in_tau():
    ds, hp, model, _ = trained_model(seed=9)
    z = [Z[2] for Z in ds.views]
    d_small = stability_probe(z, model, hp, tau=5e-4, view_index=0,
                              coord_index=0).measured_deviation
    d_big = stability_probe(z, model, hp, tau=1e-3, view_index=0,
                            coord_index=0).measured_deviation
    assert d_small <= d_big + 1e-6


def test_probe_sign_symmetry_on_symmetric_instance():
    # the probed coordinate is outside the map's range (zero row), and the
    # unperturbed value there is 0, so +tau and -tau are mirror images
    hp = Hyperparams(d=1, c=1.0, C1=0.0, C2=0.5)
    W = np.array([[1.0], [0.0]])
    model = make_model([W], hp)
    z = [np.array([0.7, 0.0])]
    d_plus = stability_probe(z, model, hp, tau=0.1, view_index=0,
                             coord_index=1).measured_deviation
    d_minus = stability_probe(z, model, hp, tau=-0.1, view_index=0,
                              coord_index=1).measured_deviation
    assert abs(d_plus - d_minus) < 1e-8


def test_probe_kernel_model():
    from intact import KernelSpec, kernel_fit

    _, _, Zs = gen_planted_linear(12, [3, 3], 2, seed=10, noise_sigma=0.05)
    ds = validate_dataset(Zs)
    hp = Hyperparams(d=2, C1=1e-3, C2=0.1, seed=10)
    model, _, _ = kernel_fit(ds, hp, KernelSpec("rbf"))
    z = [Z[0] for Z in Zs]
    rep = stability_probe(z, model, hp, tau=1e-3, view_index=0, coord_index=0)
    assert np.isfinite(rep.measured_deviation)
    assert rep.beta_bound > 0


def test_view_losses_and_convexity_helper():
    ds, hp, model, emb = trained_model(seed=11)
    z = [Z[0] for Z in ds.views]
    losses = view_losses(z, model, emb.X[0])
    assert losses.shape == (ds.m,)
    assert np.all(losses >= 0)
    assert local_convexity_check(z, model, emb.X[0], radius=1e-3)
