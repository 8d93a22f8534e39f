"""Target densities, gradients vs finite differences, datasets, AR(1)."""

import math

import numpy as np
import pytest

from imcmc.core import make_rng
from imcmc.errors import ConfigError, DensityError
from imcmc.targets import (
    GridDensity,
    LogisticPosterior,
    ar1_generate,
    bivariate_normal,
    exponential_cdf1d,
    gaussian,
    load_dataset,
    mixture_1d,
    mog2,
    mog2_cell_masses,
    standard_normal,
)


def fd_grad(logpdf, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (logpdf(xp) - logpdf(xm)) / (2 * h)
    return g


@pytest.mark.parametrize("density,dim", [
    (standard_normal(3), 3),
    (gaussian([1.0, -2.0], [0.5, 2.0]), 2),
    (bivariate_normal(0.9), 2),
    (mog2(), 2),
    (mixture_1d([-1.5, 1.5], 0.6), 1),
])
def test_gradients_match_finite_differences(density, dim):
    rng = make_rng(10)
    for _ in range(50):
        x = 2.0 * rng.standard_normal(dim)
        g = density.grad(x)
        g_fd = fd_grad(density.logpdf, x)
        denom = max(1.0, float(np.max(np.abs(g))))
        assert np.max(np.abs(g - g_fd)) / denom < 1e-5


def test_mog2_value_at_mode():
    # at a mode the near component dominates; the far one adds exp(-16) of it
    m2 = mog2()
    expected = math.log(0.5 / math.pi) + math.log1p(math.exp(-16.0))
    assert m2.logpdf(np.array([2.0, 0.0])) == pytest.approx(expected, abs=1e-12)


def test_mog2_symmetry_and_gradient():
    m2 = mog2()
    rng = make_rng(11)
    for _ in range(20):
        a, b = rng.standard_normal(2)
        assert m2.logpdf(np.array([a, b])) == pytest.approx(
            m2.logpdf(np.array([-a, b])), abs=1e-12)
    assert m2.grad(np.array([0.0, 0.0]))[0] == pytest.approx(0.0, abs=1e-14)


def test_mog2_cell_masses_capture_bulk():
    edges = np.linspace(-5.0, 5.0, 21)
    masses = mog2_cell_masses(edges, edges)
    assert masses.shape == (20, 20)
    assert masses.sum() >= 0.999


def test_logreg_zero_data_is_prior():
    post = LogisticPosterior(np.empty((0, 2)), np.empty(0))
    theta = np.array([0.1, -0.2, 0.3])
    expected = (-0.5 * float(theta @ theta) / 0.1
                - 1.5 * math.log(2 * math.pi * 0.1))
    assert post.logpdf(theta) == pytest.approx(expected)


def test_logreg_single_point_at_origin():
    post = LogisticPosterior(np.array([[1.0, 2.0]]), np.array([1.0]))
    lik = post.logpdf(np.zeros(3)) - LogisticPosterior(
        np.empty((0, 2)), np.empty(0)).logpdf(np.zeros(3))
    assert lik == pytest.approx(math.log(0.5))


def test_logreg_gradient_and_dim_check():
    rng = make_rng(12)
    X = rng.standard_normal((10, 3))
    y = (rng.random(10) < 0.5).astype(float)
    post = LogisticPosterior(X, y)
    theta = rng.standard_normal(4)
    g = post.grad(theta)
    g_fd = fd_grad(post.logpdf, theta)
    assert np.max(np.abs(g - g_fd)) < 1e-5
    with pytest.raises(ConfigError):
        post.logpdf(np.zeros(3))


def _write_csv(path, rows, header=None):
    lines = ([header] if header else []) + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def test_load_dataset_standardizes(tmp_path):
    rng = make_rng(13)
    rows = [[*rng.standard_normal(3) * 5 + 2, float(i % 2)] for i in range(40)]
    f = tmp_path / "toy.csv"
    _write_csv(f, rows, header="a,b,c,label")
    ds = load_dataset(f)
    assert ds.X.shape == (40, 3)
    assert np.max(np.abs(ds.X.mean(axis=0))) < 1e-12
    assert np.max(np.abs(ds.X.std(axis=0) - 1.0)) < 1e-12
    # deterministic and idempotent
    ds2 = load_dataset(f)
    assert np.array_equal(ds.X, ds2.X)


def test_load_dataset_known_shape_validation(tmp_path):
    rng = make_rng(14)
    f = tmp_path / "german.csv"
    rows = [[*rng.standard_normal(25), float(i % 2)] for i in range(1000)]
    _write_csv(f, rows)
    ds = load_dataset(f)
    assert ds.X.shape == (1000, 25)

    bad = tmp_path / "heart.csv"
    rows = [[*rng.standard_normal(5), float(i % 2)] for i in range(10)]
    _write_csv(bad, rows)
    with pytest.raises(DensityError, match="532 x 14"):
        load_dataset(bad)


def test_load_dataset_malformed_rows(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("1.0,2.0,0\n1.0,oops,1\n")
    with pytest.raises(DensityError, match="row 2"):
        load_dataset(f)
    g = tmp_path / "labels.csv"
    g.write_text("1.0,2.0,0\n3.0,1.0,2\n")
    with pytest.raises(DensityError, match="non-binary label at row 2"):
        load_dataset(g)


def test_ar1_properties():
    iid = ar1_generate(0.0, 100000, seed=5)
    r1 = float(np.corrcoef(iid[:-1], iid[1:])[0, 1])
    assert abs(r1) <= 0.02
    again = ar1_generate(0.0, 100000, seed=5)
    assert np.array_equal(iid, again)
    mid = ar1_generate(0.5, 200000, seed=6)
    r1 = float(np.corrcoef(mid[:-1], mid[1:])[0, 1])
    assert abs(r1 - 0.5) < 0.01
    with pytest.raises(ConfigError):
        ar1_generate(1.0, 10, seed=0)


def test_grid_density_lookup():
    g = GridDensity(np.array([0.0, 1.0]), np.log(np.array([0.7, 0.3])))
    assert g.logpdf(np.array([1.0])) == pytest.approx(math.log(0.3))
    assert g.logpdf(np.array([0.4])) == -math.inf
    assert np.allclose(g.pmf(), [0.7, 0.3])


def test_exponential_cdf_pair():
    c = exponential_cdf1d()
    for x in (0.1, 1.0, 3.0):
        assert c.icdf(c.cdf(x)) == pytest.approx(x, rel=1e-12)
