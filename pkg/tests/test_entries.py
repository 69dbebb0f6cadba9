import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wignerld.entries import (
    DiscreteAtoms,
    Gaussian,
    SparseGaussian,
    bernoulli_std,
    check_assumptions,
    distribution_from_spec,
    rademacher,
    sparse_rademacher,
    standardize_atoms,
)
from wignerld.montecarlo import make_rng

ALL_DISTS = [
    Gaussian(),
    SparseGaussian(0.5),
    SparseGaussian(0.25),
    rademacher(),
    sparse_rademacher(0.3),
    sparse_rademacher(0.7),
    bernoulli_std(0.3),
    bernoulli_std(0.5),
    standardize_atoms([(-2.0, 0.25), (0.5, 0.5), (3.0, 0.25)]),
]


# --- log-Laplace transform -------------------------------------------------


def test_gaussian_closed_form():
    g = Gaussian()
    assert g.log_laplace(1.3) == pytest.approx(0.845, abs=1e-12)
    assert g.log_laplace(1.3, 1) == pytest.approx(1.3)
    assert g.log_laplace(1.3, 2) == pytest.approx(1.0)


def test_sparse_gaussian_value():
    # closed form log(1 - p + p exp(t^2 / 2p)) evaluated independently
    expected = math.log(0.5 + 0.5 * math.exp(1.0))
    assert SparseGaussian(0.5).log_laplace(1.0) == pytest.approx(expected, abs=1e-12)
    assert round(expected, 5) == 0.62011


def test_rademacher_unit_variance():
    assert rademacher().log_laplace(0.0, 2) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: repr(d))
def test_standardized(dist):
    assert abs(dist.log_laplace(0.0)) < 1e-10
    assert abs(dist.log_laplace(0.0, 1)) < 1e-10
    assert abs(dist.log_laplace(0.0, 2) - 1.0) < 1e-10


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: repr(d))
def test_convexity_on_random_grid(dist):
    rng = np.random.default_rng(1)
    ts = rng.uniform(-40.0, 40.0, size=200)
    assert np.all(np.asarray(dist.log_laplace(ts, 2)) >= -1e-12)


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: repr(d))
def test_finite_differences_match_derivatives(dist):
    rng = np.random.default_rng(2)
    h = 1e-4
    for t in rng.uniform(-4.0, 4.0, size=12):
        lp, lm, l0 = (dist.log_laplace(t + h), dist.log_laplace(t - h), dist.log_laplace(t))
        assert (lp - lm) / (2 * h) == pytest.approx(dist.log_laplace(t, 1), abs=1e-5)
        assert (lp - 2 * l0 + lm) / h**2 == pytest.approx(dist.log_laplace(t, 2), abs=1e-5)


def test_overflow_safety_large_arguments():
    # |t x| beyond 700 must not overflow the exponentials
    d = standardize_atoms([(-5.0, 0.5), (5.0, 0.5)])
    assert np.isfinite(d.log_laplace(500.0))
    assert np.isfinite(SparseGaussian(0.1).log_laplace(300.0))


# --- psi -------------------------------------------------------------------


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: repr(d))
def test_psi_at_zero(dist):
    assert dist.psi(0.0) == pytest.approx(0.5, abs=1e-12)


def test_psi_gaussian_constant():
    assert Gaussian().psi(7.2) == pytest.approx(0.5, abs=1e-12)


def test_psi_sparse_gaussian_limit():
    assert SparseGaussian(0.5).psi(50.0) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: repr(d))
def test_psi_continuous_across_taylor_cut(dist):
    for t in (1e-4 * 0.999, 1e-4 * 1.001, -1e-4 * 0.999, -1e-4 * 1.001):
        direct = dist.log_laplace(float(t)) / t**2
        assert dist.psi(float(t)) == pytest.approx(direct, abs=1e-7)


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: repr(d))
def test_psi_bounded_by_psi_max(dist):
    ext = dist.psi_extremes()
    rng = np.random.default_rng(3)
    ts = rng.uniform(-60.0, 60.0, size=1000)
    assert float(np.max(dist.psi(ts))) <= ext.psi_max + 1e-9


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: repr(d))
def test_psi_tail_limit(dist):
    # compactly supported laws approach their limit like x_max/T, so the
    # probe point scales with support; unbounded laws settle by T = 100
    ext = dist.psi_extremes()
    T = 1e5 if ext.psi_infty == 0.0 else 100.0
    assert dist.psi(T) == pytest.approx(ext.psi_infty, abs=1e-3)
    assert dist.psi(-T) == pytest.approx(ext.psi_infty, abs=1e-3)


@pytest.mark.parametrize(
    "dist", [rademacher(), sparse_rademacher(0.3), SparseGaussian(0.5),
             standardize_atoms([(-1.0, 0.3), (0.0, 0.4), (1.0, 0.3)])],
    ids=["rademacher", "sparse_rademacher", "sparse_gaussian", "atoms"],
)
def test_psi_symmetric_exact(dist):
    ts = np.linspace(0.05, 35.0, 101)
    assert np.all(dist.psi(-ts) == dist.psi(ts))


# --- psi extremes ----------------------------------------------------------


def test_extremes_rademacher():
    ext = rademacher().psi_extremes()
    assert (ext.psi_max, ext.psi_infty, ext.is_sharp) == (0.5, 0.0, True)


def test_extremes_sparse_rademacher_threshold():
    assert not sparse_rademacher(0.3).psi_extremes().is_sharp
    assert sparse_rademacher(0.34).psi_extremes().is_sharp
    assert sparse_rademacher(0.3).psi_extremes().psi_max > 0.5


def test_extremes_sparse_gaussian():
    ext = SparseGaussian(0.5).psi_extremes()
    assert ext.psi_max == pytest.approx(1.0, abs=1e-9)
    assert ext.psi_infty == pytest.approx(1.0, abs=1e-12)
    assert not ext.is_sharp


def test_extremes_bernoulli():
    assert bernoulli_std(0.5).psi_extremes().is_sharp
    assert not bernoulli_std(0.3).psi_extremes().is_sharp


def test_gaussian_tail_parameter():
    ext = Gaussian().psi_extremes()
    assert ext.psi_max == 0.5 and ext.psi_infty == 0.5 and ext.is_sharp


def test_psi_max_at_least_half_and_infty_nonnegative():
    for d in ALL_DISTS:
        ext = d.psi_extremes()
        assert ext.psi_max >= 0.5 - 1e-12
        assert ext.psi_infty >= 0.0


# --- standardization -------------------------------------------------------


def test_standardize_noop_for_rademacher_atoms():
    d = standardize_atoms([(1.0, 0.5), (-1.0, 0.5)])
    assert sorted(d.locations) == [-1.0, 1.0]


def test_standardize_bernoulli_quarter():
    d = standardize_atoms([(1.0, 0.25), (0.0, 0.75)])
    locs = dict(zip(np.round(d.locations, 10), d.masses))
    assert math.sqrt(3.0) == pytest.approx(max(d.locations), abs=1e-12)
    assert -1.0 / math.sqrt(3.0) == pytest.approx(min(d.locations), abs=1e-12)
    assert locs[round(math.sqrt(3.0), 10)] == pytest.approx(0.25)


def test_standardize_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        standardize_atoms([(2.0, 1.0)])
    with pytest.raises(ValueError, match="degenerate"):
        standardize_atoms([(1.0, 0.5), (1.0, 0.5)])


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(-50, 50), st.floats(0.01, 1.0)),
        min_size=2,
        max_size=6,
        unique_by=lambda a: round(a[0], 6),
    )
)
def test_standardize_atoms_property(atoms):
    total = sum(m for _, m in atoms)
    atoms = [(x, m / total) for x, m in atoms]
    xs = np.array([x for x, _ in atoms])
    if np.ptp(xs) < 1e-3:
        return
    d = standardize_atoms(atoms)
    assert d.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(d.log_laplace(0.0, 1)) < 1e-9
    assert d.log_laplace(0.0, 2) == pytest.approx(1.0, abs=1e-8)


# --- sampling --------------------------------------------------------------


def test_gaussian_sample_mean():
    rng = make_rng(10)
    x = Gaussian().sample(100_000, rng=rng)
    assert abs(x.mean()) < 0.02


def test_rademacher_tilted_mean():
    rng = make_rng(11)
    x = rademacher().sample(100_000, tilt=1.0, rng=rng)
    assert abs(x.mean() - math.tanh(1.0)) < 0.02


def test_rademacher_support():
    rng = make_rng(12)
    x = rademacher().sample(100, rng=rng)
    assert set(np.unique(x)) <= {-1.0, 1.0}


def test_empty_sample():
    rng = make_rng(13)
    assert Gaussian().sample(0, rng=rng).size == 0


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: repr(d))
def test_tilted_means_match_derivative(dist):
    rng = make_rng(14)
    n = 100_000
    for t in np.random.default_rng(15).uniform(-2.0, 2.0, size=3):
        x = dist.sample(n, tilt=float(t), rng=rng)
        target = dist.log_laplace(float(t), 1)
        band = 4.0 * math.sqrt(dist.log_laplace(float(t), 2) / n)
        assert abs(x.mean() - target) <= band


def test_array_tilt_matches_scalar_law():
    rng = make_rng(16)
    tilts = np.full(50_000, 0.7)
    x = SparseGaussian(0.5).sample(tilts.size, tilt=tilts, rng=rng)
    target = SparseGaussian(0.5).log_laplace(0.7, 1)
    assert abs(x.mean() - target) < 4.0 * math.sqrt(SparseGaussian(0.5).log_laplace(0.7, 2) / tilts.size)


# --- JSON surface and assumption screening ---------------------------------


def test_spec_roundtrip():
    d = distribution_from_spec({"kind": "sparse_gaussian", "p": 0.5})
    assert isinstance(d, SparseGaussian) and d.p == 0.5
    d2 = distribution_from_spec({"kind": "atoms", "atoms": [[1.0, 0.25], [0.0, 0.75]]})
    assert isinstance(d2, DiscreteAtoms)
    assert abs(d2.log_laplace(0.0, 1)) < 1e-9  # auto-standardized


def test_spec_errors():
    with pytest.raises(ValueError, match="unknown dist kind"):
        distribution_from_spec({"kind": "cauchy"})
    with pytest.raises(ValueError, match="requires field 'p'"):
        distribution_from_spec({"kind": "sparse_gaussian"})
    with pytest.raises(ValueError, match="unknown key"):
        distribution_from_spec({"kind": "gaussian", "scale": 2})


def test_assumption_screen_clean_for_standard_variants():
    assert check_assumptions(SparseGaussian(0.5), emit=False) == []
    assert check_assumptions(rademacher(), emit=False) == []


def test_assumption_screen_flags_negative_side_maximum():
    msgs = check_assumptions(bernoulli_std(0.7), emit=False)
    assert any("negative" in m for m in msgs)
