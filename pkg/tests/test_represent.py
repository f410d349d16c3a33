import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from ecgsvm.represent import (
    ETA_THRESHOLD,
    ClassPCA,
    MagnitudeSpectrum,
    PhaseSpaceCount,
    PhaseSpaceResult,
    TimeDomain,
    fit_pca_basis,
    magnitude_spectrum,
    make_representation,
    project,
    psa_count,
    psa_threshold_classify,
    psm_count,
    reconstruct,
    representation_dim,
)

# ------------------------------------------------------------------ spectrum


@pytest.mark.parametrize("seconds, dim", [(4, 200), (2, 100), (1, 50), (0.5, 25)])
def test_spectrum_dims(seconds, dim):
    n = int(seconds * 100)
    assert magnitude_spectrum(np.ones(n)).shape == (dim,)
    assert representation_dim("spectrum", n) == dim


def test_spectrum_of_constant():
    out = magnitude_spectrum(np.full(400, -1.5))
    assert out[0] == pytest.approx(400 * 1.5, rel=1e-14)
    assert np.max(np.abs(out[1:])) < 1e-9


def test_spectrum_matches_explicit_dft():
    x = np.random.default_rng(4).normal(size=50)
    n = np.arange(50)
    ref = [abs(np.sum(x * np.exp(-2j * np.pi * k * n / 50))) for k in range(25)]
    np.testing.assert_allclose(magnitude_spectrum(x), ref, atol=1e-10)


def test_spectrum_rejects_odd():
    with pytest.raises(ValueError):
        magnitude_spectrum(np.ones(51))


def test_spectrum_shift_and_sign_invariance(rng):
    for _ in range(100):
        n = 2 * rng.integers(25, 301)
        x = rng.normal(size=n)
        s = magnitude_spectrum(x)
        assert np.max(np.abs(s - magnitude_spectrum(np.roll(x, 17)))) <= 1e-9
        assert np.max(np.abs(s - magnitude_spectrum(np.roll(x, rng.integers(n))))) <= 1e-9
        assert np.max(np.abs(s - magnitude_spectrum(-x))) <= 1e-9


# ----------------------------------------------------------------------- PCA


def _clustered(rng, n, dim, classes=("SR", "VT", "VF")):
    X, y = [], []
    for i, c in enumerate(classes):
        scales = np.geomspace(4.0, 0.05, dim) * (1 + 0.3 * i)
        X.append(rng.normal(size=(n, dim)) * scales @ _rotation(rng, dim) + 3 * i)
        y += [c] * n
    return np.vstack(X), np.array(y)


def _rotation(rng, dim):
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q


@pytest.mark.parametrize("dim", [6, 9, 12])
def test_pca_matches_dense_oracle(rng, dim):
    X, y = _clustered(rng, 40, dim)
    basis = fit_pca_basis(X, y, n_per_class=5)
    for ci, c in enumerate(basis.classes):
        w, V = oracles.class_eig(X[y == c])
        np.testing.assert_allclose(basis.eigenvalues[ci], np.clip(w, 0, None), atol=1e-8)
        for j in range(5):
            u, v = basis.components[ci, j], V[:, j]
            assert min(np.max(np.abs(u - v)), np.max(np.abs(u + v))) <= 1e-8


def test_pca_basis_orthonormal_and_sized(rng):
    X, y = _clustered(rng, 30, 100, classes=("SR", "VF"))
    b = fit_pca_basis(X, y, n_per_class=5)
    assert b.n_basis == 10 and b.classes == ("SR", "VF")
    np.testing.assert_allclose(b.basis @ b.basis.T, np.eye(10), atol=1e-9)
    X3, y3 = _clustered(rng, 30, 100)
    b3 = fit_pca_basis(X3, y3, n_per_class=15)
    assert b3.components.reshape(-1, 100).shape == (45, 100)
    assert b3.n_basis == 45


def test_pca_rank_deficient(rng):
    X = []
    for _ in range(2):
        coords = rng.normal(size=(20, 3))
        X.append(coords @ rng.normal(size=(3, 12)) + rng.normal(size=12))
    X = np.vstack(X)
    y = np.array(["SR"] * 20 + ["VF"] * 20)
    b = fit_pca_basis(X, y, n_per_class=5)
    assert np.all(np.abs(b.eigenvalues[:, 3:5]) <= 1e-9)
    np.testing.assert_allclose(b.basis @ b.basis.T, np.eye(b.n_basis), atol=1e-9)


def test_pca_errors(rng):
    X, y = _clustered(rng, 5, 20)
    with pytest.raises(ValueError):
        fit_pca_basis(X, y, n_per_class=5)
    X, y = _clustered(rng, 30, 20)
    for k in (4, 16):
        with pytest.raises(ValueError):
            fit_pca_basis(X, y, n_per_class=k)
    b = fit_pca_basis(X, y, n_per_class=5)
    with pytest.raises(ValueError):
        project(b, np.zeros(19))


def test_projection_identities(rng):
    X, y = _clustered(rng, 40, 200)
    b = fit_pca_basis(X, y, n_per_class=5)
    assert np.max(np.abs(project(b, b.global_mean))) == 0.0
    inside = b.global_mean + rng.normal(size=b.n_basis) @ b.basis
    assert np.linalg.norm(reconstruct(b, project(b, inside)) - inside) < 1e-9
    for _ in range(10):
        v = rng.normal(size=200) * 5
        err = np.linalg.norm(reconstruct(b, project(b, v)) - v)
        assert err == pytest.approx(oracles.lstsq_residual(b.basis, v - b.global_mean), rel=1e-9)


def test_variance_captured_on_synthetic_spectra(windows_2s):
    X, rhythm = windows_2s
    b = fit_pca_basis(magnitude_spectrum(X), rhythm, n_per_class=5)
    for c in b.classes:
        ratios = [b.explained_variance_ratio(c, k) for k in range(1, 16)]
        assert all(r2 >= r1 - 1e-15 for r1, r2 in zip(ratios, ratios[1:]))
        assert ratios[4] >= 0.60, c


# ------------------------------------------------------------- phase space


def test_constant_segment():
    for res in (psa_count(np.full(200, 3.0)), psm_count(np.full(200, 3.0))):
        assert res == PhaseSpaceResult(1, 1 / 1600)
        assert res.eta == 0.000625


def test_psa_distinct_cells():
    # greedy bin sequence whose 150 delay pairs all land in distinct cells
    rng = np.random.default_rng(0)
    b = np.zeros(200, dtype=int)
    b[:50] = rng.integers(0, 40, 50)
    b[0], b[1] = 0, 39
    used = set()
    for n in range(50, 200):
        options = [v for v in range(40) if (v, b[n - 50]) not in used]
        b[n] = options[0] if n == 50 else options[-1] if n == 51 else rng.choice(options)
        used.add((b[n], b[n - 50]))
    x = b.astype(float)
    assert oracles.box_count(x[50:], x[:150]) == 150
    assert psa_count(x).visited == 150


@pytest.mark.parametrize("slope, offset", [(0.7, 0.0), (1.0, 0.0), (-3.1, 250.0), (1e-3, 1e4)])
def test_psm_ramp_single_row(slope, offset):
    res = psm_count(offset + slope * np.arange(300.0))
    assert res.visited <= 40


def test_psa_psm_errors():
    with pytest.raises(ValueError):
        psa_count(np.ones(50))
    with pytest.raises(ValueError):
        psm_count(np.ones(1))


@given(arrays(np.float64, st.integers(51, 400), elements=st.floats(-100, 100)))
def test_box_counts_match_oracle(x):
    r = psa_count(x)
    assert r.visited == oracles.box_count(x[50:], x[:-50])
    assert 1 <= r.visited <= 1600 and r.eta == r.visited / 1600
    m = psm_count(x)
    assert m.visited == oracles.box_count(x[1:], np.diff(x), scale2=np.max(np.abs(x)))


def test_affine_invariance(rng):
    for _ in range(100):
        x = rng.normal(size=rng.integers(60, 801))
        a = float(rng.uniform(0.1, 10.0))
        c = float(rng.uniform(-5.0, 5.0))
        assert psa_count(a * x + c) == psa_count(x)
        assert psm_count(a * x + c) == psm_count(x)


@pytest.mark.parametrize("eta, label", [(0.16, "VF"), (0.15, "nonVF"), (0.000625, "nonVF")])
def test_threshold(eta, label):
    assert psa_threshold_classify(PhaseSpaceResult(int(eta * 1600), eta)) == label
    assert ETA_THRESHOLD == 0.15


def _windows_8s(records, label):
    out = []
    for r in records:
        for a in r.annotations:
            if a.label.value == label:
                out += [r.samples[s:s + 800] for s in range(a.start, a.end - 799, 800)]
    return out


@pytest.mark.parametrize("count", [psa_count, psm_count])
def test_eta_separates_vf_from_sr(clean_corpus, count):
    vf = np.mean([count(w).eta for w in _windows_8s(clean_corpus, "VF")])
    sr = np.mean([count(w).eta for w in _windows_8s(clean_corpus, "SR")])
    assert vf > 0.15 > sr


# ---------------------------------------------------------------- transformers


def test_transformers(rng):
    X = rng.normal(size=(60, 200))
    y = np.repeat(["SR", "VT", "VF"], 20)
    np.testing.assert_array_equal(TimeDomain().fit_transform(X), X)
    np.testing.assert_array_equal(MagnitudeSpectrum().fit(X).transform(X), magnitude_spectrum(X))
    pca = ClassPCA(5).fit(MagnitudeSpectrum().fit_transform(X), y)
    assert pca.transform(magnitude_spectrum(X)).shape == (60, 15)
    ps = PhaseSpaceCount("psm").fit(X)
    np.testing.assert_array_equal(ps.transform(X)[:, 0], [psm_count(r).visited for r in X])
    with pytest.raises(ValueError):
        PhaseSpaceCount("nope").fit(X)
    with pytest.raises(ValueError):
        MagnitudeSpectrum().fit(X).transform(X[:, :100])
    with pytest.raises(ValueError):
        make_representation("wavelet")


@pytest.mark.parametrize(
    "kind, dim", [("time", 200), ("spectrum", 100), ("pca", 15), ("psa", 1), ("psm", 1)]
)
def test_representation_dims(rng, kind, dim):
    X = rng.normal(size=(60, 200))
    y = np.repeat(["SR", "VT", "VF"], 20)
    Z = X
    for _, step in make_representation(kind):
        Z = step.fit(Z, y).transform(Z)
    assert Z.shape == (60, dim) == (60, representation_dim(kind, 200))
