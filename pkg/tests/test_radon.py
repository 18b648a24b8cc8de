import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from abelradon.grids import Image, ImageGrid
from abelradon.radon import (CurveSpec, NoiseSpec, PerturbedOperator, ShiftInvariantOperator,
                             build_forward_matrix, curve_length, curve_points, default_axes,
                             perturb_matrix, simulate_data)
from abelradon.spectral import sar_nu

M = 33


@pytest.fixture(scope="module", params=[0, 1])
def op(request):
    p, y = default_axes(M)
    return ShiftInvariantOperator(CurveSpec.for_orientation(request.param), ImageGrid(M), p, y)


@pytest.fixture(scope="module")
def dense_pair():
    p, y = default_axes(M)
    img = ImageGrid(M)
    out = {}
    for j in (0, 1):
        c = CurveSpec.for_orientation(j)
        out[j] = (ShiftInvariantOperator(c, img, p, y, two_sided=False),
                  build_forward_matrix(c, img, two_sided=False))
    return out


# --------------------------------------------------------------- curves

def test_curve_spec_validation():
    with pytest.raises(ValueError):
        CurveSpec("parabola")
    with pytest.raises(ValueError):
        CurveSpec("ellipse", s=0)
    with pytest.raises(ValueError):
        CurveSpec("generalized")
    assert CurveSpec("hyperbola").j == 1 and CurveSpec("ellipse").j == 0


def test_unit_circle_points():
    x1, x2, w = curve_points(CurveSpec("ellipse", 1.0), 1.0, 0.0, 1000)
    assert np.max(np.abs(x1**2 + x2**2 - 1)) <= 1e-12
    assert np.all(x2 >= 0)


def test_circle_half_circumference():
    _, _, w = curve_points(CurveSpec("ellipse", 1.0), 2.5, 0.0, 10_000)
    assert abs(w.sum() / (np.pi * 2.5) - 1) <= 1e-6


def test_ellipse_length_closed_form():
    # half perimeter of the ellipse with semi-axes sqrt(s) p and p
    s, p = 2.0, 3.0
    a, b = np.sqrt(s) * p, p
    half = 2 * a * special.ellipe(1 - (b / a) ** 2)
    assert abs(curve_length(CurveSpec("ellipse", s), p) / half - 1) <= 1e-6


def test_ellipse_apex():
    x1, x2, _ = curve_points(CurveSpec("ellipse", 2.0), 4.0, 1.5, 2001)
    k = np.argmin(np.abs(x1 - 1.5))
    assert abs(x2[k] - 4.0) <= 1e-4


def test_hyperbola_points_and_truncation():
    c = CurveSpec("hyperbola", 2.0)
    x1, x2, _ = curve_points(c, 3.0, 0.0, 500, x2_max=10.0)
    assert np.allclose(x2**2 - x1**2 / 2.0, 9.0, rtol=1e-10)
    assert x2.max() <= 10.0 and x2.min() >= 3.0 - 1e-9
    _, _, w1 = curve_points(CurveSpec("hyperbola", 2.0, truncation=2.0), 3.0, 0.0, 500, x2_max=10.0)
    assert w1.sum() < curve_length(c, 3.0, 10.0)


def test_generalized_curve_matches_ellipse_for_q1():
    # r = (p - w)^(1/2) sqrt(s) sqrt(p + w) is the ellipse x1^2 / s + x2^2 = p^2
    s = 2.0
    g = CurveSpec("generalized", q=1, nu=lambda p, w: np.sqrt(s) * np.sqrt(p + w))
    assert abs(curve_length(g, 3.0) / curve_length(CurveSpec("ellipse", s), 3.0) - 1) <= 1e-4


def test_sar_family_builds_a_template():
    g = CurveSpec("generalized", q=1, nu=sar_nu())
    assert curve_length(g, 4.0) > 0


# ------------------------------------------------------------ operator

def test_adjoint_identity(op):
    rng = np.random.default_rng(0)
    for _ in range(5):
        x, y = rng.standard_normal(op.shape[1]), rng.standard_normal(op.shape[0])
        Ax = op.matvec(x)
        assert abs(Ax @ y - x @ op.rmatvec(y)) <= 1e-12 * np.linalg.norm(Ax) * np.linalg.norm(y)


def test_fft_apply_matches_explicit_matrix(dense_pair):
    rng = np.random.default_rng(1)
    for j, (fast, A) in dense_pair.items():
        x, y = rng.standard_normal(M * M), rng.standard_normal(A.rows)
        assert np.allclose(fast.matvec(x), A.matvec(x), rtol=0, atol=1e-12 * np.abs(A.matvec(x)).max())
        assert np.allclose(fast.rmatvec(y), A.rmatvec(y), rtol=0, atol=1e-12 * np.abs(A.rmatvec(y)).max())


def test_unperturbed_weights_nonnegative(dense_pair):
    for _, A in dense_pair.values():
        assert A.weights.min() >= 0
        assert np.all(np.diff(A.row_offsets) >= 0)


def test_odd_images_are_invisible(op):
    rng = np.random.default_rng(2)
    for _ in range(10):
        z = rng.standard_normal((M, M))
        odd = z - z[::-1]
        scale = np.linalg.norm(op.matvec(np.abs(odd).ravel()))
        assert np.linalg.norm(op.matvec(odd.ravel())) <= 1e-10 * scale


def test_reflection_invariance(op):
    z = np.random.default_rng(3).standard_normal((M, M))
    assert np.array_equal(op.matvec(z.ravel()), op.matvec(z[::-1].ravel()))


def test_two_sided_even_is_twice_one_sided_upper():
    p, y = default_axes(M)
    img = ImageGrid(M)
    for j in (0, 1):
        c = CurveSpec.for_orientation(j)
        two = ShiftInvariantOperator(c, img, p, y, True)
        one = ShiftInvariantOperator(c, img, p, y, False)
        z = np.random.default_rng(4).standard_normal((M, M))
        z[img.center] = 0.0
        upper = z.copy()
        upper[img.center:] = 0.0
        even = upper + upper[::-1]
        assert np.allclose(two.matvec(even.ravel()), 2 * one.matvec(upper.ravel()), atol=1e-10)


def test_translation_invariance(op):
    img = np.zeros((M, M))
    img[5:12, 10:18] = np.random.default_rng(5).uniform(size=(7, 8))
    shifted = np.roll(img, 1, axis=1)
    Y = op.y_axis.count
    a = op.matvec(img.ravel()).reshape(-1, Y)
    b = op.matvec(shifted.ravel()).reshape(-1, Y)
    assert np.allclose(b[:, 1:], a[:, :-1], atol=1e-10)


def test_nonnegative_image_gives_nonnegative_sinogram(op):
    x = np.random.default_rng(6).uniform(size=M * M)
    assert op.matvec(x).min() >= -1e-12


def test_single_pixel_response_matches_arc_density():
    # a pixel on a unit-speed arc picks up roughly the arc length through its cell
    p_axis, y_axis = default_axes(M)
    img = ImageGrid(M)
    op = ShiftInvariantOperator(CurveSpec("ellipse", 1.0), img, p_axis, y_axis, two_sided=False)
    x = np.zeros((M, M))
    row = img.center - 6           # x2 = 6 h
    x[row, img.center] = 1.0
    sino = op.matvec(x.ravel()).reshape(p_axis.count, -1)
    # circle of radius p centred on the pixel column passes through x2 = p at the apex
    k = int(np.argmin(np.abs(p_axis.points - 6 * img.spacing)))
    l0 = int(np.argmin(np.abs(y_axis.points)))
    val = sino[k, l0]
    # bilinear hat integrated along a horizontal line through the node: h
    assert 0.5 * img.spacing <= val <= 1.5 * img.spacing


def test_y1_lattice_required():
    from abelradon.grids import Grid1D
    p, _ = default_axes(M)
    with pytest.raises(ValueError):
        ShiftInvariantOperator(CurveSpec(), ImageGrid(M), p, Grid1D(-10.3, 10.3, 21))


# ------------------------------------------------------------- perturbation

def test_perturb_zero_is_identity(dense_pair):
    A = dense_pair[0][1]
    assert perturb_matrix(A, 0.0, 1) is A


def test_perturb_ratios_and_determinism(dense_pair):
    A = dense_pair[1][1]
    B = perturb_matrix(A, 0.05, 42)
    C = perturb_matrix(A, 0.05, 42)
    ratio = B.weights / A.weights
    assert ratio.min() >= 0.95 and ratio.max() <= 1.05
    assert np.array_equal(B.weights, C.weights)
    assert not np.array_equal(B.weights, perturb_matrix(A, 0.05, 43).weights)


def test_streamed_perturbation_equals_explicit():
    p, y = default_axes(M)
    c = CurveSpec("ellipse")
    fast = ShiftInvariantOperator(c, ImageGrid(M), p, y)
    P = PerturbedOperator(fast, 0.05, 9)
    E = perturb_matrix(fast.to_sparse(), 0.05, 9)
    x = np.random.default_rng(7).standard_normal(M * M)
    yv = np.random.default_rng(8).standard_normal(fast.shape[0])
    assert np.allclose(P.matvec(x), E.matvec(x), atol=1e-12)
    assert np.allclose(P.rmatvec(yv), E.rmatvec(yv), atol=1e-12)


def test_perturb_rejects_bad_epsilon(dense_pair):
    with pytest.raises(ValueError):
        perturb_matrix(dense_pair[0][1], 1.0, 0)


# ------------------------------------------------------------------- noise

def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(gamma=-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(epsilon=1.0)


def test_zero_gamma_returns_clean_data(dense_pair):
    A = dense_pair[0][1]
    x = Image(ImageGrid(M), np.random.default_rng(0).uniform(size=(M, M)))
    assert np.array_equal(simulate_data(A, x, NoiseSpec(0.0, 0.0, 3)), A.matvec(x.vector))


def test_zero_image_gives_zero_data(dense_pair):
    A = dense_pair[0][1]
    assert np.array_equal(simulate_data(A, Image.zeros(M), NoiseSpec(0.05, 0, 1)), np.zeros(A.rows))


def test_noise_level_law_of_large_numbers(dense_pair):
    A = dense_pair[0][1]
    x = Image(ImageGrid(M), np.random.default_rng(0).uniform(size=(M, M)))
    clean = A.matvec(x.vector)
    gamma = 0.05
    norms = [np.linalg.norm(simulate_data(A, x, NoiseSpec(gamma, 0, s)) - clean) for s in range(100)]
    assert abs(np.mean(norms) / (gamma * np.linalg.norm(clean)) - 1) <= 0.05


def test_noise_is_deterministic(dense_pair):
    A = dense_pair[0][1]
    x = Image(ImageGrid(M), np.ones((M, M)))
    a = simulate_data(A, x, NoiseSpec(0.01, 0, 5))
    b = simulate_data(A, x, NoiseSpec(0.01, 0, 5))
    assert np.array_equal(a, b)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adjoint_identity_property(seed):
    p, y = default_axes(17)
    op = ShiftInvariantOperator(CurveSpec("hyperbola", 1.5), ImageGrid(17), p, y)
    rng = np.random.default_rng(seed)
    x, yv = rng.standard_normal(op.shape[1]), rng.standard_normal(op.shape[0])
    Ax = op.matvec(x)
    assert abs(Ax @ yv - x @ op.rmatvec(yv)) <= 1e-12 * np.linalg.norm(Ax) * np.linalg.norm(yv)
