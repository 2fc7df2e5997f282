import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bergman_lab.ellipsoid import EllipsoidSpec, ball, volume
from bergman_lab.kernel import (
    SeriesBudgetError,
    ball_kernel_closed,
    build_series,
    eval_kernel,
    eval_reinhardt,
    pick_cap,
    polydisc_kernel_closed,
    tail_estimate,
)
from bergman_lab.projection import sample_points
from bergman_lab.reporting import series_rows, write_csv
from oracles import brute_kernel

DISC = EllipsoidSpec((1,))
OMEGA12 = EllipsoidSpec((1, 2))


@pytest.fixture(scope="module")
def ball60():
    return build_series(ball(2), 60)


@pytest.fixture(scope="module")
def omega12_60():
    return build_series(OMEGA12, 60)


class TestBuild:
    def test_disc_cap_zero(self):
        s = build_series(DISC, 0)
        assert s.n_terms == 1
        assert s.coefficient((0,)) == pytest.approx(1 / math.pi, rel=1e-15)

    def test_ball_first_coefficients(self):
        s = build_series(ball(2), 1)
        assert s.coefficient((0, 0)) == pytest.approx(2 / math.pi**2, rel=1e-14)
        assert s.coefficient((1, 0)) == pytest.approx(6 / math.pi**2, rel=1e-14)
        assert s.coefficient((0, 1)) == pytest.approx(6 / math.pi**2, rel=1e-14)

    def test_term_count(self):
        assert build_series(OMEGA12, 5).n_terms == 21

    def test_constant_term_is_inverse_volume(self):
        for m in [(1, 2), (3, 5), (2, 2, 1)]:
            s = build_series(EllipsoidSpec(m), 3)
            assert math.exp(s.log_coeffs[0]) == pytest.approx(1 / volume(EllipsoidSpec(m)), rel=1e-14)

    def test_budget(self):
        with pytest.raises(SeriesBudgetError):
            build_series(ball(3), 200, max_terms=10_000)

    def test_immutable(self, ball60):
        with pytest.raises(ValueError):
            ball60.log_coeffs[0] = 0.0

    def test_csv_export(self, tmp_path):
        s = build_series(OMEGA12, 2)
        header, rows = series_rows(s)
        path = write_csv(tmp_path / "s.csv", header, rows)
        lines = path.read_text().splitlines()
        assert lines[0] == "alpha_1,alpha_2,log_coeff"
        assert [l.split(",")[:2] for l in lines[1:4]] == [["0", "0"], ["0", "1"], ["1", "0"]]
        assert float(lines[1].split(",")[2]) == s.log_coeffs[0]


class TestEvaluate:
    def test_origin(self, omega12_60):
        r = eval_reinhardt(omega12_60, [0, 0])
        assert r.value == pytest.approx(1 / volume(OMEGA12), rel=1e-15)
        assert r.tail_bound == 0.0 and r.valid

    def test_ball_axis(self, ball60):
        r = eval_reinhardt(ball60, [0.25, 0])
        assert r.value.real == pytest.approx(2 / math.pi**2 * 0.75**-3, rel=1e-13)

    def test_kernel_at_origin(self, ball60):
        assert eval_kernel(ball60, [0, 0], [0, 0]).value == pytest.approx(2 / math.pi**2, rel=1e-14)

    def test_kernel_on_diagonal(self, ball60):
        r = eval_kernel(ball60, [0.5, 0], [0.5, 0])
        assert r.value.real == pytest.approx(0.48033746319330500, rel=1e-13)

    def test_outside_rejected(self, ball60):
        with pytest.raises(ValueError):
            eval_kernel(ball60, [0.8, 0.7], [0, 0])

    def test_outside_moduli_flagged(self, ball60):
        assert not eval_reinhardt(ball60, [0.7, 0.6]).valid

    def test_matches_brute_force_oracle(self):
        # coefficients from nested quadrature, independent of the gamma formula
        t = [0.2 + 0.1j, -0.15j]
        series = build_series(OMEGA12, 14)
        ref = brute_kernel((1, 2), t, 14)
        assert eval_reinhardt(series, t).value == pytest.approx(ref, rel=1e-11)

    def test_nonnegative_real_t(self, omega12_60, rng):
        for _ in range(20):
            rho = rng.uniform(0, 0.6, 2)
            r = eval_reinhardt(omega12_60, rho)
            assert r.value.imag == 0.0
            assert r.value.real >= 1 / volume(OMEGA12)

    def test_ball_oracle_agreement(self, ball60):
        pts = sample_points(ball(2), 200, max_defect=0.36, seed=3)
        for z, w in zip(pts[0::2], pts[1::2]):
            r = eval_kernel(ball60, z, w)
            ref = ball_kernel_closed(z, w)
            rel = abs(r.value - ref) / abs(ref)
            assert rel <= max(1e-8, r.tail_bound / abs(r.value))

    def test_diagonal_positivity(self, omega12_60):
        for z in sample_points(OMEGA12, 30, max_defect=0.6, seed=4):
            v = eval_kernel(omega12_60, z, z).value
            assert abs(v.imag) <= 1e-12 * abs(v)
            assert v.real >= 1 / volume(OMEGA12)

    def test_monotone_truncation(self):
        rho = [0.3, 0.5]
        values = [eval_reinhardt(build_series(OMEGA12, c), rho).value.real for c in range(0, 30)]
        assert all(b >= a for a, b in zip(values, values[1:]))


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-0.55, 0.55), min_size=4, max_size=4),
    st.lists(st.floats(-0.55, 0.55), min_size=4, max_size=4),
)
def test_hermitian_symmetry(a, b):
    series = build_series(OMEGA12, 30)
    z = np.array([a[0] + 1j * a[1], a[2] + 1j * a[3]]) * 0.9
    w = np.array([b[0] + 1j * b[1], b[2] + 1j * b[3]]) * 0.9
    kzw = eval_kernel(series, z, w).value
    kwz = eval_kernel(series, w, z).value
    assert abs(kzw - np.conj(kwz)) <= 1e-12 * abs(kzw)


class TestTail:
    def test_zero(self, ball60):
        assert tail_estimate(ball60, [0, 0]).bound == 0.0

    def test_small_rho(self):
        s40 = build_series(ball(2), 40)
        tail = tail_estimate(s40, [0.25, 0])
        assert tail.valid and tail.bound <= 1e-8
        # the bound really covers the difference to a longer truncation
        diff = eval_reinhardt(build_series(ball(2), 80), [0.25, 0]).value - eval_reinhardt(s40, [0.25, 0]).value
        assert abs(diff) <= tail.bound

    def test_near_boundary(self):
        assert not tail_estimate(build_series(ball(2), 10), [0.9, 0]).valid
        t40 = tail_estimate(build_series(ball(2), 40), [0.9, 0])
        t80 = tail_estimate(build_series(ball(2), 80), [0.9, 0])
        assert t40.valid and t80.valid
        assert 0 < t80.bound < t40.bound < math.inf
        exact = 2 / math.pi**2 * 0.1**-3
        assert exact - eval_reinhardt(build_series(ball(2), 40), [0.9, 0]).value.real <= t40.bound

    def test_pick_cap(self):
        s = pick_cap(ball(2), [0.5, 0.3], 1e-12)
        assert tail_estimate(s, [0.5, 0.3]).bound <= 1e-12


class TestClosedForms:
    def test_ball_origin(self):
        assert ball_kernel_closed([0, 0], [0, 0]) == pytest.approx(2 / math.pi**2)

    def test_ball_diagonal(self):
        assert ball_kernel_closed([0.5, 0], [0.5, 0]).real == pytest.approx(2 / math.pi**2 / 0.75**3)

    def test_disc(self):
        assert ball_kernel_closed([0], [0], 1) == pytest.approx(1 / math.pi)

    def test_ball_singular(self):
        with pytest.raises(ValueError):
            ball_kernel_closed([1, 0], [1, 0])

    def test_polydisc(self):
        assert polydisc_kernel_closed([0, 0], [0, 0]) == pytest.approx(1 / math.pi**2)
        assert polydisc_kernel_closed([0.5, 0.5], [0.5, 0.5]).real == pytest.approx(
            (0.75**-2 / math.pi) ** 2, rel=1e-15
        )
        assert polydisc_kernel_closed([0.3, 0], [0.4, 0.9]) == pytest.approx(
            polydisc_kernel_closed([0.3], [0.4]) / math.pi
        )
        with pytest.raises(ValueError):
            polydisc_kernel_closed([1, 0], [1, 0])
