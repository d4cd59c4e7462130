import math

import numpy as np
import pytest

from qp2d.isoenergetic import (
    curve_delta,
    export_curve,
    read_curve,
    solve_radius,
    trace_curve,
)
from qp2d.profile import make_profile
from qp2d.resonance import build_omega1, resonant_set_step1

TWO_PI = 2.0 * math.pi


class TestSolveRadius:
    def test_zero_potential_exact_sqrt(self, zero_spec, params, rng):
        lam = 1600.0
        prof = make_profile(40.0)
        om = build_omega1(40.0, prof, params)
        for _ in range(5):
            phi = float(rng.uniform(0, TWO_PI))
            if not om.contains(phi):
                continue
            kappa = solve_radius(1, lam, phi, zero_spec, prof)
            assert kappa == math.sqrt(lam)

    def test_residual_tolerance(self, spec, params, rng):
        lam = 1600.0
        k = math.sqrt(lam)
        prof = make_profile(k)
        om = build_omega1(k, prof, params)
        from qp2d.perturb import LevelEvaluator

        done = 0
        while done < 20:
            phi = float(rng.uniform(0, TWO_PI))
            if not om.contains(phi):
                continue
            kappa = solve_radius(1, lam, phi, spec, prof)
            ev = LevelEvaluator(1, phi, spec, prof)
            nu = np.array([math.cos(phi), math.sin(phi)])
            assert abs(ev.eigenvalue(kappa * nu) - lam) <= 1e-9 * lam
            done += 1

    def test_dkappa_dlambda(self, spec, params, rng):
        k = 40.0
        prof = make_profile(k)
        om = build_omega1(k, prof, params)
        while True:
            phi = float(rng.uniform(0, TWO_PI))
            if om.contains(phi):
                break
        lam = k * k
        d = 2.0
        k_plus = solve_radius(1, lam + d, phi, spec, make_profile(math.sqrt(lam + d)))
        k_minus = solve_radius(1, lam - d, phi, spec, make_profile(math.sqrt(lam - d)))
        deriv = (k_plus - k_minus) / (2 * d)
        assert deriv == pytest.approx(1.0 / (2.0 * k), rel=1e-4)

    def test_uniqueness_bracketing(self, spec, params, rng):
        k = 40.0
        prof = make_profile(k)
        om = build_omega1(k, prof, params)
        while True:
            phi = float(rng.uniform(0, TWO_PI))
            if om.contains(phi):
                break
        kappa = solve_radius(1, k * k, phi, spec, prof, check_unique=True)
        assert abs(kappa - k) <= prof.kappa_window_1


class TestTraceCurve:
    def test_zero_potential_circle(self, zero_spec, params):
        lam = 625.0
        k = math.sqrt(lam)
        prof = make_profile(k)
        grid = np.linspace(0, TWO_PI, 180, endpoint=False)
        curve = trace_curve(1, lam, grid, zero_spec, prof)
        adm = curve.admissible_samples
        assert len(adm) > 100
        assert all(s.kappa == k for s in adm)
        assert all(s.h == 0.0 for s in adm)

    def test_hole_measure_matches_excised_set(self, zero_spec, params):
        lam = 1600.0
        k = math.sqrt(lam)
        prof = make_profile(k)
        n = 700
        grid = np.linspace(0, TWO_PI, n, endpoint=False)
        curve = trace_curve(1, lam, grid, zero_spec, prof)
        excluded = resonant_set_step1(k, prof, params)
        # recount at grid resolution
        assert curve.hole_measure == pytest.approx(
            excluded.measure, abs=4 * TWO_PI / n * (len(excluded.intervals) + 1)
        )

    def test_samples_sorted_and_flagged(self, spec, params):
        lam = 625.0
        prof = make_profile(math.sqrt(lam))
        grid = np.linspace(0, TWO_PI, 90, endpoint=False)
        curve = trace_curve(1, lam, grid, spec, prof)
        phis = [s.phi for s in curve.samples]
        assert phis == sorted(phis)
        for s in curve.samples:
            if not s.admissible:
                assert math.isnan(s.kappa)

    def test_level2_subset_of_level1(self, spec, params):
        lam = 1600.0
        prof = make_profile(math.sqrt(lam))
        grid = np.linspace(0, TWO_PI, 60, endpoint=False)
        c1 = trace_curve(1, lam, grid, spec, prof)
        c2 = trace_curve(2, lam, grid, spec, prof)
        for s1, s2 in zip(c1.samples, c2.samples):
            if s2.admissible:
                assert s1.admissible


class TestCurveDelta:
    def test_zero_potential_zero_delta(self, zero_spec, params):
        lam = 625.0
        prof = make_profile(math.sqrt(lam))
        grid = np.linspace(0, TWO_PI, 40, endpoint=False)
        best, _, c1, c2 = curve_delta(lam, grid, zero_spec, prof)
        assert best == 0.0

    def test_delta_below_level1_deviation(self, spec, params):
        lam = 1600.0
        prof = make_profile(math.sqrt(lam))
        grid = np.linspace(0, TWO_PI, 48, endpoint=False)
        best, arg, c1, c2 = curve_delta(lam, grid, spec, prof)
        assert best <= c1.sup_h + 1e-12


class TestExport:
    def test_round_trip(self, spec, params, tmp_path):
        lam = 625.0
        prof = make_profile(math.sqrt(lam))
        grid = np.linspace(0, TWO_PI, 36, endpoint=False)
        curve = trace_curve(1, lam, grid, spec, prof)
        path = str(tmp_path / "curve.csv")
        export_curve(curve, path)
        back = read_curve(path)
        assert back.level == curve.level and back.lam == curve.lam
        assert back.holes == curve.holes
        for a, b in zip(curve.samples, back.samples):
            assert a.phi == b.phi and a.admissible == b.admissible
            if a.admissible:
                assert a.kappa == b.kappa and a.h == b.h

    def test_header_only_for_empty_grid(self, spec, tmp_path):
        lam = 625.0
        prof = make_profile(math.sqrt(lam))
        curve = trace_curve(1, lam, np.zeros((0,)), spec, prof)
        path = str(tmp_path / "empty.csv")
        export_curve(curve, path)
        lines = open(path).read().strip().splitlines()
        assert lines == ["phi,kappa,h,dkappa_dphi,admissible"]

    def test_row_count_equals_grid(self, spec, tmp_path):
        lam = 625.0
        prof = make_profile(math.sqrt(lam))
        grid = np.linspace(0, TWO_PI, 25, endpoint=False)
        curve = trace_curve(1, lam, grid, spec, prof)
        path = str(tmp_path / "c.csv")
        export_curve(curve, path)
        assert len(open(path).read().strip().splitlines()) == 26
