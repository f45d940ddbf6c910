from unittest import TestCase

import numpy as np
import pytest

from mfc_lbm.benchmark import (
    DiffusivityResult,
    PoiseuilleReport,
    PoiseuilleResult,
    poiseuille_benchmark,
    poiseuille_profile,
    pulse_diffusivity,
    reference_poiseuille,
    run_poiseuille,
    step_diffusion_error,
    transient_steps,
)
from mfc_lbm.exceptions import InputError


class TestPoiseuille(TestCase):
    def test_analytic_profile(self):
        profile = poiseuille_profile(width=8, force=1e-5, viscosity=1 / 6)
        self.assertEqual(profile.shape, (8,))
        np.testing.assert_allclose(profile, profile[::-1])
        # Rows 4 and 5 share the peak
        self.assertAlmostEqual(profile.max(), 3e-5 * 3.5 * 4.5, delta=1e-15)

    def test_narrow_channel(self):
        result = run_poiseuille(width=8)
        self.assertLess(result.l2_error, 0.05)
        self.assertGreater(result.steps, 0)

    def test_second_order_convergence(self):
        report = poiseuille_benchmark(widths=(8, 16, 32))
        errors = [result.l2_error for result in report.results]
        self.assertTrue(errors[0] > errors[1] > errors[2])
        for order in report.observed_orders:
            with self.subTest(order=order):
                self.assertAlmostEqual(order, 2.0, delta=0.3)

    def test_reference_relaxation_time(self):
        result = reference_poiseuille(width=16)
        self.assertLess(result.l2_error, 0.01)

    def test_invalid_width(self):
        with self.assertRaises(InputError):
            run_poiseuille(width=1)


def test_observed_orders():
    report = PoiseuilleReport(
        results=[
            PoiseuilleResult(width=10, l2_error=4e-2, steps=1),
            PoiseuilleResult(width=20, l2_error=1e-2, steps=1),
        ]
    )
    assert report.observed_orders == [pytest.approx(2.0)]


def test_step_profile_follows_erf():
    assert step_diffusion_error() < 1e-2


def test_pulse_diffusivity(subtests):
    for tau_d in [0.5036, 1.0, 1.5]:
        with subtests.test(tau_d=tau_d):
            result = pulse_diffusivity(tau_d)
            assert result.expected == pytest.approx((tau_d - 0.5) / 3)
            assert result.relative_error < 0.02


def test_relative_error():
    assert DiffusivityResult(tau_d=1.0, expected=0.2, measured=0.19).relative_error == (
        pytest.approx(0.05)
    )


def test_transient_steps():
    assert transient_steps(1.0) == 1
    assert transient_steps(1.5) == 21
    assert transient_steps(0.5036) > 1000


def test_invalid_pulse_window():
    with pytest.raises(InputError):
        pulse_diffusivity(1.0, size=21, first_step=50, last_step=50)
