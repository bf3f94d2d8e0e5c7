"""Tests for app/analysis/frequency.py."""
import numpy as np
import pytest

from app.analysis.frequency import Frequency, angle_of, hemisphere_grid, small_ball_samples


class TestFrequency:
    def test_rho_and_hat(self):
        z = Frequency(3.0, 0.0, (4.0,))
        assert z.rho == pytest.approx(5.0)
        assert z.hat.rho == pytest.approx(1.0)
        assert z.s == complex(0.0, 3.0)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            Frequency(0.0, -0.1)

    def test_zero_has_no_direction(self):
        assert Frequency(0.0, 0.0).is_zero
        with pytest.raises(ValueError):
            Frequency(0.0, 0.0).hat

    def test_dict_roundtrip(self):
        z = Frequency(0.25, 0.5, (0.1, -0.2))
        assert Frequency.from_dict(z.as_dict()) == z


class TestHemisphereGrid:
    def test_unit_norm_and_levels(self):
        grid = hemisphere_grid(2, points=8, gamma_levels=[0.0, 0.5, 1.0])
        assert len(grid) == 8 + 8 + 1
        for _, _, z in grid:
            assert z.rho == pytest.approx(1.0)

    def test_one_dimensional_has_two_points(self):
        grid = hemisphere_grid(1, gamma_levels=[0.0, 0.6])
        assert len(grid) == 4
        taus = sorted(z.tau for _, _, z in grid if z.gamma == 0.6)
        assert taus == pytest.approx([-0.8, 0.8])

    def test_angle(self):
        assert angle_of(Frequency(0.0, 0.0, (1.0,))) == pytest.approx(np.pi / 2)


class TestSmallBall:
    def test_samples_in_ball(self, rng):
        for z in small_ball_samples(3, 50, 0.1, rng):
            assert 0.0 < z.rho <= 0.1 + 1e-12
            assert z.gamma >= 0.0
            assert len(z.eta) == 2
