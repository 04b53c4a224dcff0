import math
import os

import pytest

import maglorentz as mlg


def test_hard_disk_angle():
    for rho in (-0.9, -0.3, 0.2, 0.7):
        assert abs(mlg.hard_disk_angle(rho)) == pytest.approx(math.pi - 2 * math.asin(abs(rho)), abs=1e-12)


def test_field_angle_reduces_without_field():
    pot = mlg.Potential.smooth(0.01, 0.1)
    for rho in (-0.5, 0.1, 0.8):
        a = mlg.angle_no_field(rho, pot)
        b = mlg.angle_with_field(rho, pot, mlg.Field(0.0))
        assert b == pytest.approx(a, abs=1e-8)


def test_cross_section_table():
    t = mlg.cross_section(mlg.Potential.hard_disk(0.01), mlg.Field(0.0), nodes=257)
    assert len(t) == 257
    worst = max(abs(abs(th) - (math.pi - 2 * math.asin(abs(r)))) for r, th in zip(t.rho, t.theta))
    assert worst < 1e-9
    assert len(t.dtheta_drho()) == 257


def test_kernels_and_solve_conserve_mass():
    nphi = 32
    f0 = [math.exp(math.cos(2 * math.pi * j / nphi)) for j in range(nphi)]
    field = mlg.Field(1.0)
    for k in (mlg.landau_kernel(0.3, nphi), mlg.hard_disk_kernel(0.5, nphi)):
        assert abs(k.multipliers[0]) < 1e-12
        assert all(lam.real <= 1e-12 for lam in k.multipliers)
        f = mlg.solve(f0, k, field, 1.0, 1.0 / 64)
        assert sum(f) == pytest.approx(sum(f0), rel=1e-12)
    g = mlg.gbe_kernel(0.5, field, nphi)
    assert g.nphi == nphi


def test_survival_empty_medium():
    r = mlg.Regime("boltzmann_grad", mu=0.0, eps=0.01)
    s = mlg.survival_probability(r, mlg.Field(1.0), samples=100, seed=1)
    assert s.estimate == 1.0


def test_unknown_key_names_key():
    with pytest.raises(mlg.ConfigError, match="regime.epsilon"):
        mlg.Config.parse("[regime]\nepsilon = 0.1\n")


def test_run_experiment_scatter(tmp_path):
    cfg = mlg.Config.parse(
        "[run]\nexperiment = scatter\n[regime]\nkind = boltzmann_grad\n[scatter]\nnodes = 129\nwith_field = false\n"
    )
    rep = mlg.run_experiment(cfg, str(tmp_path))
    assert rep.ok, rep.failures
    assert os.path.exists(tmp_path / "manifest.ini")
    assert any(f.endswith(".csv") for f in rep.files)
