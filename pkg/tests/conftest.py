"""Shared (session-scoped) simulation runs.

Each run is the same configuration the acceptance suite and the example
configs in scripts/configs use, so the expensive evolutions happen once.
"""
import warnings

import pytest

from zaklab.evolve import GridSpec, ICSpec, SimConfig, run

TOWNES_COLLAPSE_IC = ICSpec("gaussian", dict(amplitude=12 ** 0.5, width=1.0, n_mode="minus_psi2"))


def periodic_cfg(dt):
    return SimConfig(dim=2, grid=GridSpec("periodic", 20.0, 128), dt=dt, t_end=1.0, output_every=0.05,
                     ic=ICSpec("gaussian", dict(amplitude=1.0, width=1.2, kvec=(0.5, -0.3),
                                                n_mode="gaussian", n_amplitude=-0.5)))


def selfsimilar2d_cfg():
    return SimConfig(dim=2, grid=GridSpec("radial", 10.0, 2000), dt=1e-3, t_end=0.999,
                     output_every=0.01, cfl=0.05, blowup_factor=30, resolved_scale=0.1,
                     sobolev_ell=(0.0,), ic=ICSpec("self_similar_2d", dict(a=0.5, t_star=1.0)))


def collapse2d_cfg(dt=5e-4, t_end=2.0, m_values=(2.0, 4.0, 8.0)):
    return SimConfig(dim=2, grid=GridSpec("radial", 12.0, 1000), dt=dt, t_end=t_end,
                     output_every=0.01, cfl=0.05 * dt / 1e-3, resolved_scale=0.1,
                     m_values=m_values, ic=TOWNES_COLLAPSE_IC)


def collapse3d_cfg():
    return SimConfig(dim=3, grid=GridSpec("radial", 8.0, 2000), dt=1e-4, t_end=0.15,
                     output_every=1.25e-4, cfl=0.05, resolved_scale=0.1, homogeneous=True,
                     sobolev_ell=(0.0,), ic=ICSpec("self_similar_3d", dict(k=1, t0=0.95, t_star=1.0)))


def quiet_run(cfg, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run(cfg, **kw)


@pytest.fixture(scope="session")
def periodic_runs():
    return {dt: quiet_run(periodic_cfg(dt)) for dt in (2e-3, 1e-3)}


@pytest.fixture(scope="session")
def selfsimilar2d_run():
    return quiet_run(selfsimilar2d_cfg())


@pytest.fixture(scope="session")
def collapse2d_run():
    return quiet_run(collapse2d_cfg())


@pytest.fixture(scope="session")
def variance_runs():
    # the smooth part of the collapse, sampled on a uniform cadence
    return {dt: quiet_run(collapse2d_cfg(dt=dt, t_end=0.6, m_values=()))
            for dt in (1e-3, 5e-4, 2.5e-4)}


@pytest.fixture(scope="session")
def collapse3d_run():
    return quiet_run(collapse3d_cfg())
