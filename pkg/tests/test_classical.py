import json
import math

import numpy as np
import pytest

from qdd import kernels
from qdd.classical import (DetectorConfig, Trigger, blowup_rows, classical_step,
                           evolve_classical)
from qdd.config import make_profile
from qdd.grid import build_grid, integrate


def test_uniform_heat_fixed_point(disc):
    w = np.full(disc.N, 1 / disc.volume)
    st = classical_step(disc, w, 0.0, 1e-3)
    assert np.array_equal(st.n, w)


def test_heat_mode_decay(slab):
    tau = 1e-4
    w = 1 + 0.1 * np.cos(np.pi * slab.nodes)
    n = classical_step(slab, w, 0.0, tau).n
    ratio = (n[0] - n[-1]) / (w[0] - w[-1])
    assert (1 - ratio) == pytest.approx(1 - math.exp(-math.pi**2 * tau), rel=0.05)


def test_heat_step_is_implicit_heat_solve(disc):
    tau = 1e-3
    w = make_profile(disc, "bump-smooth").n
    n = classical_step(disc, w, 0.0, tau).n
    lower = np.zeros(disc.N)
    upper = np.zeros(disc.N)
    lower[1:] = -tau * disc.cl[1:]
    upper[:-1] = -tau * disc.cr[:-1]
    diag = 1 + tau * (disc.cl + disc.cr)
    ref = kernels.solve_tridiagonal(lower, diag, upper, w.copy())
    assert np.max(np.abs(n - ref)) < 1e-12 * np.max(w)


def test_mass_before_clip(disc):
    w = make_profile(disc, "bump-smooth").n
    st = classical_step(disc, w, 4 * math.pi, 1e-4)
    assert st.mass_before_clip == pytest.approx(1.0, abs=1e-9)
    assert st.clip_deficit == 0.0


def test_subcritical_completes(disc):
    traj, rep = evolve_classical(disc, make_profile(disc, "bump-smooth"), 4 * math.pi, 1e-4, 0.2)
    assert not rep.blew_up and rep.trigger is None
    assert traj.final_time == pytest.approx(0.2)
    assert max(rep.max_n_trace) < rep.cap


def test_supercritical_blows_up(disc):
    traj, rep = evolve_classical(disc, make_profile(disc, "bump-concentrated"),
                                 16 * math.pi, 1e-4, 0.2)
    assert rep.blew_up
    assert rep.trigger in (Trigger.MAX_DENSITY, Trigger.STEP_COLLAPSE)
    assert rep.t_detect < 0.2
    d = json.loads(rep.to_json())
    assert d["trigger"] == rep.trigger.value
    assert blowup_rows(rep)[0][:2] == ["blowup", rep.trigger.value]


def test_repulsive_spreads(disc):
    traj, rep = evolve_classical(disc, make_profile(disc, "bump-concentrated"),
                                 -8 * math.pi, 1e-4, 0.05)
    assert not rep.blew_up
    peaks = np.array(rep.max_n_trace)
    assert np.all(np.diff(peaks[10:]) <= 0)
    assert peaks[-1] < peaks[0]


def test_detector_deterministic(disc):
    n0 = make_profile(disc, "bump-concentrated")
    a = evolve_classical(disc, n0, 16 * math.pi, 1e-4, 0.2)[1]
    b = evolve_classical(disc, n0, 16 * math.pi, 1e-4, 0.2)[1]
    assert a.t_detect == b.t_detect and a.trigger == b.trigger


def test_default_cap():
    g = build_grid(2, "radial", 201)
    cap = DetectorConfig().cap(g)
    assert cap == pytest.approx(min(1e6 / math.pi, 0.25 / g.quad_weights[0]))
    assert DetectorConfig(max_density_cap=50.0).cap(g) == 50.0


def test_explicit_cap_fires(disc):
    _, rep = evolve_classical(disc, make_profile(disc, "bump-smooth"), 4 * math.pi, 1e-4, 0.2,
                              DetectorConfig(max_density_cap=1.0))
    assert rep.blew_up and rep.trigger is Trigger.MAX_DENSITY


def test_mass_conserved_along_run(slab):
    traj, _ = evolve_classical(slab, 1 + 0.5 * np.cos(np.pi * slab.nodes), 2.0, 1e-3, 0.05)
    for r in traj.reports:
        assert r.mass == pytest.approx(1.0, abs=1e-9)


def test_rejects_bad_horizon(slab):
    with pytest.raises(ValueError):
        evolve_classical(slab, np.ones(slab.N), 0.0, 1e-3, 0.0)


def test_timeseries_has_blowup_row(tmp_path, disc):
    traj, rep = evolve_classical(disc, make_profile(disc, "bump-concentrated"),
                                 16 * math.pi, 1e-4, 0.2)
    path = tmp_path / "ts.csv"
    traj.write_timeseries(path, extra_rows=blowup_rows(rep))
    last = path.read_text().splitlines()[-1].split(",")
    assert last[0] == "blowup" and last[-1] == "1"
