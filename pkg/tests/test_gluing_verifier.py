from dataclasses import replace

import numpy as np
import pytest

from blowup.core_profiles import W
from blowup.gluing_verifier import (ApproxSolution, GlueConfig, MissingRegion, assemble_u_app,
                                    pde_error, seam_jumps, zeta_norms)


def test_missing_region():
    with pytest.raises(MissingRegion):
        ApproxSolution(GlueConfig(), None, None, None)


def test_bare_bubble_error_is_time_derivative():
    # for u = e^{i a0 log s} lambda^{1/2} W(lambda r) only i d_t u survives
    cfg = GlueConfig(zero=True)
    ap = ApproxSolution(cfg, None, None, None)
    s, nu = 0.003125, cfg.nu
    f = assemble_u_app(ap, s)
    e = pde_error(f)
    R = ap.lam(s) * f.r
    Wp = -R / 3 * (1 + R**2 / 3) ** -1.5
    dsu = np.exp(1j * ap.alpha(s)) * s ** (-0.25 - nu / 2) * (
        W(R) * (1j - 0.25 - nu / 2) / s - (0.5 + nu) / s * R * Wp)
    assert np.max(np.abs(e + 1j * dsu)) < 1e-8 * np.max(np.abs(e))
    assert max(zeta_norms(ap, s).values()) == 0.0


def test_gauge_phase_is_global(ctx):
    ap = ctx.approx(ctx.glue_config())
    ap2 = ApproxSolution(replace(ap.config, phase=1.234), ap.interior, ap.selfsim, ap.remote)
    s = 0.003125
    a, b = assemble_u_app(ap, s), assemble_u_app(ap2, s)
    assert np.max(np.abs(b.u - np.exp(1.234j) * a.u)) < 1e-12 * np.max(np.abs(a.u))


def test_seams_are_continuous(ctx):
    ap = ctx.approx(ctx.glue_config())
    assert max(seam_jumps(ap, 0.003125).values()) < 1e-3


def test_time_outside_window(ctx):
    ap = ctx.approx(ctx.glue_config())
    with pytest.raises(ValueError):
        assemble_u_app(ap, 0.2)
