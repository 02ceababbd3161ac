"""One test per acceptance criterion; each prints a single pass/fail line."""
import pytest

from blowup.acceptance import run_criterion


def _check(ctx, cid):
    row = run_criterion(cid, ctx)
    print("\n" + row.line())
    assert row.passed, {"measured": row.measured, "checks": row.checks,
                        "error": row.details.get("error")}


def test_ground_state_residuals(ctx):
    _check(ctx, 1)


def test_green_operator(ctx):
    _check(ctx, 2)


def test_interior_error_grading(ctx):
    _check(ctx, 3)


def test_self_similar_hierarchy(ctx):
    _check(ctx, 4)


def test_overlap_consistency(ctx):
    _check(ctx, 5)


def test_glued_error_scaling(ctx):
    _check(ctx, 6)


def test_scattering_identities(ctx):
    _check(ctx, 7)


def test_discrete_spectrum(ctx):
    _check(ctx, 8)


def test_distorted_fourier_transform(ctx):
    _check(ctx, 9)


def test_transference(ctx):
    _check(ctx, 10)


def test_olver_expansions(ctx):
    _check(ctx, 11)


def test_propagator_kernel(ctx):
    _check(ctx, 12)
