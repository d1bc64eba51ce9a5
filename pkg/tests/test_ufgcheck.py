import pytest

from conftest import grusin_fields, heisenberg_fields, ou_fields, vf
from ufgkit.liealg import build_hierarchy
from ufgkit.symexpr import Expr
from ufgkit.ufgcheck import (
    MissingRow,
    NonNegativeFactor,
    NoSolution,
    NotProportional,
    ResidualNonzero,
    UfgCertificate,
    UnboundedPhi,
    check_dilation,
    check_v0_condition,
    expand_in_basis,
    express_in_span,
    overflow_rows,
    parse_ansatz,
    solve_certificate,
    verify_certificate,
)

K3 = Expr.param("k", 3)


def test_heisenberg_certificate_rows():
    h = build_hierarchy(heisenberg_fields(), 2)
    cert = solve_certificate(h)
    assert cert.verified
    assert cert.rows[(1, 0)] == {(1,): -K3}
    assert cert.rows[(2, 0)] == {(2,): -K3}
    assert cert.rows[(1, 2, 0)] == {(1, 2): -2 * K3}
    assert cert.rows[(1, 2, 1)] == {} and cert.rows[(1, 2, 2)] == {}
    assert set(overflow_rows(h)) == set(cert.rows)


def test_verify_rejects_wrong_row():
    h = build_hierarchy(heisenberg_fields(), 2)
    cert = solve_certificate(h)
    bad = UfgCertificate(2, dict(cert.rows))
    bad.rows[(1, 0)] = {(1,): K3}
    with pytest.raises(ResidualNonzero):
        verify_certificate(h, bad)
    assert not bad.verified


def test_missing_row_and_implicit_zero_rows():
    h = build_hierarchy(heisenberg_fields(), 2)
    cert = solve_certificate(h)
    rows = {r: v for r, v in cert.rows.items() if r != (1, 0)}
    with pytest.raises(MissingRow):
        verify_certificate(h, UfgCertificate(2, rows))
    # rows whose bracket vanishes may be left out
    rows = {r: v for r, v in cert.rows.items() if r not in ((1, 2, 1), (1, 2, 2))}
    assert verify_certificate(h, UfgCertificate(2, rows)).verified


def test_unbounded_coefficient_rejected():
    # [V1, V0] = -x V1 with an unbounded factor
    h = build_hierarchy([vf(["x*x/2", "0"]), vf(["1", "0"])], 1)
    with pytest.raises(NoSolution):
        solve_certificate(h)
    cert = UfgCertificate(1, {(1, 0): {(1,): Expr.var(0, 2)}, (1, 1): {}})
    with pytest.raises(UnboundedPhi):
        verify_certificate(h, cert)


def test_trig_certificate_second_variant():
    h = build_hierarchy([vf(["sin(x)", "0"]), vf(["0", "sin(x)"])], 1)
    cert = solve_certificate(h)
    assert cert.rows[(1, 0)] == {(1,): -Expr.cos(0, 2)}
    assert cert.ansatz[(1, 0)] == "trig1"


def test_first_variant_needs_order_four():
    fields = [vf(["0", "sin(x)"]), vf(["sin(x)", "0"])]
    for m in (1, 2, 3):
        with pytest.raises(NoSolution):
            solve_certificate(build_hierarchy(fields, m))
    assert solve_certificate(build_hierarchy(fields, 4)).verified


def test_ansatz_parsing():
    assert parse_ansatz("constants") == "constants"
    assert parse_ansatz("trig2") == ("trig", 2)
    with pytest.raises(ValueError):
        parse_ansatz("fourier")


def test_express_in_span_residual():
    got = express_in_span(vf(["x", "0"]), {(1,): vf(["1", "0"])}, "constants")
    assert isinstance(got, tuple) and got[0] > 0


def test_expand_beyond_certificate():
    h = build_hierarchy(grusin_fields(), 1)
    cert = solve_certificate(h)
    k = Expr.param("k", 2)
    # [[V1, V0], V0] = k^2 V1
    assert expand_in_basis(h, cert, (1, 0, 0)).coeffs == {(1,): k * k}


def test_dilation_heisenberg_and_grusin():
    dil = check_dilation(build_hierarchy(heisenberg_fields(), 2), {"k": 1})
    assert dil.lambda0 == 1.0
    assert dil.sups == {(1,): -1.0, (2,): -1.0, (1, 2): -2.0}
    assert check_dilation(build_hierarchy(grusin_fields(), 1), {"k": 3}).lambda0 == 3.0


def test_dilation_fails_for_positive_ou():
    h = build_hierarchy(ou_fields(), 1)
    assert solve_certificate(h).verified
    with pytest.raises(NonNegativeFactor):
        check_dilation(h, {"a": 0.5})


def test_dilation_fails_for_oscillating_factor():
    h = build_hierarchy([vf(["sin(x)", "0"]), vf(["0", "sin(x)"])], 1)
    with pytest.raises(NonNegativeFactor):
        check_dilation(h)


def test_dilation_not_proportional():
    h = build_hierarchy([vf(["0", "sin(x)"]), vf(["sin(x)", "0"])], 4)
    with pytest.raises(NotProportional):
        check_dilation(h)


def test_drift_span_condition():
    v0 = check_v0_condition(build_hierarchy(heisenberg_fields(), 2))
    assert not v0.ok and v0.failing_components == (0, 1, 2)
    # drift equal to a diffusion field lies in the span
    ok = check_v0_condition(build_hierarchy([vf(["0", "1"]), vf(["0", "1"])], 1))
    assert ok.ok
