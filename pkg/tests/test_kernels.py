"""Parity of the compiled kernels, the pure-Python fallback and numpy evaluation."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from lieclf import _kernels
from lieclf._kernels import opcodes
from lieclf.expr import Program
from lieclf.parser import parse_expr
from lieclf.steering import word_for_bracket
from lieclf.lie import Leaf, Node

from conftest import make_system
from test_expr import points, smooth_exprs

BACKENDS = _kernels.backends()
compiled_only = pytest.mark.skipif("compiled" not in BACKENDS, reason="compiled kernels not built")


def _run(mod, prog, x):
    out = np.empty(len(prog.starts) - 1)
    stack = np.zeros(max(prog.depth, 1))
    err = mod.eval_programs(prog.ops, prog.args, prog.starts, np.asarray(x, float), stack, out)
    return err, out


def test_backend_selection_reports_a_known_name():
    assert _kernels.BACKEND in ("compiled", "python")
    assert "python" in BACKENDS


@compiled_only
def test_opcode_tables_agree():
    names = {k: v for k, v in vars(opcodes).items() if k.isupper() and not k.startswith(("OK", "ERR"))}
    assert BACKENDS["compiled"].OPCODES == names


@compiled_only
@given(smooth_exprs, points)
def test_compiled_and_python_bit_identical(e, x):
    prog = Program.build([e, e.partial(0), e.partial(2)])
    ec, oc = _run(BACKENDS["compiled"], prog, x)
    ep, op_ = _run(BACKENDS["python"], prog, x)
    assert ec == ep
    if ec == opcodes.OK:
        assert oc.tobytes() == op_.tobytes()


@given(smooth_exprs, points)
def test_kernel_matches_numpy_walk(e, x):
    err, out = _run(_kernels, Program.build([e]), x)
    if err == opcodes.OK:
        ref = e.evaluate_batch(np.array([x]))[0]
        assert out[0] == pytest.approx(ref, rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("text, x, code", [
    ("1/x1", [0.0], opcodes.ERR_NONFINITE),
    ("sign(x1)", [0.0], opcodes.ERR_KINK),
    ("select(x1, 1, 2)", [0.0], opcodes.ERR_KINK),
    ("exp(x1)", [1000.0], opcodes.ERR_NONFINITE),
    ("sqrt(x1)", [-1.0], opcodes.ERR_NONFINITE),
])
def test_error_codes_every_backend(text, x, code):
    prog = Program.build([parse_expr(text)])
    for mod in BACKENDS.values():
        assert _run(mod, prog, x)[0] == code


def _integrate(mod, sysd, word, x, t, substeps=16, every=4):
    lay = sysd.layout
    ctrl = np.array([c for c, _ in word.segments], dtype=np.int32)
    dur = np.array([f * t for _, f in word.segments])
    out = np.zeros((1 + len(ctrl) * substeps, 1 + sysd.dim))
    segs = np.zeros(len(out), dtype=np.int32)
    xx = np.array(x, float)
    rows, err = mod.integrate_word(*lay.arrays(), ctrl, dur, int(sysd.has_drift), xx,
                                   substeps, every, out, segs)
    return err, xx, out[:rows], segs[:rows]


@compiled_only
@pytest.mark.parametrize("gens, drift", [
    ((("1", "0", "-x2"), ("0", "1", "x1")), None),
    ((("cos(x3)", "sin(x3)", "0"), ("0", "0", "1")), None),
    ((("0", "1", "0"), ("0", "0", "exp(x1)")), ("x2", "0", "x1*x3")),
])
def test_integrator_parity(gens, drift):
    sysd = make_system(gens, drift, k=2)
    w = word_for_bracket(Node(Node(Leaf(1), Leaf(2)), Leaf(1)))
    a = _integrate(BACKENDS["compiled"], sysd, w, [0.3, -0.2, 0.5], 0.37)
    b = _integrate(BACKENDS["python"], sysd, w, [0.3, -0.2, 0.5], 0.37)
    assert a[0] == b[0] == opcodes.OK
    assert a[1].tobytes() == b[1].tobytes()
    assert a[2].tobytes() == b[2].tobytes()
    assert np.array_equal(a[3], b[3])


@compiled_only
def test_piecewise_field_parity(lipschitz_sys):
    lay = lipschitz_sys.layout
    rng = np.random.default_rng(3)
    for x in rng.uniform(-1, 1, (50, 3)):
        res = []
        for mod in (BACKENDS["compiled"], BACKENDS["python"]):
            out = np.zeros(3)
            err = mod.eval_field(*lay.arrays(), 2, x, out)
            res.append((err, out.tobytes()))
        assert res[0] == res[1]


def test_integrator_reports_blow_up():
    sysd = make_system([("x1^2",)])
    w = word_for_bracket(Leaf(1))
    for mod in BACKENDS.values():
        err = _integrate(mod, sysd, w, [1.0], 50.0, substeps=8)[0]
        assert err == opcodes.ERR_NONFINITE


@compiled_only
def test_fallback_backend_end_to_end(tmp_path):
    import os
    import subprocess
    import sys

    outs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, LIECLF_PURE_PYTHON=flag)
        d = tmp_path / flag
        proc = subprocess.run([sys.executable, "-c",
                               "import lieclf; print(lieclf.BACKEND)"], env=env,
                              capture_output=True, text=True, check=True)
        outs[flag + "backend"] = proc.stdout.strip()
        subprocess.run([sys.executable, "-m", "lieclf", "synthesize", "softlanding.json",
                        "--out", str(d)], env=env, check=True, capture_output=True)
        outs[flag] = (d / "trajectory.csv").read_bytes()
    assert (outs["0backend"], outs["1backend"]) == ("compiled", "python")
    assert outs["0"] == outs["1"]
