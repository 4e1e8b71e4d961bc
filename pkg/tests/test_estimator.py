import json
import math

import pytest

from qmf import estimator as E
from qmf.arith import QftConfig, u_cq
from qmf.circuit import summarize
from qmf.compiler import CompileConfig, clear_memo, compile_phase_product, compile_phase_triple


def test_base_case_formula():
    for n in range(1, 9):
        r = E.estimate_phase_product(n)
        assert r.counts["crphi"] == n * n and r.counts["toffoli"] == 0


def test_report_json_shape():
    r = E.estimate_phase_product(64)
    d = json.loads(r.dumps())
    assert set(d) >= {"n", "config", "counts", "ancillas", "total_qubits", "k_tree"}
    assert set(d["counts"]) >= {"toffoli", "crphi", "clifford"}
    assert r.total_qubits >= 128


def test_memoised_second_call():
    a = E.estimate_phase_product(300).to_json()
    b = E.estimate_phase_product(300).to_json()
    clear_memo()
    c = E.estimate_phase_product(300).to_json()
    assert a == b == c


@pytest.mark.parametrize("cfg", [CompileConfig(), CompileConfig(n_base=2), CompileConfig(k_policy=3, n_base=4),
                                 CompileConfig(overflow_mode="stored_ancilla", n_base=4)])
def test_estimate_equals_census(cfg):
    for n in (5, 17, 33, 64):
        c = compile_phase_product(n, n, 1 / 3, cfg)
        r = E.estimate_phase_product(n, cfg)
        want = summarize(c.census())
        assert all(r.counts[k] == want[k] for k in want)
        assert r.ancillas == c.ancilla_high_water
    c = compile_phase_triple(12, 12, 12, 1 / 3, cfg)
    r = E.estimate_phase_product(12, cfg, "triple")
    assert r.counts["crphi"] == summarize(c.census())["crphi"]


def test_multiplier_equals_compiled():
    for n in (4, 8):
        mcfg = E.MultiplierConfig(compile=CompileConfig(n_base=2))
        r = E.estimate_multiplier(n, mcfg)
        c = u_cq(7, n, n + mcfg.pad_bits(), mcfg.compile, mcfg.qft)
        want = summarize(c.census())
        assert all(r.counts[k] == want[k] for k in want)


def test_auto_not_worse_than_fixed():
    for n in (40, 100, 257):
        auto = E.estimate_phase_product(n).counts["crphi"]
        for k in range(2, 7):
            assert auto <= E.estimate_phase_product(n, CompileConfig(k_policy=k)).counts["crphi"]
        assert auto <= E.estimate_phase_product(n, CompileConfig(k_policy="base")).counts["crphi"]


def test_monotone_in_n():
    prev = 0
    for n in range(1, 200, 7):
        c = E.estimate_phase_product(n).counts["crphi"]
        assert c >= prev
        prev = c


def test_pruning_reduces():
    on = E.estimate_multiplier(256, E.MultiplierConfig(qft=QftConfig(eta=1e-12)))
    off = E.estimate_multiplier(256, E.MultiplierConfig(qft=QftConfig(eta=None), pad=40))
    assert on.counts["crphi"] <= off.counts["crphi"]


def test_exponent_table():
    t = E.exponent_table()
    assert abs(t[8][0] - 1.302) < 1e-3
    assert abs(t[3][1] - math.log(7, 3)) < 1e-12
    assert t[2][1] == 2.0


def test_fit_needs_range():
    with pytest.raises(ValueError):
        E.fit_scaling_exponent(CompileConfig(k_policy=2), [64, 128, 256])
    with pytest.raises(ValueError):
        E.fit_scaling_exponent(CompileConfig(k_policy=2), [64, 70, 80, 90])


def test_schoolbook_slope():
    s = E.fit_scaling_exponent(CompileConfig(k_policy="base"), [64, 128, 256, 512, 1024])
    assert abs(s - 2.0) < 0.05


def test_k_tree_levels():
    r = E.estimate_phase_product(64, CompileConfig(k_policy=2))
    assert r.k_tree[0] == {"k=2": 1}
    assert "base" in r.k_tree[-1]


def test_render_table():
    txt = E.render_table({"demo": E.estimate_multiplier(16)})
    assert "Toffoli" in txt and "demo" in txt
