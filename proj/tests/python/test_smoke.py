import math

import numpy as np
import pytest

import rbcv

SMALL = """
family = tc1
variants = hmc, imc
m_ref = 2000
trial_size = 15
max_iters = 4
statistical_stop = false
online.m_small = 100
"""


def test_presets():
    names = rbcv.presets()
    assert "tc1-desk" in names and "heat2d-paper" in names
    assert "family = tc2" in rbcv.preset_text("tc2-desk")
    with pytest.raises(rbcv.ConfigError):
        rbcv.preset_text("tc9-desk")


def test_config_errors_name_the_line():
    with pytest.raises(ValueError, match=r"<string>:2: gamma must be in \(0,1\)"):
        rbcv.resolve_config("family = tc1\ngamma = 1.2\n")
    text = rbcv.resolve_config(SMALL)
    assert rbcv.resolve_config(text) == text


def test_run_small():
    out = rbcv.run(SMALL)
    assert [r["variant"] for r in out["runs"]] == ["hmc", "imc"]
    hmc = out["runs"][0]
    assert len(hmc["records"]) == 4
    for rec in hmc["records"]:
        assert rec["ratio"] < 1 - 0.9**2
    imc = out["runs"][1]["records"]
    assert all(b["theta_mu"] <= a["theta_mu"] for a, b in zip(imc, imc[1:]))
    assert out == rbcv.run(SMALL)


def test_kernels():
    x = np.array([0.25, 0.5, 1.75, 5.0])
    assert np.allclose(rbcv.testcase1_f(x), [0.5, 1.0, 0.5, 0.0])
    assert rbcv.testcase2_f(1.0, 0.4) == pytest.approx(math.sqrt(0.5))
    assert rbcv.wasserstein1_uniform([0.5]) == 0.25
    assert rbcv.phi(0.5) == 0.25
    with pytest.raises(rbcv.DomainError):
        rbcv.phi(0.0)
    q = rbcv.heat2d_qoi(8, 2.0, 1.0, 0.0)
    assert q > 0 and math.isfinite(q)
