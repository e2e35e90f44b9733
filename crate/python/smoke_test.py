"""Smoke test for the pyflycom extension.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import math

import pyflycom


def small_config(mode):
    cfg = pyflycom.ExperimentConfig.from_toml(
        """
i = 20
j = 300
r = 3
xi = 2.0
k = 5
m = 2
snr_db = 10.0
t_max = 16
trials = 4
seed = 7
mode = "flycom"
schedule = [2, 4, 8, 16]
"""
    )
    cfg.mode = mode
    return cfg


def main():
    cfg = small_config("flycom")
    again = pyflycom.ExperimentConfig.from_toml(cfg.to_toml())
    assert again.config_hash() == cfg.config_hash()

    rows, summary = pyflycom.run_experiment(cfg, threads=2)
    assert len(rows) == 4 * 4
    for row in rows:
        assert abs(row.error - row.sketch_term - row.residual_term) < 1e-10
        assert row.power_ratio_max <= 1 + 1e-8
    assert [s.slot for s in summary] == [2, 4, 8, 16]
    assert summary[-1].mean_error < summary[0].mean_error
    assert pyflycom.rows_to_csv(cfg, 1) == pyflycom.rows_to_csv(cfg, 4)

    paired = pyflycom.compare_selection(small_config("flycom+selection"))
    assert len(paired) == 4 and all(0.0 <= p.p_less <= 1.0 for p in paired)

    x, sv, truth = pyflycom.synth_unfolding(10, 40, 2, 1.0, 3)
    assert len(x) == 10 and len(x[0]) == 40 and sv[:2] == [1.0, 1.0]
    basis, eig = pyflycom.detect_subspace(x, 2)
    err = pyflycom.dtd_error(basis, x)
    residual = sum(s * s for s in sv[2:])
    assert math.isclose(err, residual, rel_tol=1e-9)
    sketch, res = pyflycom.decompose_error(basis, 10, 40, 2, 1.0, 3)
    assert abs(sketch) < 1e-9 and math.isclose(res, residual)

    threshold, objective, m_tilde, fallback = pyflycom.optimize_threshold([0.5, 0.1, 2.0, 0.3], 2, 1, 0.1, 5.0)
    assert threshold in (0.5, 0.1, 2.0, 0.3) and m_tilde >= 2 and not fallback

    table = pyflycom.cost_table(100, 4, [1000], [30])
    assert "memory,30,1,30," in table

    try:
        pyflycom.ExperimentConfig.from_toml("bogus = 1")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown keys must be rejected")
    print("pyflycom smoke test passed")


if __name__ == "__main__":
    main()
