"""Smoke test for the rf_taxis extension module.

Build and run from the repository root:

    cargo build --release -p rf-taxis-py --features extension-module
    cp target/release/librf_taxis_py.so python/rf_taxis.so
    python3 python/smoke_test.py
"""

import math
import pathlib

import rf_taxis

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    f = rf_taxis.FieldModel(3.0, [0.0, 0.0])
    assert abs(f.eval([10.0, 0.0]) + 30.0) < 1e-12
    g = f.analytic_gradient([10.0, 0.0])
    assert abs(g[0] + 30.0 / (math.log(10) * 10.0)) < 1e-12 and g[1] == 0.0
    try:
        f.eval([0.1, 0.0])
    except ValueError:
        pass
    else:
        raise AssertionError("evaluation inside the floor must fail")

    faded = rf_taxis.FieldModel(3.0, [0.0, 0.0], fading_amplitude_db=6.0, fading_seed=4)
    assert faded.eval([10.0, 0.0]) != faded.eval_smooth([10.0, 0.0])

    v = rf_taxis.check_schedule(1.0, 1.0 / 6.0)
    assert v["valid"] and v["asymptotically_normal"]
    assert abs(v["predicted_rate_exponent"] + 1.0 / 3.0) < 1e-12
    assert not rf_taxis.check_schedule(1.0, 0.5)["beta_positive"]
    a0, h0 = rf_taxis.gains(0, A=0.0)
    assert a0 == 1.0 and h0 == 1.0

    assert rf_taxis.predicted_variance(2.0, 0.5) == 8.0
    full, small, biased = rf_taxis.snr(-1.30288, 2.0, 1.0)
    assert abs(small + 0.65144) < 1e-9 and not biased

    s = rf_taxis.Scenario.load(str(ROOT / "scenarios" / "seek_free_space.toml"))
    rec = s.run(0)
    assert len(rec["rows"]) == 501
    assert rec["rows"][-1]["dist"] < rec["rows"][0]["dist"]
    csv = s.trajectory_csv(0)
    assert csv.splitlines()[0] == "k,ak,hk,x1,x2,gx1,gx2,dist"
    summary = s.ensemble(16, workers=4)
    assert summary == s.ensemble(16, workers=1)
    for key in ("rate_exponent", "rate_stderr", "success_fraction", "curve"):
        assert key in summary
    print("rf_taxis smoke test ok: median final distance %.3f m over %d runs"
          % (summary["median_final_distance"], summary["n_runs"]))


if __name__ == "__main__":
    main()
