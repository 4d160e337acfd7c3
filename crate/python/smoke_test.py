"""Smoke test for the cfolab extension module.

Run after `pip install --no-build-isolation ./crates/py`.
"""

import cmath

import cfolab


def main():
    cfg = cfolab.SystemConfig.reference([3, 7, 14])
    assert cfg.q == 16 and cfg.n_t == 3

    ts = cfolab.TrainingSet.cbts(cfg)
    assert ts.kind == "cbts"
    assert len(ts.freq_pilots) == 3 and len(ts.freq_pilots[0]) == 64

    chan = cfolab.draw_channel(cfg, seed=7)
    eps = 2.3
    frame = cfolab.transmit_receive(ts, chan, eps, 0.0, cfg)
    model = cfolab.model_receive(ts, chan, eps, cfg)
    worst = max(abs(a - b) for ya, yb in zip(frame.y, model.y) for a, b in zip(ya, yb))
    assert worst < 1e-9, worst

    est = cfolab.estimate_simplified(frame, cfg, 7)
    assert abs(est["epsilon_hat"] - eps) < 1e-2, est["epsilon_hat"]
    assert len(est["candidates"]) == 16
    assert isinstance(est["kappa"], complex)
    assert abs(cmath.phase(est["kappa"]) / (2 * cmath.pi) % 1 - 0.3) < 1e-2

    noisy = cfolab.transmit_receive(ts, chan, eps, frame.signal_power / 100, cfg, seed=1)
    ml = cfolab.estimate_ml_grid(noisy, cfg)
    assert abs(ml["epsilon_hat"] - eps) < 0.05

    gamma = cfolab.gamma_from_snr_db(10.0, cfg)
    optimal, degenerate, listing = cfolab.optimal_iota(gamma, cfg)
    assert optimal == [7, 9] and degenerate == [] and len(listing) == 15
    assert abs(cfolab.mse_formula(gamma, 7, cfg) - dict(listing)[7]) == 0.0

    bound = cfolab.emcb(cfg, [15.0], n_draws=20, seed=42)
    assert 0 < bound[0] < cfolab.mse_formula(cfolab.gamma_from_snr_db(15.0, cfg), 7, cfg)

    spec = '{"preset": "paper-fig3", "trials": 20, "snr_points_db": [10], "emcb_draws": 0}'
    text = cfolab.run_experiment("mse-vs-snr", spec_json=spec)
    lines = text.strip().splitlines()
    assert lines[0] == cfolab.CSV_HEADER
    assert len(lines) == 4, lines

    try:
        cfolab.SystemConfig(1000, 64, 3, 2, 80, 75, [3, 7, 14])
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print("cfolab smoke test passed")


if __name__ == "__main__":
    main()
