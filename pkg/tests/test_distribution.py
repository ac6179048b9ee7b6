import json
import math

import numpy as np
import pytest

from pfreal.distribution import (
    DistributionAborted, EmpiricalDistribution, Trial, dkw_epsilon, expected_value, read_log,
    run_distribution, run_trial, sample_sphere, trial_rng,
)


def test_dkw_values():
    assert dkw_epsilon(20000, 0.01) == pytest.approx(0.011509, abs=1e-6)
    assert dkw_epsilon(1, 2 / math.e ** 2) == pytest.approx(1.0, abs=1e-15)
    assert dkw_epsilon(1_400_000, 0.01) == pytest.approx(0.0013755, abs=1e-7)
    for bad in ((0, 0.01), (10, 0.0), (10, 1.0)):
        with pytest.raises(ValueError):
            dkw_epsilon(*bad)


def test_sphere_sampling(rng):
    assert abs(sample_sphere(1, rng)[0]) == 1.0
    V = np.array([sample_sphere(3, rng) for _ in range(10000)])
    assert np.allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-12)
    sigma = 1 / math.sqrt(3 * 10000)
    assert np.all(np.abs(V.mean(axis=0)) < 3 * sigma)
    with pytest.raises(ValueError):
        sample_sphere(0, rng)


def test_trial_rng_independent_of_order():
    a = [trial_rng(5, i).standard_normal() for i in range(4)]
    b = [trial_rng(5, i).standard_normal() for i in reversed(range(4))][::-1]
    assert a == b and len(set(a)) == 4


def test_empirical_distribution():
    d = EmpiricalDistribution.from_counts([4] * 10)
    assert expected_value(d) == 4.0 and d.probability(0) == 0.0
    d = EmpiricalDistribution.from_counts([0, 0, 2, 4], excluded=1)
    assert d.total == 5 and d.included == 4
    assert sum(d.frequencies.values()) == pytest.approx(1.0, abs=1e-12)
    assert d.mean == 1.5 and d.epsilon == dkw_epsilon(4)
    assert d.to_csv().splitlines() == ["count,occurrences,percentage", "0,2,50.0000",
                                       "2,1,25.0000", "4,1,25.0000"]
    s = d.summary()
    assert s["excluded"] == 1 and s["max_observed"] == 4
    with pytest.raises(ValueError):
        expected_value(EmpiricalDistribution.from_counts([], excluded=2))


def test_trial_json_roundtrip(starts):
    st = starts("cycle", 3)
    t = run_trial(st.network, st, 3, 7)
    assert Trial.from_json(t.to_json()) == t
    assert t.count in (0, 2) and t.included


def test_workers_do_not_change_histogram(starts):
    st = starts("cycle", 4)
    one = run_distribution(st.network, st, 300, 11, workers=1, chunk=50)
    two = run_distribution(st.network, st, 300, 11, workers=2, chunk=50)
    assert one.histogram == two.histogram and one.excluded == two.excluded
    assert one.support <= {0, 4}


def test_resume_equals_uninterrupted(starts, tmp_path):
    st = starts("cycle", 3)
    full = run_distribution(st.network, st, 200, 4, log_path=tmp_path / "a.jsonl")
    log = tmp_path / "b.jsonl"
    run_distribution(st.network, st, 200, 4, log_path=log, stop_after=70, chunk=30)
    assert len(read_log(log)) == 70
    with open(log, "a") as fh:
        fh.write('{"index": 199, "se')  # torn write
    resumed = run_distribution(st.network, st, 200, 4, log_path=log, resume=True)
    assert resumed.histogram == full.histogram and resumed.total == 200
    rows = [json.loads(x) for x in open(tmp_path / "a.jsonl")]
    assert sorted(r["index"] for r in rows) == list(range(200))


def test_abort_on_failures(starts, monkeypatch):
    import pfreal.distribution as dist_mod
    st = starts("cycle", 3)
    real = dist_mod.run_trial

    def flaky(net, start, base, i):
        t = real(net, start, base, i)
        return Trial(t.index, t.seed, t.b, t.count, 0.5, False, t.wall_time)

    monkeypatch.setattr(dist_mod, "run_trial", flaky)
    with pytest.raises(DistributionAborted):
        run_distribution(st.network, st, 120, 0)


def test_incomplete_start_rejected(starts):
    from pfreal.solver import StartSet
    st = starts("cycle", 3)
    bad = StartSet.from_dict({**st.to_dict(), "complete": False})
    with pytest.raises(ValueError):
        run_distribution(st.network, bad, 10, 0)
