import numpy as np
import pytest
from sklearn.base import clone

from pfreal.estimator import NotFittedError, RealSolutionCounter


def test_fit_predict_c3():
    est = RealSolutionCounter("cycle:3", seed=0)
    B = np.vstack([np.ones(3), np.random.default_rng(1).standard_normal((5, 3))])
    pred = est.fit(B).predict(B)
    assert pred[0] == 2 and set(pred) <= {0, 2}
    assert est.n_features_in_ == 3 and est.start_set_.complete
    out = est.transform(B)
    assert out.shape == (6, 3) and np.all(out[:, 1] == 1.0)


def test_params_and_clone():
    est = RealSolutionCounter("complete:4", seed=3, bipartite=False)
    assert est.get_params() == {"topology": "complete:4", "seed": 3, "bipartite": False,
                                "real_tol": 1e-8}
    assert clone(est).get_params() == est.get_params()


def test_not_fitted_and_shape():
    est = RealSolutionCounter("cycle:3")
    with pytest.raises(NotFittedError):
        est.predict(np.ones((1, 3)))
    est.fit()
    with pytest.raises(ValueError):
        est.predict(np.ones((1, 4)))
    with pytest.raises(ValueError):
        est.predict(np.zeros((1, 3)))


def test_degenerate_rows_marked(starts):
    est = RealSolutionCounter.from_start_set(starts("cycle", 4))
    pred = est.predict(np.vstack([np.ones(4), [0.3, -0.5, 0.7, 0.2]]))
    assert pred[0] == -1 and pred[1] in (0, 4)


def test_reproducible(starts):
    est = RealSolutionCounter.from_start_set(starts("complete", 4), seed=9)
    B = np.random.default_rng(2).standard_normal((4, 6))
    assert np.array_equal(est.transform(B), est.transform(B))
