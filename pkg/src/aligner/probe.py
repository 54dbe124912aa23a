from typing import Dict, Optional

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import accuracy_score
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler

from src.constants import TEST, TRAIN, UNLABELED
from src.entity.graph import MultimodalGraph
from src.exception import ProbeError
from src.logger import log

PROBE_SOURCES = ("txt", "img", "concat", "fused")


def linear_probe(features: np.ndarray, labels: np.ndarray, splits: np.ndarray, seed: int = 0) -> float:
    """
    Multinomial logistic regression on standardized features, fit on labeled train rows and scored on
    labeled test rows.

    :return: test accuracy in [0, 1].
    """
    labels = np.asarray(labels)
    splits = np.asarray(splits)
    if features.shape[0] != len(labels) or len(labels) != len(splits):
        raise ProbeError(f"{features.shape[0]} feature rows, {len(labels)} labels, {len(splits)} splits")
    train = (splits == TRAIN) & (labels != UNLABELED)
    test = (splits == TEST) & (labels != UNLABELED)
    if not train.any() or not test.any():
        raise ProbeError("linear probe needs labeled train and test rows")
    if len(np.unique(labels[train])) < 2:
        raise ProbeError("linear probe needs at least two classes in the train rows")

    model = Pipeline([
        ("scaler", StandardScaler()),
        ("classifier", LogisticRegression(max_iter=2000, random_state=seed)),
    ])
    model.fit(features[train], labels[train])
    return float(accuracy_score(labels[test], model.predict(features[test])))


def probe_feature_sources(g: MultimodalGraph, pooled: Optional[np.ndarray]) -> Dict[str, np.ndarray]:
    """Raw text tokens mean-pooled, raw image patches mean-pooled, their concatenation, and the fused embedding."""
    sources: Dict[str, np.ndarray] = {}
    if g.n_t:
        sources["txt"] = g.txt_features.mean(axis=1)
    if g.n_v:
        sources["img"] = g.img_features.mean(axis=1)
    sources["concat"] = np.concatenate([sources[k] for k in ("txt", "img") if k in sources], axis=1)
    if pooled is not None:
        sources["fused"] = pooled
    return sources


def probe_all(g: MultimodalGraph, pooled: Optional[np.ndarray], seed: int = 0) -> Dict[str, float]:
    scores = {name: linear_probe(x, g.labels, g.splits, seed=seed) for name, x in probe_feature_sources(g, pooled).items()}
    log.info(f"Linear probe on {g.name!r}: " + ", ".join(f"{k}={v:.4f}" for k, v in scores.items()))
    return scores
