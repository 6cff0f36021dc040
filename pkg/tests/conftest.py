import numpy as np
import pytest

from logqc.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A 120-scan corpus reused by store/harness tests."""
    root = tmp_path_factory.mktemp("small_corpus") / "corpus"
    config = SynthConfig(
        n_scans=120,
        pass_rate=0.7,
        seed=101,
        n_signal_features={"flagqc": 6, "mriqc_functional": 4, "mriqc_structural": 4},
        missing_step_rate=0.15,
    )
    paths = generate(config, root)
    return paths


def brute_force_auc(scores, labels) -> float:
    """Independent pairwise-concordance AUC: ties count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (pos.size * neg.size)
