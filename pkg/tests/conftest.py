import numpy as np
import pytest

from collapse_lab.engine import multiway_collapse


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def make_biased_resolver(bias: float = 0.2):
    """Order-dependent mutant engine: skews the second reduction.

    The party measured second is the minor axis of the branch enumeration;
    this variant inflates the weight of that party's '+' branches before
    running the honest contests, so the joint distribution it produces
    depends on which measurement the foliation schedules first.
    """

    def resolver(branches, stream, params):
        labels = [label for label, _ in branches]
        minor_is_b = labels[:2] == [0, 1]  # oa-major enumeration means B resolves second
        reweighted = []
        for label, w in branches:
            oa, ob = divmod(label, 2)
            minor_outcome = ob if minor_is_b else oa
            reweighted.append(w + (bias if minor_outcome == 0 else -bias))
        ws = np.clip(reweighted, 0.0, None)
        ws = ws / ws.sum()
        return multiway_collapse(
            [(label, float(w)) for label, w in zip(labels, ws)], stream, params
        )

    return resolver


@pytest.fixture
def biased_resolver():
    return make_biased_resolver(0.2)
