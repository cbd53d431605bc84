"""Shared fixtures.

The thread caps below must run before numpy is first imported anywhere in
the test process, so the runtime-budget tests measure one core honestly.
"""

import os

for _var in (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_var, "1")

import pytest

# Filled by tests/test_acceptance.py; echoed after the run so the verdict
# lines survive pytest's output capture.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance checks")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_corpora():
    """Eight synthetic dialogues per domain, fixed seeds."""
    from shoptalk.corpus import Domain, synth_corpus

    return {
        Domain.FURNITURE: synth_corpus(seed=11, n_dialogues=8, domain=Domain.FURNITURE),
        Domain.FASHION: synth_corpus(seed=12, n_dialogues=8, domain=Domain.FASHION),
    }


@pytest.fixture(scope="session")
def full_config(small_corpora):
    """Serializer config with every feature on and the corpus intent vocab."""
    from shoptalk.corpus import corpus_intents
    from shoptalk.serializer import SerializerConfig

    dialogues = [d for ds in small_corpora.values() for d in ds]
    return SerializerConfig(intent_vocab=corpus_intents(dialogues))
