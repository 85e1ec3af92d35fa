"""
Root-level conftest.py that imports fixtures from tests/conftest.py
so they are available to every package's tests.
"""
from tests.conftest import (
    SynthConfigFactory, ScoreRecordFactory,
    make_matrix, to_jsonl,
    protocol, run_config,
    synth_matrix, test_view, train_view, tiny_matrix,
    write_jsonl, synth_jsonl,
)

__all__ = [
    'SynthConfigFactory', 'ScoreRecordFactory',
    'make_matrix', 'to_jsonl',
    'protocol', 'run_config',
    'synth_matrix', 'test_view', 'train_view', 'tiny_matrix',
    'write_jsonl', 'synth_jsonl',
]
