"""Pytest wiring: absl flags must be parsed before absltest.TestCase helpers run."""
from absl import flags


def pytest_configure(config):
    if not flags.FLAGS.is_parsed():
        flags.FLAGS.mark_as_parsed()
