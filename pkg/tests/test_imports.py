import importlib

import pytest

MODULES = [
    "core.errors",
    "core.seeds",
    "core.reporting",
    "core.cli",
    "ops.config",
    "ops.run_config",
    "ops.logger",
    "channel.estimation",
    "channel.distribution",
    "channel.traces",
    "phy.power_map",
    "queueing.buffer",
    "queueing.simulate",
    "queueing.steady_state",
    "mdp.value_iteration",
    "mdp.solver",
    "mdp.enumeration",
    "mdp.baselines",
    "lyrrc.policy",
    "lyrrc.bounds",
    "multiuser.zero_forcing",
    "multiuser.decouple",
]


@pytest.mark.parametrize("name", MODULES)
def test_module_imports(name):
    assert importlib.import_module(name) is not None


def test_launcher_imports_cli_main():
    launcher = importlib.import_module("mmlat")
    assert callable(launcher.main)
