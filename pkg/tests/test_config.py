from pathlib import Path

import pytest

from advise_wear.config import load_config, parse_config
from advise_wear.errors import ConfigError
from advise_wear.experiment import Arm, ExperimentConfig

ROOT = Path(__file__).resolve().parents[1]


def test_default_file_matches_library_defaults():
    cfg = load_config(ROOT / "configs" / "default.cfg")
    assert cfg == ExperimentConfig()


def test_empty_text_gives_defaults():
    assert parse_config("") == ExperimentConfig()


def test_overrides():
    cfg = parse_config(
        """
[experiment]
arm = fixed-low
episodes = 12
seeds = 3, 4
trainers = rgbd

[rl]
tau = 0.5
q_init = 0

[trainer.rgbd]
accuracy = 0.8
feedback_prob = 0.5

[activities]
hard = 1, 2
hard_low = 0.2
"""
    )
    assert cfg.arm is Arm.FIXED_LOW
    assert (cfg.episodes, cfg.seeds) == (12, (3, 4))
    assert cfg.rl.tau == 0.5 and cfg.rl.q_init == 0.0
    assert [(t.name, t.accuracy, t.feedback_prob) for t in cfg.trainers] == [("rgbd", 0.8, 0.5)]
    assert cfg.activities.hard == (1, 2)
    low, _ = cfg.activities.accuracies()
    assert low[1] == 0.2 and low[5] == 0.9


def test_zero_trainers():
    assert parse_config("[experiment]\ntrainers =\n").trainers == []


def test_trace_relative_to_config(tmp_path):
    (tmp_path / "t.txt").write_text("\n".join(["3"] * 240))
    (tmp_path / "c.cfg").write_text("[activities]\ntrace = t.txt\n")
    assert load_config(tmp_path / "c.cfg").activities.trace == (3,) * 240


@pytest.mark.parametrize(
    "text, field",
    [
        ("[rl]\ntau = -1\n", "rl"),
        ("[rl]\ngamma = abc\n", "rl.gamma"),
        ("[rl]\nbogus = 1\n", "rl.bogus"),
        ("[nope]\nx = 1\n", "nope"),
        ("[experiment]\narm = greedy\n", "experiment.arm"),
        ("[experiment]\nepisodes = 0\n", "experiment.episodes"),
        ("[experiment]\ntrainers = ghost\n", "experiment.trainers"),
        ("[trainer.x]\naccuracy = 2\n", "trainer.x"),
        ("[power]\ncost_low = 1\ncost_high = 0.5\n", "power"),
        ("[activities]\ntrace = /does/not/exist\n", "activities.trace"),
        ("[activities]\nlow_accuracy = 0.5, 0.5\n", "activities.low_accuracy"),
        ("[activities]\nstay_prob = 2\n", "activities.stay_prob"),
        ("not an ini file", "<file>"),
    ],
)
def test_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
