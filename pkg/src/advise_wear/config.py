"""Plain-text experiment configuration (``key = value`` under dotted sections).

Every key is optional; anything left out keeps its library default. See
``configs/default.cfg`` for the full list.
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .environment import EpisodeConfig, PowerModel, load_trace
from .errors import ConfigError, InvalidInputError
from .experiment import ActivitySpec, Arm, ExperimentConfig
from .rl import RlHyperParams
from .trainers import TrainerModel, default_trainers

KNOWN_KEYS: Dict[str, Tuple[str, ...]] = {
    "experiment": ("arm", "episodes", "seeds", "smoothing_window", "workers", "trainers"),
    "rl": ("gamma", "alpha_q", "tau", "q_init"),
    "power": ("cost_low", "cost_high", "p_tgt"),
    "episode": ("length_min", "step_seconds", "lambda", "power_cap"),
    "activities": (
        "count", "stay_prob", "hard", "easy_low", "easy_high", "hard_low", "hard_high",
        "low_accuracy", "high_accuracy", "trace",
    ),
    "consistency": ("alpha0", "em_max_iters", "em_tol"),
}
TRAINER_KEYS = ("accuracy", "feedback_prob")
TRAINER_PREFIX = "trainer."


def _num(kind: Callable, field: str, raw: str):
    try:
        value = kind(raw.strip())
    except ValueError:
        raise ConfigError(field, f"expected {kind.__name__}, got {raw!r}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(field, "must be finite")
    return value


def _list(kind: Callable, field: str, raw: str) -> List:
    parts = [p for p in (x.strip() for x in raw.replace("\n", ",").split(",")) if p]
    return [_num(kind, field, p) for p in parts]


class _Section:
    """Typed getters that report failures with the dotted field path."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.data = parser[name] if parser.has_section(name) else {}

    def path(self, key: str) -> str:
        return f"{self.name}.{key}"

    def get(self, key: str, kind: Callable, default):
        if key not in self.data:
            return default
        return _num(kind, self.path(key), self.data[key])

    def get_list(self, key: str, kind: Callable, default):
        if key not in self.data:
            return default
        return _list(kind, self.path(key), self.data[key])

    def raw(self, key: str) -> Optional[str]:
        return self.data.get(key)


def _build(path: str, factory: Callable, **kwargs):
    """Construct a nested value, turning validation errors into ConfigError."""
    try:
        return factory(**kwargs)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse configuration text; relative trace paths resolve against ``base_dir``."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    for section in parser.sections():
        if section.startswith(TRAINER_PREFIX):
            allowed = TRAINER_KEYS
        elif section in KNOWN_KEYS:
            allowed = KNOWN_KEYS[section]
        else:
            raise ConfigError(section, "unknown section")
        for key in parser[section]:
            if key not in allowed:
                raise ConfigError(f"{section}.{key}", "unknown key")

    defaults = ExperimentConfig()
    ex = _Section(parser, "experiment")
    arm = defaults.arm
    if ex.raw("arm") is not None:
        try:
            arm = Arm.parse(ex.raw("arm").strip())
        except InvalidInputError as exc:
            raise ConfigError("experiment.arm", str(exc)) from None

    rl = _Section(parser, "rl")
    q_init = rl.raw("q_init")
    q_init_value = None
    if q_init is not None and q_init.strip().lower() not in ("", "auto"):
        q_init_value = _num(float, "rl.q_init", q_init)
    hp = _build(
        "rl", RlHyperParams,
        gamma=rl.get("gamma", float, defaults.rl.gamma),
        alpha_q=rl.get("alpha_q", float, defaults.rl.alpha_q),
        tau=rl.get("tau", float, defaults.rl.tau),
        q_init=q_init_value,
    )

    pw = _Section(parser, "power")
    power = _build(
        "power", PowerModel,
        cost_low=pw.get("cost_low", float, defaults.power.cost_low),
        cost_high=pw.get("cost_high", float, defaults.power.cost_high),
        p_tgt=pw.get("p_tgt", float, defaults.power.p_tgt),
    )

    ep = _Section(parser, "episode")
    episode = _build(
        "episode", EpisodeConfig,
        episode_length_min=ep.get("length_min", int, defaults.episode.episode_length_min),
        step_seconds=ep.get("step_seconds", int, defaults.episode.step_seconds),
        lam=ep.get("lambda", float, defaults.episode.lam),
        power_cap=ep.get("power_cap", int, defaults.episode.power_cap),
    )

    act = _Section(parser, "activities")
    a0 = defaults.activities
    low = act.get_list("low_accuracy", float, None)
    high = act.get_list("high_accuracy", float, None)
    trace = None
    if act.raw("trace"):
        trace_path = Path(act.raw("trace").strip())
        if base_dir is not None and not trace_path.is_absolute():
            trace_path = base_dir / trace_path
        try:
            trace = tuple(load_trace(trace_path))
        except OSError as exc:
            raise ConfigError("activities.trace", f"{trace_path}: {exc.strerror}") from None
        except InvalidInputError as exc:
            raise ConfigError("activities.trace", str(exc)) from None
    activities = ActivitySpec(
        num_activities=act.get("count", int, a0.num_activities),
        stay_prob=act.get("stay_prob", float, a0.stay_prob),
        hard=tuple(act.get_list("hard", int, list(a0.hard))),
        easy_low=act.get("easy_low", float, a0.easy_low),
        easy_high=act.get("easy_high", float, a0.easy_high),
        hard_low=act.get("hard_low", float, a0.hard_low),
        hard_high=act.get("hard_high", float, a0.hard_high),
        low_accuracy=tuple(low) if low is not None else None,
        high_accuracy=tuple(high) if high is not None else None,
        trace=trace,
    )
    if not (0.0 <= activities.stay_prob <= 1.0):
        raise ConfigError("activities.stay_prob", "must be in [0, 1]")

    trainers = _trainers(parser, ex)

    cons = _Section(parser, "consistency")
    cfg = ExperimentConfig(
        arm=arm,
        episodes=ex.get("episodes", int, defaults.episodes),
        seeds=tuple(ex.get_list("seeds", int, list(defaults.seeds))),
        rl=hp,
        power=power,
        episode=episode,
        activities=activities,
        trainers=trainers,
        alpha0=cons.get("alpha0", float, defaults.alpha0),
        em_max_iters=cons.get("em_max_iters", int, defaults.em_max_iters),
        em_tol=cons.get("em_tol", float, defaults.em_tol),
        smoothing_window=ex.get("smoothing_window", int, defaults.smoothing_window),
        workers=ex.get("workers", int, defaults.workers),
    )
    return cfg.validate()


def _trainers(parser: configparser.ConfigParser, ex: _Section) -> List[TrainerModel]:
    sections = {
        s[len(TRAINER_PREFIX):]: s for s in parser.sections() if s.startswith(TRAINER_PREFIX)
    }
    listed = ex.raw("trainers")
    if listed is None:
        if not sections:
            return default_trainers()
        names = list(sections)
    else:
        names = [n for n in (x.strip() for x in listed.split(",")) if n]
    out = []
    defaults = {t.name: t for t in default_trainers()}
    for name in names:
        if name not in sections and name not in defaults:
            raise ConfigError("experiment.trainers", f"no [trainer.{name}] section")
        base = defaults.get(name, TrainerModel(name, 0.5))
        sec = _Section(parser, sections.get(name, TRAINER_PREFIX + name))
        out.append(
            _build(
                f"trainer.{name}", TrainerModel,
                name=name,
                accuracy=sec.get("accuracy", float, base.accuracy),
                feedback_prob=sec.get("feedback_prob", float, base.feedback_prob),
            )
        )
    return out


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"{path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
